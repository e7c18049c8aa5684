// SPDX-License-Identifier: Apache-2.0
#include "metarl/templates.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "metarl/errors.hpp"
#include "metarl/verify.hpp"

namespace metarl {
namespace {

// NOTE: these must stay byte-identical to core/templates/*.txt; a unit test
// compares them.

const std::string kDirect = R"TPL(Solve the following math problem step by step. The last line of your response should be of the form Answer: $Answer (without quotes) where $Answer is the answer to the problem.

{problem}

Remember to put your answer on its own line after "Answer:"
)TPL";

const std::string kDecomposition = R"TPL(Solve the following math problem step by step. The last line of your response should be of the form Answer: $Answer (without quotes) where $Answer is the answer to the problem.

Let's attempt a subproblem decomposition approach:

1. Split the original problem into smaller, logically related subproblems that will assist you in solving the original problem-quantity depends on the problem's logic and your expertise.

2. Address each subproblem individually, analyzing the reasoning behind your solutions.

3. Combine the subproblem solutions to tackle the original, more complex problem.

Example problem: {demo}

Problem:
{problem}

Remember to put your answer on its own line after "Answer:"
)TPL";

const std::string kReflection = R"TPL(Solve the following math problem step by step. The last line of your response should be of the form Answer: $Answer (without quotes) where $Answer is the answer to the problem.

Let's attempt a subproblem decomposition approach:

1. Analyze the problem. Read the problem carefully and clarify the known conditions and final requirements.

2. Identify the error. Locate the error type in the existing solution (concept error, calculation error, logical loophole).

3. Correct step by step. Correct the error step by step, retain the reasonable part of the original solution and correct the error point one by one.

4. Verify the answer. Use multiple methods to verify the correctness of the final answer.

Problem:
{problem}

The existing wrong solution:

{prior}

Remember to put your answer on its own line after "Answer:"
)TPL";

void replace_all(std::string& text, std::string_view placeholder, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
}

std::string_view trim_view(std::string_view s) {
    while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.front())) != 0)) s.remove_prefix(1);
    while (!s.empty() && (std::isspace(static_cast<unsigned char>(s.back())) != 0)) s.remove_suffix(1);
    return s;
}

// Matches "Subproblem <n>:" (case-insensitive keyword) at the start of a
// trimmed line. On success sets `rest` to the text after the colon.
bool match_step_marker(std::string_view line, std::string_view& rest) {
    std::string_view s = line;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    constexpr std::string_view kWord = "subproblem";
    if (s.size() < kWord.size()) return false;
    for (std::size_t i = 0; i < kWord.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != kWord[i]) return false;
    }
    s.remove_prefix(kWord.size());
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    std::size_t digits = 0;
    while (digits < s.size() && s[digits] >= '0' && s[digits] <= '9') ++digits;
    if (digits == 0) return false;
    s.remove_prefix(digits);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    if (s.empty() || s.front() != ':') return false;
    rest = s.substr(1);
    return true;
}

bool is_answer_section(std::string_view line) {
    std::string_view s = line;
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s.substr(0, 7) == "Answer:" || s.substr(0, 14) == "Final Solution";
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    return lines;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("template file not found: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TemplateSet TemplateSet::builtin() {
    TemplateSet ts;
    ts.texts_ = {kDirect, kDecomposition, kReflection};
    return ts;
}

TemplateSet TemplateSet::from_directory(const std::filesystem::path& dir) {
    TemplateSet ts;
    ts.texts_ = {read_file(dir / "direct.txt"),
                 read_file(dir / "decomposition.txt"),
                 read_file(dir / "reflection.txt")};
    return ts;
}

const std::string& TemplateSet::text(TemplateKind kind) const {
    return texts_[static_cast<std::size_t>(kind)];
}

RenderedPrompt TemplateSet::render(TemplateKind kind, const std::string& problem,
                                   const MetacogEntry* demo,
                                   const StructuredSolution* prior) const {
    RenderedPrompt prompt;
    prompt.kind = kind;
    prompt.problem = problem;
    std::string out = text(kind);
    if (kind == TemplateKind::Decomposition) {
        if (demo == nullptr) {
            throw std::invalid_argument("render: decomposition prompt requires a demonstration");
        }
        replace_all(out, "{demo}", format_demo(*demo));
        prompt.demo = *demo;
    }
    if (kind == TemplateKind::Reflection) {
        if (prior == nullptr) {
            throw std::invalid_argument("render: reflection prompt requires the prior attempt");
        }
        replace_all(out, "{prior}", serialize_solution(*prior));
        prompt.prior_attempt = *prior;
    }
    replace_all(out, "{problem}", problem);
    prompt.text = std::move(out);
    return prompt;
}

StructuredSolution parse_structured(const std::string& completion_text) {
    StructuredSolution sol;
    sol.raw = completion_text;
    sol.final_answer = verify::extract_answer(completion_text).value_or("");

    const auto lines = split_lines(completion_text);
    bool in_step = false;
    std::string answer_acc;
    for (const auto& line : lines) {
        std::string_view rest;
        if (match_step_marker(line, rest)) {
            if (in_step) {
                sol.steps.back().subanswer = std::string(trim_view(answer_acc));
            }
            sol.steps.push_back(SolutionStep{std::string(trim_view(rest)), ""});
            answer_acc.clear();
            in_step = true;
            continue;
        }
        if (is_answer_section(line)) {
            if (in_step) {
                sol.steps.back().subanswer = std::string(trim_view(answer_acc));
                answer_acc.clear();
                in_step = false;
            }
            continue;
        }
        if (in_step) {
            answer_acc.append(line);
            answer_acc.push_back('\n');
        }
    }
    if (in_step) sol.steps.back().subanswer = std::string(trim_view(answer_acc));
    return sol;
}

std::string serialize_solution(const StructuredSolution& s) {
    std::string out;
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
        out += "Subproblem " + std::to_string(i + 1) + ": " + s.steps[i].subquestion + "\n";
        if (!s.steps[i].subanswer.empty()) out += s.steps[i].subanswer + "\n";
        out += "\n";
    }
    out += "Answer: " + s.final_answer;
    return out;
}

std::string format_demo(const MetacogEntry& entry) {
    std::string out = entry.problem + "\n\nSolution:\n\n";
    for (std::size_t i = 0; i < entry.steps.size(); ++i) {
        out += "Subproblem " + std::to_string(i + 1) + ": " + entry.steps[i].subquestion + "\n";
        if (!entry.steps[i].subanswer.empty()) out += entry.steps[i].subanswer + "\n";
        out += "\n";
    }
    out += "Final Solution:\n\nAnswer: " + entry.final_answer;
    return out;
}

const MetacogEntry& seed_demonstration() {
    static const MetacogEntry kSeed = [] {
        MetacogEntry e;
        e.problem = R"(Solve the equation $\frac{3(x-2)}{4} - \frac{2x+5}{3} = \frac{1}{6}$.)";
        e.steps = {
            SolutionStep{
                "Eliminate denominators by multiplying all terms by the least common multiple (LCM) of 4, 3, and 6, which is 12:",
                R"($12 \cdot \frac{3(x-2)}{4} - 12 \cdot \frac{2x+5}{3} = 12 \cdot \frac{1}{6}$. Simplifies to: $9(x-2) - 4(2x+5) = 2$.)"},
            SolutionStep{"Expand and simplify:",
                         R"($9x - 18 - 8x - 20 = 2$. Combine like terms: $x - 38 = 2$)"},
            SolutionStep{"Isolate the variable:", R"($x = 2 + 38, x = 40$.)"},
        };
        e.final_answer = "40";
        e.seq = 0;
        return e;
    }();
    return kSeed;
}

SftPair rewrite_to_direct(const TemplateSet& templates, const std::string& problem,
                          const CompletionSample& sample, const StructuredSolution& solution) {
    if (sample.reward != 1) {
        throw std::invalid_argument("rewrite_to_direct: sample must be verified correct");
    }
    if (sample.stage == StageTag::DirectRollout) {
        throw std::invalid_argument("rewrite_to_direct: direct samples are not rewritten");
    }
    return SftPair{templates.render(TemplateKind::Direct, problem).text,
                   serialize_solution(solution)};
}

}  // namespace metarl
