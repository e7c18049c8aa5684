// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "metarl/errors.hpp"
#include "metarl/rng.hpp"
#include "metarl/templates.hpp"
#include "metarl/types.hpp"

using namespace metarl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path source_template_dir() {
    // Baked in by the build so the test runs from any working directory.
    return fs::path(METARL_SOURCE_TEMPLATE_DIR);
}

MetacogEntry tiny_demo() {
    MetacogEntry e;
    e.problem = "What is 1+1?";
    e.steps = {{"add the ones", "1+1 = 2"}};
    e.final_answer = "2";
    return e;
}

}  // namespace

TEST_CASE("built-in templates are byte-identical to the shipped files") {
    const fs::path dir = source_template_dir();
    const TemplateSet ts = TemplateSet::builtin();
    CHECK(ts.text(TemplateKind::Direct) == slurp(dir / "direct.txt"));
    CHECK(ts.text(TemplateKind::Decomposition) == slurp(dir / "decomposition.txt"));
    CHECK(ts.text(TemplateKind::Reflection) == slurp(dir / "reflection.txt"));
}

TEST_CASE("from_directory loads the shipped files and equals builtin") {
    const TemplateSet from_files = TemplateSet::from_directory(source_template_dir());
    const TemplateSet builtin = TemplateSet::builtin();
    for (auto kind : {TemplateKind::Direct, TemplateKind::Decomposition, TemplateKind::Reflection}) {
        CHECK(from_files.text(kind) == builtin.text(kind));
    }
    CHECK_THROWS_AS(TemplateSet::from_directory("/nonexistent/template/dir"), ConfigError);
}

TEST_CASE("direct render substitutes the problem exactly once per placeholder") {
    const TemplateSet ts = TemplateSet::builtin();
    const std::string problem = "What is 2+2?";
    const RenderedPrompt p = ts.render(TemplateKind::Direct, problem);
    CHECK(p.kind == TemplateKind::Direct);
    CHECK(p.problem == problem);
    CHECK_FALSE(p.demo.has_value());
    CHECK_FALSE(p.prior_attempt.has_value());

    // independent substitution straight from the template file bytes
    std::string expected = slurp(source_template_dir() / "direct.txt");
    const auto pos = expected.find("{problem}");
    REQUIRE(pos != std::string::npos);
    expected.replace(pos, 9, problem);
    CHECK(expected.find("{problem}") == std::string::npos);
    CHECK(p.text == expected);
}

TEST_CASE("placeholder substitution replaces all occurrences, never recursively") {
    const fs::path dir = fs::temp_directory_path() / "metarl_tpl_test";
    fs::create_directories(dir);
    std::ofstream(dir / "direct.txt") << "A {problem} B {problem}\n";
    std::ofstream(dir / "decomposition.txt") << "D {demo} P {problem}\n";
    std::ofstream(dir / "reflection.txt") << "R {prior} P {problem}\n";
    const TemplateSet ts = TemplateSet::from_directory(dir);

    CHECK(ts.render(TemplateKind::Direct, "X").text == "A X B X\n");
    // a problem that contains the placeholder text must not re-expand
    CHECK(ts.render(TemplateKind::Direct, "{problem}").text == "A {problem} B {problem}\n");

    const MetacogEntry demo = tiny_demo();
    const std::string dec = ts.render(TemplateKind::Decomposition, "Y", &demo).text;
    CHECK(dec == "D " + format_demo(demo) + " P Y\n");

    StructuredSolution prior;
    prior.steps = {{"q", "a"}};
    prior.final_answer = "5";
    const std::string ref = ts.render(TemplateKind::Reflection, "Z", nullptr, &prior).text;
    CHECK(ref == "R " + serialize_solution(prior) + " P Z\n");
    fs::remove_all(dir);
}

TEST_CASE("decomposition and reflection renders require their extra inputs") {
    const TemplateSet ts = TemplateSet::builtin();
    CHECK_THROWS_AS(ts.render(TemplateKind::Decomposition, "p"), std::invalid_argument);
    CHECK_THROWS_AS(ts.render(TemplateKind::Reflection, "p"), std::invalid_argument);

    const MetacogEntry demo = tiny_demo();
    const RenderedPrompt dec = ts.render(TemplateKind::Decomposition, "p", &demo);
    REQUIRE(dec.demo.has_value());
    CHECK(dec.demo->problem == demo.problem);
    CHECK(dec.text.find(format_demo(demo)) != std::string::npos);
    CHECK(dec.text.find("{demo}") == std::string::npos);
    CHECK(dec.text.find("{problem}") == std::string::npos);

    StructuredSolution prior;
    prior.steps = {{"first try", "was wrong"}};
    prior.final_answer = "13";
    const RenderedPrompt ref = ts.render(TemplateKind::Reflection, "p", nullptr, &prior);
    REQUIRE(ref.prior_attempt.has_value());
    CHECK(ref.prior_attempt->final_answer == "13");
    CHECK(ref.text.find(serialize_solution(prior)) != std::string::npos);
    CHECK(ref.text.find("{prior}") == std::string::npos);
}

TEST_CASE("parse_structured handles the canonical layout") {
    const std::string text =
        "Subproblem 1: split the digits\n"
        "take 12 and 34\n"
        "concatenate them\n"
        "\n"
        "Subproblem 2: add the parts\n"
        "12 + 34 = 46\n"
        "\n"
        "Answer: 46\n";
    const StructuredSolution s = parse_structured(text);
    REQUIRE(s.steps.size() == 2);
    CHECK(s.steps[0].subquestion == "split the digits");
    CHECK(s.steps[0].subanswer == "take 12 and 34\nconcatenate them");
    CHECK(s.steps[1].subquestion == "add the parts");
    CHECK(s.steps[1].subanswer == "12 + 34 = 46");
    CHECK(s.final_answer == "46");
    CHECK(s.raw == text);
}

TEST_CASE("step markers tolerate case, indentation, and spacing") {
    const StructuredSolution s = parse_structured(
        "  SubProblem  12 :  spaced out question\nwork\nAnswer: 1");
    REQUIRE(s.steps.size() == 1);
    CHECK(s.steps[0].subquestion == "spaced out question");
    CHECK(s.steps[0].subanswer == "work");

    // no digits -> not a marker
    CHECK(parse_structured("Subproblem: x\nAnswer: 1").steps.empty());
    CHECK(parse_structured("Sub problem 1: x\nAnswer: 1").steps.empty());
    // glued number still counts
    CHECK(parse_structured("subproblem1: glued\nAnswer: 1").steps.size() == 1);
    // missing colon -> not a marker
    CHECK(parse_structured("Subproblem 1 x\nAnswer: 1").steps.empty());
}

TEST_CASE("answer section ends step accumulation; last answer line wins") {
    const std::string text =
        "Subproblem 1: q\n"
        "work\n"
        "Answer: 5\n"
        "stray text after the answer\n"
        "Answer: 7\n";
    const StructuredSolution s = parse_structured(text);
    REQUIRE(s.steps.size() == 1);
    CHECK(s.steps[0].subanswer == "work");  // stray text is not accumulated
    CHECK(s.final_answer == "7");

    const StructuredSolution f = parse_structured(
        "Subproblem 1: q\nwork\nFinal Solution:\n\nAnswer: 9");
    REQUIRE(f.steps.size() == 1);
    CHECK(f.steps[0].subanswer == "work");
    CHECK(f.final_answer == "9");
}

TEST_CASE("parse_structured never throws on unstructured text") {
    const StructuredSolution a = parse_structured("just rambling\nmore text");
    CHECK(a.steps.empty());
    CHECK(a.final_answer.empty());
    CHECK(a.raw == "just rambling\nmore text");

    const StructuredSolution b = parse_structured("blah\nAnswer: 42");
    CHECK(b.steps.empty());
    CHECK(b.final_answer == "42");

    const StructuredSolution c = parse_structured("");
    CHECK(c.steps.empty());
    CHECK(c.final_answer.empty());

    const StructuredSolution d = parse_structured("Subproblem 1: bare\nAnswer: 3");
    REQUIRE(d.steps.size() == 1);
    CHECK(d.steps[0].subanswer == "");
}

TEST_CASE("carriage returns are stripped from parsed lines") {
    const StructuredSolution s = parse_structured("Subproblem 1: q\r\nwork\r\nAnswer: 9\r\n");
    REQUIRE(s.steps.size() == 1);
    CHECK(s.steps[0].subquestion == "q");
    CHECK(s.steps[0].subanswer == "work");
    CHECK(s.final_answer == "9");
}

TEST_CASE("serialize_solution emits the exact canonical bytes") {
    StructuredSolution s;
    s.steps = {{"first q", "work"}, {"second q", ""}};
    s.final_answer = "9";
    CHECK(serialize_solution(s) ==
          "Subproblem 1: first q\nwork\n\nSubproblem 2: second q\n\nAnswer: 9");

    StructuredSolution empty;
    empty.final_answer = "0";
    CHECK(serialize_solution(empty) == "Answer: 0");
}

TEST_CASE("serialize/parse round-trips grammar-respecting solutions") {
    const char* kWords[] = {"count", "items", "split", "join",  "halve", "total",
                            "carry", "shift", "base",  "digit", "sum",   "scale"};
    Rng rng(derive_seed(31, 0x74706c74));
    auto words = [&](int lo, int hi) {
        std::string out;
        const auto n = rng.uniform_int(lo, hi);
        for (std::int64_t i = 0; i < n; ++i) {
            if (i > 0) out += ' ';
            out += kWords[rng.uniform_int(0, 11)];
        }
        return out;
    };

    for (int trial = 0; trial < 300; ++trial) {
        StructuredSolution s;
        const auto n_steps = rng.uniform_int(0, 4);
        for (std::int64_t i = 0; i < n_steps; ++i) {
            SolutionStep step;
            step.subquestion = rng.bernoulli(0.1) ? "" : words(1, 6);
            if (rng.bernoulli(0.2) && !step.subquestion.empty()) step.subquestion += ": detail";
            const auto n_lines = rng.uniform_int(0, 3);
            std::vector<std::string> lines;
            for (std::int64_t j = 0; j < n_lines; ++j) lines.push_back(words(1, 5));
            for (std::size_t j = 0; j < lines.size(); ++j) {
                if (j > 0) step.subanswer += rng.bernoulli(0.25) ? "\n\n" : "\n";
                step.subanswer += lines[j];
            }
            s.steps.push_back(std::move(step));
        }
        s.final_answer = rng.bernoulli(0.5) ? std::to_string(rng.uniform_int(-999, 999))
                                            : (rng.bernoulli(0.1) ? "" : words(1, 3));

        const StructuredSolution back = parse_structured(serialize_solution(s));
        REQUIRE(back.steps.size() == s.steps.size());
        for (std::size_t i = 0; i < s.steps.size(); ++i) {
            CHECK(back.steps[i].subquestion == s.steps[i].subquestion);
            CHECK(back.steps[i].subanswer == s.steps[i].subanswer);
        }
        CHECK(back.final_answer == s.final_answer);
    }
}

TEST_CASE("format_demo emits the exact demonstration block") {
    MetacogEntry e;
    e.problem = "P";
    e.steps = {{"q", "a"}};
    e.final_answer = "7";
    CHECK(format_demo(e) == "P\n\nSolution:\n\nSubproblem 1: q\na\n\nFinal Solution:\n\nAnswer: 7");
}

TEST_CASE("seed demonstration is well-formed and self-consistent") {
    const MetacogEntry& seed = seed_demonstration();
    REQUIRE(seed.steps.size() == 3);
    CHECK(seed.final_answer == "40");
    CHECK(seed.seq == 0);
    CHECK(seed.problem.find("3(x-2)") != std::string::npos);

    // its rendered demonstration block parses back to the same structure
    const StructuredSolution parsed = parse_structured(format_demo(seed));
    REQUIRE(parsed.steps.size() == seed.steps.size());
    for (std::size_t i = 0; i < seed.steps.size(); ++i) {
        CHECK(parsed.steps[i].subquestion == seed.steps[i].subquestion);
        CHECK(parsed.steps[i].subanswer == seed.steps[i].subanswer);
    }
    CHECK(parsed.final_answer == seed.final_answer);
}

TEST_CASE("rewrite_to_direct produces the direct prompt byte-for-byte") {
    const TemplateSet ts = TemplateSet::builtin();
    const std::string problem = "What is 3*9?";
    CompletionSample sample;
    sample.kind = TemplateKind::Decomposition;
    sample.stage = StageTag::DecompositionRollout;
    sample.reward = 1;
    StructuredSolution sol;
    sol.steps = {{"multiply", "3*9 = 27"}};
    sol.final_answer = "27";

    const SftPair pair = rewrite_to_direct(ts, problem, sample, sol);
    CHECK(pair.prompt == ts.render(TemplateKind::Direct, problem).text);
    CHECK(pair.target == serialize_solution(sol));

    CompletionSample wrong = sample;
    wrong.reward = -1;
    CHECK_THROWS_AS(rewrite_to_direct(ts, problem, wrong, sol), std::invalid_argument);
    CompletionSample direct = sample;
    direct.stage = StageTag::DirectRollout;
    CHECK_THROWS_AS(rewrite_to_direct(ts, problem, direct, sol), std::invalid_argument);
}
