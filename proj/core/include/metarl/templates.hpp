// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "metarl/types.hpp"

namespace metarl {

struct RenderedPrompt {
    TemplateKind kind = TemplateKind::Direct;
    std::string text;
    std::string problem;
    std::optional<MetacogEntry> demo;            // decomposition prompts only
    std::optional<StructuredSolution> prior_attempt;  // reflection prompts only
};

// The three prompt formats. Placeholders use {name} syntax with no escaping:
// {problem} everywhere, {demo} in the decomposition template, {prior} in the
// reflection template. Files override the built-ins for experimentation.
class TemplateSet {
public:
    static TemplateSet builtin();
    // Expects direct.txt, decomposition.txt, reflection.txt in `dir`.
    static TemplateSet from_directory(const std::filesystem::path& dir);

    const std::string& text(TemplateKind kind) const;

    // Renders a prompt. Decomposition requires a demonstration; reflection
    // requires the prior failed attempt. Missing inputs throw.
    RenderedPrompt render(TemplateKind kind, const std::string& problem,
                          const MetacogEntry* demo = nullptr,
                          const StructuredSolution* prior = nullptr) const;

private:
    std::array<std::string, 3> texts_;
};

// Parses a completion against the structured grammar: lines starting with
// "Subproblem <n>:" (case-insensitive) open a step whose subanswer is all
// following text until the next marker or the answer section; the final
// answer comes from the completion's answer line. Never throws — unparseable
// text yields zero steps and whatever answer line is present.
StructuredSolution parse_structured(const std::string& completion_text);

// Canonical serialization: "Subproblem i: ..." blocks then "Answer: ...".
// parse_structured(serialize_solution(s)) round-trips steps and answer.
std::string serialize_solution(const StructuredSolution& s);

// Demonstration block embedded into decomposition prompts: the problem, its
// worked sub-problem steps, and the final answer line.
std::string format_demo(const MetacogEntry& entry);

// Built-in demonstration used until the buffer has real entries.
const MetacogEntry& seed_demonstration();

struct SftPair {
    std::string prompt;
    std::string target;
};

// Rewrites a correct decomposition/reflection sample into a direct-format
// training pair so gradient updates match the evaluation-time prompt format.
// Requires reward == +1 and a non-direct sample.
SftPair rewrite_to_direct(const TemplateSet& templates, const std::string& problem,
                          const CompletionSample& sample, const StructuredSolution& solution);

}  // namespace metarl
