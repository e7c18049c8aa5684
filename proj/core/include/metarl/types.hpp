// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metarl/errors.hpp"

namespace metarl {

// Which prompt template a completion was sampled under.
enum class TemplateKind { Direct, Decomposition, Reflection };

// Which rollout stage produced a group. Mirrors TemplateKind one-to-one but is
// kept distinct: stages are control-flow positions, kinds are prompt formats.
enum class StageTag { DirectRollout, DecompositionRollout, ReflectionRollout };

inline const char* to_string(TemplateKind k) {
    switch (k) {
        case TemplateKind::Direct: return "direct";
        case TemplateKind::Decomposition: return "decomposition";
        case TemplateKind::Reflection: return "reflection";
    }
    return "?";
}

inline const char* to_string(StageTag s) {
    switch (s) {
        case StageTag::DirectRollout: return "direct";
        case StageTag::DecompositionRollout: return "decomposition";
        case StageTag::ReflectionRollout: return "reflection";
    }
    return "?";
}

inline TemplateKind template_for(StageTag s) {
    switch (s) {
        case StageTag::DirectRollout: return TemplateKind::Direct;
        case StageTag::DecompositionRollout: return TemplateKind::Decomposition;
        case StageTag::ReflectionRollout: return TemplateKind::Reflection;
    }
    throw std::invalid_argument("template_for: bad stage");
}

struct Problem {
    int id = -1;
    std::string question;
    std::string answer;      // ground-truth answer text
    std::string difficulty;  // free-form descriptor ("easy"/"medium"/"hard")
};

struct SolutionStep {
    std::string subquestion;
    std::string subanswer;
};

// A completion parsed into sub-problem steps plus the final answer line.
struct StructuredSolution {
    std::vector<SolutionStep> steps;
    std::string final_answer;  // empty when the completion had no answer line
    std::string raw;           // original completion text
};

struct CompletionSample {
    TemplateKind kind = TemplateKind::Direct;
    StageTag stage = StageTag::DirectRollout;
    std::vector<int> tokens;       // backend token ids; empty for text-only backends
    std::vector<double> logprobs;  // per-token logprobs under the sampling params
    std::string text;
    std::optional<std::string> extracted;  // answer line, if one was found
    int reward = -1;                       // +1 / -1
    bool failed = false;                   // transport-level failure
};

// One stored demonstration: a problem together with its verified decomposition.
struct MetacogEntry {
    std::string problem;
    std::vector<SolutionStep> steps;
    std::string final_answer;
    std::uint64_t seq = 0;  // insertion order, assigned by the buffer
};

struct GradientVector {
    std::vector<double> values;
};

// G completions for one prompt, with rewards and (once normalized) advantages.
struct RolloutGroup {
    Problem problem;
    StageTag stage = StageTag::DirectRollout;
    std::string prompt_text;
    std::vector<CompletionSample> samples;
    std::vector<int> rewards;
    double accuracy = 0.0;
    std::vector<double> advantages;  // filled by the trainer
};

enum class Mode { Cascade, DapoOnly };

inline const char* to_string(Mode m) {
    return m == Mode::Cascade ? "cascade" : "dapo-only";
}

inline Mode mode_from_string(const std::string& s) {
    if (s == "cascade") return Mode::Cascade;
    if (s == "dapo-only") return Mode::DapoOnly;
    throw ConfigError("unknown mode '" + s + "' (expected cascade | dapo-only)");
}

}  // namespace metarl
