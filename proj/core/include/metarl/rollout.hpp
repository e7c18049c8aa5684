// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "metarl/metabuffer.hpp"
#include "metarl/metrics.hpp"
#include "metarl/objective.hpp"
#include "metarl/policy.hpp"
#include "metarl/templates.hpp"
#include "metarl/types.hpp"

namespace metarl {

// A problem moving through the cascade, carrying the best failed attempt
// from the previous stage (the reflection prompt needs it).
struct StageProblem {
    Problem problem;
    std::optional<StructuredSolution> prior;
};

struct StageResult {
    std::vector<RolloutGroup> kept;          // 0 < accuracy < 1
    std::vector<StageProblem> zero_accuracy; // with best failed attempt attached
    int groups_sampled = 0;
    int full_accuracy_discarded = 0;
    int correct_samples = 0;
    int buffer_insertions = 0;
};

// Renders the stage template per problem, samples G completions, scores the
// binary reward, and partitions groups by accuracy. Decomposition prompts
// use the best BM25 match from the metabuffer (seed demonstration when
// empty), and every correct decomposition sample with parseable steps is
// offered back to the metabuffer, including those from accuracy-1 groups.
StageResult run_stage(StageTag stage, const std::vector<StageProblem>& problems,
                      PolicyBackend& backend, MetacogBuffer& metabuffer,
                      const TemplateSet& templates, int group_size, const Bm25Params& bm25);

struct StepConfig {
    int prompts_per_step = 128;
    int group_size = 64;  // G
    int mu = 1;           // inner optimization iterations per step
    Mode mode = Mode::Cascade;
    int buffer_target = 128;   // N
    bool strict_fill = false;  // true: under-filled buffers skip the update
};

struct DynamicSamplingBuffer {
    std::vector<RolloutGroup> groups;
    std::size_t target_size = 128;
};

struct StageCounters {
    int groups_sampled = 0;
    int groups_valid = 0;  // 0 < accuracy < 1
    int correct_samples = 0;
};

struct FillStats {
    StageCounters direct;
    StageCounters decomposition;
    StageCounters reflection;
    int generated_batches = 0;   // total prompt-groups sampled this step
    int buffer_insertions = 0;   // metabuffer insertions this step
    int overflow_discarded = 0;  // valid groups dropped once the buffer hit N
};

struct FillResult {
    DynamicSamplingBuffer buffer;
    FillStats stats;
};

// Direct on every problem; then, while the buffer is under target and
// zero-accuracy problems remain, decomposition and reflection in turn.
// DapoOnly mode never runs the extra stages. Fill order is direct groups
// first, then decomposition, then reflection, truncated at the target.
FillResult fill_batch(const std::vector<Problem>& problems, PolicyBackend& backend,
                      MetacogBuffer& metabuffer, const TemplateSet& templates,
                      const StepConfig& cfg, const Bm25Params& bm25);

struct ObjectiveConfig {
    ClipConfig clip;
    double lambda = 0.04;
    double learning_rate = 1.0;
};

struct StepReport {
    std::vector<double> dapo_losses;  // one entry per inner iteration
    std::vector<double> sft_losses;
    std::vector<double> combined_losses;
    int sft_pair_count = 0;
    int direct_samples = 0;  // samples of each stage inside the trained buffer
    int decomposition_samples = 0;
    int reflection_samples = 0;
    int buffer_occupancy = 0;
    std::size_t metabuffer_size = 0;
};

using SftObserver = std::function<void(const Problem&, const SftPair&)>;

// Normalizes advantages (rejecting any degenerate group loudly), gathers
// SFT pairs from correct decomposition/reflection samples, and runs mu
// combined-loss gradient updates against the old log-probs frozen at
// sampling time. Requires a scoring+updating backend.
StepReport train_step(DynamicSamplingBuffer& buffer, const MetacogBuffer& metabuffer,
                      PolicyBackend& backend, const TemplateSet& templates,
                      const ObjectiveConfig& objective, int mu, const SftObserver& observer = {});

// Majority-vote accuracy on the held-out set using the direct template only
// (the evaluation-time format). n=1 is plain single-sample accuracy.
double evaluate_accuracy(const std::vector<Problem>& holdout, PolicyBackend& backend,
                         const TemplateSet& templates, int maj_n);

struct TrainLoopConfig {
    StepConfig step;
    ObjectiveConfig objective;
    Bm25Params bm25;
    int steps = 10;
    std::uint64_t seed = 0;
    int eval_every = 1;  // 0 disables evaluation
    int eval_maj_n = 1;
    int snapshot_every = 0;  // metabuffer snapshot cadence; 0 disables
    bool update_enabled = true;  // false: rollout-only statistics
};

struct TrainLoopHooks {
    std::function<void(const MetricsRow&)> on_row;
    std::function<void(int step, const MetacogBuffer&)> on_snapshot;
    std::function<void(int step, const DynamicSamplingBuffer&)> on_batch;
    SftObserver on_sft_pair;
};

struct TrainLoopResult {
    std::vector<MetricsRow> rows;
    long long total_batches = 0;
};

// The outer loop: per step, sample prompts_per_step problems without
// replacement, fill the buffer through the cascade, train on what arrived
// (or mark the step skipped), evaluate, and emit one metrics row.
TrainLoopResult train_loop(const std::vector<Problem>& dataset,
                           const std::vector<Problem>& holdout, PolicyBackend& backend,
                           MetacogBuffer& metabuffer, const TemplateSet& templates,
                           const TrainLoopConfig& cfg, const TrainLoopHooks& hooks = {});

}  // namespace metarl
