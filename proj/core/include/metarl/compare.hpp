// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metarl/config.hpp"
#include "metarl/dataset.hpp"
#include "metarl/metrics.hpp"
#include "metarl/policy.hpp"

namespace metarl {

// Backend instance for a config; scripted backends need the problem universe.
std::unique_ptr<PolicyBackend> make_backend(const RunConfig& cfg,
                                            const DatasetBundle& data);

struct ExecuteOptions {
    bool update_enabled = true;   // false: fill/export only (rollout subcommand)
    bool write_outputs = true;    // metrics + snapshots + config echo to out_dir
    bool export_batches = false;  // write every filled buffer to batches.jsonl
};

struct RunArtifacts {
    std::vector<MetricsRow> rows;
    long long total_batches = 0;
};

// One full run under a resolved config: dataset, backend, templates,
// metabuffer, train loop, artifact writing. Every subcommand that "runs
// the pipeline" funnels through here so train/rollout/compare agree.
RunArtifacts execute_run(const RunConfig& cfg, const ExecuteOptions& opts);

struct ModeSeries {
    Mode mode = Mode::Cascade;
    std::vector<MetricsRow> rows;
    long long batches_to_target = -1;  // generated batches when the cumulative
                                       // valid-group count first reaches the
                                       // target; -1 when it never does
    // (threshold, generated batches when held-out accuracy first reached it);
    // -1 when the run never got there. Thresholds 0.1 .. 0.9.
    std::vector<std::pair<double, long long>> batches_to_accuracy;
};

struct SeedComparison {
    std::uint64_t seed = 0;
    ModeSeries cascade;
    ModeSeries dapo;
    int steps_cascade_strictly_more = 0;  // steps where cascade valid_groups > dapo's
    bool cascade_fewer_batches = false;   // strictly fewer batches to the target
};

struct ComparisonReport {
    int target_valid_groups = 0;
    std::vector<SeedComparison> seeds;
    long long total_steps = 0;
    long long steps_cascade_strictly_more = 0;
    int seeds_cascade_fewer_batches = 0;
    double fraction_steps_cascade_more = 0.0;
};

// Paired runs seeded base_seed .. base_seed+seed_count-1, one cascade arm and
// one stage-skipping arm per seed, identical configs otherwise. `against`
// (when present) must match `base` in every field except mode.
ComparisonReport compare_modes(const RunConfig& base, const std::optional<RunConfig>& against,
                               int seed_count, int target_valid_groups);

std::string comparison_report_json(const ComparisonReport& report);

}  // namespace metarl
