// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace metarl {

// Shortest exact decimal rendering (round-trips bit-for-bit).
std::string format_double(double v);

// One row per training step. Losses are from the last inner iteration of the
// step; eval_accuracy is -1 when no evaluation ran that step.
struct MetricsRow {
    int schema_version = 1;
    int step = 0;
    bool skip = false;  // no group entered training this step
    int direct_groups = 0;  // prompt-groups sampled per stage
    int decomposition_groups = 0;
    int reflection_groups = 0;
    int direct_correct = 0;  // verified-correct samples per stage
    int decomposition_correct = 0;
    int reflection_correct = 0;
    int valid_groups = 0;   // groups with 0 < accuracy < 1 produced this step
    int buffer_groups = 0;  // groups that entered the update (capped at N)
    long long cumulative_batches = 0;  // nondecreasing across rows
    double eval_accuracy = -1.0;
    double loss_dapo = 0.0;
    double loss_sft = 0.0;
    double loss_combined = 0.0;
    int sft_pairs = 0;
    int metabuffer_size = 0;
};

// Fixed column order shared by the CSV header and both serializations.
const std::string& metrics_csv_header();
std::string metrics_row_csv(const MetricsRow& row);
std::string metrics_row_json(const MetricsRow& row);

// Streams rows to <dir>/metrics.jsonl and <dir>/metrics.csv, creating both
// (and the CSV header) eagerly so unwritable paths fail at startup.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::filesystem::path& dir);
    void write(const MetricsRow& row);

private:
    std::ofstream jsonl_;
    std::ofstream csv_;
};

// Batch convenience used by tests: writes all rows at once.
void emit_metrics(const std::filesystem::path& dir, const std::vector<MetricsRow>& rows);

}  // namespace metarl
