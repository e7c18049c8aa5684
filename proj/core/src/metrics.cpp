// SPDX-License-Identifier: Apache-2.0
#include "metarl/metrics.hpp"

#include <charconv>
#include <stdexcept>
#include <system_error>

namespace metarl {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, res.ptr);
}

const std::string& metrics_csv_header() {
    static const std::string header =
        "schema_version,step,skip,direct_groups,decomposition_groups,reflection_groups,"
        "direct_correct,decomposition_correct,reflection_correct,valid_groups,buffer_groups,"
        "cumulative_batches,eval_accuracy,loss_dapo,loss_sft,loss_combined,sft_pairs,"
        "metabuffer_size";
    return header;
}

std::string metrics_row_csv(const MetricsRow& row) {
    std::string out;
    out += std::to_string(row.schema_version);
    out += ',';
    out += std::to_string(row.step);
    out += ',';
    out += row.skip ? '1' : '0';
    out += ',';
    out += std::to_string(row.direct_groups);
    out += ',';
    out += std::to_string(row.decomposition_groups);
    out += ',';
    out += std::to_string(row.reflection_groups);
    out += ',';
    out += std::to_string(row.direct_correct);
    out += ',';
    out += std::to_string(row.decomposition_correct);
    out += ',';
    out += std::to_string(row.reflection_correct);
    out += ',';
    out += std::to_string(row.valid_groups);
    out += ',';
    out += std::to_string(row.buffer_groups);
    out += ',';
    out += std::to_string(row.cumulative_batches);
    out += ',';
    out += format_double(row.eval_accuracy);
    out += ',';
    out += format_double(row.loss_dapo);
    out += ',';
    out += format_double(row.loss_sft);
    out += ',';
    out += format_double(row.loss_combined);
    out += ',';
    out += std::to_string(row.sft_pairs);
    out += ',';
    out += std::to_string(row.metabuffer_size);
    return out;
}

std::string metrics_row_json(const MetricsRow& row) {
    // Hand-assembled to keep the key order identical to the CSV columns
    // (serializer libraries re-sort keys). All values are numeric or boolean.
    std::string out = "{";
    out += "\"schema_version\":" + std::to_string(row.schema_version);
    out += ",\"step\":" + std::to_string(row.step);
    out += ",\"skip\":";
    out += row.skip ? "true" : "false";
    out += ",\"direct_groups\":" + std::to_string(row.direct_groups);
    out += ",\"decomposition_groups\":" + std::to_string(row.decomposition_groups);
    out += ",\"reflection_groups\":" + std::to_string(row.reflection_groups);
    out += ",\"direct_correct\":" + std::to_string(row.direct_correct);
    out += ",\"decomposition_correct\":" + std::to_string(row.decomposition_correct);
    out += ",\"reflection_correct\":" + std::to_string(row.reflection_correct);
    out += ",\"valid_groups\":" + std::to_string(row.valid_groups);
    out += ",\"buffer_groups\":" + std::to_string(row.buffer_groups);
    out += ",\"cumulative_batches\":" + std::to_string(row.cumulative_batches);
    out += ",\"eval_accuracy\":" + format_double(row.eval_accuracy);
    out += ",\"loss_dapo\":" + format_double(row.loss_dapo);
    out += ",\"loss_sft\":" + format_double(row.loss_sft);
    out += ",\"loss_combined\":" + format_double(row.loss_combined);
    out += ",\"sft_pairs\":" + std::to_string(row.sft_pairs);
    out += ",\"metabuffer_size\":" + std::to_string(row.metabuffer_size);
    out += "}";
    return out;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto jsonl_path = dir / "metrics.jsonl";
    const auto csv_path = dir / "metrics.csv";
    jsonl_.open(jsonl_path, std::ios::trunc);
    csv_.open(csv_path, std::ios::trunc);
    if (!jsonl_ || !csv_) {
        throw std::runtime_error("MetricsWriter: cannot open metrics files under " +
                                 dir.string());
    }
    csv_ << metrics_csv_header() << '\n';
    csv_.flush();
}

void MetricsWriter::write(const MetricsRow& row) {
    jsonl_ << metrics_row_json(row) << '\n';
    csv_ << metrics_row_csv(row) << '\n';
    // Flushed per row so aborted runs keep everything already reported.
    jsonl_.flush();
    csv_.flush();
    if (!jsonl_ || !csv_) throw std::runtime_error("MetricsWriter: write failed");
}

void emit_metrics(const std::filesystem::path& dir, const std::vector<MetricsRow>& rows) {
    MetricsWriter writer(dir);
    for (const MetricsRow& row : rows) writer.write(row);
}

}  // namespace metarl
