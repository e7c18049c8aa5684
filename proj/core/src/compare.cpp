// SPDX-License-Identifier: Apache-2.0
#include "metarl/compare.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "metarl/errors.hpp"
#include "metarl/metabuffer.hpp"
#include "metarl/remote_policy.hpp"
#include "metarl/rollout.hpp"
#include "metarl/templates.hpp"

namespace metarl {

namespace {

TemplateSet make_templates(const RunConfig& cfg) {
    return cfg.run.template_dir.empty() ? TemplateSet::builtin()
                                        : TemplateSet::from_directory(cfg.run.template_dir);
}

nlohmann::json group_to_json(int step, const RolloutGroup& group) {
    nlohmann::json samples = nlohmann::json::array();
    for (const CompletionSample& s : group.samples) {
        samples.push_back({{"text", s.text},
                           {"reward", s.reward},
                           {"failed", s.failed},
                           {"extracted", s.extracted ? nlohmann::json(*s.extracted)
                                                     : nlohmann::json(nullptr)}});
    }
    return nlohmann::json{{"step", step},
                          {"stage", to_string(group.stage)},
                          {"problem_id", group.problem.id},
                          {"question", group.problem.question},
                          {"answer", group.problem.answer},
                          {"prompt", group.prompt_text},
                          {"accuracy", group.accuracy},
                          {"rewards", group.rewards},
                          {"samples", samples}};
}

nlohmann::json series_to_json(const ModeSeries& series) {
    nlohmann::json rows = nlohmann::json::array();
    for (const MetricsRow& row : series.rows) {
        rows.push_back(nlohmann::json::parse(metrics_row_json(row)));
    }
    nlohmann::json milestones = nlohmann::json::array();
    for (const auto& [threshold, batches] : series.batches_to_accuracy) {
        milestones.push_back({{"accuracy", threshold}, {"batches", batches}});
    }
    return nlohmann::json{{"mode", to_string(series.mode)},
                          {"batches_to_target", series.batches_to_target},
                          {"batches_to_accuracy", milestones},
                          {"rows", rows}};
}

long long batches_to_target(const std::vector<MetricsRow>& rows, int target) {
    long long valid = 0;
    for (const MetricsRow& row : rows) {
        valid += row.valid_groups;
        if (valid >= target) return row.cumulative_batches;
    }
    return -1;
}

std::vector<std::pair<double, long long>> accuracy_milestones(
    const std::vector<MetricsRow>& rows) {
    std::vector<std::pair<double, long long>> out;
    for (int i = 1; i <= 9; ++i) {
        const double threshold = 0.1 * i;
        long long batches = -1;
        for (const MetricsRow& row : rows) {
            if (row.eval_accuracy >= threshold) {
                batches = row.cumulative_batches;
                break;
            }
        }
        out.push_back({threshold, batches});
    }
    return out;
}

}  // namespace

std::unique_ptr<PolicyBackend> make_backend(const RunConfig& cfg, const DatasetBundle& data) {
    switch (cfg.policy.backend) {
        case BackendKind::Softmax:
            return std::make_unique<SoftmaxSequencePolicy>(make_softmax_config(cfg));
        case BackendKind::Scripted: {
            std::vector<Problem> universe = data.train;
            universe.insert(universe.end(), data.holdout.begin(), data.holdout.end());
            return std::make_unique<ScriptedPolicy>(make_scripted_config(cfg), universe);
        }
        case BackendKind::Remote:
            return std::make_unique<RemoteChatBackend>(make_remote_config(cfg));
    }
    throw ConfigError("make_backend: bad backend kind");
}

RunArtifacts execute_run(const RunConfig& cfg, const ExecuteOptions& opts) {
    validate_config(cfg);
    const DatasetBundle data = build_dataset(cfg);
    const TemplateSet templates = make_templates(cfg);
    std::unique_ptr<PolicyBackend> backend = make_backend(cfg, data);
    MetacogBuffer metabuffer(static_cast<std::size_t>(cfg.metabuffer.capacity));

    TrainLoopConfig loop = make_loop_config(cfg);
    loop.update_enabled = opts.update_enabled;

    const std::filesystem::path out_dir(cfg.run.out_dir);
    std::unique_ptr<MetricsWriter> metrics;
    std::ofstream batches;
    if (opts.write_outputs) {
        std::filesystem::create_directories(out_dir);
        metrics = std::make_unique<MetricsWriter>(out_dir);
        std::ofstream echo(out_dir / "config.ini", std::ios::trunc);
        echo << to_ini(cfg);  // resolved config, for exact reruns
        if (opts.export_batches) {
            batches.open(out_dir / "batches.jsonl", std::ios::trunc);
            if (!batches) throw std::runtime_error("cannot open batches.jsonl for export");
        }
    }

    TrainLoopHooks hooks;
    if (metrics) hooks.on_row = [&](const MetricsRow& row) { metrics->write(row); };
    if (opts.write_outputs && opts.export_batches) {
        hooks.on_batch = [&](int step, const DynamicSamplingBuffer& buffer) {
            for (const RolloutGroup& group : buffer.groups) {
                batches << group_to_json(step, group).dump() << '\n';
            }
            batches.flush();
        };
    }
    if (opts.write_outputs && cfg.run.snapshot_every > 0) {
        hooks.on_snapshot = [&](int step, const MetacogBuffer& buf) {
            std::ofstream snap(out_dir / ("metabuffer_step" + std::to_string(step) + ".jsonl"),
                               std::ios::trunc);
            buf.snapshot(snap);
        };
    }

    RunArtifacts artifacts;
    TrainLoopResult result =
        train_loop(data.train, data.holdout, *backend, metabuffer, templates, loop, hooks);
    artifacts.rows = std::move(result.rows);
    artifacts.total_batches = result.total_batches;

    if (opts.write_outputs) {
        std::ofstream snap(out_dir / "metabuffer.jsonl", std::ios::trunc);
        metabuffer.snapshot(snap);
        if (backend->capabilities().can_update) {
            nlohmann::json params = nlohmann::json{{"params", backend->params()}};
            std::ofstream pf(out_dir / "params.json", std::ios::trunc);
            pf << params.dump() << '\n';
        }
    }
    return artifacts;
}

ComparisonReport compare_modes(const RunConfig& base, const std::optional<RunConfig>& against,
                               int seed_count, int target_valid_groups) {
    if (seed_count < 1) throw ConfigError("compare: seed count must be >= 1");
    if (target_valid_groups < 1) throw ConfigError("compare: target must be >= 1");
    if (against) {
        // The arms must be the same experiment; only the mode may differ.
        RunConfig a = base;
        RunConfig b = *against;
        a.run.mode = Mode::Cascade;
        b.run.mode = Mode::Cascade;
        if (to_ini(a) != to_ini(b)) {
            throw ConfigError("compare: configs differ beyond [run] mode");
        }
    }

    ComparisonReport report;
    report.target_valid_groups = target_valid_groups;
    for (int s = 0; s < seed_count; ++s) {
        SeedComparison pair;
        pair.seed = base.run.seed + static_cast<std::uint64_t>(s);

        RunConfig cascade_cfg = base;
        cascade_cfg.run.mode = Mode::Cascade;
        cascade_cfg.run.seed = pair.seed;
        RunConfig dapo_cfg = against ? *against : base;
        dapo_cfg.run.mode = Mode::DapoOnly;
        dapo_cfg.run.seed = pair.seed;

        ExecuteOptions opts;
        opts.write_outputs = false;  // the report is the artifact
        RunArtifacts cascade = execute_run(cascade_cfg, opts);
        RunArtifacts dapo = execute_run(dapo_cfg, opts);

        pair.cascade.mode = Mode::Cascade;
        pair.cascade.rows = std::move(cascade.rows);
        pair.cascade.batches_to_target =
            batches_to_target(pair.cascade.rows, target_valid_groups);
        pair.cascade.batches_to_accuracy = accuracy_milestones(pair.cascade.rows);
        pair.dapo.mode = Mode::DapoOnly;
        pair.dapo.rows = std::move(dapo.rows);
        pair.dapo.batches_to_target = batches_to_target(pair.dapo.rows, target_valid_groups);
        pair.dapo.batches_to_accuracy = accuracy_milestones(pair.dapo.rows);

        const std::size_t steps = std::min(pair.cascade.rows.size(), pair.dapo.rows.size());
        for (std::size_t i = 0; i < steps; ++i) {
            if (pair.cascade.rows[i].valid_groups > pair.dapo.rows[i].valid_groups) {
                ++pair.steps_cascade_strictly_more;
            }
        }
        pair.cascade_fewer_batches =
            pair.cascade.batches_to_target >= 0 &&
            (pair.dapo.batches_to_target < 0 ||
             pair.cascade.batches_to_target < pair.dapo.batches_to_target);

        report.total_steps += static_cast<long long>(steps);
        report.steps_cascade_strictly_more += pair.steps_cascade_strictly_more;
        if (pair.cascade_fewer_batches) ++report.seeds_cascade_fewer_batches;
        report.seeds.push_back(std::move(pair));
    }
    report.fraction_steps_cascade_more =
        report.total_steps == 0
            ? 0.0
            : static_cast<double>(report.steps_cascade_strictly_more) /
                  static_cast<double>(report.total_steps);
    return report;
}

std::string comparison_report_json(const ComparisonReport& report) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const SeedComparison& pair : report.seeds) {
        seeds.push_back({{"seed", pair.seed},
                         {"cascade", series_to_json(pair.cascade)},
                         {"dapo_only", series_to_json(pair.dapo)},
                         {"steps_cascade_strictly_more", pair.steps_cascade_strictly_more},
                         {"cascade_fewer_batches", pair.cascade_fewer_batches}});
    }
    nlohmann::json out{{"target_valid_groups", report.target_valid_groups},
                       {"total_steps", report.total_steps},
                       {"steps_cascade_strictly_more", report.steps_cascade_strictly_more},
                       {"fraction_steps_cascade_more", report.fraction_steps_cascade_more},
                       {"seeds_cascade_fewer_batches", report.seeds_cascade_fewer_batches},
                       {"seed_count", report.seeds.size()},
                       {"seeds", seeds}};
    return out.dump(2);
}

}  // namespace metarl
