// SPDX-License-Identifier: Apache-2.0
#include "metarl/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "metarl/compare.hpp"
#include "metarl/config.hpp"
#include "metarl/dataset.hpp"
#include "metarl/envlab.hpp"
#include "metarl/errors.hpp"
#include "metarl/metabuffer.hpp"
#include "metarl/metrics.hpp"
#include "metarl/objective.hpp"
#include "metarl/rng.hpp"
#include "metarl/rollout.hpp"

namespace metarl {

namespace {

struct CliState {
    RunConfig cfg;
    std::string config_path;
    // Enum-valued fields pass through strings so the flag text matches the
    // config file text exactly.
    std::string mode_str;
    std::string backend_str;
    std::string source_str;

    int compare_seeds = 30;
    int compare_target = 100;
    std::string compare_against;

    int gradcheck_batches = 50;
    double gradcheck_fd_step = 1e-5;
    double gradcheck_tolerance = 1e-5;

    std::string buffer_path;
    std::string buffer_out;
    std::string buffer_query;
    bool buffer_init = false;
};

// Every config key is overridable by a flag of the same name (dashed and
// underscored spellings both accepted).
void add_run_flags(CLI::App* sub, CliState& st) {
    sub->add_option("--config", st.config_path, "config file (applied before flags)");
    sub->add_option("--mode", st.mode_str, "cascade | dapo-only");
    sub->add_option("--steps", st.cfg.run.steps, "training steps");
    sub->add_option("--seed", st.cfg.run.seed, "run seed");
    sub->add_option("--out-dir,--out_dir", st.cfg.run.out_dir, "output directory");
    sub->add_option("--eval-every,--eval_every", st.cfg.run.eval_every);
    sub->add_option("--eval-size,--eval_size", st.cfg.run.eval_size);
    sub->add_option("--eval-maj-n,--eval_maj_n", st.cfg.run.eval_maj_n);
    sub->add_option("--snapshot-every,--snapshot_every", st.cfg.run.snapshot_every);
    sub->add_option("--template-dir,--template_dir", st.cfg.run.template_dir);

    sub->add_option("--prompts-per-step,--prompts_per_step", st.cfg.rollout.prompts_per_step);
    sub->add_option("--group-size,--group_size", st.cfg.rollout.group_size);
    sub->add_option("--mu", st.cfg.rollout.mu);
    sub->add_option("--buffer-target,--buffer_target", st.cfg.rollout.buffer_target);
    sub->add_flag("--strict-fill,--strict_fill", st.cfg.rollout.strict_fill);

    sub->add_option("--lambda", st.cfg.objective.lambda);
    sub->add_option("--eps-low,--eps_low", st.cfg.objective.eps_low);
    sub->add_option("--eps-high,--eps_high", st.cfg.objective.eps_high);
    sub->add_option("--learning-rate,--learning_rate", st.cfg.objective.learning_rate);

    sub->add_option("--capacity", st.cfg.metabuffer.capacity);
    sub->add_option("--bm25-k1,--bm25_k1", st.cfg.metabuffer.bm25_k1);
    sub->add_option("--bm25-b,--bm25_b", st.cfg.metabuffer.bm25_b);

    sub->add_option("--backend", st.backend_str, "softmax | scripted | remote");
    sub->add_option("--charset", st.cfg.policy.charset);
    sub->add_option("--context-order,--context_order", st.cfg.policy.context_order);
    sub->add_option("--max-len,--max_len", st.cfg.policy.max_len);
    sub->add_option("--scripted-direct-p,--scripted_direct_p", st.cfg.policy.scripted_direct_p);
    sub->add_option("--scripted-decomposition-p,--scripted_decomposition_p",
                    st.cfg.policy.scripted_decomposition_p);
    sub->add_option("--scripted-reflection-p,--scripted_reflection_p",
                    st.cfg.policy.scripted_reflection_p);
    sub->add_option("--endpoint", st.cfg.policy.endpoint);
    sub->add_option("--model", st.cfg.policy.model);
    sub->add_option("--temperature", st.cfg.policy.temperature);
    sub->add_option("--top-p,--top_p", st.cfg.policy.top_p);
    sub->add_option("--max-tokens,--max_tokens", st.cfg.policy.max_tokens);
    sub->add_option("--timeout-seconds,--timeout_seconds", st.cfg.policy.timeout_seconds);
    sub->add_option("--max-retries,--max_retries", st.cfg.policy.max_retries);
    sub->add_option("--max-concurrent,--max_concurrent", st.cfg.policy.max_concurrent);

    sub->add_option("--source", st.source_str, "synthetic | file");
    sub->add_option("--dataset-path,--dataset_path", st.cfg.dataset.dataset_path);
    sub->add_option("--dataset-size,--dataset_size", st.cfg.dataset.dataset_size);
    sub->add_option("--horizon", st.cfg.dataset.horizon);
    sub->add_option("--sub-count,--sub_count", st.cfg.dataset.sub_count);
    sub->add_option("--gamma", st.cfg.dataset.gamma);
    sub->add_option("--operand-min,--operand_min", st.cfg.dataset.operand_min);
    sub->add_option("--operand-max,--operand_max", st.cfg.dataset.operand_max);
    sub->add_option("--operations", st.cfg.dataset.operations, "comma list of add,sub,mul");
    sub->add_option("--task-seed,--task_seed", st.cfg.dataset.task_seed);

    sub->add_option("--rollouts", st.cfg.envlab.rollouts);
    sub->add_option("--lab-vocab,--lab_vocab", st.cfg.envlab.lab_vocab);
}

void apply_enum_strings(CliState& st) {
    if (!st.mode_str.empty()) st.cfg.run.mode = mode_from_string(st.mode_str);
    if (!st.backend_str.empty()) st.cfg.policy.backend = backend_from_string(st.backend_str);
    if (!st.source_str.empty()) {
        st.cfg.dataset.source = dataset_source_from_string(st.source_str);
    }
}

void print_run_summary(const RunArtifacts& art, const RunConfig& cfg) {
    double last_eval = -1.0;
    int skipped = 0;
    for (const MetricsRow& row : art.rows) {
        if (row.eval_accuracy >= 0.0) last_eval = row.eval_accuracy;
        if (row.skip) ++skipped;
    }
    std::cout << "steps: " << art.rows.size() << "  skipped: " << skipped
              << "  generated batches: " << art.total_batches;
    if (last_eval >= 0.0) std::cout << "  final eval accuracy: " << format_double(last_eval);
    std::cout << "\nartifacts: " << cfg.run.out_dir << "\n";
}

int cmd_train(CliState& st) {
    if (st.cfg.policy.backend != BackendKind::Softmax) {
        throw ConfigError(
            "train needs a backend that can score and update (softmax); "
            "use the `rollout` subcommand with sample-only backends");
    }
    ExecuteOptions opts;
    RunArtifacts art = execute_run(st.cfg, opts);
    print_run_summary(art, st.cfg);
    return 0;
}

int cmd_rollout(CliState& st) {
    ExecuteOptions opts;
    opts.update_enabled = false;
    opts.export_batches = true;
    RunArtifacts art = execute_run(st.cfg, opts);
    print_run_summary(art, st.cfg);
    return 0;
}

void print_estimate(const char* name, const envlab::VarianceEstimate& est) {
    std::cout << name << ": variance=" << format_double(est.variance)
              << " halfwidth=" << format_double(est.halfwidth) << " rollouts=" << est.rollouts
              << "\n";
}

int cmd_variance_check(CliState& st) {
    envlab::ChainTaskSpec spec = make_task_spec(st.cfg);
    spec.validate();
    if (st.cfg.envlab.lab_vocab < 2) throw ConfigError("[envlab] lab_vocab must be >= 2");
    // Zero-initialized logits = the uniform policy; order 0 keeps the lab's
    // action distribution identical at every step.
    SoftmaxSequencePolicy policy(st.cfg.envlab.lab_vocab, 0, std::max(1, spec.horizon),
                                 st.cfg.run.seed);
    const envlab::VarianceReport report =
        envlab::check_ordering(spec, policy, st.cfg.envlab.rollouts);
    print_estimate("direct", report.direct);
    print_estimate("decomposition", report.decomposition);
    print_estimate("reflection", report.reflection);
    std::cout << "ref/dec variance ratio: " << format_double(report.ref_dec_ratio) << "\n";
    std::cout << "ordering satisfied: " << (report.ordering_satisfied ? "true" : "false")
              << "\n";

    const auto to_json = [](const envlab::VarianceEstimate& est) {
        return nlohmann::json{{"variance", est.variance},
                              {"halfwidth", est.halfwidth},
                              {"rollouts", est.rollouts}};
    };
    nlohmann::json out{{"direct", to_json(report.direct)},
                       {"decomposition", to_json(report.decomposition)},
                       {"reflection", to_json(report.reflection)},
                       {"ref_dec_ratio", report.ref_dec_ratio},
                       {"ordering_satisfied", report.ordering_satisfied},
                       {"horizon", spec.horizon},
                       {"sub_count", spec.sub_count},
                       {"gamma", spec.gamma}};
    std::filesystem::create_directories(st.cfg.run.out_dir);
    std::ofstream f(std::filesystem::path(st.cfg.run.out_dir) / "variance.json",
                    std::ios::trunc);
    f << out.dump(2) << '\n';
    std::cout << "report: " << st.cfg.run.out_dir << "/variance.json\n";
    return 0;
}

int cmd_buffer(CliState& st) {
    if (st.buffer_path.empty()) throw ConfigError("buffer: --path is required");
    if (st.buffer_init) {
        MetacogBuffer buf(static_cast<std::size_t>(st.cfg.metabuffer.capacity));
        std::ofstream out(st.buffer_path, std::ios::trunc);
        if (!out) throw ConfigError("buffer: cannot write " + st.buffer_path);
        buf.snapshot(out);
        std::cout << "initialized empty buffer (capacity " << buf.capacity() << ") at "
                  << st.buffer_path << "\n";
        return 0;
    }
    std::ifstream in(st.buffer_path);
    if (!in) throw ConfigError("buffer: cannot open " + st.buffer_path);
    MetacogBuffer buf = MetacogBuffer::load(in);
    std::cout << "entries: " << buf.size() << "  capacity: " << buf.capacity()
              << "  next_seq: " << buf.next_seq() << "\n";
    if (!st.buffer_query.empty()) {
        if (buf.empty()) throw ConfigError("buffer: cannot query an empty buffer");
        const Bm25Params params = make_bm25(st.cfg);
        const MetacogEntry& best = buf.retrieve_best(st.buffer_query, params);
        double best_score = 0.0;
        for (std::size_t i = 0; i < buf.size(); ++i) {
            best_score = std::max(best_score, buf.score(st.buffer_query, i, params));
        }
        std::cout << "best match (seq " << best.seq << ", score " << format_double(best_score)
                  << "): " << best.problem << "\n";
        for (const SolutionStep& step : best.steps) {
            std::cout << "  - " << step.subquestion << "\n";
        }
        std::cout << "  answer: " << best.final_answer << "\n";
    }
    if (!st.buffer_out.empty()) {
        std::ofstream out(st.buffer_out, std::ios::trunc);
        if (!out) throw ConfigError("buffer: cannot write " + st.buffer_out);
        buf.snapshot(out);
        std::cout << "snapshot written to " << st.buffer_out << "\n";
    }
    return 0;
}

int cmd_compare(CliState& st) {
    std::optional<RunConfig> against;
    if (!st.compare_against.empty()) against = load_config_file(st.compare_against);
    const ComparisonReport report =
        compare_modes(st.cfg, against, st.compare_seeds, st.compare_target);
    std::cout << "seeds: " << report.seeds.size() << "  steps compared: " << report.total_steps
              << "\n";
    std::cout << "steps with strictly more valid groups (cascade): "
              << report.steps_cascade_strictly_more << " ("
              << format_double(report.fraction_steps_cascade_more) << ")\n";
    std::cout << "seeds reaching " << report.target_valid_groups
              << " valid groups in fewer batches (cascade): "
              << report.seeds_cascade_fewer_batches << "/" << report.seeds.size() << "\n";
    std::filesystem::create_directories(st.cfg.run.out_dir);
    std::ofstream f(std::filesystem::path(st.cfg.run.out_dir) / "compare.json", std::ios::trunc);
    f << comparison_report_json(report) << '\n';
    std::cout << "report: " << st.cfg.run.out_dir << "/compare.json\n";
    return 0;
}

int cmd_gradcheck(CliState& st) {
    const GradcheckResult result =
        run_gradcheck_suite(st.gradcheck_batches, st.cfg.run.seed, st.gradcheck_fd_step);
    std::cout << "batches: " << result.batches
              << "  max relative error: " << format_double(result.max_rel_error)
              << "  tolerance: " << format_double(st.gradcheck_tolerance) << "\n";
    if (result.max_rel_error <= st.gradcheck_tolerance) {
        std::cout << "gradcheck: PASS\n";
        return 0;
    }
    std::cout << "gradcheck: FAIL\n";
    return 1;
}

}  // namespace

GradcheckResult run_gradcheck_suite(int batches, std::uint64_t seed, double fd_step) {
    if (batches < 1) throw ConfigError("gradcheck: batches must be >= 1");
    GradcheckResult result;
    result.batches = batches;
    const ClipConfig clip{};
    const double lambdas[3] = {0.0, 0.04, 0.5};

    for (int b = 0; b < batches; ++b) {
        const int vocab = 4 + (b % 4);
        const int order = b % 2;
        SoftmaxSequencePolicy policy(vocab, order, /*max_len=*/5,
                                     derive_seed(seed, 0x6763706f, static_cast<std::uint64_t>(b)));
        Rng rng(derive_seed(seed, 0x67637072, static_cast<std::uint64_t>(b)));

        // Non-uniform generating distribution.
        std::vector<double> params = policy.params();
        for (double& p : params) p = rng.next_double() - 0.5;
        policy.set_params(params);

        RenderedPrompt prompt;
        prompt.kind = TemplateKind::Direct;
        prompt.text = "gradcheck";
        std::vector<RolloutGroup> groups;
        for (int g = 0; g < 2; ++g) {
            RolloutGroup group;
            group.stage = StageTag::DirectRollout;
            group.prompt_text = prompt.text;
            group.samples = policy.sample_group(prompt, 4);
            for (std::size_t i = 0; i < group.samples.size(); ++i) {
                const int r = (i % 2 == 0) ? 1 : -1;
                group.samples[i].reward = r;
                group.rewards.push_back(r);
            }
            group.accuracy = 0.5;
            group.advantages = normalize_advantages(group.rewards);
            groups.push_back(std::move(group));
        }

        // Move away from the sampling parameters so the ratios leave 1; the
        // occasional large kick pushes tokens across the clip boundaries.
        params = policy.params();
        const double scale = (b % 5 == 0) ? 0.5 : 0.05;
        for (double& p : params) p += (rng.next_double() - 0.5) * 2.0 * scale;
        policy.set_params(params);

        const double lambda = lambdas[b % 3];
        std::vector<SftPair> pairs;
        if (lambda > 0.0) {
            pairs.push_back({"gradcheck", "12"});
            pairs.push_back({"gradcheck 2", "2"});
        }

        const CombinedLoss analytic = combined_loss(groups, pairs, clip, lambda, policy, true);
        const auto value = [&] {
            return combined_loss(groups, pairs, clip, lambda, policy, false).total;
        };
        const double err = finite_diff_check(value, analytic.grad.values, policy, fd_step);
        result.max_rel_error = std::max(result.max_rel_error, err);
    }
    return result;
}

int run_cli(int argc, const char* const* argv) {
    CliState st;

    // The config file loads before flag binding so that explicitly passed
    // flags override file values: pre-scan for --config.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        std::string path;
        if (arg == "--config" && i + 1 < argc) {
            path = argv[i + 1];
        } else if (arg.rfind("--config=", 0) == 0) {
            path = arg.substr(9);
        }
        if (!path.empty()) {
            try {
                st.cfg = load_config_file(path);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 2;
            }
            break;
        }
    }

    CLI::App app{"hierarchical three-stage RL training pipeline"};
    app.require_subcommand(1);

    CLI::App* train = app.add_subcommand("train", "full training loop");
    add_run_flags(train, st);
    CLI::App* rollout = app.add_subcommand("rollout", "fill batches and export them (no update)");
    add_run_flags(rollout, st);
    CLI::App* variance = app.add_subcommand("variance-check", "gradient variance ordering lab");
    add_run_flags(variance, st);
    CLI::App* buffer = app.add_subcommand("buffer", "inspect or initialize buffer snapshots");
    buffer->add_option("--config", st.config_path);
    buffer->add_option("--path", st.buffer_path, "snapshot file");
    buffer->add_flag("--init", st.buffer_init, "write a fresh empty snapshot");
    buffer->add_option("--capacity", st.cfg.metabuffer.capacity);
    buffer->add_option("--bm25-k1,--bm25_k1", st.cfg.metabuffer.bm25_k1);
    buffer->add_option("--bm25-b,--bm25_b", st.cfg.metabuffer.bm25_b);
    buffer->add_option("--query", st.buffer_query, "retrieve the best entry for this text");
    buffer->add_option("--out", st.buffer_out, "write the loaded buffer back out");
    CLI::App* compare = app.add_subcommand("compare", "paired cascade vs dapo-only runs");
    add_run_flags(compare, st);
    compare->add_option("--seeds", st.compare_seeds, "number of paired seeds");
    compare->add_option("--target", st.compare_target, "valid-group target for batch counting");
    compare->add_option("--against", st.compare_against,
                        "second config; must differ from --config only in mode");
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--config", st.config_path);
    gradcheck->add_option("--batches", st.gradcheck_batches);
    gradcheck->add_option("--fd-step,--fd_step", st.gradcheck_fd_step);
    gradcheck->add_option("--tolerance", st.gradcheck_tolerance);
    gradcheck->add_option("--seed", st.cfg.run.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        apply_enum_strings(st);
        if (train->parsed()) {
            validate_config(st.cfg);
            return cmd_train(st);
        }
        if (rollout->parsed()) {
            validate_config(st.cfg);
            return cmd_rollout(st);
        }
        if (variance->parsed()) return cmd_variance_check(st);
        if (buffer->parsed()) return cmd_buffer(st);
        if (compare->parsed()) {
            validate_config(st.cfg);
            return cmd_compare(st);
        }
        if (gradcheck->parsed()) return cmd_gradcheck(st);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}

}  // namespace metarl
