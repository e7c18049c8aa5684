// SPDX-License-Identifier: Apache-2.0
#include "metarl/rollout.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "metarl/errors.hpp"
#include "metarl/rng.hpp"
#include "metarl/verify.hpp"

namespace metarl {

namespace {

// The reflection prompt shows one wrong solution; of the G failures we pick
// the one carrying the most parsed sub-problem steps (first sampled on ties)
// so the revision prompt has the richest structure available.
StructuredSolution best_failed_attempt(const RolloutGroup& group) {
    StructuredSolution best;
    std::size_t best_steps = 0;
    bool have = false;
    for (const CompletionSample& sample : group.samples) {
        StructuredSolution sol = parse_structured(sample.text);
        if (!have || sol.steps.size() > best_steps) {
            best_steps = sol.steps.size();
            best = std::move(sol);
            have = true;
        }
    }
    return best;
}

void offer_to_metabuffer(const Problem& problem, const RolloutGroup& group,
                         MetacogBuffer& metabuffer, int& insertions) {
    for (const CompletionSample& sample : group.samples) {
        if (sample.reward != 1) continue;
        StructuredSolution sol = parse_structured(sample.text);
        if (sol.steps.empty()) continue;  // nothing demonstrable without steps
        MetacogEntry entry;
        entry.problem = problem.question;
        entry.steps = std::move(sol.steps);
        entry.final_answer = std::move(sol.final_answer);
        if (metabuffer.insert_if_correct(std::move(entry), sample.reward)) ++insertions;
    }
}

void record_stage(StageCounters& counters, const StageResult& result) {
    counters.groups_sampled += result.groups_sampled;
    counters.groups_valid += static_cast<int>(result.kept.size());
    counters.correct_samples += result.correct_samples;
}

void absorb_groups(std::vector<RolloutGroup>&& kept, DynamicSamplingBuffer& buffer,
                   FillStats& stats) {
    for (RolloutGroup& group : kept) {
        if (buffer.groups.size() < buffer.target_size) {
            buffer.groups.push_back(std::move(group));
        } else {
            ++stats.overflow_discarded;
        }
    }
}

}  // namespace

StageResult run_stage(StageTag stage, const std::vector<StageProblem>& problems,
                      PolicyBackend& backend, MetacogBuffer& metabuffer,
                      const TemplateSet& templates, int group_size, const Bm25Params& bm25) {
    if (group_size < 1) throw ConfigError("run_stage: group_size must be >= 1");
    const TemplateKind kind = template_for(stage);
    StageResult out;
    for (const StageProblem& sp : problems) {
        RenderedPrompt prompt;
        if (kind == TemplateKind::Decomposition) {
            // Copied out of the buffer: this stage inserts as it goes, and
            // insertions may evict or replace the entry behind a reference.
            MetacogEntry demo = metabuffer.empty()
                                    ? seed_demonstration()
                                    : metabuffer.retrieve_best(sp.problem.question, bm25);
            prompt = templates.render(kind, sp.problem.question, &demo, nullptr);
        } else if (kind == TemplateKind::Reflection) {
            if (!sp.prior) {
                throw std::invalid_argument(
                    "run_stage: reflection requires the prior failed attempt");
            }
            prompt = templates.render(kind, sp.problem.question, nullptr, &*sp.prior);
        } else {
            prompt = templates.render(kind, sp.problem.question);
        }

        RolloutGroup group;
        group.problem = sp.problem;
        group.stage = stage;
        group.prompt_text = prompt.text;
        group.samples = backend.sample_group(prompt, group_size);

        const verify::AnswerKey key = verify::make_key(sp.problem.answer);
        group.rewards.reserve(group.samples.size());
        for (CompletionSample& sample : group.samples) {
            sample.kind = kind;
            sample.stage = stage;
            if (sample.failed) {
                sample.extracted.reset();
                sample.reward = -1;
            } else {
                sample.extracted = verify::extract_answer(sample.text);
                sample.reward = verify::binary_reward(key, sample.text);
            }
            group.rewards.push_back(sample.reward);
            if (sample.reward == 1) ++out.correct_samples;
        }
        group.accuracy = verify::group_accuracy(group.rewards);
        ++out.groups_sampled;

        // Insertion happens before the accuracy filter on purpose: a solved
        // group is useless for training but its solutions still demonstrate.
        if (stage == StageTag::DecompositionRollout) {
            offer_to_metabuffer(sp.problem, group, metabuffer, out.buffer_insertions);
        }

        if (group.accuracy == 1.0) {
            ++out.full_accuracy_discarded;
        } else if (group.accuracy == 0.0) {
            out.zero_accuracy.push_back({sp.problem, best_failed_attempt(group)});
        } else {
            out.kept.push_back(std::move(group));
        }
    }
    return out;
}

FillResult fill_batch(const std::vector<Problem>& problems, PolicyBackend& backend,
                      MetacogBuffer& metabuffer, const TemplateSet& templates,
                      const StepConfig& cfg, const Bm25Params& bm25) {
    if (cfg.buffer_target < 1) throw ConfigError("fill_batch: buffer_target must be >= 1");
    FillResult out;
    out.buffer.target_size = static_cast<std::size_t>(cfg.buffer_target);

    std::vector<StageProblem> pending;
    pending.reserve(problems.size());
    for (const Problem& p : problems) pending.push_back({p, std::nullopt});

    StageResult direct = run_stage(StageTag::DirectRollout, pending, backend, metabuffer,
                                   templates, cfg.group_size, bm25);
    record_stage(out.stats.direct, direct);
    out.stats.buffer_insertions += direct.buffer_insertions;
    out.stats.generated_batches += direct.groups_sampled;
    absorb_groups(std::move(direct.kept), out.buffer, out.stats);

    const auto under_target = [&] { return out.buffer.groups.size() < out.buffer.target_size; };

    if (cfg.mode == Mode::Cascade && under_target() && !direct.zero_accuracy.empty()) {
        StageResult dec = run_stage(StageTag::DecompositionRollout, direct.zero_accuracy,
                                    backend, metabuffer, templates, cfg.group_size, bm25);
        record_stage(out.stats.decomposition, dec);
        out.stats.buffer_insertions += dec.buffer_insertions;
        out.stats.generated_batches += dec.groups_sampled;
        absorb_groups(std::move(dec.kept), out.buffer, out.stats);

        if (under_target() && !dec.zero_accuracy.empty()) {
            StageResult ref = run_stage(StageTag::ReflectionRollout, dec.zero_accuracy, backend,
                                        metabuffer, templates, cfg.group_size, bm25);
            record_stage(out.stats.reflection, ref);
            out.stats.buffer_insertions += ref.buffer_insertions;
            out.stats.generated_batches += ref.groups_sampled;
            absorb_groups(std::move(ref.kept), out.buffer, out.stats);
        }
    }
    return out;
}

StepReport train_step(DynamicSamplingBuffer& buffer, const MetacogBuffer& metabuffer,
                      PolicyBackend& backend, const TemplateSet& templates,
                      const ObjectiveConfig& objective, int mu, const SftObserver& observer) {
    if (buffer.groups.empty()) throw std::invalid_argument("train_step: empty buffer");
    if (mu < 1) throw ConfigError("train_step: mu must be >= 1");
    objective.clip.validate();

    StepReport report;
    report.buffer_occupancy = static_cast<int>(buffer.groups.size());
    report.metabuffer_size = metabuffer.size();

    std::vector<SftPair> pairs;
    for (RolloutGroup& group : buffer.groups) {
        group.advantages = normalize_advantages(group.rewards);
        for (const CompletionSample& sample : group.samples) {
            switch (sample.stage) {
                case StageTag::DirectRollout: ++report.direct_samples; break;
                case StageTag::DecompositionRollout: ++report.decomposition_samples; break;
                case StageTag::ReflectionRollout: ++report.reflection_samples; break;
            }
            if (sample.stage == StageTag::DirectRollout || sample.reward != 1) continue;
            StructuredSolution sol = parse_structured(sample.text);
            SftPair pair = rewrite_to_direct(templates, group.problem.question, sample, sol);
            if (observer) observer(group.problem, pair);
            pairs.push_back(std::move(pair));
        }
    }
    report.sft_pair_count = static_cast<int>(pairs.size());

    for (int iter = 0; iter < mu; ++iter) {
        CombinedLoss loss = combined_loss(buffer.groups, pairs, objective.clip, objective.lambda,
                                          backend, /*want_grad=*/true);
        report.dapo_losses.push_back(loss.dapo);
        report.sft_losses.push_back(loss.sft);
        report.combined_losses.push_back(loss.total);
        backend.apply_gradient(loss.grad, objective.learning_rate);
    }
    return report;
}

double evaluate_accuracy(const std::vector<Problem>& holdout, PolicyBackend& backend,
                         const TemplateSet& templates, int maj_n) {
    if (holdout.empty()) throw std::invalid_argument("evaluate_accuracy: empty holdout");
    if (maj_n < 1) throw ConfigError("evaluate_accuracy: maj_n must be >= 1");
    int correct = 0;
    for (const Problem& problem : holdout) {
        RenderedPrompt prompt = templates.render(TemplateKind::Direct, problem.question);
        std::vector<CompletionSample> samples = backend.sample_group(prompt, maj_n);
        const verify::AnswerKey key = verify::make_key(problem.answer);

        // Majority vote over normalized extracted answers; unanswered samples
        // abstain; ties go to the answer seen first.
        std::vector<std::pair<std::string, int>> votes;  // insertion-ordered
        for (const CompletionSample& sample : samples) {
            if (sample.failed) continue;
            std::optional<std::string> extracted = verify::extract_answer(sample.text);
            if (!extracted) continue;
            std::string norm = verify::normalize_answer(*extracted);
            auto it = std::find_if(votes.begin(), votes.end(),
                                   [&](const auto& v) { return v.first == norm; });
            if (it == votes.end()) {
                votes.push_back({std::move(norm), 1});
            } else {
                ++it->second;
            }
        }
        if (votes.empty()) continue;
        const auto* winner = &votes.front();
        for (const auto& v : votes) {
            if (v.second > winner->second) winner = &v;
        }
        if (winner->first == key.normalized) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(holdout.size());
}

TrainLoopResult train_loop(const std::vector<Problem>& dataset,
                           const std::vector<Problem>& holdout, PolicyBackend& backend,
                           MetacogBuffer& metabuffer, const TemplateSet& templates,
                           const TrainLoopConfig& cfg, const TrainLoopHooks& hooks) {
    if (cfg.steps < 0) throw ConfigError("train_loop: steps must be >= 0");
    if (cfg.step.prompts_per_step < 1) {
        throw ConfigError("train_loop: prompts_per_step must be >= 1");
    }
    if (cfg.step.group_size < 1) throw ConfigError("train_loop: group_size must be >= 1");
    if (cfg.eval_every < 0) throw ConfigError("train_loop: eval_every must be >= 0");
    if (cfg.eval_maj_n < 1) throw ConfigError("train_loop: eval_maj_n must be >= 1");
    if (cfg.snapshot_every < 0) throw ConfigError("train_loop: snapshot_every must be >= 0");
    if (cfg.steps > 0 && dataset.empty()) throw ConfigError("train_loop: empty dataset");

    const Capabilities caps = backend.capabilities();
    const bool update = cfg.update_enabled && caps.can_update && caps.can_score;

    TrainLoopResult out;
    long long cumulative = 0;
    const std::size_t draw =
        std::min<std::size_t>(dataset.size(), static_cast<std::size_t>(cfg.step.prompts_per_step));

    std::vector<std::size_t> indices(dataset.size());
    for (int step = 1; step <= cfg.steps; ++step) {
        // Unique prompts within a step, redrawn across steps.
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.seed, 0x73616d70, static_cast<std::uint64_t>(step)));
        std::vector<Problem> problems;
        problems.reserve(draw);
        for (std::size_t i = 0; i < draw; ++i) {
            const std::size_t j =
                static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                         static_cast<std::int64_t>(indices.size() - 1)));
            std::swap(indices[i], indices[j]);
            problems.push_back(dataset[indices[i]]);
        }

        FillResult fill = fill_batch(problems, backend, metabuffer, templates, cfg.step, cfg.bm25);
        cumulative += fill.stats.generated_batches;

        MetricsRow row;
        row.step = step;
        row.direct_groups = fill.stats.direct.groups_sampled;
        row.decomposition_groups = fill.stats.decomposition.groups_sampled;
        row.reflection_groups = fill.stats.reflection.groups_sampled;
        row.direct_correct = fill.stats.direct.correct_samples;
        row.decomposition_correct = fill.stats.decomposition.correct_samples;
        row.reflection_correct = fill.stats.reflection.correct_samples;
        row.valid_groups = fill.stats.direct.groups_valid + fill.stats.decomposition.groups_valid +
                           fill.stats.reflection.groups_valid;
        row.buffer_groups = static_cast<int>(fill.buffer.groups.size());
        row.cumulative_batches = cumulative;
        row.metabuffer_size = static_cast<int>(metabuffer.size());

        row.skip = fill.buffer.groups.empty() ||
                   (cfg.step.strict_fill && fill.buffer.groups.size() < fill.buffer.target_size);
        if (!row.skip && update) {
            StepReport rep = train_step(fill.buffer, metabuffer, backend, templates,
                                        cfg.objective, cfg.step.mu, hooks.on_sft_pair);
            row.loss_dapo = rep.dapo_losses.back();
            row.loss_sft = rep.sft_losses.back();
            row.loss_combined = rep.combined_losses.back();
            row.sft_pairs = rep.sft_pair_count;
        }
        if (cfg.eval_every > 0 && step % cfg.eval_every == 0 && !holdout.empty()) {
            row.eval_accuracy = evaluate_accuracy(holdout, backend, templates, cfg.eval_maj_n);
        }

        if (hooks.on_batch) hooks.on_batch(step, fill.buffer);
        if (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 && hooks.on_snapshot) {
            hooks.on_snapshot(step, metabuffer);
        }
        if (hooks.on_row) hooks.on_row(row);
        out.rows.push_back(std::move(row));
    }
    out.total_batches = cumulative;
    return out;
}

}  // namespace metarl
