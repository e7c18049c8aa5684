// SPDX-License-Identifier: Apache-2.0
#include "metarl/envlab.hpp"

#include <cmath>
#include <stdexcept>

#include "metarl/errors.hpp"
#include "metarl/rng.hpp"

namespace metarl::envlab {
namespace {

constexpr long long kMagnitudeLimit = 1000000000000000LL;  // 1e15 overflow guard
constexpr int kMaxRegenerate = 200;

char op_char(ChainOp op) {
    switch (op) {
        case ChainOp::Add: return '+';
        case ChainOp::Sub: return '-';
        case ChainOp::Mul: return '*';
    }
    return '?';
}

long long apply_op(long long lhs, ChainOp op, long long rhs) {
    switch (op) {
        case ChainOp::Add: return lhs + rhs;
        case ChainOp::Sub: return lhs - rhs;
        case ChainOp::Mul: return lhs * rhs;
    }
    throw std::invalid_argument("apply_op: bad operation");
}

// Operands, ops, and running values only — no strings. The variance lab
// draws millions of these, so task text is built separately.
struct ChainDraw {
    std::vector<long long> operands;
    std::vector<ChainOp> ops;
    std::vector<long long> intermediates;
};

bool draw_chain(const ChainTaskSpec& spec, Rng& rng, ChainDraw& out) {
    out.operands.clear();
    out.ops.clear();
    out.intermediates.clear();
    const long long lo = spec.operand_min;
    const long long hi = spec.operand_max;
    long long v = rng.uniform_int(lo, hi);
    out.operands.push_back(v);
    out.intermediates.push_back(v);
    for (int i = 0; i < spec.horizon; ++i) {
        const ChainOp op = spec.operations[rng.next_below(spec.operations.size())];
        const long long operand = rng.uniform_int(lo, hi);
        v = apply_op(v, op, operand);
        if (v > kMagnitudeLimit || v < -kMagnitudeLimit) return false;  // reject, resample
        out.operands.push_back(operand);
        out.ops.push_back(op);
        out.intermediates.push_back(v);
    }
    return true;
}

ChainDraw draw_chain_rejecting(const ChainTaskSpec& spec, Rng& rng) {
    ChainDraw draw;
    for (int attempt = 0; attempt < kMaxRegenerate; ++attempt) {
        if (draw_chain(spec, rng, draw)) return draw;
    }
    throw std::runtime_error(
        "generate_tasks: operand overflow persisted beyond the rejection budget; "
        "narrow the operand range or horizon");
}

std::string chain_text(const ChainDraw& d, std::size_t first_op, std::size_t last_op,
                       long long start) {
    std::string text = std::to_string(start);
    for (std::size_t i = first_op; i < last_op; ++i) {
        text.push_back(op_char(d.ops[i]));
        text += std::to_string(d.operands[i + 1]);
    }
    return text;
}

std::string difficulty_of(int horizon) {
    if (horizon <= 4) return "easy";
    if (horizon <= 8) return "medium";
    return "hard";
}

}  // namespace

ChainOp chain_op_from_string(const std::string& s) {
    if (s == "add") return ChainOp::Add;
    if (s == "sub") return ChainOp::Sub;
    if (s == "mul") return ChainOp::Mul;
    throw ConfigError("unknown chain operation '" + s + "' (expected add | sub | mul)");
}

const char* to_string(ChainOp op) {
    switch (op) {
        case ChainOp::Add: return "add";
        case ChainOp::Sub: return "sub";
        case ChainOp::Mul: return "mul";
    }
    return "?";
}

int ChainTaskSpec::reflect_horizon() const {
    return static_cast<int>(std::ceil(gamma * sub_horizon()));
}

void ChainTaskSpec::validate() const {
    if (horizon < 1) throw ConfigError("chain spec: horizon must be >= 1");
    if (sub_count < 1) throw ConfigError("chain spec: sub_count must be >= 1");
    if (horizon % sub_count != 0) throw ConfigError("chain spec: sub_count must divide horizon");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("chain spec: gamma must be in (0,1)");
    if (operand_min > operand_max) throw ConfigError("chain spec: operand range is empty");
    if (operand_min < 0) throw ConfigError("chain spec: operands must be nonnegative");
    if (operand_max > 1000000) throw ConfigError("chain spec: operand range too large");
    if (operations.empty()) throw ConfigError("chain spec: operations must be nonempty");
}

bool ChainTaskSpec::strictly_hierarchical() const {
    return reflect_horizon() < sub_horizon() && sub_horizon() < horizon;
}

std::vector<SyntheticTask> generate_tasks(const ChainTaskSpec& spec, int count) {
    spec.validate();
    if (count < 0) throw std::invalid_argument("generate_tasks: count must be >= 0");
    Rng rng(derive_seed(spec.seed, 0x7461736bULL));
    const int sub_h = spec.sub_horizon();

    std::vector<SyntheticTask> tasks;
    tasks.reserve(static_cast<std::size_t>(count));
    for (int idx = 0; idx < count; ++idx) {
        ChainDraw d = draw_chain_rejecting(spec, rng);
        SyntheticTask task;
        task.operands = d.operands;
        task.ops = d.ops;
        task.intermediates = d.intermediates;

        const std::string answer = std::to_string(d.intermediates.back());
        task.problem.id = idx;
        task.problem.question = chain_text(d, 0, d.ops.size(), d.operands[0]);
        task.problem.answer = answer;
        task.problem.difficulty = difficulty_of(spec.horizon);
        task.ground_truth = verify::make_key(answer);

        for (int j = 0; j < spec.sub_count; ++j) {
            const std::size_t first = static_cast<std::size_t>(j) * sub_h;
            const std::size_t last = first + sub_h;
            SolutionStep step;
            step.subquestion = "Evaluate left to right: " +
                               chain_text(d, first, last, d.intermediates[first]);
            step.subanswer = std::to_string(d.intermediates[last]);
            task.decomposition.steps.push_back(std::move(step));
        }
        task.decomposition.final_answer = answer;
        task.decomposition.raw = serialize_solution(task.decomposition);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

verify::AnswerKey oracle_solve(const SyntheticTask& task) {
    if (task.operands.size() != task.ops.size() + 1) {
        throw std::invalid_argument("oracle_solve: malformed task");
    }
    long long v = task.operands[0];
    for (std::size_t i = 0; i < task.ops.size(); ++i) {
        v = apply_op(v, task.ops[i], task.operands[i + 1]);
    }
    return verify::make_key(std::to_string(v));
}

namespace {

// Correct action for global step u (0-based): the post-step running value
// reduced into the policy's action space.
int correct_action(const ChainDraw& d, std::size_t u, int vocab) {
    const long long v = d.intermediates[u + 1];
    const long long m = ((v % vocab) + vocab) % vocab;
    return static_cast<int>(m);
}

// One REINFORCE episode segment: samples steps [first,last) of the chain,
// starting from `ctx`, and accumulates grad log pi * reward-to-go into g.
// Returns the rewards drawn (for failure detection by the caller).
void run_segment(const SoftmaxSequencePolicy& policy, const ChainDraw& d, std::size_t first,
                 std::size_t last, int ctx, Rng& rng, std::vector<double>& g) {
    const int vocab = policy.vocab_size();
    std::vector<int> contexts;
    std::vector<int> actions;
    std::vector<double> rewards;
    for (std::size_t u = first; u < last; ++u) {
        const int a = policy.sample_token(ctx, rng);
        contexts.push_back(ctx);
        actions.push_back(a);
        rewards.push_back(a == correct_action(d, u, vocab) ? 1.0 : 0.0);
        ctx = policy.context_order() == 0 ? 0 : a + 1;
    }
    double to_go = 0.0;
    std::vector<double> returns(rewards.size());
    for (std::size_t t = rewards.size(); t-- > 0;) {
        to_go += rewards[t];
        returns[t] = to_go;
    }
    for (std::size_t t = 0; t < actions.size(); ++t) {
        policy.add_logprob_grad(contexts[t], actions[t], returns[t], g);
    }
}

// Samples steps [first,last) without touching gradients; true iff every
// sampled action was correct. Used to locate the first failed sub-problem.
bool probe_segment(const SoftmaxSequencePolicy& policy, const ChainDraw& d, std::size_t first,
                   std::size_t last, int ctx, Rng& rng) {
    const int vocab = policy.vocab_size();
    bool all_correct = true;
    for (std::size_t u = first; u < last; ++u) {
        const int a = policy.sample_token(ctx, rng);
        if (a != correct_action(d, u, vocab)) all_correct = false;
        ctx = policy.context_order() == 0 ? 0 : a + 1;
    }
    return all_correct;
}

std::uint64_t stage_stream(StageTag stage) {
    switch (stage) {
        case StageTag::DirectRollout: return 1;
        case StageTag::DecompositionRollout: return 2;
        case StageTag::ReflectionRollout: return 3;
    }
    return 0;
}

}  // namespace

VarianceEstimate estimate_gradient_variance(StageTag stage, const ChainTaskSpec& spec,
                                            const SoftmaxSequencePolicy& policy,
                                            long long rollouts) {
    spec.validate();
    if (rollouts < 1000) {
        throw std::invalid_argument("estimate_gradient_variance: need at least 1000 rollouts");
    }
    if (rollouts > 2000000) {
        // Episode gradients are held in memory for the two-pass trace estimate.
        throw std::invalid_argument("estimate_gradient_variance: rollout budget too large");
    }
    const std::size_t dim = policy.param_count();
    const int sub_h = spec.sub_horizon();
    const int ref_h = spec.reflect_horizon();
    const std::size_t n = static_cast<std::size_t>(rollouts);

    std::vector<std::vector<double>> grads(n);
    std::vector<double> g(dim);
    for (std::size_t e = 0; e < n; ++e) {
        // Task stream shared across stages (paired episodes); action stream
        // is stage-specific.
        Rng task_rng(derive_seed(spec.seed, 0x7061ULL, e));
        Rng act_rng(derive_seed(spec.seed, stage_stream(stage), e));
        const ChainDraw d = draw_chain_rejecting(spec, task_rng);

        std::fill(g.begin(), g.end(), 0.0);
        switch (stage) {
            case StageTag::DirectRollout:
                run_segment(policy, d, 0, static_cast<std::size_t>(spec.horizon), 0, act_rng, g);
                break;
            case StageTag::DecompositionRollout:
                for (int j = 0; j < spec.sub_count; ++j) {
                    const std::size_t first = static_cast<std::size_t>(j) * sub_h;
                    run_segment(policy, d, first, first + sub_h, 0, act_rng, g);
                }
                break;
            case StageTag::ReflectionRollout: {
                // Locate the first failed sub-problem in a throwaway attempt,
                // then resample only its H'' suffix behind the oracle prefix.
                int failed = spec.sub_count - 1;
                for (int j = 0; j < spec.sub_count; ++j) {
                    const std::size_t first = static_cast<std::size_t>(j) * sub_h;
                    if (!probe_segment(policy, d, first, first + sub_h, 0, act_rng)) {
                        failed = j;
                        break;
                    }
                }
                const std::size_t first = static_cast<std::size_t>(failed) * sub_h;
                const std::size_t prefix = static_cast<std::size_t>(sub_h - ref_h);
                int ctx = 0;
                if (policy.context_order() == 1 && prefix > 0) {
                    ctx = correct_action(d, first + prefix - 1, policy.vocab_size()) + 1;
                }
                run_segment(policy, d, first + prefix, first + sub_h, ctx, act_rng, g);
                break;
            }
        }
        grads[e] = g;
    }

    std::vector<double> mean(dim, 0.0);
    for (const auto& ge : grads) {
        for (std::size_t p = 0; p < dim; ++p) mean[p] += ge[p];
    }
    for (double& m : mean) m /= static_cast<double>(n);

    // Trace of covariance via squared distances to the mean; the same
    // per-episode scalars give the CI on the estimate.
    std::vector<double> sq(n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
        double s = 0.0;
        for (std::size_t p = 0; p < dim; ++p) {
            const double dlt = grads[e][p] - mean[p];
            s += dlt * dlt;
        }
        sq[e] = s;
    }
    double sq_mean = 0.0;
    for (double s : sq) sq_mean += s;
    sq_mean /= static_cast<double>(n);
    double sq_var = 0.0;
    for (double s : sq) {
        const double dlt = s - sq_mean;
        sq_var += dlt * dlt;
    }
    sq_var /= static_cast<double>(n - 1);

    VarianceEstimate est;
    est.rollouts = rollouts;
    est.variance = sq_mean * static_cast<double>(n) / static_cast<double>(n - 1);
    est.halfwidth = 1.96 * std::sqrt(sq_var / static_cast<double>(n));
    return est;
}

VarianceReport check_ordering(const ChainTaskSpec& spec, const SoftmaxSequencePolicy& policy,
                              long long rollouts) {
    VarianceReport report;
    report.direct = estimate_gradient_variance(StageTag::DirectRollout, spec, policy, rollouts);
    report.decomposition =
        estimate_gradient_variance(StageTag::DecompositionRollout, spec, policy, rollouts);
    report.reflection =
        estimate_gradient_variance(StageTag::ReflectionRollout, spec, policy, rollouts);
    report.ref_dec_ratio = report.decomposition.variance > 0.0
                               ? report.reflection.variance / report.decomposition.variance
                               : 0.0;
    const bool dec_below_dir = report.decomposition.variance + report.decomposition.halfwidth <
                               report.direct.variance - report.direct.halfwidth;
    report.ordering_satisfied =
        dec_below_dir && report.reflection.variance <= report.decomposition.variance;
    return report;
}

}  // namespace metarl::envlab
