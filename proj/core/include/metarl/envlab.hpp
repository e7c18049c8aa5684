// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metarl/policy.hpp"
#include "metarl/types.hpp"
#include "metarl/verify.hpp"

namespace metarl::envlab {

enum class ChainOp { Add, Sub, Mul };

ChainOp chain_op_from_string(const std::string& s);
const char* to_string(ChainOp op);

// Family of length-H left-to-right arithmetic chains ("2+3*4" means
// (2+3)*4). The oracle decomposition splits the chain into k consecutive
// segments of H' = H/k operations each; the reflective horizon is
// H'' = ceil(gamma * H').
struct ChainTaskSpec {
    int horizon = 12;      // H: number of operations
    int sub_count = 3;     // k: sub-problems per task, divides H
    double gamma = 0.5;
    long long operand_min = 2;
    long long operand_max = 9;
    std::vector<ChainOp> operations = {ChainOp::Add};
    std::uint64_t seed = 0;

    int sub_horizon() const { return horizon / sub_count; }  // H'
    int reflect_horizon() const;                             // H''
    void validate() const;
    // H'' < H' < H: the regime where the three stages are genuinely distinct.
    bool strictly_hierarchical() const;
};

struct SyntheticTask {
    Problem problem;
    verify::AnswerKey ground_truth;
    StructuredSolution decomposition;     // k oracle steps
    std::vector<long long> operands;      // initial value + one operand per op
    std::vector<ChainOp> ops;             // H operations
    std::vector<long long> intermediates; // H+1 running values, [0] = start
};

std::vector<SyntheticTask> generate_tasks(const ChainTaskSpec& spec, int count);

// Exact left-to-right re-evaluation; must match the stored ground truth.
verify::AnswerKey oracle_solve(const SyntheticTask& task);

struct VarianceEstimate {
    double variance = 0.0;   // trace of the gradient covariance
    double halfwidth = 0.0;  // 95% CI halfwidth of the trace estimate
    long long rollouts = 0;
};

// Monte Carlo trace-of-covariance of the REINFORCE-style estimator
// g = sum_t grad log pi(a_t | ctx_t) * G_t over independent episodes.
// Horizons by stage: H (direct), k sub-episodes of H' each (decomposition),
// and the H'' suffix of the first failed sub-episode with the oracle-correct
// prefix fixed (reflection). Per-step reward is 1 when the sampled action
// matches the chain's intermediate value mod vocab, else 0 — a bounded
// [0,1] reward, deliberately different from the trainer's ±1 terminal reward.
VarianceEstimate estimate_gradient_variance(StageTag stage, const ChainTaskSpec& spec,
                                            const SoftmaxSequencePolicy& policy,
                                            long long rollouts);

struct VarianceReport {
    VarianceEstimate direct;
    VarianceEstimate decomposition;
    VarianceEstimate reflection;
    double ref_dec_ratio = 0.0;       // Var(reflection) / Var(decomposition)
    bool ordering_satisfied = false;  // Var(dec) < Var(dir) at 95%, Var(ref) <= Var(dec)
};

// Runs all three stages on shared task streams and checks the variance chain.
VarianceReport check_ordering(const ChainTaskSpec& spec, const SoftmaxSequencePolicy& policy,
                              long long rollouts);

}  // namespace metarl::envlab
