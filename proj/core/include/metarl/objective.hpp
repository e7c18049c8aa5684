// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

#include "metarl/policy.hpp"
#include "metarl/templates.hpp"
#include "metarl/types.hpp"

namespace metarl {

struct ClipConfig {
    double eps_low = 0.20;
    double eps_high = 0.28;
    void validate() const;  // 0 < eps_low <= eps_high < 1
};

// (reward - mean) / population std, one advantage per sample; all tokens of a
// sample share it. Throws DegenerateGroupError when rewards are all equal.
std::vector<double> normalize_advantages(std::span<const int> rewards);

// One token's clipped surrogate: min(ratio*adv, clip(ratio)*adv).
double dapo_token_term(double ratio, double advantage, const ClipConfig& clip);

struct LossResult {
    double value = 0.0;
    GradientVector grad;  // empty when gradient not requested
};

// Token-level clipped policy loss over the batch:
//   -(1/sum_i |o_i|) * sum_i sum_t min(r_{i,t} A_i, clip(r_{i,t}) A_i),
// with r = exp(new - old) against the log-probs stored at sampling time.
// Requires normalized advantages on every group. Gradients flow only through
// tokens whose min-branch is the unclipped one (exact subgradient).
LossResult dapo_loss(const std::vector<RolloutGroup>& groups, const PolicyBackend& backend,
                     const ClipConfig& clip, bool want_grad = true);

// Mean NLL per target token, averaged over pairs; empty input -> (0, zeros).
LossResult sft_loss(const std::vector<SftPair>& pairs, const PolicyBackend& backend,
                    bool want_grad = true);

struct CombinedLoss {
    double dapo = 0.0;
    double sft = 0.0;
    double total = 0.0;  // dapo + lambda * sft
    GradientVector grad;
};

CombinedLoss combined_loss(const std::vector<RolloutGroup>& groups,
                           const std::vector<SftPair>& pairs, const ClipConfig& clip,
                           double lambda, const PolicyBackend& backend, bool want_grad = true);

// Central-difference check of an analytic gradient: perturbs each parameter
// by ±step, re-evaluates `loss_value`, and returns
// max_p |analytic_p - numeric_p| / max(1, |numeric_p|).
// Restores the original parameters afterwards.
double finite_diff_check(const std::function<double()>& loss_value,
                         std::span<const double> analytic_grad, PolicyBackend& backend,
                         double step);

}  // namespace metarl
