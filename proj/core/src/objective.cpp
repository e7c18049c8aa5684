// SPDX-License-Identifier: Apache-2.0
#include "metarl/objective.hpp"

#include <cmath>
#include <stdexcept>

#include "metarl/errors.hpp"

namespace metarl {

void ClipConfig::validate() const {
    if (!(eps_low > 0.0 && eps_low <= eps_high && eps_high < 1.0)) {
        throw ConfigError("clip range must satisfy 0 < eps_low <= eps_high < 1");
    }
}

std::vector<double> normalize_advantages(std::span<const int> rewards) {
    if (rewards.empty()) throw std::invalid_argument("normalize_advantages: empty rewards");
    double mean = 0.0;
    for (int r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());

    double var = 0.0;
    for (int r : rewards) {
        const double d = r - mean;
        var += d * d;
    }
    var /= static_cast<double>(rewards.size());  // population variance
    if (var == 0.0) {
        throw DegenerateGroupError(
            "normalize_advantages: all rewards equal; group violates the accuracy filter");
    }
    const double sd = std::sqrt(var);
    std::vector<double> out;
    out.reserve(rewards.size());
    for (int r : rewards) out.push_back((r - mean) / sd);
    return out;
}

double dapo_token_term(double ratio, double advantage, const ClipConfig& clip) {
    clip.validate();
    const double lo = 1.0 - clip.eps_low;
    const double hi = 1.0 + clip.eps_high;
    const double clipped = ratio < lo ? lo : (ratio > hi ? hi : ratio);
    return std::min(ratio * advantage, clipped * advantage);
}

namespace {

// Per-group shape checks shared by the loss paths.
void validate_group(const RolloutGroup& g) {
    const std::size_t n = g.samples.size();
    if (n == 0) throw std::invalid_argument("dapo_loss: group has no samples");
    if (g.rewards.size() != n) throw std::invalid_argument("dapo_loss: rewards/samples mismatch");
    if (g.advantages.size() != n) {
        throw std::invalid_argument("dapo_loss: advantages missing — normalize before the loss");
    }
    for (const auto& s : g.samples) {
        if (s.logprobs.size() != s.tokens.size()) {
            throw std::invalid_argument("dapo_loss: stored old log-probs do not match token count");
        }
    }
}

}  // namespace

LossResult dapo_loss(const std::vector<RolloutGroup>& groups, const PolicyBackend& backend,
                     const ClipConfig& clip, bool want_grad) {
    clip.validate();
    LossResult res;
    if (want_grad) res.grad.values.assign(backend.param_count(), 0.0);

    std::size_t total_tokens = 0;
    for (const auto& g : groups) {
        validate_group(g);
        for (const auto& s : g.samples) total_tokens += s.tokens.size();
    }
    if (total_tokens == 0) return res;

    const double lo = 1.0 - clip.eps_low;
    const double hi = 1.0 + clip.eps_high;
    const double inv_total = 1.0 / static_cast<double>(total_tokens);

    double acc = 0.0;
    std::vector<double> coeffs;
    for (const auto& g : groups) {
        for (std::size_t i = 0; i < g.samples.size(); ++i) {
            const auto& s = g.samples[i];
            if (s.tokens.empty()) continue;
            const double adv = g.advantages[i];
            const auto new_lp = backend.score_tokens(g.prompt_text, s.tokens);
            if (new_lp.size() != s.tokens.size()) {
                throw std::invalid_argument("dapo_loss: backend returned wrong score length");
            }
            coeffs.assign(s.tokens.size(), 0.0);
            for (std::size_t t = 0; t < s.tokens.size(); ++t) {
                const double ratio = std::exp(new_lp[t] - s.logprobs[t]);
                const double unclipped = ratio * adv;
                const double clipped = (ratio < lo ? lo : (ratio > hi ? hi : ratio)) * adv;
                acc += std::min(unclipped, clipped);
                // d(min)/d(new_lp): the unclipped branch contributes
                // ratio*adv; a binding clip contributes zero.
                if (unclipped <= clipped) coeffs[t] = -inv_total * unclipped;
            }
            if (want_grad) {
                backend.accumulate_score_grad(g.prompt_text, s.tokens, coeffs, res.grad.values);
            }
        }
    }
    res.value = -acc * inv_total;
    return res;
}

LossResult sft_loss(const std::vector<SftPair>& pairs, const PolicyBackend& backend,
                    bool want_grad) {
    LossResult res;
    if (want_grad) res.grad.values.assign(backend.param_count(), 0.0);
    if (pairs.empty()) return res;

    const double inv_pairs = 1.0 / static_cast<double>(pairs.size());
    std::vector<double> coeffs;
    for (const auto& pair : pairs) {
        const auto tokens = backend.encode(pair.target);
        if (tokens.empty()) continue;  // nothing scoreable in this target
        const auto lp = backend.score_tokens(pair.prompt, tokens);
        const double inv_len = 1.0 / static_cast<double>(tokens.size());
        double nll = 0.0;
        for (double v : lp) nll -= v;
        res.value += inv_pairs * inv_len * nll;
        if (want_grad) {
            coeffs.assign(tokens.size(), -inv_pairs * inv_len);
            backend.accumulate_score_grad(pair.prompt, tokens, coeffs, res.grad.values);
        }
    }
    return res;
}

CombinedLoss combined_loss(const std::vector<RolloutGroup>& groups,
                           const std::vector<SftPair>& pairs, const ClipConfig& clip,
                           double lambda, const PolicyBackend& backend, bool want_grad) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("combined_loss: lambda must be a nonnegative real");
    }
    const LossResult d = dapo_loss(groups, backend, clip, want_grad);
    const LossResult s = sft_loss(pairs, backend, want_grad);
    CombinedLoss out;
    out.dapo = d.value;
    out.sft = s.value;
    out.total = d.value + lambda * s.value;
    if (want_grad) {
        out.grad.values.assign(backend.param_count(), 0.0);
        for (std::size_t i = 0; i < out.grad.values.size(); ++i) {
            out.grad.values[i] = d.grad.values[i] + lambda * s.grad.values[i];
        }
    }
    return out;
}

double finite_diff_check(const std::function<double()>& loss_value,
                         std::span<const double> analytic_grad, PolicyBackend& backend,
                         double step) {
    if (!(step >= 1e-7 && step <= 1e-3)) {
        throw std::invalid_argument("finite_diff_check: step must be in [1e-7, 1e-3]");
    }
    auto theta = backend.params();
    if (analytic_grad.size() != theta.size()) {
        throw std::invalid_argument("finite_diff_check: gradient dimension mismatch");
    }

    double max_rel = 0.0;
    for (std::size_t p = 0; p < theta.size(); ++p) {
        const double orig = theta[p];
        theta[p] = orig + step;
        backend.set_params(theta);
        const double plus = loss_value();
        theta[p] = orig - step;
        backend.set_params(theta);
        const double minus = loss_value();
        theta[p] = orig;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            backend.set_params(theta);
            throw std::runtime_error("finite_diff_check: non-finite loss at perturbed point");
        }
        const double numeric = (plus - minus) / (2.0 * step);
        const double rel = std::abs(analytic_grad[p] - numeric) / std::max(1.0, std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    backend.set_params(theta);
    return max_rel;
}

}  // namespace metarl
