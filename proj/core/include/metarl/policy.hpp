// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "metarl/rng.hpp"
#include "metarl/templates.hpp"
#include "metarl/types.hpp"

namespace metarl {

struct Capabilities {
    bool can_sample = false;
    bool can_score = false;
    bool can_update = false;
};

// Backend contract: sample completion groups, and — for updatable backends —
// score token log-probabilities under the current parameters and take
// gradient steps. Backends without a capability throw
// UnsupportedCapabilityError from the corresponding operations.
class PolicyBackend {
public:
    virtual ~PolicyBackend() = default;

    virtual Capabilities capabilities() const = 0;

    // Samples `group_size` completions for one prompt. When can_score, each
    // sample carries per-token log-probs under the generating parameters
    // (these become the frozen old-policy values for the ratio).
    virtual std::vector<CompletionSample> sample_group(const RenderedPrompt& prompt,
                                                       int group_size) = 0;

    // Log-probabilities of `tokens` under the current parameters.
    virtual std::vector<double> score_tokens(const std::string& prompt,
                                             std::span<const int> tokens) const;

    // Deterministic text -> token-id mapping for SFT targets.
    virtual std::vector<int> encode(const std::string& text) const;

    virtual std::size_t param_count() const;
    virtual std::vector<double> params() const;
    virtual void set_params(std::span<const double> values);

    // params <- params - learning_rate * grad (plain gradient descent).
    virtual void apply_gradient(const GradientVector& grad, double learning_rate);

    // grad[p] += sum_t coeffs[t] * d log pi(tokens[t] | context_t) / d theta_p.
    // The workhorse for analytic loss gradients.
    virtual void accumulate_score_grad(const std::string& prompt, std::span<const int> tokens,
                                       std::span<const double> coeffs,
                                       std::span<double> grad) const;

protected:
    [[noreturn]] static void unsupported(const char* what);
};

struct SoftmaxPolicyConfig {
    // Token ids 0..charset.size()-1 map to these characters; the last vocab
    // id is the stop token.
    std::string charset = "0123456789-";
    int context_order = 1;  // 0: one shared logit row; 1: row per previous token
    int max_len = 8;
    std::uint64_t seed = 0;
};

// Tabular softmax sequence model: logits are free parameters per (context,
// token) cell, where the context is nothing (order 0) or the previous token
// (order 1). Completion text is "Answer: " + the detokenized characters, so
// the verify pipeline treats it like any other completion.
class SoftmaxSequencePolicy final : public PolicyBackend {
public:
    explicit SoftmaxSequencePolicy(SoftmaxPolicyConfig cfg);
    // Abstract-vocabulary convenience: `vocab_size` total ids (the last one
    // is the stop token), charset drawn from a fixed alphabet.
    SoftmaxSequencePolicy(int vocab_size, int context_order, int max_len, std::uint64_t seed);

    Capabilities capabilities() const override { return {true, true, true}; }
    std::vector<CompletionSample> sample_group(const RenderedPrompt& prompt,
                                               int group_size) override;
    std::vector<double> score_tokens(const std::string& prompt,
                                     std::span<const int> tokens) const override;
    std::vector<int> encode(const std::string& text) const override;
    std::size_t param_count() const override;
    std::vector<double> params() const override;
    void set_params(std::span<const double> values) override;
    void apply_gradient(const GradientVector& grad, double learning_rate) override;
    void accumulate_score_grad(const std::string& prompt, std::span<const int> tokens,
                               std::span<const double> coeffs,
                               std::span<double> grad) const override;

    int vocab_size() const { return vocab_; }
    int context_order() const { return order_; }
    int max_len() const { return max_len_; }
    int stop_token() const { return vocab_ - 1; }
    const std::string& charset() const { return charset_; }

    // Per-step interface used by the variance lab: contexts are 0 (start)
    // or 1 + previous token id (order 1 collapses everything to 0 at order 0).
    int context_count() const { return order_ == 0 ? 1 : vocab_ + 1; }
    const std::vector<double>& probs(int context) const;
    double token_logprob(int context, int token) const;
    int sample_token(int context, Rng& rng) const;
    void add_logprob_grad(int context, int token, double coeff, std::span<double> grad) const;

private:
    int row_of(int context) const { return order_ == 0 ? 0 : context; }
    int step_context(int prev_token) const { return order_ == 0 ? 0 : prev_token + 1; }
    void refresh_cache() const;

    std::string charset_;
    int vocab_;
    int order_;
    int max_len_;
    std::vector<double> params_;  // rows x vocab_, row-major
    int rows_;
    Rng rng_;
    mutable std::vector<std::vector<double>> prob_cache_;
    mutable std::vector<std::vector<double>> logprob_cache_;
    mutable bool cache_valid_ = false;
};

struct ScriptedPolicyConfig {
    double direct_p = 0.05;
    double decomposition_p = 0.6;
    double reflection_p = 0.4;
    std::uint64_t seed = 0;

    double prob_for(TemplateKind kind) const {
        switch (kind) {
            case TemplateKind::Direct: return direct_p;
            case TemplateKind::Decomposition: return decomposition_p;
            case TemplateKind::Reflection: return reflection_p;
        }
        return 0.0;
    }
};

// Sample-only backend with per-stage success probabilities; emits a correct
// structured answer with probability p(kind) and a deliberately wrong one
// otherwise. Drives control-flow and sample-efficiency tests.
class ScriptedPolicy final : public PolicyBackend {
public:
    ScriptedPolicy(ScriptedPolicyConfig cfg, const std::vector<Problem>& universe);

    Capabilities capabilities() const override { return {true, false, false}; }
    std::vector<CompletionSample> sample_group(const RenderedPrompt& prompt,
                                               int group_size) override;

private:
    ScriptedPolicyConfig cfg_;
    std::map<std::string, std::string> truth_by_question_;
    Rng rng_;
};

}  // namespace metarl
