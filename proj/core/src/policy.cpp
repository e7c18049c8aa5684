// SPDX-License-Identifier: Apache-2.0
#include "metarl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metarl/errors.hpp"

namespace metarl {

void PolicyBackend::unsupported(const char* what) {
    throw UnsupportedCapabilityError(std::string("backend does not support ") + what);
}

std::vector<double> PolicyBackend::score_tokens(const std::string&, std::span<const int>) const {
    unsupported("score_tokens");
}
std::vector<int> PolicyBackend::encode(const std::string&) const { unsupported("encode"); }
std::size_t PolicyBackend::param_count() const { unsupported("param_count"); }
std::vector<double> PolicyBackend::params() const { unsupported("params"); }
void PolicyBackend::set_params(std::span<const double>) { unsupported("set_params"); }
void PolicyBackend::apply_gradient(const GradientVector&, double) { unsupported("apply_gradient"); }
void PolicyBackend::accumulate_score_grad(const std::string&, std::span<const int>,
                                          std::span<const double>, std::span<double>) const {
    unsupported("accumulate_score_grad");
}

namespace {

constexpr const char* kAbstractAlphabet = "0123456789abcdefghijklmnopqrstuvwxyz";

std::string abstract_charset(int vocab_size) {
    if (vocab_size < 1 || vocab_size > 37) {
        throw std::invalid_argument("SoftmaxSequencePolicy: vocab_size must be in [1,37]");
    }
    return std::string(kAbstractAlphabet, static_cast<std::size_t>(vocab_size - 1));
}

}  // namespace

SoftmaxSequencePolicy::SoftmaxSequencePolicy(SoftmaxPolicyConfig cfg)
    : charset_(cfg.charset),
      vocab_(static_cast<int>(cfg.charset.size()) + 1),
      order_(cfg.context_order),
      max_len_(cfg.max_len),
      rng_(derive_seed(cfg.seed, 0x706f6c63)) {
    if (order_ != 0 && order_ != 1) {
        throw std::invalid_argument("SoftmaxSequencePolicy: context_order must be 0 or 1");
    }
    if (max_len_ < 1) throw std::invalid_argument("SoftmaxSequencePolicy: max_len must be >= 1");
    for (std::size_t i = 0; i < charset_.size(); ++i) {
        if (charset_.find(charset_[i], i + 1) != std::string::npos) {
            throw std::invalid_argument("SoftmaxSequencePolicy: charset has duplicate characters");
        }
    }
    rows_ = context_count();
    params_.assign(static_cast<std::size_t>(rows_) * vocab_, 0.0);
}

SoftmaxSequencePolicy::SoftmaxSequencePolicy(int vocab_size, int context_order, int max_len,
                                             std::uint64_t seed)
    : SoftmaxSequencePolicy([&] {
          SoftmaxPolicyConfig cfg;
          cfg.charset = abstract_charset(vocab_size);
          cfg.context_order = context_order;
          cfg.max_len = max_len;
          cfg.seed = seed;
          return cfg;
      }()) {}

void SoftmaxSequencePolicy::refresh_cache() const {
    if (cache_valid_) return;
    prob_cache_.assign(rows_, {});
    logprob_cache_.assign(rows_, {});
    for (int row = 0; row < rows_; ++row) {
        const double* logits = params_.data() + static_cast<std::size_t>(row) * vocab_;
        double mx = logits[0];
        for (int j = 1; j < vocab_; ++j) mx = std::max(mx, logits[j]);
        double z = 0.0;
        for (int j = 0; j < vocab_; ++j) z += std::exp(logits[j] - mx);
        const double logz = std::log(z);
        auto& probs = prob_cache_[row];
        auto& logs = logprob_cache_[row];
        probs.resize(vocab_);
        logs.resize(vocab_);
        for (int j = 0; j < vocab_; ++j) {
            logs[j] = logits[j] - mx - logz;
            probs[j] = std::exp(logs[j]);
        }
    }
    cache_valid_ = true;
}

const std::vector<double>& SoftmaxSequencePolicy::probs(int context) const {
    if (context < 0 || context >= context_count()) {
        throw std::out_of_range("SoftmaxSequencePolicy::probs: bad context");
    }
    refresh_cache();
    return prob_cache_[row_of(context)];
}

double SoftmaxSequencePolicy::token_logprob(int context, int token) const {
    if (token < 0 || token >= vocab_) {
        throw std::out_of_range("SoftmaxSequencePolicy: token id out of range");
    }
    if (context < 0 || context >= context_count()) {
        throw std::out_of_range("SoftmaxSequencePolicy: bad context");
    }
    refresh_cache();
    return logprob_cache_[row_of(context)][token];
}

int SoftmaxSequencePolicy::sample_token(int context, Rng& rng) const {
    const auto& p = probs(context);
    return static_cast<int>(rng.categorical(p));
}

void SoftmaxSequencePolicy::add_logprob_grad(int context, int token, double coeff,
                                             std::span<double> grad) const {
    if (grad.size() != params_.size()) {
        throw std::invalid_argument("SoftmaxSequencePolicy: gradient size mismatch");
    }
    const auto& p = probs(context);
    const std::size_t base = static_cast<std::size_t>(row_of(context)) * vocab_;
    for (int j = 0; j < vocab_; ++j) {
        grad[base + j] += coeff * ((j == token ? 1.0 : 0.0) - p[j]);
    }
}

std::vector<CompletionSample> SoftmaxSequencePolicy::sample_group(const RenderedPrompt& prompt,
                                                                  int group_size) {
    if (group_size < 1) throw std::invalid_argument("sample_group: group_size must be >= 1");
    std::vector<CompletionSample> out;
    out.reserve(static_cast<std::size_t>(group_size));
    for (int g = 0; g < group_size; ++g) {
        CompletionSample s;
        s.kind = prompt.kind;
        int ctx = 0;
        for (int t = 0; t < max_len_; ++t) {
            const int tok = sample_token(ctx, rng_);
            s.tokens.push_back(tok);
            s.logprobs.push_back(token_logprob(ctx, tok));
            if (tok == stop_token()) break;
            ctx = step_context(tok);
        }
        std::string chars;
        for (int tok : s.tokens) {
            if (tok != stop_token()) chars.push_back(charset_[static_cast<std::size_t>(tok)]);
        }
        s.text = "Answer: " + chars;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<double> SoftmaxSequencePolicy::score_tokens(const std::string&,
                                                        std::span<const int> tokens) const {
    std::vector<double> out;
    out.reserve(tokens.size());
    int ctx = 0;
    for (int tok : tokens) {
        out.push_back(token_logprob(ctx, tok));
        ctx = step_context(tok);
    }
    return out;
}

std::vector<int> SoftmaxSequencePolicy::encode(const std::string& text) const {
    std::vector<int> out;
    for (char c : text) {
        const auto pos = charset_.find(c);
        if (pos != std::string::npos) out.push_back(static_cast<int>(pos));
    }
    out.push_back(stop_token());
    return out;
}

std::size_t SoftmaxSequencePolicy::param_count() const { return params_.size(); }

std::vector<double> SoftmaxSequencePolicy::params() const { return params_; }

void SoftmaxSequencePolicy::set_params(std::span<const double> values) {
    if (values.size() != params_.size()) {
        throw std::invalid_argument("set_params: dimension mismatch");
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("set_params: non-finite value");
    }
    params_.assign(values.begin(), values.end());
    cache_valid_ = false;
}

void SoftmaxSequencePolicy::apply_gradient(const GradientVector& grad, double learning_rate) {
    if (grad.values.size() != params_.size()) {
        throw std::invalid_argument("apply_gradient: dimension mismatch");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("apply_gradient: bad learning rate");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const double v = grad.values[i];
        if (!std::isfinite(v)) throw std::invalid_argument("apply_gradient: non-finite gradient");
        params_[i] -= learning_rate * v;
    }
    cache_valid_ = false;
}

void SoftmaxSequencePolicy::accumulate_score_grad(const std::string&, std::span<const int> tokens,
                                                  std::span<const double> coeffs,
                                                  std::span<double> grad) const {
    if (tokens.size() != coeffs.size()) {
        throw std::invalid_argument("accumulate_score_grad: token/coefficient length mismatch");
    }
    int ctx = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        add_logprob_grad(ctx, tokens[t], coeffs[t], grad);
        ctx = step_context(tokens[t]);
    }
}

// --- scripted backend ---

ScriptedPolicy::ScriptedPolicy(ScriptedPolicyConfig cfg, const std::vector<Problem>& universe)
    : cfg_(cfg), rng_(derive_seed(cfg.seed, 0x73637270)) {
    const auto check = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument(std::string("ScriptedPolicy: ") + name + " must be in [0,1]");
        }
    };
    check(cfg_.direct_p, "direct_p");
    check(cfg_.decomposition_p, "decomposition_p");
    check(cfg_.reflection_p, "reflection_p");
    for (const auto& p : universe) truth_by_question_[p.question] = p.answer;
}

std::vector<CompletionSample> ScriptedPolicy::sample_group(const RenderedPrompt& prompt,
                                                           int group_size) {
    if (group_size < 1) throw std::invalid_argument("sample_group: group_size must be >= 1");
    const auto it = truth_by_question_.find(prompt.problem);
    if (it == truth_by_question_.end()) {
        throw std::invalid_argument("ScriptedPolicy: problem not in configured universe: " +
                                    prompt.problem);
    }
    const std::string& truth = it->second;
    const double p = cfg_.prob_for(prompt.kind);

    std::vector<CompletionSample> out;
    out.reserve(static_cast<std::size_t>(group_size));
    for (int g = 0; g < group_size; ++g) {
        const bool correct = rng_.bernoulli(p);
        CompletionSample s;
        s.kind = prompt.kind;
        const std::string answer = correct ? truth : "1" + truth + "1";
        s.text = "Subproblem 1: Work the problem as stated.\nCarry the computation through.\n\nAnswer: " +
                 answer;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace metarl
