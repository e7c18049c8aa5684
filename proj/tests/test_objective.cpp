// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "metarl/errors.hpp"
#include "metarl/objective.hpp"
#include "metarl/policy.hpp"
#include "metarl/rng.hpp"

using namespace metarl;

namespace {

// Groups sampled under the backend's current parameters, so the stored
// log-probs are the frozen old-policy values. Rewards alternate +1/-1.
std::vector<RolloutGroup> sampled_groups(SoftmaxSequencePolicy& pol, int n_groups, int group_size) {
    std::vector<RolloutGroup> groups;
    for (int g = 0; g < n_groups; ++g) {
        RolloutGroup group;
        group.prompt_text = "prompt " + std::to_string(g);
        RenderedPrompt prompt;
        prompt.text = group.prompt_text;
        group.samples = pol.sample_group(prompt, group_size);
        for (int i = 0; i < group_size; ++i) group.rewards.push_back(i % 2 == 0 ? 1 : -1);
        group.advantages = normalize_advantages(group.rewards);
        groups.push_back(std::move(group));
    }
    return groups;
}

void perturb_params(SoftmaxSequencePolicy& pol, std::uint64_t seed, double scale) {
    auto params = pol.params();
    Rng rng(seed);
    for (auto& v : params) v += (rng.next_double() - 0.5) * scale;
    pol.set_params(params);
}

// Test-local recomputation of the batch loss, one token at a time, built on
// the separately verified per-token term.
double oracle_dapo_value(const std::vector<RolloutGroup>& groups, const PolicyBackend& backend,
                         const ClipConfig& clip) {
    double acc = 0.0;
    double total_tokens = 0.0;
    for (const auto& g : groups) {
        for (std::size_t i = 0; i < g.samples.size(); ++i) {
            const auto lp = backend.score_tokens(g.prompt_text, g.samples[i].tokens);
            for (std::size_t t = 0; t < lp.size(); ++t) {
                const double ratio = std::exp(lp[t] - g.samples[i].logprobs[t]);
                acc += dapo_token_term(ratio, g.advantages[i], clip);
                total_tokens += 1.0;
            }
        }
    }
    return total_tokens == 0.0 ? 0.0 : -acc / total_tokens;
}

}  // namespace

TEST_CASE("clip configuration bounds are enforced") {
    ClipConfig ok;
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.eps_low == doctest::Approx(0.20));
    CHECK(ok.eps_high == doctest::Approx(0.28));

    ClipConfig equal{0.3, 0.3};
    CHECK_NOTHROW(equal.validate());
    CHECK_THROWS_AS((ClipConfig{0.0, 0.28}.validate()), ConfigError);
    CHECK_THROWS_AS((ClipConfig{-0.1, 0.28}.validate()), ConfigError);
    CHECK_THROWS_AS((ClipConfig{0.3, 0.2}.validate()), ConfigError);
    CHECK_THROWS_AS((ClipConfig{0.2, 1.0}.validate()), ConfigError);
}

TEST_CASE("six-sample advantage vector matches the closed form") {
    const std::vector<int> rewards = {1, 1, -1, -1, -1, -1};
    const auto adv = normalize_advantages(rewards);
    REQUIRE(adv.size() == 6);
    const double root2 = std::sqrt(2.0);
    CHECK(adv[0] == doctest::Approx(root2).epsilon(1e-12));
    CHECK(adv[1] == doctest::Approx(root2).epsilon(1e-12));
    for (int i = 2; i < 6; ++i) {
        CHECK(adv[static_cast<std::size_t>(i)] == doctest::Approx(-1.0 / root2).epsilon(1e-12));
    }
}

TEST_CASE("advantage normalization: zero mean, unit population std, order-preserving") {
    Rng rng(derive_seed(41, 0x6f626a31));
    int checked = 0;
    while (checked < 1000) {
        const auto n = rng.uniform_int(2, 64);
        std::vector<int> rewards;
        for (std::int64_t i = 0; i < n; ++i) rewards.push_back(rng.bernoulli(0.5) ? 1 : -1);
        rewards[0] = 1;
        rewards[1] = -1;  // guarantee a mixed group
        const auto adv = normalize_advantages(rewards);

        double mean = 0.0;
        for (double a : adv) mean += a;
        mean /= static_cast<double>(adv.size());
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= static_cast<double>(adv.size());
        CHECK(std::abs(mean) <= 1e-9);
        CHECK(std::abs(var - 1.0) <= 1e-9);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            if (rewards[i] == 1) CHECK(adv[i] > 0.0);
            if (rewards[i] == -1) CHECK(adv[i] < 0.0);
        }
        ++checked;
    }

    CHECK_THROWS_AS(normalize_advantages(std::vector<int>{1, 1, 1}), DegenerateGroupError);
    CHECK_THROWS_AS(normalize_advantages(std::vector<int>{-1, -1}), DegenerateGroupError);
    CHECK_THROWS_AS(normalize_advantages(std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("per-token clipped surrogate: canonical values") {
    const ClipConfig clip;  // 0.20 / 0.28
    // positive advantage, ratio above the high edge: clip binds
    CHECK(dapo_token_term(1.5, 1.0, clip) == doctest::Approx(1.28).epsilon(1e-12));
    // negative advantage, ratio below the low edge: clip binds
    CHECK(dapo_token_term(0.5, -1.0, clip) == doctest::Approx(-0.8).epsilon(1e-12));
    // ratio exactly one: both branches equal the advantage
    CHECK(dapo_token_term(1.0, 0.7, clip) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(dapo_token_term(1.0, -0.7, clip) == doctest::Approx(-0.7).epsilon(1e-15));
    // the min keeps the unclipped branch when it is lower
    CHECK(dapo_token_term(2.0, -1.0, clip) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(dapo_token_term(0.5, 1.0, clip) == doctest::Approx(0.5).epsilon(1e-12));
    // inside the trust region the term is just ratio * advantage
    CHECK(dapo_token_term(1.1, 0.3, clip) == doctest::Approx(1.1 * 0.3).epsilon(1e-12));

    CHECK_THROWS_AS(dapo_token_term(1.0, 1.0, ClipConfig{0.0, 0.2}), ConfigError);
}

TEST_CASE("surrogate never exceeds the unclipped value") {
    Rng rng(derive_seed(42, 0x6f626a32));
    const ClipConfig clip;
    for (int i = 0; i < 2000; ++i) {
        const double ratio = std::exp((rng.next_double() - 0.5) * 3.0);
        const double adv = (rng.next_double() - 0.5) * 4.0;
        CHECK(dapo_token_term(ratio, adv, clip) <= ratio * adv + 1e-15);
    }
}

TEST_CASE("batch loss equals the token-by-token recomputation") {
    SoftmaxSequencePolicy pol(6, 1, 8, 77);
    perturb_params(pol, derive_seed(43, 1), 0.6);
    auto groups = sampled_groups(pol, 4, 6);
    perturb_params(pol, derive_seed(43, 2), 0.4);  // new policy != old policy

    const ClipConfig clip;
    const auto res = dapo_loss(groups, pol, clip, true);
    CHECK(res.value == doctest::Approx(oracle_dapo_value(groups, pol, clip)).epsilon(1e-12));
    CHECK(res.grad.values.size() == pol.param_count());

    // value is independent of the gradient request
    const auto no_grad = dapo_loss(groups, pol, clip, false);
    CHECK(no_grad.value == res.value);
    CHECK(no_grad.grad.values.empty());

    // analytic gradient against central differences
    const auto loss_value = [&] { return dapo_loss(groups, pol, clip, false).value; };
    const double err = finite_diff_check(loss_value, res.grad.values, pol, 1e-5);
    CHECK(err <= 1e-5);
}

TEST_CASE("ratio-one batch has zero loss regardless of the clip range") {
    SoftmaxSequencePolicy pol(5, 1, 6, 31);
    perturb_params(pol, derive_seed(44, 1), 0.8);
    // equal token counts per sample so the group advantage sum cancels exactly
    std::vector<RolloutGroup> groups;
    RolloutGroup g;
    g.prompt_text = "p";
    for (int i = 0; i < 6; ++i) {
        CompletionSample s;
        s.tokens = {0, 2, 1};
        s.logprobs = pol.score_tokens(g.prompt_text, s.tokens);  // old == new
        g.samples.push_back(std::move(s));
    }
    g.rewards = {1, 1, -1, -1, -1, -1};
    g.advantages = normalize_advantages(g.rewards);
    groups.push_back(g);

    const auto a = dapo_loss(groups, pol, ClipConfig{0.20, 0.28}, false);
    const auto b = dapo_loss(groups, pol, ClipConfig{0.05, 0.05}, false);
    CHECK(std::abs(a.value) <= 1e-12);
    CHECK(a.value == b.value);  // clip edges are irrelevant at ratio one
}

TEST_CASE("fully clipped tokens contribute value but zero gradient") {
    SoftmaxSequencePolicy pol(4, 0, 4, 9);
    std::vector<double> params = {0.3, -0.2, 0.1, 0.0};
    pol.set_params(params);

    RolloutGroup g;
    g.prompt_text = "p";
    // sample A: advantage +1, ratio forced to 1.5 (above 1.28 -> clipped)
    CompletionSample a;
    a.tokens = {1};
    a.logprobs = {pol.token_logprob(0, 1) - std::log(1.5)};
    // sample B: advantage -1, ratio forced to 0.5 (below 0.8 -> clipped)
    CompletionSample b;
    b.tokens = {2};
    b.logprobs = {pol.token_logprob(0, 2) - std::log(0.5)};
    g.samples = {a, b};
    g.rewards = {1, -1};
    g.advantages = normalize_advantages(g.rewards);  // exactly +1, -1

    const auto res = dapo_loss({g}, pol, ClipConfig{0.20, 0.28}, true);
    const double expect = -0.5 * ((1.0 + 0.28) * 1.0 + (1.0 - 0.20) * -1.0);
    CHECK(res.value == doctest::Approx(expect).epsilon(1e-12));
    for (double v : res.grad.values) CHECK(v == 0.0);
}

TEST_CASE("loss input validation") {
    SoftmaxSequencePolicy pol(4, 0, 4, 1);
    RolloutGroup g;
    g.prompt_text = "p";
    CompletionSample s;
    s.tokens = {0};
    s.logprobs = {pol.token_logprob(0, 0)};
    g.samples = {s};
    g.rewards = {1};

    // advantages missing entirely
    CHECK_THROWS_AS(dapo_loss({g}, pol, ClipConfig{}, false), std::invalid_argument);
    g.advantages = {1.0};
    CHECK_NOTHROW(dapo_loss({g}, pol, ClipConfig{}, false));

    RolloutGroup empty;
    empty.prompt_text = "p";
    CHECK_THROWS_AS(dapo_loss({empty}, pol, ClipConfig{}, false), std::invalid_argument);

    RolloutGroup mismatched = g;
    mismatched.samples[0].logprobs.push_back(0.0);
    CHECK_THROWS_AS(dapo_loss({mismatched}, pol, ClipConfig{}, false), std::invalid_argument);

    // no groups at all: zero loss, zero-filled gradient
    const auto zero = dapo_loss({}, pol, ClipConfig{}, true);
    CHECK(zero.value == 0.0);
    CHECK(zero.grad.values == std::vector<double>(pol.param_count(), 0.0));
}

TEST_CASE("sft loss on a uniform policy equals log vocab exactly") {
    SoftmaxSequencePolicy pol(6, 1, 8, 0);  // zero logits -> uniform over 6 ids
    std::vector<SftPair> pairs = {{"prompt a", "012"}, {"prompt b", "4"}};
    const auto res = sft_loss(pairs, pol, true);
    CHECK(res.value == doctest::Approx(std::log(6.0)).epsilon(1e-12));
    CHECK(res.grad.values.size() == pol.param_count());

    const auto empty = sft_loss({}, pol, true);
    CHECK(empty.value == 0.0);
    CHECK(empty.grad.values == std::vector<double>(pol.param_count(), 0.0));
}

TEST_CASE("sft loss equals a per-pair mean-NLL recomputation") {
    SoftmaxSequencePolicy pol(8, 1, 8, 5);
    perturb_params(pol, derive_seed(45, 1), 0.7);
    std::vector<SftPair> pairs = {{"p1", "0123"}, {"p2", "66"}, {"p3", ""}};

    double expect = 0.0;
    for (const auto& pair : pairs) {
        const auto tokens = pol.encode(pair.target);
        const auto lp = pol.score_tokens(pair.prompt, tokens);
        double nll = 0.0;
        for (double v : lp) nll -= v;
        expect += nll / static_cast<double>(tokens.size());
    }
    expect /= static_cast<double>(pairs.size());

    const auto res = sft_loss(pairs, pol, true);
    CHECK(res.value == doctest::Approx(expect).epsilon(1e-12));

    const auto loss_value = [&] { return sft_loss(pairs, pol, false).value; };
    CHECK(finite_diff_check(loss_value, res.grad.values, pol, 1e-5) <= 1e-5);
}

TEST_CASE("combined loss is affine in lambda with matching gradient") {
    SoftmaxSequencePolicy pol(6, 1, 8, 13);
    perturb_params(pol, derive_seed(46, 1), 0.5);
    auto groups = sampled_groups(pol, 3, 4);
    perturb_params(pol, derive_seed(46, 2), 0.3);
    std::vector<SftPair> pairs = {{"p", "012"}, {"p", "34"}};
    const ClipConfig clip;

    const auto d = dapo_loss(groups, pol, clip, true);
    const auto s = sft_loss(pairs, pol, true);
    for (double lambda : {0.0, 0.04, 0.5}) {
        const auto c = combined_loss(groups, pairs, clip, lambda, pol, true);
        CHECK(c.dapo == d.value);
        CHECK(c.sft == s.value);
        CHECK(c.total == doctest::Approx(d.value + lambda * s.value).epsilon(1e-15));
        REQUIRE(c.grad.values.size() == d.grad.values.size());
        for (std::size_t i = 0; i < c.grad.values.size(); ++i) {
            CHECK(c.grad.values[i] ==
                  doctest::Approx(d.grad.values[i] + lambda * s.grad.values[i]).epsilon(1e-15));
        }
    }

    const auto full = combined_loss(groups, pairs, clip, 0.04, pol, true);
    const auto loss_value = [&] {
        return combined_loss(groups, pairs, clip, 0.04, pol, false).total;
    };
    CHECK(finite_diff_check(loss_value, full.grad.values, pol, 1e-5) <= 1e-5);

    CHECK_THROWS_AS(combined_loss(groups, pairs, clip, -0.1, pol, false), std::invalid_argument);
    CHECK_THROWS_AS(combined_loss(groups, pairs, clip, std::nan(""), pol, false),
                    std::invalid_argument);
}

TEST_CASE("finite-difference checker flags a corrupted gradient and restores state") {
    SoftmaxSequencePolicy pol(5, 0, 6, 3);
    perturb_params(pol, derive_seed(47, 1), 0.5);
    std::vector<SftPair> pairs = {{"p", "0123"}};
    const auto before = pol.params();

    const auto res = sft_loss(pairs, pol, true);
    const auto loss_value = [&] { return sft_loss(pairs, pol, false).value; };
    CHECK(finite_diff_check(loss_value, res.grad.values, pol, 1e-5) <= 1e-5);
    CHECK(pol.params() == before);  // parameters restored

    auto corrupted = res.grad.values;
    corrupted[2] += 0.01;
    CHECK(finite_diff_check(loss_value, corrupted, pol, 1e-5) > 1e-3);
    CHECK(pol.params() == before);

    CHECK_THROWS_AS(finite_diff_check(loss_value, res.grad.values, pol, 1e-8),
                    std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_check(loss_value, res.grad.values, pol, 1e-2),
                    std::invalid_argument);
    std::vector<double> short_grad(2, 0.0);
    CHECK_THROWS_AS(finite_diff_check(loss_value, short_grad, pol, 1e-5), std::invalid_argument);
}
