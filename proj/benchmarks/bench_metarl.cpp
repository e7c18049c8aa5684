// SPDX-License-Identifier: Apache-2.0
// Hot paths: BM25 retrieval against a full buffer, and the clipped loss
// with gradients over a realistic batch.
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "metarl/metabuffer.hpp"
#include "metarl/objective.hpp"
#include "metarl/policy.hpp"
#include "metarl/rng.hpp"

namespace {

using namespace metarl;

MetacogBuffer make_full_buffer(std::size_t entries) {
    MetacogBuffer buf(entries);
    Rng rng(derive_seed(42, 0x62656e63));
    const char* words[] = {"train",  "ticket", "apples", "garden", "speed",
                           "matrix", "prime",  "angle",  "volume", "ratio"};
    for (std::size_t i = 0; i < entries; ++i) {
        MetacogEntry e;
        e.problem = "problem " + std::to_string(i);
        const int len = 6 + static_cast<int>(rng.uniform_int(0, 10));
        for (int w = 0; w < len; ++w) {
            e.problem += ' ';
            e.problem += words[rng.uniform_int(0, 9)];
        }
        e.steps.push_back({"step one", "1"});
        e.final_answer = std::to_string(i);
        buf.insert_if_correct(std::move(e), +1);
    }
    return buf;
}

void bm_bm25_retrieve(benchmark::State& state) {
    const MetacogBuffer buf = make_full_buffer(static_cast<std::size_t>(state.range(0)));
    const std::string query = "a garden train travels at speed with apples and a prime ratio";
    for (auto _ : state) {
        benchmark::DoNotOptimize(buf.retrieve_best(query));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_bm25_retrieve)->Arg(64)->Arg(512);

void bm_dapo_loss_grad(benchmark::State& state) {
    SoftmaxSequencePolicy policy(12, 1, 8, 7);
    RenderedPrompt prompt;
    prompt.text = "bench";
    std::vector<RolloutGroup> groups;
    for (int g = 0; g < static_cast<int>(state.range(0)); ++g) {
        RolloutGroup group;
        group.prompt_text = prompt.text;
        group.samples = policy.sample_group(prompt, 8);
        for (std::size_t i = 0; i < group.samples.size(); ++i) {
            group.rewards.push_back(i % 2 == 0 ? 1 : -1);
        }
        group.advantages = normalize_advantages(group.rewards);
        groups.push_back(std::move(group));
    }
    const ClipConfig clip{};
    for (auto _ : state) {
        benchmark::DoNotOptimize(dapo_loss(groups, policy, clip, true));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(bm_dapo_loss_grad)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
