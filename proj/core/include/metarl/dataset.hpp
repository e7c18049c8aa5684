// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "metarl/config.hpp"
#include "metarl/types.hpp"

namespace metarl {

struct DatasetBundle {
    std::vector<Problem> train;
    std::vector<Problem> holdout;
};

// One JSON object per line; "question" and "answer" required, "id" and
// "difficulty" optional. Malformed lines fail loudly with their line number.
std::vector<Problem> load_problems_jsonl(const std::filesystem::path& path);

// Synthetic source: train tasks from task_seed, holdout tasks from a stream
// derived from it (disjoint by construction). File source: the first
// eval_size problems become the holdout, the rest train. eval_size = 0 or
// eval_every = 0 leaves the holdout empty.
DatasetBundle build_dataset(const RunConfig& cfg);

}  // namespace metarl
