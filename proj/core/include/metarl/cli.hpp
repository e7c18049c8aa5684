// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace metarl {

struct GradcheckResult {
    double max_rel_error = 0.0;
    int batches = 0;
};

// Randomized small-policy finite-difference sweep over the combined loss:
// varying vocabulary, context order, clip engagement, and SFT mixing weight.
// Shared by the `gradcheck` subcommand and the acceptance gate.
GradcheckResult run_gradcheck_suite(int batches, std::uint64_t seed, double fd_step);

// Entry point behind the binary. Returns the process exit status.
int run_cli(int argc, const char* const* argv);

}  // namespace metarl
