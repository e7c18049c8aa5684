// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "metarl/policy.hpp"

namespace metarl {

struct RemoteBackendConfig {
    std::string endpoint;  // e.g. "http://localhost:8000/v1"
    std::string model;
    std::string api_key;            // usually injected from the environment
    int max_concurrent = 4;         // accepted for config parity; requests go out sequentially
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    int timeout_seconds = 60;
    int max_retries = 3;
};

// Sample-only client for a chat-completions wire protocol: one user turn per
// request carrying the rendered prompt, n = group size. Transport failures
// retry up to the budget; exhausted retries yield samples marked failed,
// which the rollout layer treats as reward -1 rather than aborting.
class RemoteChatBackend final : public PolicyBackend {
public:
    explicit RemoteChatBackend(RemoteBackendConfig cfg);
    ~RemoteChatBackend() override;

    Capabilities capabilities() const override { return {true, false, false}; }
    std::vector<CompletionSample> sample_group(const RenderedPrompt& prompt,
                                               int group_size) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace metarl
