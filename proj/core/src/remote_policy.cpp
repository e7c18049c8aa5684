// SPDX-License-Identifier: Apache-2.0
#include "metarl/remote_policy.hpp"

#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "metarl/errors.hpp"

namespace metarl {
namespace {

using json = nlohmann::json;

// "http://host:port/v1" -> ("http://host:port", "/v1")
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw ConfigError("remote endpoint must include a scheme: " + endpoint);
    }
    const auto path_start = endpoint.find('/', scheme + 3);
    if (path_start == std::string::npos) return {endpoint, ""};
    std::string base = endpoint.substr(0, path_start);
    std::string path = endpoint.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {base, path};
}

}  // namespace

struct RemoteChatBackend::Impl {
    RemoteBackendConfig cfg;
    std::string path;
    httplib::Client client;

    explicit Impl(RemoteBackendConfig c, std::pair<std::string, std::string> split)
        : cfg(std::move(c)), path(split.second + "/chat/completions"), client(split.first) {
        client.set_connection_timeout(cfg.timeout_seconds, 0);
        client.set_read_timeout(cfg.timeout_seconds, 0);
        client.set_write_timeout(cfg.timeout_seconds, 0);
        if (!cfg.api_key.empty()) {
            client.set_default_headers({{"Authorization", "Bearer " + cfg.api_key}});
        }
    }
};

RemoteChatBackend::RemoteChatBackend(RemoteBackendConfig cfg) {
    if (cfg.endpoint.empty()) throw ConfigError("remote backend requires an endpoint");
    if (cfg.model.empty()) throw ConfigError("remote backend requires a model name");
    if (cfg.max_retries < 0) throw ConfigError("remote backend: max_retries must be >= 0");
    auto split = split_endpoint(cfg.endpoint);
    impl_ = std::make_unique<Impl>(std::move(cfg), std::move(split));
}

RemoteChatBackend::~RemoteChatBackend() = default;

std::vector<CompletionSample> RemoteChatBackend::sample_group(const RenderedPrompt& prompt,
                                                              int group_size) {
    if (group_size < 1) throw std::invalid_argument("sample_group: group_size must be >= 1");
    const json body = {
        {"model", impl_->cfg.model},
        {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})},
        {"temperature", impl_->cfg.temperature},
        {"top_p", impl_->cfg.top_p},
        {"n", group_size},
        {"max_tokens", impl_->cfg.max_tokens},
    };
    const std::string payload = body.dump();

    std::vector<std::string> contents;
    bool ok = false;
    for (int attempt = 0; attempt <= impl_->cfg.max_retries && !ok; ++attempt) {
        auto res = impl_->client.Post(impl_->path, payload, "application/json");
        if (!res) continue;                      // transport error: retry
        if (res->status >= 500) continue;        // server error: retry
        if (res->status < 200 || res->status >= 300) break;  // client error: no point retrying
        try {
            const json reply = json::parse(res->body);
            for (const auto& choice : reply.at("choices")) {
                contents.push_back(choice.at("message").at("content").get<std::string>());
            }
            ok = true;
        } catch (const json::exception&) {
            break;  // malformed payload; a retry would get the same answer
        }
    }

    std::vector<CompletionSample> out;
    out.reserve(static_cast<std::size_t>(group_size));
    for (int g = 0; g < group_size; ++g) {
        CompletionSample s;
        s.kind = prompt.kind;
        if (ok && g < static_cast<int>(contents.size())) {
            s.text = contents[static_cast<std::size_t>(g)];
        } else {
            s.failed = true;  // caller scores this as reward -1
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace metarl
