// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace metarl {

// Backend asked to do something its capability flags do not cover.
struct UnsupportedCapabilityError : std::logic_error {
    explicit UnsupportedCapabilityError(const std::string& what) : std::logic_error(what) {}
};

// A rollout group with uniform rewards reached a path that requires 0 < accuracy < 1.
struct DegenerateGroupError : std::invalid_argument {
    explicit DegenerateGroupError(const std::string& what) : std::invalid_argument(what) {}
};

// Bad configuration (file, key, value, or flag).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed persisted data (snapshots, datasets, wire payloads).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace metarl
