// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace metarl::verify {

// Ground-truth answer with its canonical form precomputed.
struct AnswerKey {
    std::string raw;
    std::string normalized;
};

// Canonicalizes an answer string. Integers, finite decimals, and simple
// fractions p/q (integer p, positive integer q) all map to one reduced
// rational form ("40", "7/2", "-3"); everything else falls back to
// lowercased, whitespace-collapsed text. Idempotent by construction.
std::string normalize_answer(std::string_view raw);

AnswerKey make_key(std::string_view raw);

// Pulls the candidate answer out of a completion: the text after the last
// line starting with "Answer:", trimmed, with one layer of $...$ stripped.
// No such line -> nullopt.
std::optional<std::string> extract_answer(std::string_view completion_text);

bool is_equivalent(const AnswerKey& key, std::string_view candidate);

// +1 if the completion's extracted answer is equivalent to the key,
// -1 otherwise (including extraction failure).
int binary_reward(const AnswerKey& key, std::string_view completion_text);

// Fraction of +1 rewards. Throws std::invalid_argument on an empty group.
double group_accuracy(std::span<const int> rewards);

}  // namespace metarl::verify
