// SPDX-License-Identifier: Apache-2.0
#include "metarl/verify.hpp"

#include <cctype>
#include <cstdint>
#include <stdexcept>

namespace metarl::verify {
namespace {

using i128 = __int128;

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Strips $...$ math delimiters (repeatedly, so normalization stays
// idempotent on doubled wrappers), re-trimming as layers come off.
std::string_view strip_math(std::string_view s) {
    s = trim(s);
    while (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
        s.remove_prefix(1);
        s.remove_suffix(1);
        s = trim(s);
    }
    return s;
}

i128 gcd128(i128 a, i128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        i128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

constexpr i128 kMagLimit = static_cast<i128>(1) << 100;  // overflow guard for products

// Parses an optionally signed integer of digits into an i128.
// Returns false on empty input, non-digits, or magnitude overflow.
bool parse_int(std::string_view s, i128& out, bool allow_sign) {
    bool neg = false;
    if (allow_sign && !s.empty() && (s.front() == '+' || s.front() == '-')) {
        neg = s.front() == '-';
        s.remove_prefix(1);
    }
    if (s.empty()) return false;
    i128 v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
        if (v > kMagLimit) return false;
    }
    out = neg ? -v : v;
    return true;
}

// Decimal literal -> exact rational (num/den). Accepts "40", "3.5", ".5", "40.".
bool parse_decimal(std::string_view s, i128& num, i128& den) {
    bool neg = false;
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
        neg = s.front() == '-';
        s.remove_prefix(1);
    }
    const auto dot = s.find('.');
    std::string_view int_part = dot == std::string_view::npos ? s : s.substr(0, dot);
    std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
    if (int_part.empty() && frac_part.empty()) return false;
    if (frac_part.find('.') != std::string_view::npos) return false;

    i128 v = 0;
    std::size_t digits = 0;
    for (char c : int_part) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
        if (v > kMagLimit) return false;
        ++digits;
    }
    i128 d = 1;
    for (char c : frac_part) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
        d *= 10;
        if (v > kMagLimit || d > kMagLimit) return false;
        ++digits;
    }
    if (digits == 0) return false;
    num = neg ? -v : v;
    den = d;
    return true;
}

std::string format_i128(i128 v) {
    if (v == 0) return "0";
    bool neg = v < 0;
    if (neg) v = -v;
    std::string digits;
    while (v > 0) {
        digits.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    if (neg) digits.push_back('-');
    return {digits.rbegin(), digits.rend()};
}

// Tries the exact-rational route. Canonical form: reduced fraction with
// positive denominator, rendered "p" or "p/q".
bool try_rational(std::string_view s, std::string& out) {
    i128 num = 0, den = 1;
    const auto slash = s.find('/');
    if (slash != std::string_view::npos) {
        i128 p = 0, q = 0;
        if (!parse_int(trim(s.substr(0, slash)), p, /*allow_sign=*/true)) return false;
        if (!parse_int(trim(s.substr(slash + 1)), q, /*allow_sign=*/false)) return false;
        if (q == 0) return false;  // division by zero: treat as plain text
        num = p;
        den = q;
    } else {
        if (!parse_decimal(s, num, den)) return false;
    }
    const i128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    out = format_i128(num);
    if (den != 1) out += "/" + format_i128(den);
    return true;
}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

std::string normalize_answer(std::string_view raw) {
    const std::string_view s = strip_math(raw);
    std::string rational;
    if (try_rational(s, rational)) return rational;
    return normalize_text(s);
}

AnswerKey make_key(std::string_view raw) {
    return AnswerKey{std::string(raw), normalize_answer(raw)};
}

std::optional<std::string> extract_answer(std::string_view text) {
    constexpr std::string_view kMarker = "Answer:";
    std::optional<std::string> found;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        std::string_view body = line;
        while (!body.empty() && is_space(body.front())) body.remove_prefix(1);
        if (body.substr(0, kMarker.size()) == kMarker) {
            found = std::string(strip_math(body.substr(kMarker.size())));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return found;
}

bool is_equivalent(const AnswerKey& key, std::string_view candidate) {
    return key.normalized == normalize_answer(candidate);
}

int binary_reward(const AnswerKey& key, std::string_view completion_text) {
    const auto extracted = extract_answer(completion_text);
    if (!extracted) return -1;
    return is_equivalent(key, *extracted) ? 1 : -1;
}

double group_accuracy(std::span<const int> rewards) {
    if (rewards.empty()) throw std::invalid_argument("group_accuracy: empty reward list");
    std::size_t correct = 0;
    for (int r : rewards) {
        if (r != 1 && r != -1) throw std::invalid_argument("group_accuracy: rewards must be +1/-1");
        if (r == 1) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(rewards.size());
}

}  // namespace metarl::verify
