// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <string>
#include <vector>

#include "metarl/rng.hpp"
#include "metarl/verify.hpp"

using namespace metarl;
using namespace metarl::verify;

TEST_CASE("integers, decimals, and fractions share one canonical form") {
    CHECK(normalize_answer("40") == "40");
    CHECK(normalize_answer(" 40 ") == "40");
    CHECK(normalize_answer("040") == "40");
    CHECK(normalize_answer("40.") == "40");
    CHECK(normalize_answer("40.0") == "40");
    CHECK(normalize_answer("$40$") == "40");
    CHECK(normalize_answer("$$40$$") == "40");
    CHECK(normalize_answer("-3") == "-3");
    CHECK(normalize_answer("3.5") == "7/2");
    CHECK(normalize_answer("7/2") == "7/2");
    CHECK(normalize_answer(".5") == "1/2");
    CHECK(normalize_answer("0.50") == "1/2");
    CHECK(normalize_answer("6/8") == "3/4");
    CHECK(normalize_answer("-6/8") == "-3/4");
    CHECK(normalize_answer("0") == "0");
    CHECK(normalize_answer("-0") == "0");
    CHECK(normalize_answer("0/7") == "0");
}

TEST_CASE("non-numeric answers fall back to case/space-insensitive text") {
    CHECK(normalize_answer("Paris") == "paris");
    CHECK(normalize_answer("  Foo   Bar ") == "foo bar");
    CHECK(normalize_answer("x+1") == "x+1");
    // division by zero and negative denominators are not rational forms
    CHECK(normalize_answer("3/0") == "3/0");
    CHECK(normalize_answer("6/-8") == "6/-8");
    CHECK(normalize_answer("1e3") == "1e3");  // exponent forms stay text
}

TEST_CASE("normalization is idempotent on random inputs") {
    Rng rng(derive_seed(11, 0x76657269));
    const std::string alphabet = "0123456789./-$ aBzZ+e";
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        const int len = static_cast<int>(rng.uniform_int(0, 12));
        for (int j = 0; j < len; ++j) {
            s += alphabet[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(alphabet.size()) - 1))];
        }
        const std::string once = normalize_answer(s);
        CHECK(normalize_answer(once) == once);
    }
}

TEST_CASE("equivalent rational spellings normalize identically") {
    // Oracle: p/q reduced by std::gcd, built independently of the
    // production string pipeline.
    Rng rng(derive_seed(12, 0x76657269));
    for (int i = 0; i < 500; ++i) {
        const long long p = rng.uniform_int(-999, 999);
        const long long q = rng.uniform_int(1, 999);
        const long long k = rng.uniform_int(1, 50);
        const std::string base = std::to_string(p) + "/" + std::to_string(q);
        const std::string scaled = std::to_string(p * k) + "/" + std::to_string(q * k);
        CHECK(normalize_answer(base) == normalize_answer(scaled));

        const long long g = std::gcd(p < 0 ? -p : p, q);
        const long long rp = p / g;
        const long long rq = q / g;
        const std::string expect =
            rq == 1 ? std::to_string(rp) : std::to_string(rp) + "/" + std::to_string(rq);
        CHECK(normalize_answer(base) == expect);
    }
}

TEST_CASE("decimal spellings match their fraction form") {
    Rng rng(derive_seed(13, 0x76657269));
    for (int i = 0; i < 500; ++i) {
        const long long whole = rng.uniform_int(-99, 99);
        const int exp = static_cast<int>(rng.uniform_int(1, 4));
        long long denom = 1;
        for (int e = 0; e < exp; ++e) denom *= 10;
        const long long frac = rng.uniform_int(0, denom - 1);
        // value = whole + sign(whole)*frac/denom, spelled as a decimal
        std::string digits = std::to_string(frac);
        digits.insert(digits.begin(), static_cast<std::size_t>(exp) - digits.size(), '0');
        const std::string decimal = std::to_string(whole) + "." + digits;
        const long long numer =
            whole * denom + (whole < 0 || decimal[0] == '-' ? -frac : frac);
        const std::string fraction = std::to_string(numer) + "/" + std::to_string(denom);
        CHECK(normalize_answer(decimal) == normalize_answer(fraction));
    }
}

TEST_CASE("answer extraction takes the last answer line") {
    CHECK(extract_answer("no answer here") == std::nullopt);
    CHECK(extract_answer("Answer: 5\n") == "5");
    CHECK(extract_answer("Answer: 5") == "5");  // no trailing newline
    CHECK(extract_answer("work\nAnswer: 4\nmore\nAnswer: 7\n") == "7");
    CHECK(extract_answer("  Answer:   42  \n") == "42");
    CHECK(extract_answer("Answer: $40$\n") == "40");
    CHECK(extract_answer("Answers: 42\n") == std::nullopt);  // prefix must match exactly
    CHECK(extract_answer("Answer:\n") == "");
}

TEST_CASE("binary reward is exactly +1 or -1") {
    const AnswerKey key = make_key("3.5");
    CHECK(binary_reward(key, "Answer: 7/2\n") == 1);
    CHECK(binary_reward(key, "Answer: 3.50\n") == 1);
    CHECK(binary_reward(key, "Answer: 3.4\n") == -1);
    CHECK(binary_reward(key, "no line") == -1);
    CHECK(is_equivalent(make_key("Paris"), " paris "));

    Rng rng(derive_seed(14, 0x76657269));
    for (int i = 0; i < 200; ++i) {
        const std::string text =
            "Answer: " + std::to_string(rng.uniform_int(-5, 5)) + "\n";
        const int r = binary_reward(make_key("2"), text);
        CHECK((r == 1 || r == -1));
        CHECK((r == 1) == (text == "Answer: 2\n"));
    }
}

TEST_CASE("group accuracy counts +1 fraction and rejects bad input") {
    CHECK(group_accuracy(std::vector<int>{1, -1, -1, -1}) == doctest::Approx(0.25));
    CHECK(group_accuracy(std::vector<int>{1, 1}) == doctest::Approx(1.0));
    CHECK(group_accuracy(std::vector<int>{-1}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(group_accuracy(std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(group_accuracy(std::vector<int>{1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(group_accuracy(std::vector<int>{2}), std::invalid_argument);
}
