#pragma once

// Final-answer normalization and equivalence.
//
// Normalization (applied until a fixed point, hence idempotent):
//   - drop TeX math delimiters: every `$`, `\(`, `\)`, `\[`, `\]`
//   - drop all whitespace
//   - lowercase ASCII letters
//   - drop trailing periods
//
// Numeric forms recognized on the normalized text: integers, decimals,
// `a/b`, and `\frac{a}{b}` (also `\dfrac`, `\tfrac`), each optionally
// signed. They are held as exact rationals; a literal too long for 64-bit
// arithmetic falls back to a double. Anything else (intervals, tuples,
// words) compares as normalized text, so `[-4,0)` and `[-4,0]` differ.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace rsp {

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1; // > 0, gcd(num, den) == 1

    static std::optional<Rational> make(std::int64_t num, std::int64_t den);
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

using Number = std::variant<Rational, double>;

struct Answer {
    std::string raw;
    std::string normalized;
    std::optional<Number> numeric;
};

std::string normalize_answer(std::string_view raw);

// Parses an already-normalized answer text.
std::optional<Number> parse_number(std::string_view normalized);

Answer make_answer(std::string_view raw);

bool answers_equivalent(const Answer& a, const Answer& b);

} // namespace rsp
