#include "rsp/answer.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace rsp {

namespace {

constexpr std::size_t kMaxExactDigits = 18;

bool erase_all(std::string& s, std::string_view needle) {
    bool changed = false;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle)) {
        s.erase(pos, needle.size());
        changed = true;
    }
    return changed;
}

std::optional<Rational> from_wide(__int128 num, __int128 den) {
    if (den == 0) return std::nullopt;
    if (den < 0) {
        num = -num;
        den = -den;
    }
    __int128 a = num < 0 ? -num : num;
    __int128 b = den;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    if (num > INT64_MAX || num < -INT64_MAX || den > INT64_MAX) return std::nullopt;
    return Rational{static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
}

double to_double(const Number& n) {
    if (auto r = std::get_if<Rational>(&n)) return r->to_double();
    return std::get<double>(n);
}

// [sign] digits [. digits]  |  [sign] . digits
std::optional<Number> parse_decimal(std::string_view s) {
    if (s.empty()) return std::nullopt;
    bool negative = false;
    std::size_t i = 0;
    if (s[0] == '-' || s[0] == '+') {
        negative = s[0] == '-';
        i = 1;
    }
    std::string digits;
    std::size_t frac_digits = 0;
    bool seen_point = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digits.push_back(c);
            if (seen_point) ++frac_digits;
        } else if (c == '.' && !seen_point) {
            seen_point = true;
        } else {
            return std::nullopt;
        }
    }
    if (digits.empty()) return std::nullopt;

    auto first_nonzero = digits.find_first_not_of('0');
    std::size_t significant = first_nonzero == std::string::npos ? 0 : digits.size() - first_nonzero;
    if (significant <= kMaxExactDigits && frac_digits <= kMaxExactDigits) {
        __int128 num = 0;
        for (char c : digits) num = num * 10 + (c - '0');
        __int128 den = 1;
        for (std::size_t k = 0; k < frac_digits; ++k) den *= 10;
        if (negative) num = -num;
        if (auto r = from_wide(num, den)) return Number{*r};
    }
    return Number{std::strtod(std::string(s).c_str(), nullptr)};
}

std::optional<Number> divide(const Number& a, const Number& b) {
    auto ra = std::get_if<Rational>(&a);
    auto rb = std::get_if<Rational>(&b);
    if (ra && rb) {
        if (rb->num == 0) return std::nullopt;
        auto r = from_wide(static_cast<__int128>(ra->num) * rb->den,
                           static_cast<__int128>(ra->den) * rb->num);
        if (r) return Number{*r};
    }
    double d = to_double(b);
    if (d == 0.0) return std::nullopt;
    return Number{to_double(a) / d};
}

std::optional<Number> negate(const Number& n) {
    if (auto r = std::get_if<Rational>(&n)) return Number{Rational{-r->num, r->den}};
    return Number{-std::get<double>(n)};
}

// \frac{a}{b} with decimal a and b.
std::optional<Number> parse_tex_fraction(std::string_view s) {
    for (std::string_view head : {"\\frac{", "\\dfrac{", "\\tfrac{"}) {
        if (!s.starts_with(head)) continue;
        s.remove_prefix(head.size());
        auto close = s.find('}');
        if (close == std::string_view::npos) return std::nullopt;
        auto numerator = parse_decimal(s.substr(0, close));
        s.remove_prefix(close + 1);
        if (!s.starts_with('{') || !s.ends_with('}')) return std::nullopt;
        auto denominator = parse_decimal(s.substr(1, s.size() - 2));
        if (!numerator || !denominator) return std::nullopt;
        return divide(*numerator, *denominator);
    }
    return std::nullopt;
}

} // namespace

std::optional<Rational> Rational::make(std::int64_t num, std::int64_t den) {
    return from_wide(num, den);
}

std::string normalize_answer(std::string_view raw) {
    std::string s(raw);
    for (bool changed = true; changed;) {
        changed = false;
        changed |= erase_all(s, "$");
        changed |= erase_all(s, "\\(");
        changed |= erase_all(s, "\\)");
        changed |= erase_all(s, "\\[");
        changed |= erase_all(s, "\\]");
        std::string compact;
        compact.reserve(s.size());
        for (char c : s) {
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            compact.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        while (!compact.empty() && compact.back() == '.') compact.pop_back();
        if (compact != s) {
            s = std::move(compact);
            changed = true;
        }
    }
    return s;
}

std::optional<Number> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (auto n = parse_decimal(s)) return n;

    bool negative = false;
    std::string_view body = s;
    if (body.starts_with('-')) {
        negative = true;
        body.remove_prefix(1);
    }
    if (auto value = parse_tex_fraction(body)) return negative ? negate(*value) : value;

    auto slash = s.find('/');
    if (slash == std::string_view::npos || s.find('/', slash + 1) != std::string_view::npos)
        return std::nullopt;
    auto numerator = parse_decimal(s.substr(0, slash));
    auto denominator = parse_decimal(s.substr(slash + 1));
    if (!numerator || !denominator) return std::nullopt;
    return divide(*numerator, *denominator);
}

Answer make_answer(std::string_view raw) {
    Answer a;
    a.raw = std::string(raw);
    a.normalized = normalize_answer(raw);
    a.numeric = parse_number(a.normalized);
    return a;
}

bool answers_equivalent(const Answer& a, const Answer& b) {
    if (a.numeric && b.numeric) {
        auto ra = std::get_if<Rational>(&*a.numeric);
        auto rb = std::get_if<Rational>(&*b.numeric);
        if (ra && rb) return *ra == *rb;
        double x = to_double(*a.numeric);
        double y = to_double(*b.numeric);
        if (x == y) return true;
        return std::fabs(x - y) <= 1e-9 * std::max(std::fabs(x), std::fabs(y));
    }
    return a.normalized == b.normalized;
}

} // namespace rsp
