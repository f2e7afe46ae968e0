#include "flatform/rational.hpp"

#include <cctype>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace flatform {

namespace {

using i128 = __int128;

std::int64_t narrow(i128 v) {
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min() + 1)
        throw std::overflow_error("rational overflow");
    return static_cast<std::int64_t>(v);
}

Rational make(i128 n, i128 d) {
    if (d == 0) throw std::domain_error("rational division by zero");
    if (d < 0) { n = -n; d = -d; }
    i128 a = n < 0 ? -n : n, b = d;
    while (b != 0) { i128 t = a % b; a = b; b = t; }
    if (a > 1) { n /= a; d /= a; }
    return Rational(narrow(n), narrow(d));
}

}  // namespace

Rational::Rational(std::int64_t n, std::int64_t d) {
    if (d == 0) throw std::domain_error("rational division by zero");
    if (d < 0) { n = -n; d = -d; }
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    num_ = n;
    den_ = d;
}

Rational Rational::from_decimal(const std::string& text) {
    std::size_t i = 0;
    bool neg = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) neg = text[i++] == '-';
    i128 mant = 0;
    int frac_digits = 0;
    bool any = false, dot = false;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            mant = mant * 10 + (c - '0');
            if (mant > static_cast<i128>(std::numeric_limits<std::int64_t>::max()))
                throw std::overflow_error("numeric literal too long: " + text);
            if (dot) ++frac_digits;
            any = true;
        } else if (c == '.' && !dot) {
            dot = true;
        } else {
            break;
        }
    }
    if (!any) throw std::invalid_argument("not a number: " + text);
    int exp10 = -frac_digits;
    if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        ++i;
        bool eneg = false;
        if (i < text.size() && (text[i] == '+' || text[i] == '-')) eneg = text[i++] == '-';
        int e = 0;
        bool edig = false;
        for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
            e = e * 10 + (text[i] - '0');
            edig = true;
            if (e > 40) throw std::overflow_error("exponent too large: " + text);
        }
        if (!edig) throw std::invalid_argument("malformed exponent: " + text);
        exp10 += eneg ? -e : e;
    }
    if (i != text.size()) throw std::invalid_argument("not a number: " + text);
    i128 num = neg ? -mant : mant, den = 1;
    for (int k = 0; k < exp10; ++k) { num *= 10; narrow(num); }
    for (int k = 0; k < -exp10; ++k) { den *= 10; narrow(den); }
    return make(num, den);
}

Rational Rational::operator-() const { return Rational(narrow(-static_cast<i128>(num_)), den_); }

Rational operator+(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.den_ + static_cast<i128>(b.num_) * a.den_,
                static_cast<i128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational operator*(const Rational& a, const Rational& b) {
    return make(static_cast<i128>(a.num_) * b.num_, static_cast<i128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return make(static_cast<i128>(a.num_) * b.den_, static_cast<i128>(a.den_) * b.num_);
}

Rational Rational::pow(int k) const {
    if (k < 0) return Rational(1) / pow(-k);
    Rational r(1), base = *this;
    while (k > 0) {
        if (k & 1) r = r * base;
        k >>= 1;
        if (k) base = base * base;
    }
    return r;
}

std::string Rational::str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

}  // namespace flatform
