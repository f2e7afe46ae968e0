#pragma once

#include <cstdint>
#include <string>

namespace flatform {

// Exact rational with int64 parts; every operation checks for overflow.
class Rational {
public:
    Rational() = default;
    Rational(std::int64_t n) : num_(n), den_(1) {}
    Rational(std::int64_t n, std::int64_t d);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }

    bool is_zero() const { return num_ == 0; }
    bool is_one() const { return num_ == 1 && den_ == 1; }
    bool is_integer() const { return den_ == 1; }
    bool is_negative() const { return num_ < 0; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    // Parses "12", "-3", "0.25", "1e-3", "2.5E+2". Throws std::invalid_argument.
    static Rational from_decimal(const std::string& text);

    Rational operator-() const;
    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    friend bool operator==(const Rational& a, const Rational& b) = default;

    Rational pow(int k) const;
    std::string str() const;

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

}  // namespace flatform
