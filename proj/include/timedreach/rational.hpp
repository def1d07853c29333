#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace timedreach {

// Exact rational arithmetic for sample periods and clock values.  Sample
// periods are small fractions (1/5, 1/120, ...) and tick counts stay in the
// thousands, so int64 with 128-bit intermediate comparisons is plenty.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;  // always > 0, gcd(num, den) == 1

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }
  explicit Rational(std::int64_t n) : num(n), den(1) {}

  void normalize() {
    if (den == 0) throw std::invalid_argument("rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_integer() const { return den == 1; }
  bool positive() const { return num > 0; }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den - b.num * a.den, a.den * b.den);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(a.num * b.num, a.den * b.den);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw std::invalid_argument("rational: division by zero");
    return Rational(a.num * b.den, a.den * b.num);
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }
};

// ceil(a) as an integer; handles either sign.
inline std::int64_t ceil_int(const Rational& a) {
  std::int64_t q = a.num / a.den;
  if (a.num % a.den != 0 && a.num > 0) ++q;
  return q;
}

inline std::int64_t floor_int(const Rational& a) {
  std::int64_t q = a.num / a.den;
  if (a.num % a.den != 0 && a.num < 0) --q;
  return q;
}

// Parses "3", "-3", "1/5", "0.2", "2.75e-1" style literals exactly (decimal
// digits become num/10^k; no binary floating point round trip).
inline Rational parse_rational(const std::string& text) {
  const std::string err = "invalid rational literal '" + text + "'";
  if (text.empty()) throw std::invalid_argument(err);
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    try {
      std::size_t a = 0, b = 0;
      const std::int64_t n = std::stoll(text.substr(0, slash), &a);
      const std::int64_t d = std::stoll(text.substr(slash + 1), &b);
      if (a != slash || b != text.size() - slash - 1) throw std::invalid_argument(err);
      return Rational(n, d);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument(err);
    }
  }
  std::size_t i = 0;
  bool neg = false;
  if (text[i] == '+' || text[i] == '-') {
    neg = text[i] == '-';
    ++i;
  }
  std::int64_t mantissa = 0;
  int frac_digits = 0;
  bool any = false, in_frac = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c >= '0' && c <= '9') {
      mantissa = mantissa * 10 + (c - '0');
      if (in_frac) ++frac_digits;
      any = true;
    } else if (c == '.' && !in_frac) {
      in_frac = true;
    } else if ((c == 'e' || c == 'E') && any) {
      break;
    } else {
      throw std::invalid_argument(err);
    }
  }
  int exp10 = 0;
  if (i < text.size()) {  // exponent part
    std::size_t used = 0;
    exp10 = std::stoi(text.substr(i + 1), &used);
    if (used != text.size() - i - 1) throw std::invalid_argument(err);
  }
  if (!any) throw std::invalid_argument(err);
  Rational r(neg ? -mantissa : mantissa, 1);
  int shift = exp10 - frac_digits;
  while (shift > 0) {
    r = r * Rational(10, 1);
    --shift;
  }
  while (shift < 0) {
    r = r / Rational(10, 1);
    ++shift;
  }
  return r;
}

}  // namespace timedreach
