#pragma once

#include <cstdint>
#include <numeric>
#include <string>

#include "coarse/errors.hpp"
#include "coarse/point.hpp"  // json alias

namespace coarse {

/// Exact rational arithmetic on int64 numerator/denominator, normalized to
/// den > 0 and gcd(num, den) = 1.  Intermediates run in __int128; results
/// that do not fit back into int64 throw rather than silently rounding.
struct Rational {
  int64_t num = 0;
  int64_t den = 1;

  Rational() = default;
  Rational(int64_t n) : num(n), den(1) {}  // NOLINT: implicit by design
  Rational(int64_t n, int64_t d) { *this = make(n, d); }

  static Rational make(__int128 n, __int128 d) {
    if (d == 0) throw DomainError("rational with zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX)
      throw DomainError("rational overflow");
    Rational r;
    r.num = static_cast<int64_t>(n);
    r.den = static_cast<int64_t>(d);
    return r;
  }

  static Rational parse(const std::string& s) {
    size_t slash = s.find('/');
    try {
      if (slash == std::string::npos) return Rational(std::stoll(s));
      return make(std::stoll(s.substr(0, slash)),
                  std::stoll(s.substr(slash + 1)));
    } catch (const std::invalid_argument&) {
      throw ConfigError("cannot parse rational: " + s);
    } catch (const std::out_of_range&) {
      throw ConfigError("rational out of range: " + s);
    }
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return make(i128(a.num) * b.den + i128(b.num) * a.den,
                i128(a.den) * b.den);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return make(i128(a.num) * b.den - i128(b.num) * a.den,
                i128(a.den) * b.den);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return make(i128(a.num) * b.num, i128(a.den) * b.den);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw DomainError("rational division by zero");
    return make(i128(a.num) * b.den, i128(a.den) * b.num);
  }
  Rational operator-() const { return make(-i128(num), den); }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator!=(const Rational& a, const Rational& b) {
    return !(a == b);
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return i128(a.num) * b.den < i128(b.num) * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) {
    return i128(a.num) * b.den <= i128(b.num) * a.den;
  }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator>=(const Rational& a, const Rational& b) {
    return b <= a;
  }

  Rational abs() const { return num < 0 ? -*this : *this; }
  bool is_zero() const { return num == 0; }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }
  json to_json() const { return json(str()); }

 private:
  static __int128 i128(int64_t v) { return static_cast<__int128>(v); }
  static __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }
};

}  // namespace coarse
