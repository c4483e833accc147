#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace irispad {

// Exact non-negative-denominator rational on 128-bit integers, always reduced.
class Fraction {
 public:
  using Int = __int128;

  Fraction() = default;
  Fraction(Int num, Int den = 1);

  Int num() const noexcept { return num_; }
  Int den() const noexcept { return den_; }

  double to_double() const;
  // 100 * value, rounded once.
  double percent() const;

  friend Fraction operator+(const Fraction& a, const Fraction& b);
  friend Fraction operator-(const Fraction& a, const Fraction& b);
  friend Fraction operator*(const Fraction& a, const Fraction& b);
  friend Fraction operator/(const Fraction& a, const Fraction& b);

  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Fraction& a, const Fraction& b);

  std::string str() const;

 private:
  Int num_ = 0;
  Int den_ = 1;
};

}  // namespace irispad
