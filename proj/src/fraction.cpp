#include "irispad/fraction.hpp"

#include <algorithm>

#include "irispad/error.hpp"

namespace irispad {

namespace {

using Int = Fraction::Int;

Int abs128(Int v) { return v < 0 ? -v : v; }

Int gcd128(Int a, Int b) {
  a = abs128(a);
  b = abs128(b);
  while (b != 0) {
    const Int t = a % b;
    a = b;
    b = t;
  }
  return a;
}

std::string to_string128(Int v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  std::string s;
  for (Int u = abs128(v); u != 0; u /= 10) s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
  if (neg) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

}  // namespace

Fraction::Fraction(Int num, Int den) {
  if (den == 0) throw Error(ErrorKind::undefined_metric, "fraction with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const Int g = gcd128(num, den);
  num_ = g == 0 ? 0 : num / g;
  den_ = g == 0 ? 1 : den / g;
}

double Fraction::to_double() const {
  return static_cast<double>(num_) / static_cast<double>(den_);
}

double Fraction::percent() const {
  const Fraction scaled = *this * Fraction(100);
  return scaled.to_double();
}

Fraction operator+(const Fraction& a, const Fraction& b) {
  const Int g = gcd128(a.den_, b.den_);
  return Fraction(a.num_ * (b.den_ / g) + b.num_ * (a.den_ / g), a.den_ / g * b.den_);
}

Fraction operator-(const Fraction& a, const Fraction& b) {
  return a + Fraction(-b.num_, b.den_);
}

Fraction operator*(const Fraction& a, const Fraction& b) {
  const Int g1 = gcd128(a.num_, b.den_);
  const Int g2 = gcd128(b.num_, a.den_);
  const Int n1 = g1 == 0 ? a.num_ : a.num_ / g1;
  const Int d2 = g1 == 0 ? b.den_ : b.den_ / g1;
  const Int n2 = g2 == 0 ? b.num_ : b.num_ / g2;
  const Int d1 = g2 == 0 ? a.den_ : a.den_ / g2;
  return Fraction(n1 * n2, d1 * d2);
}

Fraction operator/(const Fraction& a, const Fraction& b) {
  if (b.num_ == 0) throw Error(ErrorKind::undefined_metric, "division by zero fraction");
  return a * Fraction(b.den_, b.num_);
}

std::strong_ordering operator<=>(const Fraction& a, const Fraction& b) {
  const Int lhs = a.num_ * b.den_;
  const Int rhs = b.num_ * a.den_;
  return lhs <=> rhs;
}

std::string Fraction::str() const {
  return den_ == 1 ? to_string128(num_) : to_string128(num_) + "/" + to_string128(den_);
}

}  // namespace irispad
