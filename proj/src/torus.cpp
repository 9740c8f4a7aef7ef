#include "finsup/torus.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace finsup::tsirelson {

namespace {

using Int128 = __int128;

std::int64_t checked_narrow(Int128 v, const char* what) {
  if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
    throw TorusArithmeticError(std::string("torus fraction overflow in ") + what);
  return static_cast<std::int64_t>(v);
}

Int128 gcd128(Int128 a, Int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const Int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Rational reduce128(Int128 num, Int128 den, const char* what) {
  if (den == 0) throw TorusArithmeticError("zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const Int128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{checked_narrow(num, what), checked_narrow(den, what)};
}

}  // namespace

Rational make_rational(std::int64_t num, std::int64_t den) {
  return reduce128(num, den, "make_rational");
}

Rational wrap_unit(Rational r) {
  r = make_rational(r.num, r.den);
  std::int64_t m = r.num % r.den;
  if (m < 0) m += r.den;
  return Rational{m, m == 0 ? 1 : r.den};
}

Rational add_mod1(Rational a, Rational b) {
  const std::int64_t g = std::gcd(a.den, b.den);
  const Int128 den = static_cast<Int128>(a.den / g) * b.den;
  const Int128 num = static_cast<Int128>(a.num) * (b.den / g) + static_cast<Int128>(b.num) * (a.den / g);
  Int128 m = num % den;
  if (m < 0) m += den;
  return reduce128(m, den, "add_mod1");
}

Rational sub_mod1(Rational a, Rational b) {
  return add_mod1(a, Rational{-b.num, b.den});
}

int compare(Rational a, Rational b) {
  const Int128 lhs = static_cast<Int128>(a.num) * b.den;
  const Int128 rhs = static_cast<Int128>(b.num) * a.den;
  if (lhs < rhs) return -1;
  if (lhs > rhs) return 1;
  return 0;
}

double to_double(Rational r) {
  return static_cast<double>(r.num) / static_cast<double>(r.den);
}

std::int64_t checked_lcm(std::int64_t a, std::int64_t b) {
  const std::int64_t g = std::gcd(a, b);
  const Int128 l = static_cast<Int128>(a / g) * b;
  return checked_narrow(l, "lcm");
}

Rational add_exact(Rational a, Rational b) {
  const std::int64_t g = std::gcd(a.den, b.den);
  const Int128 den = static_cast<Int128>(a.den / g) * b.den;
  const Int128 num = static_cast<Int128>(a.num) * (b.den / g) + static_cast<Int128>(b.num) * (a.den / g);
  return reduce128(num, den, "add_exact");
}

Rational sub_exact(Rational a, Rational b) {
  return add_exact(a, Rational{-b.num, b.den});
}

Rational average(Rational a, Rational b) {
  const std::int64_t g = std::gcd(a.den, b.den);
  const Int128 den = static_cast<Int128>(2) * (a.den / g) * b.den;
  const Int128 num = static_cast<Int128>(a.num) * (b.den / g) + static_cast<Int128>(b.num) * (a.den / g);
  return reduce128(num, den, "average");
}

TorusPoint TorusPoint::real(double x) {
  if (!std::isfinite(x)) throw TorusArithmeticError("torus points must be finite");
  double w = x - std::floor(x);
  if (w >= 1.0) w = 0.0;  // guards the x just below an integer rounding up
  return TorusPoint(w);
}

Rational TorusPoint::fraction() const {
  if (const auto* r = std::get_if<Rational>(&rep_)) return *r;
  throw TorusArithmeticError("real-mode point has no exact fraction");
}

double TorusPoint::value() const {
  if (const auto* r = std::get_if<Rational>(&rep_)) return to_double(*r);
  return std::get<double>(rep_);
}

namespace {

double wrap_real(double x) {
  double w = x - std::floor(x);
  if (w >= 1.0) w = 0.0;
  return w;
}

}  // namespace

TorusPoint operator+(const TorusPoint& a, const TorusPoint& b) {
  if (a.is_exact() != b.is_exact())
    throw TorusArithmeticError("mixed exact/real torus arithmetic is forbidden");
  if (a.is_exact()) return TorusPoint(add_mod1(a.fraction(), b.fraction()));
  return TorusPoint(wrap_real(std::get<double>(a.rep_) + std::get<double>(b.rep_)));
}

TorusPoint operator-(const TorusPoint& a, const TorusPoint& b) {
  if (a.is_exact() != b.is_exact())
    throw TorusArithmeticError("mixed exact/real torus arithmetic is forbidden");
  if (a.is_exact()) return TorusPoint(sub_mod1(a.fraction(), b.fraction()));
  return TorusPoint(wrap_real(std::get<double>(a.rep_) - std::get<double>(b.rep_)));
}

bool TorusPoint::operator==(const TorusPoint& other) const {
  if (is_exact() != other.is_exact())
    throw TorusArithmeticError("mixed exact/real torus comparison is forbidden");
  if (is_exact()) return fraction() == other.fraction();
  return std::get<double>(rep_) == std::get<double>(other.rep_);
}

bool TorusPoint::less(const TorusPoint& a, const TorusPoint& b) {
  if (a.is_exact() != b.is_exact())
    throw TorusArithmeticError("mixed exact/real torus comparison is forbidden");
  if (a.is_exact()) return compare(a.fraction(), b.fraction()) < 0;
  return std::get<double>(a.rep_) < std::get<double>(b.rep_);
}

}  // namespace finsup::tsirelson
