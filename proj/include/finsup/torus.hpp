#pragma once

#include <cstdint>
#include <variant>

#include "finsup/errors.hpp"

namespace finsup::tsirelson {

/// Reduced fraction with positive denominator.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  bool operator==(const Rational&) const = default;
};

/// Reduce num/den to lowest terms; den must end up positive.
Rational make_rational(std::int64_t num, std::int64_t den);
/// Representative of the class mod 1 with 0 <= num < den.
Rational wrap_unit(Rational r);
Rational add_mod1(Rational a, Rational b);
Rational sub_mod1(Rational a, Rational b);
/// -1, 0, +1 without rounding (cross multiplication in 128 bits).
int compare(Rational a, Rational b);
double to_double(Rational r);
/// lcm with overflow check.
std::int64_t checked_lcm(std::int64_t a, std::int64_t b);

/// a + b without wrapping; overflow checked.
Rational add_exact(Rational a, Rational b);
/// a - b without wrapping.
Rational sub_exact(Rational a, Rational b);
/// (a + b) / 2.
Rational average(Rational a, Rational b);

// Point of the circle R/Z, carried either as an exact reduced fraction in
// [0,1) or as a double in [0,1). The two modes never mix in arithmetic;
// rounding must be an explicit, caller-visible step.
class TorusPoint {
 public:
  static TorusPoint exact(std::int64_t num, std::int64_t den) {
    return TorusPoint(wrap_unit(make_rational(num, den)));
  }
  static TorusPoint exact(Rational r) { return TorusPoint(wrap_unit(r)); }
  static TorusPoint real(double x);

  bool is_exact() const { return std::holds_alternative<Rational>(rep_); }
  /// The reduced fraction; throws on real-mode points.
  Rational fraction() const;
  /// Numeric value in [0,1) for either mode.
  double value() const;

  friend TorusPoint operator+(const TorusPoint& a, const TorusPoint& b);
  friend TorusPoint operator-(const TorusPoint& a, const TorusPoint& b);
  /// Throws on mixed modes; exact points compare as fractions.
  bool operator==(const TorusPoint& other) const;
  /// Order by representative in [0,1); throws on mixed modes.
  static bool less(const TorusPoint& a, const TorusPoint& b);

 private:
  explicit TorusPoint(Rational r) : rep_(r) {}
  explicit TorusPoint(double x) : rep_(x) {}
  std::variant<Rational, double> rep_;
};

}  // namespace finsup::tsirelson
