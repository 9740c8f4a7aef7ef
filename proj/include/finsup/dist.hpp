#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "finsup/errors.hpp"
#include "finsup/sample_size_map.hpp"

namespace finsup::dist {

// Integer-supported law with finite support. Probabilities are stored for
// the support points only; zero-mass points are never stored, so the stored
// set IS the support.
class FinitePmf {
 public:
  // Validates: support strictly increasing and nonnegative, all probs > 0,
  // total mass within 1e-12 of one.
  FinitePmf(std::vector<std::int64_t> support, std::vector<double> probs);

  static FinitePmf dirac(std::int64_t point);
  static FinitePmf uniform(std::vector<std::int64_t> points);
  static FinitePmf uniform_range(std::int64_t lo, std::int64_t hi);

  const std::vector<std::int64_t>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  std::int64_t right_endpoint() const { return support_.back(); }
  std::size_t size() const { return support_.size(); }

  double pmf(std::int64_t k) const;
  /// F(k); exactly 1 at and beyond the right endpoint.
  double cdf(std::int64_t k) const;
  /// P(X > k), accumulated from the tail for precision.
  double tail_mass_above(std::int64_t k) const;

 private:
  std::vector<std::int64_t> support_;
  std::vector<double> probs_;
  std::vector<double> cum_;     // cum_[i] = P(X <= support_[i]); back() == 1 exactly
  std::vector<double> suffix_;  // suffix_[i] = P(X > support_[i]); back() == 0
};

struct Normalizer {
  double c = 0;
  double c_error = 0;  // certified absolute error bound on c
};

// Normalizing constant for pmf(k) = c / weight(k)^2 on all of N.
// weight(k) must exceed k^2 for every k >= growth_valid_from; the tail
// beyond the summation cutoff K is then bounded by sum k^-4 <= 1/(3(K-1)^3).
Normalizer tail_normalizer(const std::function<std::int64_t(std::int64_t)>& weight,
                           std::int64_t growth_valid_from, double eps);

// Infinite-support law pmf(k) = c / (phi(psi(k)))^2. psi is given by an
// explicit table for k <= N and extends deterministically beyond it by
// psi(k) = max(psi(k-1) + 1, k^2 + 1), which keeps psi strictly increasing
// with psi(k) > k^2 outside the table.
class TailPmf {
 public:
  TailPmf(std::vector<std::int64_t> psi_table, SampleSizeMap phi, double eps = 1e-14);
  /// Rebuild from serialized form; the stored normalizer is trusted.
  static TailPmf with_normalizer(std::vector<std::int64_t> psi_table, SampleSizeMap phi,
                                 double c, double c_error);

  std::int64_t psi(std::int64_t k) const;
  std::int64_t weight(std::int64_t k) const;  // phi(psi(k))
  double pmf(std::int64_t k) const;
  double cdf(std::int64_t k) const;
  /// Certified upper bound on P(X > k).
  double tail_mass_above(std::int64_t k) const;

  double c() const { return c_; }
  double c_error() const { return c_error_; }
  const std::vector<std::int64_t>& psi_table() const { return psi_table_; }
  const SampleSizeMap& phi() const { return phi_; }

 private:
  TailPmf() = default;
  std::vector<std::int64_t> psi_table_;
  SampleSizeMap phi_;
  double c_ = 0;
  double c_error_ = 0;
};

/// Geometric law on {0,1,2,...}: pmf(k) = p (1-p)^k.
class GeometricPmf {
 public:
  explicit GeometricPmf(double p);
  double p() const { return p_; }
  double pmf(std::int64_t k) const;
  double cdf(std::int64_t k) const;
  double tail_mass_above(std::int64_t k) const;  // (1-p)^(k+1), exact

 private:
  double p_;
};

// (1-delta) * base + delta * G where G is Geometric(1/2) shifted to start
// just past the base's right endpoint. Total variation to the base is
// exactly delta, which is what makes it the uniform-level counterexample.
class MixedTailLaw {
 public:
  MixedTailLaw(FinitePmf base, double delta);
  const FinitePmf& base() const { return base_; }
  double delta() const { return delta_; }
  std::int64_t shift() const { return shift_; }  // first point of the tail part
  double pmf(std::int64_t k) const;
  double cdf(std::int64_t k) const;
  double tail_mass_above(std::int64_t k) const;

 private:
  FinitePmf base_;
  double delta_;
  std::int64_t shift_;
};

using Law = std::variant<FinitePmf, TailPmf, GeometricPmf, MixedTailLaw>;

double pmf(const Law& law, std::int64_t k);
double cdf(const Law& law, std::int64_t k);
double tail_mass_above(const Law& law, std::int64_t k);
/// Certified bound on |total mass - 1| (zero for exactly normalized kinds).
double mass_error(const Law& law);
bool has_finite_support(const Law& law);

/// Read-only CDF view of a law.
class Cdf {
 public:
  explicit Cdf(Law law) : law_(std::move(law)) {}
  double operator()(std::int64_t k) const { return cdf(law_, k); }
  const Law& law() const { return law_; }

 private:
  Law law_;
};

FinitePmf normalize_finite(std::vector<std::int64_t> support, const std::vector<double>& raw_weights);

/// i.i.d. draws by inverse CDF; bit-exact given the seed.
std::vector<std::int64_t> sample(const Law& law, std::uint64_t seed, std::int64_t count);

/// First n points of a tail law, renormalized.
FinitePmf truncate(const TailPmf& tail, std::int64_t n);

/// Half l1 distance; truncation error below 1e-10 folded in.
double tv_distance(const Law& a, const Law& b);

MixedTailLaw mix_with_tail(const FinitePmf& mu1, double delta);

/// Upper bound on the n-fold product total variation, n * delta.
double product_tv_bound(double delta, std::int64_t n);

}  // namespace finsup::dist
