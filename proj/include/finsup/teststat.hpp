#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "finsup/dist.hpp"
#include "finsup/sample_size_map.hpp"

namespace finsup::teststat {

enum class ErrorKind { exact, truncated, monte_carlo };

struct ExpectationReport {
  double value = 0;
  ErrorKind error_kind = ErrorKind::exact;
  double half_width = 0;     // 0 when exact
  double confidence = 1.0;   // 1 unless monte_carlo
  std::int64_t evaluations = 0;
};

// A sequence of [0,1]-valued functionals A_n applied to samples of length
// phi(n). Complementation is tracked as a flag on top of the base family so
// that taking the dual twice restores the original bit for bit.
//
// Built-in families may carry two optional hooks:
//  - an exact expectation evaluator (law, n, tol) -> report;
//  - monotone envelope rates: upper_rate(mu, m) bounds E_mu[A_m'] from above
//    for every m' >= m, lower_rate from below. These are what make sound
//    "for all m >= psi(n)" certificates possible.
class TestFamily {
 public:
  using EvalFn = std::function<double(std::int64_t, std::span<const std::int64_t>)>;
  using ExactFn = std::function<ExpectationReport(const dist::Law&, std::int64_t, double)>;
  using RateFn = std::function<double(const dist::FinitePmf&, std::int64_t)>;

  TestFamily(std::string name, SampleSizeMap phi, EvalFn eval,
             std::optional<double> level_claim = std::nullopt);

  double eval(std::int64_t n, std::span<const std::int64_t> sample) const;
  const SampleSizeMap& phi() const { return phi_; }
  std::int64_t sample_size(std::int64_t n) const { return phi_(n); }
  std::optional<double> level_claim() const;
  const std::string& base_name() const { return name_; }
  std::string name() const;
  bool complemented() const { return complemented_; }

  bool has_exact_expectation() const { return static_cast<bool>(exact_); }
  ExpectationReport exact_expectation(const dist::Law& law, std::int64_t n, double tol) const;

  bool has_analytic_rates() const { return static_cast<bool>(upper_rate_) && static_cast<bool>(lower_rate_); }
  double upper_rate(const dist::FinitePmf& mu, std::int64_t m) const;
  double lower_rate(const dist::FinitePmf& mu, std::int64_t m) const;

  /// 1 - A_n, with hooks and level claim transformed accordingly.
  TestFamily complement() const;

  TestFamily& with_exact(ExactFn fn);
  TestFamily& with_rates(RateFn upper, RateFn lower);

 private:
  std::string name_;
  SampleSizeMap phi_;
  EvalFn eval_;
  std::optional<double> level_claim_;
  ExactFn exact_;
  RateFn upper_rate_;
  RateFn lower_rate_;
  bool complemented_ = false;
};

/// A_n identically equal to value.
TestFamily constant_family(double value, SampleSizeMap phi = SampleSizeMap::identity());
/// A_n = 1{max of first half == max of second half} on samples of length 2n.
TestFamily split_max_family();
/// 1 - split_max: rejects when the half maxima differ; level 0 on finite support.
TestFamily dual_split_max_family();

/// 1 iff the two half maxima coincide; sample length must be even and >= 2.
int split_max_statistic(std::span<const std::int64_t> sample);

/// min(max(sample), N + 1).
std::int64_t bounded_support_statistic(std::span<const std::int64_t> sample, std::int64_t N);

// E[T_2n] = sum_k (F(k)^n - F(k-1)^n)^2, F(-1) = 0. Exact for finite
// support; for infinite laws the sum stops at the smallest K with
// 1 - F(K)^n <= tol and reports the remainder as half_width.
ExpectationReport exact_split_max_expectation(const dist::Law& law, std::int64_t n, double tol);

/// Exhaustive expectation over all |support|^phi(n) tuples (guarded at 1e7).
ExpectationReport brute_force_expectation(const TestFamily& test, const dist::FinitePmf& law,
                                          std::int64_t n);

double hoeffding_half_width(std::int64_t reps, double confidence);

/// Seeded Monte Carlo mean with a Hoeffding interval.
ExpectationReport mc_expectation(const TestFamily& test, const dist::Law& law, std::int64_t n,
                                 std::int64_t reps, double confidence, std::uint64_t seed);

}  // namespace finsup::teststat
