#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "finsup/dist.hpp"
#include "finsup/teststat.hpp"

namespace finsup::adversary {

enum class HorizonPolicy { analytic, finite_horizon };

struct Horizon {
  HorizonPolicy policy = HorizonPolicy::analytic;
  double multiplier = 4.0;  // finite horizon checks m in [psi, multiplier * psi]
};

enum class Evaluator { exact, brute_force, monte_carlo };

struct EvaluatorOptions {
  Evaluator kind = Evaluator::exact;
  double tol = 1e-9;             // truncation tolerance for exact evaluators
  std::int64_t reps = 20000;     // monte_carlo replications
  double confidence = 0.99;      // monte_carlo confidence
  std::uint64_t seed = 0;
};

// Finite witness that E_{mu_2^n}[A_m] stays below alpha + 1/n over the
// checked range. max_expectation is a certified upper bound (Monte Carlo
// estimates are inflated by their half-width before being recorded).
// analytic = true means a monotone closed-form rate extends the guarantee
// to every m >= m_lo; otherwise the certificate is a heuristic witness.
struct LevelCertificate {
  std::int64_t rank = 0;
  std::int64_t m_lo = 0;
  std::int64_t m_hi = 0;
  double max_expectation = 0;
  double bound = 0;
  Evaluator method = Evaluator::exact;
  double confidence = 1.0;
  bool analytic = false;
};

struct AdversaryRank {
  std::int64_t n = 0;
  std::int64_t psi = 0;
  double c_n = 0;
  LevelCertificate certificate;
};

struct AdversarySchedule {
  double alpha = 0;
  std::vector<AdversaryRank> ranks;
  dist::TailPmf final_law;

  /// psi(0) = 1; psi(k) = rank k's value for 1 <= k <= last rank.
  std::int64_t psi_at(std::int64_t k) const;
  /// The truncated law mu_2^n used when rank n was certified.
  dist::FinitePmf truncated_law(std::int64_t n) const;
};

/// Search exhausted without an admissible psi(n): evidence the family does
/// not have pointwise level alpha. A finding, not an exception.
struct LevelViolation {
  std::int64_t rank = 0;
  std::int64_t m = 0;
  double value = 0;
  double bound = 0;
};

struct BuildOutcome {
  std::optional<AdversarySchedule> schedule;
  std::optional<LevelViolation> violation;
  bool ok() const { return schedule.has_value(); }
};

struct BuildOptions {
  Horizon horizon;
  EvaluatorOptions evaluator;
  std::int64_t search_budget = 4096;  // expectation evaluations per rank
  double normalizer_eps = 1e-14;
};

// The recursive construction: rank 1 is the Dirac mass at zero with
// psi(1) = 1; rank n > 1 renormalizes 1/weight^2 on {0..n-1} and picks the
// smallest psi(n) > max(psi(n-1), n^2) whose certificate passes.
BuildOutcome build_adversary(const teststat::TestFamily& test, double alpha,
                             std::int64_t num_ranks, const BuildOptions& opts = {});

/// A_n -> 1 - A_n; involutive bit for bit.
teststat::TestFamily dualize(const teststat::TestFamily& test);

struct TailUnionBound {
  double term = 0;        // phi(psi(n)) * sum_{k>=n} weight(k)^-2, certified upper bound
  double coarse = 0;      // upper bound on sum_{k>=n} k^-2
  double prob_bound = 0;  // min(1, c * term): bound on P[some of the phi(psi(n)) draws lands >= n]
};
TailUnionBound tail_union_bound(const dist::TailPmf& law, std::int64_t n);

struct RankVerification {
  std::int64_t n = 0;
  std::int64_t psi = 0;
  teststat::ExpectationReport measured;
  double term_level = 0;  // alpha + 1/n
  double term_tail = 0;   // weight-form union bound term
  double total = 0;       // min(1, alpha + 1/n + sum_{k>=n} k^-2)
  bool pass = false;
};

// Recomputes E_{mu_2}[A_psi(n)] on the final law at every rank and checks it
// against the analytic bound chain. Throws VerificationFailure on the first
// failed rank when throw_on_failure is set; rows are always fully computed.
std::vector<RankVerification> verify_adversary(const AdversarySchedule& schedule,
                                               const teststat::TestFamily& test,
                                               const EvaluatorOptions& evaluator = {},
                                               bool throw_on_failure = true);

/// Certified upper bound on sum_{k>=n} k^-2.
double inverse_square_tail(std::int64_t n);

}  // namespace finsup::adversary
