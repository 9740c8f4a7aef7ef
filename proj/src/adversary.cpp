#include "finsup/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "finsup/rng.hpp"

namespace finsup::adversary {

namespace {

struct KahanSum {
  double sum = 0;
  double carry = 0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Certified upper bound on E_{mu}[A_m]: exact evaluators report the value,
// Monte Carlo reports estimate + half-width so the certificate inequality
// covers the true expectation at the stated confidence.
double certified_upper(const teststat::TestFamily& test, const dist::FinitePmf& mu,
                       std::int64_t m, const EvaluatorOptions& ev, std::uint64_t seed) {
  switch (ev.kind) {
    case Evaluator::exact: {
      const auto r = test.exact_expectation(dist::Law{mu}, m, ev.tol);
      return r.value + r.half_width;
    }
    case Evaluator::brute_force: {
      const auto r = teststat::brute_force_expectation(test, mu, m);
      return r.value;
    }
    case Evaluator::monte_carlo: {
      const auto r = teststat::mc_expectation(test, dist::Law{mu}, m, ev.reps, ev.confidence, seed);
      return std::min(1.0, r.value + r.half_width);
    }
  }
  throw ConfigError("unknown evaluator");
}

dist::FinitePmf truncated_from_psi(const std::vector<std::int64_t>& psi, const SampleSizeMap& phi,
                                   std::int64_t n) {
  std::vector<std::int64_t> support;
  std::vector<double> weights;
  for (std::int64_t k = 0; k < n; ++k) {
    const auto w = static_cast<double>(phi(psi[static_cast<std::size_t>(k)]));
    support.push_back(k);
    weights.push_back(1.0 / (w * w));
  }
  return dist::normalize_finite(std::move(support), weights);
}

double c_n_from_psi(const std::vector<std::int64_t>& psi, const SampleSizeMap& phi, std::int64_t n) {
  KahanSum total;
  for (std::int64_t k = 0; k < n; ++k) {
    const auto w = static_cast<double>(phi(psi[static_cast<std::size_t>(k)]));
    total.add(1.0 / (w * w));
  }
  return 1.0 / total.sum;
}

}  // namespace

std::int64_t AdversarySchedule::psi_at(std::int64_t k) const {
  if (k < 0 || k > static_cast<std::int64_t>(ranks.size()))
    throw InvalidSample("psi recorded only up to the last built rank");
  if (k == 0) return 1;
  return ranks[static_cast<std::size_t>(k - 1)].psi;
}

dist::FinitePmf AdversarySchedule::truncated_law(std::int64_t n) const {
  return dist::truncate(final_law, n);
}

teststat::TestFamily dualize(const teststat::TestFamily& test) { return test.complement(); }

double inverse_square_tail(std::int64_t n) {
  if (n < 1) throw InvalidSample("tail index must be >= 1");
  // explicit head plus the integral-test remainder 1/K
  const std::int64_t terms = 4096;
  KahanSum head;
  for (std::int64_t k = n; k < n + terms; ++k)
    head.add(1.0 / (static_cast<double>(k) * static_cast<double>(k)));
  return head.sum + 1.0 / static_cast<double>(n + terms - 1);
}

TailUnionBound tail_union_bound(const dist::TailPmf& law, std::int64_t n) {
  if (n < 1) throw InvalidSample("union bound defined for n >= 1");
  const auto table_end = static_cast<std::int64_t>(law.psi_table().size());
  // Sum explicitly until the k^-4 remainder bound is negligible next to the
  // summed head; near the table edge the weights are enormous and the
  // closed form alone would be uselessly loose.
  std::int64_t cutoff = std::max({n, table_end, std::int64_t{2}});
  KahanSum explicit_part;
  std::int64_t done = n;
  double remainder;
  while (true) {
    for (std::int64_t k = done; k < cutoff; ++k) {
      const auto w = static_cast<double>(law.weight(k));
      explicit_part.add(1.0 / (w * w));
    }
    done = cutoff;
    const double km1 = static_cast<double>(cutoff - 1);
    remainder = 1.0 / (3.0 * km1 * km1 * km1);
    if (remainder <= 1e-6 * explicit_part.sum || cutoff >= (std::int64_t{1} << 20)) break;
    cutoff *= 2;
  }
  const auto prefactor = static_cast<double>(law.weight(n));
  TailUnionBound out;
  out.term = prefactor * (explicit_part.sum + remainder);
  out.coarse = inverse_square_tail(n);
  out.prob_bound = std::min(1.0, (law.c() + law.c_error()) * out.term);
  return out;
}

BuildOutcome build_adversary(const teststat::TestFamily& test, double alpha,
                             std::int64_t num_ranks, const BuildOptions& opts) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidTolerance("alpha must lie in [0,1)");
  if (num_ranks < 1) throw InvalidSample("at least one rank required");
  if (opts.horizon.policy == HorizonPolicy::analytic && !test.has_analytic_rates())
    throw ConfigError("analytic horizon requires a family with closed-form rates");
  if (opts.evaluator.kind == Evaluator::exact && !test.has_exact_expectation())
    throw ConfigError("exact evaluator requested but the family has no closed form");

  const SampleSizeMap& phi = test.phi();
  std::vector<std::int64_t> psi{1, 1};  // psi(0) = psi(1) = 1
  std::vector<AdversaryRank> ranks;

  // rank 1: Dirac at zero; the bound alpha + 1 exceeds one, so it covers
  // every m regardless of the horizon policy
  {
    const auto mu1 = dist::FinitePmf::dirac(0);
    const double bound = alpha + 1.0;
    const std::uint64_t seed = derive_seed(opts.evaluator.seed, 1);
    const double value = certified_upper(test, mu1, 1, opts.evaluator, seed);
    LevelCertificate cert{1, 1, 1, value, bound, opts.evaluator.kind,
                          opts.evaluator.kind == Evaluator::monte_carlo ? opts.evaluator.confidence : 1.0,
                          /*analytic=*/true};
    const auto w0 = static_cast<double>(phi(1));
    ranks.push_back({1, 1, w0 * w0, cert});
  }

  for (std::int64_t n = 2; n <= num_ranks; ++n) {
    const auto mu_n = truncated_from_psi(psi, phi, n);
    const std::int64_t lower = std::max(psi.back(), n * n);
    const double threshold = alpha + 1.0 / static_cast<double>(n);
    const std::uint64_t rank_seed = derive_seed(opts.evaluator.seed, static_cast<std::uint64_t>(n));

    std::optional<std::int64_t> chosen;
    LevelCertificate cert;
    cert.rank = n;
    cert.bound = threshold;
    cert.method = opts.evaluator.kind;
    cert.confidence = opts.evaluator.kind == Evaluator::monte_carlo ? opts.evaluator.confidence : 1.0;

    if (opts.horizon.policy == HorizonPolicy::analytic) {
      // upper_rate is nonincreasing in m and dominates E[A_m'] for every
      // m' >= m, so the smallest admissible candidate can be bracketed by
      // doubling and then pinned by bisection.
      const auto rate = [&](std::int64_t m) { return test.upper_rate(mu_n, m); };
      std::int64_t lo = lower;  // rate(lo) either untested or failing
      std::int64_t hi = lower + 1;
      bool found = rate(hi) <= threshold;
      if (!found) {
        while (hi < (std::int64_t{1} << 60)) {
          lo = hi;
          hi *= 2;
          if (rate(hi) <= threshold) {
            found = true;
            break;
          }
        }
      } else {
        lo = lower;
      }
      if (!found)
        return {std::nullopt, LevelViolation{n, hi, rate(hi), threshold}};
      while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        if (mid <= lower || rate(mid) > threshold)
          lo = mid;
        else
          hi = mid;
      }
      chosen = hi;
      cert.analytic = true;
      cert.m_lo = hi;
      cert.m_hi = hi;
      cert.max_expectation = certified_upper(test, mu_n, hi, opts.evaluator,
                                             derive_seed(rank_seed, static_cast<std::uint64_t>(hi)));
      if (cert.max_expectation > threshold + 1e-12)
        return {std::nullopt, LevelViolation{n, hi, cert.max_expectation, threshold}};
    } else {
      std::int64_t budget = opts.search_budget;
      std::int64_t p = lower + 1;
      while (!chosen) {
        const auto horizon_end =
            static_cast<std::int64_t>(std::ceil(opts.horizon.multiplier * static_cast<double>(p)));
        double max_value = 0.0;
        double last_value = 0.0;
        std::int64_t last_m = p;
        std::optional<std::pair<std::int64_t, double>> failure;
        bool scanned_all = true;
        for (std::int64_t m = p; m <= horizon_end; ++m) {
          if (budget <= 0) {
            scanned_all = false;
            break;
          }
          --budget;
          const double v = certified_upper(test, mu_n, m, opts.evaluator,
                                           derive_seed(rank_seed, static_cast<std::uint64_t>(m)));
          max_value = std::max(max_value, v);
          last_value = v;
          last_m = m;
          if (v > threshold) {
            failure = {m, v};
            break;
          }
        }
        if (failure) {
          if (budget <= 0) return {std::nullopt, LevelViolation{n, failure->first, failure->second, threshold}};
          p = failure->first + 1;  // any p <= failing m is inadmissible
          continue;
        }
        if (!scanned_all) return {std::nullopt, LevelViolation{n, last_m, last_value, threshold}};
        chosen = p;
        cert.analytic = false;
        cert.m_lo = p;
        cert.m_hi = horizon_end;
        cert.max_expectation = max_value;
      }
    }

    psi.push_back(*chosen);
    ranks.push_back({n, *chosen, c_n_from_psi(psi, phi, n), cert});
  }

  // Final law keeps every recorded psi, including the last rank's, so the
  // bound chain at rank R still sees monotone weights past index R.
  dist::TailPmf final_law(psi, phi, opts.normalizer_eps);
  AdversarySchedule schedule{alpha, std::move(ranks), std::move(final_law)};
  return {std::move(schedule), std::nullopt};
}

std::vector<RankVerification> verify_adversary(const AdversarySchedule& schedule,
                                               const teststat::TestFamily& test,
                                               const EvaluatorOptions& evaluator,
                                               bool throw_on_failure) {
  std::vector<RankVerification> rows;
  rows.reserve(schedule.ranks.size());
  const dist::Law law{schedule.final_law};
  for (const auto& rank : schedule.ranks) {
    RankVerification row;
    row.n = rank.n;
    row.psi = rank.psi;
    switch (evaluator.kind) {
      case Evaluator::exact:
        row.measured = test.exact_expectation(law, rank.psi, evaluator.tol);
        break;
      case Evaluator::monte_carlo:
        row.measured = teststat::mc_expectation(test, law, rank.psi, evaluator.reps,
                                                evaluator.confidence,
                                                derive_seed(evaluator.seed, static_cast<std::uint64_t>(rank.n)));
        break;
      case Evaluator::brute_force:
        throw ConfigError("brute force cannot enumerate an infinite-support law");
    }
    row.term_level = schedule.alpha + 1.0 / static_cast<double>(rank.n);
    row.term_tail = tail_union_bound(schedule.final_law, rank.n).term;
    row.total = std::min(1.0, row.term_level + inverse_square_tail(rank.n));
    const double slack = row.measured.half_width + 1e-9;
    row.pass = row.measured.value <= row.total + slack;
    rows.push_back(row);
  }
  if (throw_on_failure) {
    for (const auto& row : rows)
      if (!row.pass)
        throw VerificationFailure(row.n, "rank " + std::to_string(row.n) +
                                             " exceeded the analytic bound chain");
  }
  return rows;
}

}  // namespace finsup::adversary
