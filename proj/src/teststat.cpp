#include "finsup/teststat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "finsup/rng.hpp"

namespace finsup::teststat {

namespace {

// (1 - r)^n computed through log1p so that suffix masses near zero keep
// full relative precision even for n in the billions.
double complement_power(double r, std::int64_t n) {
  if (r <= 0.0) return 1.0;
  if (r >= 1.0) return 0.0;
  return std::exp(static_cast<double>(n) * std::log1p(-r));
}

double one_minus_complement_power(double r, std::int64_t n) {
  if (r <= 0.0) return 0.0;
  if (r >= 1.0) return 1.0;
  return -std::expm1(static_cast<double>(n) * std::log1p(-r));
}

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

}  // namespace

TestFamily::TestFamily(std::string name, SampleSizeMap phi, EvalFn eval,
                       std::optional<double> level_claim)
    : name_(std::move(name)), phi_(std::move(phi)), eval_(std::move(eval)),
      level_claim_(level_claim) {}

double TestFamily::eval(std::int64_t n, std::span<const std::int64_t> sample) const {
  if (static_cast<std::int64_t>(sample.size()) != phi_(n))
    throw InvalidSample("sample length must equal phi(n)");
  const double base = eval_(n, sample);
  if (!(base >= 0.0 && base <= 1.0)) throw InvalidSample("test values must lie in [0,1]");
  return complemented_ ? 1.0 - base : base;
}

std::optional<double> TestFamily::level_claim() const {
  if (!level_claim_) return std::nullopt;
  return complemented_ ? 1.0 - *level_claim_ : *level_claim_;
}

std::string TestFamily::name() const { return complemented_ ? "dual_" + name_ : name_; }

ExpectationReport TestFamily::exact_expectation(const dist::Law& law, std::int64_t n, double tol) const {
  if (!exact_) throw ConfigError("test family has no exact expectation evaluator");
  ExpectationReport report = exact_(law, n, tol);
  if (complemented_) report.value = 1.0 - report.value;
  return report;
}

double TestFamily::upper_rate(const dist::FinitePmf& mu, std::int64_t m) const {
  if (!has_analytic_rates()) throw ConfigError("test family has no analytic rate");
  return complemented_ ? 1.0 - lower_rate_(mu, m) : upper_rate_(mu, m);
}

double TestFamily::lower_rate(const dist::FinitePmf& mu, std::int64_t m) const {
  if (!has_analytic_rates()) throw ConfigError("test family has no analytic rate");
  return complemented_ ? 1.0 - upper_rate_(mu, m) : lower_rate_(mu, m);
}

TestFamily TestFamily::complement() const {
  TestFamily dual = *this;
  dual.complemented_ = !complemented_;
  return dual;
}

TestFamily& TestFamily::with_exact(ExactFn fn) {
  exact_ = std::move(fn);
  return *this;
}

TestFamily& TestFamily::with_rates(RateFn upper, RateFn lower) {
  upper_rate_ = std::move(upper);
  lower_rate_ = std::move(lower);
  return *this;
}

TestFamily constant_family(double value, SampleSizeMap phi) {
  if (!(value >= 0.0 && value <= 1.0)) throw InvalidSample("constant test value must lie in [0,1]");
  TestFamily family("constant", std::move(phi),
                    [value](std::int64_t, std::span<const std::int64_t>) { return value; }, value);
  family.with_exact([value](const dist::Law&, std::int64_t, double) {
    return ExpectationReport{value, ErrorKind::exact, 0.0, 1.0, 0};
  });
  family.with_rates([value](const dist::FinitePmf&, std::int64_t) { return value; },
                    [value](const dist::FinitePmf&, std::int64_t) { return value; });
  return family;
}

TestFamily split_max_family() {
  TestFamily family(
      "split_max", SampleSizeMap::from_table({2, 4}),
      [](std::int64_t, std::span<const std::int64_t> sample) {
        return static_cast<double>(split_max_statistic(sample));
      },
      1.0);
  family.with_exact([](const dist::Law& law, std::int64_t n, double tol) {
    return exact_split_max_expectation(law, n, tol);
  });
  // For m' >= m: both half maxima hit the right endpoint with probability
  // (1 - (1-q)^m')^2, q the endpoint mass, so E[T_2m'] >= (1 - (1-q)^m)^2.
  family.with_rates(
      [](const dist::FinitePmf&, std::int64_t) { return 1.0; },
      [](const dist::FinitePmf& mu, std::int64_t m) {
        const double q = mu.probs().back();
        const double miss = complement_power(q, m);
        return (1.0 - miss) * (1.0 - miss);
      });
  return family;
}

TestFamily dual_split_max_family() { return split_max_family().complement(); }

int split_max_statistic(std::span<const std::int64_t> sample) {
  if (sample.size() < 2 || sample.size() % 2 != 0)
    throw InvalidSample("split-max statistic needs an even sample of length >= 2");
  const std::size_t half = sample.size() / 2;
  const auto front = *std::max_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(half));
  const auto back = *std::max_element(sample.begin() + static_cast<std::ptrdiff_t>(half), sample.end());
  return front == back ? 1 : 0;
}

std::int64_t bounded_support_statistic(std::span<const std::int64_t> sample, std::int64_t N) {
  if (sample.empty()) throw InvalidSample("bounded-support statistic needs a nonempty sample");
  if (N < 0) throw InvalidSample("support bound must be nonnegative");
  const auto mx = *std::max_element(sample.begin(), sample.end());
  return std::min(mx, N + 1);
}

namespace {

ExpectationReport split_max_finite(const dist::FinitePmf& law, std::int64_t n) {
  KahanSum acc;
  double prev_pow = 0.0;  // F(-1)^n = 0
  for (std::size_t i = 0; i < law.size(); ++i) {
    const double r = law.tail_mass_above(law.support()[i]);
    const double cur = complement_power(r, n);
    const double p = cur - prev_pow;
    acc.add(p * p);
    prev_pow = cur;
  }
  return {std::min(acc.sum, 1.0), ErrorKind::exact, 0.0, 1.0,
          static_cast<std::int64_t>(law.size())};
}

ExpectationReport split_max_infinite(const dist::Law& law, std::int64_t n, double tol) {
  // pick the cutoff from certified tail bounds, then accumulate suffix
  // masses backward so every F(k) is formed from small positive terms
  std::int64_t cutoff = 64;
  double cutoff_bound;
  while (true) {
    cutoff_bound = dist::tail_mass_above(law, cutoff);
    if (one_minus_complement_power(cutoff_bound, n) <= tol) break;
    if (cutoff > (std::int64_t{1} << 31)) throw InvalidTolerance("split-max truncation cannot reach tol");
    cutoff *= 2;
  }
  const double start_tail = 0.5 * cutoff_bound;  // unknown true tail, centered
  KahanSum acc;
  // suffix masses accumulated from the far end with compensation, so each
  // P(X > k) is accurate to a few ulp of the total mass
  std::vector<double> suffix(static_cast<std::size_t>(cutoff) + 2);
  KahanSum back;
  back.add(start_tail);
  suffix[static_cast<std::size_t>(cutoff) + 1] = back.sum;
  for (std::int64_t k = cutoff; k >= 0; --k) {
    back.add(dist::pmf(law, k));
    suffix[static_cast<std::size_t>(k)] = back.sum;
  }
  double prev_pow = 0.0;  // F(-1)^n
  for (std::int64_t k = 0; k <= cutoff; ++k) {
    const double cur = complement_power(suffix[static_cast<std::size_t>(k) + 1], n);
    const double p = cur - prev_pow;
    acc.add(p * p);
    prev_pow = cur;
  }
  const double remainder = one_minus_complement_power(cutoff_bound, n);
  // mass uncertainty (normalizer slack + centered tail + compensated
  // summation rounding) propagates into each F(k)^n with derivative at most
  // n; |sum a^2 - sum b^2| <= 2 sup|a-b| * sum(a + b) <= 4 n eps0
  const double eps0 = dist::mass_error(law) + start_tail +
                      16.0 * std::numeric_limits<double>::epsilon();
  const double half_width = remainder + std::min(1.0, 4.0 * static_cast<double>(n) * eps0);
  return {std::clamp(acc.sum, 0.0, 1.0), ErrorKind::truncated, half_width, 1.0, cutoff + 1};
}

}  // namespace

ExpectationReport exact_split_max_expectation(const dist::Law& law, std::int64_t n, double tol) {
  if (n < 1) throw InvalidSample("split-max expectation needs n >= 1");
  if (!(tol > 0.0)) throw InvalidTolerance("tolerance must be positive");
  if (const auto* finite = std::get_if<dist::FinitePmf>(&law)) return split_max_finite(*finite, n);
  return split_max_infinite(law, n, tol);
}

ExpectationReport brute_force_expectation(const TestFamily& test, const dist::FinitePmf& law,
                                          std::int64_t n) {
  const std::int64_t len = test.sample_size(n);
  const auto base = static_cast<double>(law.size());
  if (len * std::log(base) > std::log(1e7) + 1e-9)
    throw TooLarge("tuple space exceeds the 1e7 enumeration budget");

  std::vector<std::size_t> idx(static_cast<std::size_t>(len), 0);
  std::vector<std::int64_t> tuple(static_cast<std::size_t>(len), law.support().front());
  // prefix[i] = product of probs for digits < i
  std::vector<double> prefix(static_cast<std::size_t>(len) + 1, 1.0);
  for (std::size_t i = 0; i < idx.size(); ++i) prefix[i + 1] = prefix[i] * law.probs()[0];

  KahanSum acc;
  std::int64_t count = 0;
  bool done = false;
  while (!done) {
    acc.add(prefix.back() * test.eval(n, tuple));
    ++count;
    // odometer step, least significant digit last
    std::size_t pos = idx.size();
    while (true) {
      if (pos == 0) {
        done = true;
        break;
      }
      --pos;
      if (idx[pos] + 1 < law.size()) {
        ++idx[pos];
        tuple[pos] = law.support()[idx[pos]];
        prefix[pos + 1] = prefix[pos] * law.probs()[idx[pos]];
        for (std::size_t i = pos + 1; i < idx.size(); ++i) {
          idx[i] = 0;
          tuple[i] = law.support()[0];
          prefix[i + 1] = prefix[i] * law.probs()[0];
        }
        break;
      }
    }
  }
  return {std::clamp(acc.sum, 0.0, 1.0), ErrorKind::exact, 0.0, 1.0, count};
}

double hoeffding_half_width(std::int64_t reps, double confidence) {
  if (reps < 1) throw InvalidSample("at least one replication required");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidTolerance("confidence must lie in (0,1)");
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * static_cast<double>(reps)));
}

ExpectationReport mc_expectation(const TestFamily& test, const dist::Law& law, std::int64_t n,
                                 std::int64_t reps, double confidence, std::uint64_t seed) {
  const double half_width = hoeffding_half_width(reps, confidence);
  const std::int64_t len = test.sample_size(n);
  KahanSum acc;
  for (std::int64_t r = 0; r < reps; ++r) {
    const auto draw = dist::sample(law, derive_seed(seed, static_cast<std::uint64_t>(r)), len);
    acc.add(test.eval(n, draw));
  }
  return {acc.sum / static_cast<double>(reps), ErrorKind::monte_carlo, half_width, confidence, reps};
}

}  // namespace finsup::teststat
