#include "finsup/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "finsup/rng.hpp"

namespace finsup::dist {

namespace {

// Compensated accumulator; keeps long positive sums accurate to a few ulp.
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

double checked_unit_interval(double x, const char* what) {
  if (!(x > 0.0 && x < 1.0)) throw InvalidWeights(std::string(what) + " must lie in (0,1)");
  return x;
}

}  // namespace

FinitePmf::FinitePmf(std::vector<std::int64_t> support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (support_.empty() || support_.size() != probs_.size())
    throw InvalidWeights("support and probability lists must be nonempty and aligned");
  std::int64_t prev = -1;
  for (std::int64_t s : support_) {
    if (s < 0 || s <= prev) throw InvalidWeights("support must be strictly increasing and nonnegative");
    prev = s;
  }
  KahanSum total;
  for (double p : probs_) {
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidWeights("stored probabilities must be finite and positive");
    total.add(p);
  }
  if (std::abs(total.sum - 1.0) > 1e-12) throw InvalidWeights("probabilities must sum to one within 1e-12");

  cum_.resize(probs_.size());
  KahanSum run;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    run.add(probs_[i]);
    cum_[i] = std::min(run.sum, 1.0);
  }
  cum_.back() = 1.0;  // right endpoint carries full mass by definition

  suffix_.assign(probs_.size(), 0.0);
  KahanSum back;
  for (std::size_t i = probs_.size(); i-- > 1;) {
    back.add(probs_[i]);
    suffix_[i - 1] = back.sum;
  }
}

FinitePmf FinitePmf::dirac(std::int64_t point) { return FinitePmf({point}, {1.0}); }

FinitePmf FinitePmf::uniform(std::vector<std::int64_t> points) {
  const std::size_t n = points.size();
  if (n == 0) throw InvalidWeights("uniform law needs at least one point");
  return FinitePmf(std::move(points), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

FinitePmf FinitePmf::uniform_range(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw InvalidWeights("empty uniform range");
  std::vector<std::int64_t> pts;
  pts.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t k = lo; k <= hi; ++k) pts.push_back(k);
  return uniform(std::move(pts));
}

double FinitePmf::pmf(std::int64_t k) const {
  const auto it = std::lower_bound(support_.begin(), support_.end(), k);
  if (it == support_.end() || *it != k) return 0.0;
  return probs_[static_cast<std::size_t>(it - support_.begin())];
}

double FinitePmf::cdf(std::int64_t k) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), k);
  if (it == support_.begin()) return 0.0;
  return cum_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

double FinitePmf::tail_mass_above(std::int64_t k) const {
  const auto it = std::upper_bound(support_.begin(), support_.end(), k);
  if (it == support_.begin()) return 1.0;
  return suffix_[static_cast<std::size_t>(it - support_.begin()) - 1];
}

Normalizer tail_normalizer(const std::function<std::int64_t(std::int64_t)>& weight,
                           std::int64_t growth_valid_from, double eps) {
  if (!(eps > 0.0)) throw InvalidTolerance("tolerance must be positive");
  std::int64_t cutoff = std::max<std::int64_t>(growth_valid_from + 1, 8);
  KahanSum partial;
  std::int64_t done = 0;
  const auto extend = [&](std::int64_t upto) {
    for (std::int64_t k = done; k < upto; ++k) {
      const auto w = static_cast<double>(weight(k));
      if (!(w >= 1.0)) throw InvalidWeights("weight function must be a positive integer map");
      partial.add(1.0 / (w * w));
    }
    done = upto;
  };
  while (true) {
    extend(cutoff);
    const double s = partial.sum;
    const double km1 = static_cast<double>(cutoff - 1);
    // tail above the cutoff: sum_{k >= K} w(k)^-2 <= sum k^-4 <= 1/(3(K-1)^3)
    const double tail_max = 1.0 / (3.0 * km1 * km1 * km1);
    const double c = 1.0 / (s + 0.5 * tail_max);
    double c_error = tail_max / (s * (2.0 * s + tail_max));
    c_error += 8.0 * std::numeric_limits<double>::epsilon() * c;  // summation rounding
    if (0.5 * tail_max <= eps * s && c_error <= eps) return {c, c_error};
    if (cutoff > (std::int64_t{1} << 30)) throw InvalidTolerance("tolerance unreachable for this weight function");
    cutoff *= 2;
  }
}

TailPmf::TailPmf(std::vector<std::int64_t> psi_table, SampleSizeMap phi, double eps)
    : psi_table_(std::move(psi_table)), phi_(std::move(phi)) {
  if (psi_table_.empty()) throw InvalidWeights("psi table must be nonempty");
  std::int64_t prev = 0;
  for (std::int64_t v : psi_table_) {
    if (v < 1 || v < prev) throw InvalidWeights("psi table must be positive and nondecreasing");
    prev = v;
  }
  const auto n = tail_normalizer([this](std::int64_t k) { return weight(k); },
                                 static_cast<std::int64_t>(psi_table_.size()), eps);
  c_ = n.c;
  c_error_ = n.c_error;
}

TailPmf TailPmf::with_normalizer(std::vector<std::int64_t> psi_table, SampleSizeMap phi,
                                 double c, double c_error) {
  TailPmf law(std::move(psi_table), std::move(phi), 1e-14);
  // keep the stored constants so round-trips through files are bit-exact
  law.c_ = c;
  law.c_error_ = c_error;
  return law;
}

std::int64_t TailPmf::psi(std::int64_t k) const {
  if (k < 0) throw InvalidSample("psi index must be nonnegative");
  const auto n = static_cast<std::int64_t>(psi_table_.size());
  if (k < n) return psi_table_[static_cast<std::size_t>(k)];
  if (k > 3'000'000'000LL) throw TooLarge("psi index too large for the closed-form extension");
  // Extension psi(k) = max(psi(k-1)+1, k^2+1) telescopes to this closed form.
  const std::int64_t linear = psi_table_.back() + (k - (n - 1));
  const std::int64_t quad = k * k + 1;
  return std::max(linear, quad);
}

std::int64_t TailPmf::weight(std::int64_t k) const { return phi_(psi(k)); }

double TailPmf::pmf(std::int64_t k) const {
  const auto w = static_cast<double>(weight(k));
  return c_ / (w * w);
}

double TailPmf::cdf(std::int64_t k) const {
  if (k < 0) return 0.0;
  KahanSum sum;
  for (std::int64_t j = 0; j <= k; ++j) sum.add(pmf(j));
  return std::min(sum.sum, 1.0);
}

double TailPmf::tail_mass_above(std::int64_t k) const {
  if (k < 0) return 1.0;
  const auto table_end = static_cast<std::int64_t>(psi_table_.size());
  const std::int64_t from = k + 1;
  const std::int64_t rule_from = std::max({from, table_end, std::int64_t{2}});
  KahanSum explicit_part;
  for (std::int64_t j = from; j < rule_from; ++j) explicit_part.add(pmf(j));
  // beyond rule_from the growth rule gives weight(j) > j^2, so the law's own
  // remaining mass is under c * sum j^-4 <= c / (3 (rule_from - 1)^3)
  const double km1 = static_cast<double>(rule_from - 1);
  const double tail = c_ / (3.0 * km1 * km1 * km1);
  return std::min(explicit_part.sum + tail, 1.0);
}

GeometricPmf::GeometricPmf(double p) : p_(checked_unit_interval(p, "geometric success probability")) {}

double GeometricPmf::pmf(std::int64_t k) const {
  if (k < 0) return 0.0;
  return p_ * std::exp(static_cast<double>(k) * std::log1p(-p_));
}

double GeometricPmf::cdf(std::int64_t k) const {
  if (k < 0) return 0.0;
  return -std::expm1(static_cast<double>(k + 1) * std::log1p(-p_));
}

double GeometricPmf::tail_mass_above(std::int64_t k) const {
  if (k < 0) return 1.0;
  return std::exp(static_cast<double>(k + 1) * std::log1p(-p_));
}

MixedTailLaw::MixedTailLaw(FinitePmf base, double delta)
    : base_(std::move(base)),
      delta_(checked_unit_interval(delta, "mixture weight")),
      shift_(base_.right_endpoint() + 1) {}

double MixedTailLaw::pmf(std::int64_t k) const {
  if (k < shift_) return (1.0 - delta_) * base_.pmf(k);
  // geometric(1/2) started at shift_: mass 2^-(k-shift+1)
  return delta_ * std::exp2(-static_cast<double>(k - shift_ + 1));
}

double MixedTailLaw::cdf(std::int64_t k) const {
  if (k < shift_) return (1.0 - delta_) * base_.cdf(k);
  return 1.0 - delta_ * std::exp2(-static_cast<double>(k - shift_ + 1));
}

double MixedTailLaw::tail_mass_above(std::int64_t k) const {
  if (k < shift_) return (1.0 - delta_) * base_.tail_mass_above(k) + delta_;
  return delta_ * std::exp2(-static_cast<double>(k - shift_ + 1));
}

double pmf(const Law& law, std::int64_t k) {
  return std::visit([k](const auto& l) { return l.pmf(k); }, law);
}

double cdf(const Law& law, std::int64_t k) {
  return std::visit([k](const auto& l) { return l.cdf(k); }, law);
}

double tail_mass_above(const Law& law, std::int64_t k) {
  return std::visit([k](const auto& l) { return l.tail_mass_above(k); }, law);
}

double mass_error(const Law& law) {
  if (const auto* tail = std::get_if<TailPmf>(&law)) {
    // |c_hat - c| * sum w^-2 <= c_error / c, since sum w^-2 ~ 1/c
    return tail->c_error() / std::max(tail->c(), 1e-300) * 1.125;
  }
  return 0.0;
}

bool has_finite_support(const Law& law) { return std::holds_alternative<FinitePmf>(law); }

FinitePmf normalize_finite(std::vector<std::int64_t> support, const std::vector<double>& raw_weights) {
  if (support.size() != raw_weights.size() || support.empty())
    throw InvalidWeights("weights must be nonempty and aligned with the support");
  KahanSum total;
  for (double w : raw_weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidWeights("weights must be finite and nonnegative");
    total.add(w);
  }
  if (!(total.sum > 0.0)) throw InvalidWeights("at least one weight must be positive");
  std::vector<std::int64_t> kept_support;
  std::vector<double> kept_probs;
  kept_support.reserve(support.size());
  kept_probs.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (raw_weights[i] == 0.0) continue;  // zero-mass points are not stored
    kept_support.push_back(support[i]);
    kept_probs.push_back(raw_weights[i] / total.sum);
  }
  return FinitePmf(std::move(kept_support), std::move(kept_probs));
}

namespace {

std::int64_t invert_finite(const FinitePmf& law, double u) {
  // smallest support point with F(point) > u
  const auto& sup = law.support();
  std::size_t lo = 0, hi = sup.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (law.cdf(sup[mid]) > u)
      hi = mid;
    else
      lo = mid + 1;
  }
  return sup[lo];
}

struct TailInversionCache {
  std::vector<double> cum;
  std::int64_t clamp_at = -1;  // first k whose certified tail is below c_error
};

std::int64_t invert_tail(const TailPmf& law, double u, TailInversionCache& cache) {
  if (cache.clamp_at < 0) {
    // beyond this point the law's own remaining mass is under c_error, so a
    // draw may be truncated there within the per-draw error contract
    std::int64_t k = 16;
    while (law.tail_mass_above(k) > law.c_error()) k *= 2;
    cache.clamp_at = k;
  }
  if (cache.cum.empty()) cache.cum.push_back(law.pmf(0));
  std::int64_t k = 0;
  while (true) {
    if (static_cast<std::size_t>(k) >= cache.cum.size())
      cache.cum.push_back(cache.cum.back() + law.pmf(k));
    if (u < cache.cum[static_cast<std::size_t>(k)]) return k;
    if (k >= cache.clamp_at) return k;
    ++k;
  }
}

std::int64_t invert_geometric(const GeometricPmf& law, double u) {
  std::int64_t k = 0;
  while (law.cdf(k) <= u) {
    ++k;
    if (k > (std::int64_t{1} << 40)) return k;  // u rounded to 1; unreachable mass
  }
  return k;
}

std::int64_t invert_mixed(const MixedTailLaw& law, double u) {
  const double head = 1.0 - law.delta();
  if (u < head) return invert_finite(law.base(), u / head);
  std::int64_t k = law.shift();
  while (law.cdf(k) <= u) {
    ++k;
    if (k - law.shift() > (std::int64_t{1} << 40)) return k;
  }
  return k;
}

}  // namespace

std::vector<std::int64_t> sample(const Law& law, std::uint64_t seed, std::int64_t count) {
  if (count < 0) throw InvalidSample("sample count must be nonnegative");
  Rng rng(seed);
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(count));
  TailInversionCache tail_cache;  // shared prefix cache for tail laws
  for (std::int64_t i = 0; i < count; ++i) {
    const double u = rng.next_unit();
    std::int64_t x;
    if (const auto* f = std::get_if<FinitePmf>(&law))
      x = invert_finite(*f, u);
    else if (const auto* t = std::get_if<TailPmf>(&law))
      x = invert_tail(*t, u, tail_cache);
    else if (const auto* g = std::get_if<GeometricPmf>(&law))
      x = invert_geometric(*g, u);
    else
      x = invert_mixed(std::get<MixedTailLaw>(law), u);
    out.push_back(x);
  }
  return out;
}

FinitePmf truncate(const TailPmf& tail, std::int64_t n) {
  if (n < 1) throw InvalidSample("truncation needs at least one point");
  std::vector<std::int64_t> support;
  std::vector<double> weights;
  support.reserve(static_cast<std::size_t>(n));
  weights.reserve(static_cast<std::size_t>(n));
  KahanSum total;
  for (std::int64_t k = 0; k < n; ++k) {
    const auto w = static_cast<double>(tail.weight(k));
    support.push_back(k);
    weights.push_back(1.0 / (w * w));
    total.add(weights.back());
  }
  std::vector<double> probs;
  probs.reserve(weights.size());
  for (double w : weights) probs.push_back(w / total.sum);
  return FinitePmf(std::move(support), std::move(probs));
}

double tv_distance(const Law& a, const Law& b) {
  constexpr double kTailBudget = 1e-10;
  KahanSum acc;
  std::int64_t k = 0;
  while (true) {
    acc.add(std::abs(pmf(a, k) - pmf(b, k)));
    const double rest = tail_mass_above(a, k) + tail_mass_above(b, k);
    if (rest < kTailBudget) break;
    ++k;
    if (k > 10'000'000) throw TooLarge("tv_distance truncation did not certify");
  }
  return std::min(0.5 * acc.sum, 1.0);
}

MixedTailLaw mix_with_tail(const FinitePmf& mu1, double delta) { return MixedTailLaw(mu1, delta); }

double product_tv_bound(double delta, std::int64_t n) {
  return static_cast<double>(n) * delta;
}

}  // namespace finsup::dist
