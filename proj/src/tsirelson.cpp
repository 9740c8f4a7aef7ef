#include "finsup/tsirelson.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "finsup/rng.hpp"

namespace finsup::tsirelson {

namespace {

constexpr Rational kZero{0, 1};
constexpr Rational kOne{1, 1};

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

TorusPoint inject_f(std::int64_t k) {
  if (k < 0) throw InvalidSample("injection defined on nonnegative integers");
  return TorusPoint::exact(1, k + 2);
}

TorusLaw TorusLaw::finite(std::vector<Atom> atoms) {
  if (atoms.empty()) throw InvalidWeights("a finite torus law needs at least one atom");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.prob > 0.0) || !std::isfinite(a.prob))
      throw InvalidWeights("atom probabilities must be finite and positive");
    total += a.prob;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidWeights("atom probabilities must sum to one within 1e-12");
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return TorusPoint::less(a.point, b.point); });
  for (std::size_t i = 1; i < atoms.size(); ++i)
    if (atoms[i].point == atoms[i - 1].point) throw InvalidWeights("atoms must be distinct");
  TorusLaw law;
  law.atoms_ = std::move(atoms);
  return law;
}

TorusLaw TorusLaw::pushforward_of(dist::Law base, Injection injection) {
  if (dist::has_finite_support(base))
    throw InvalidWeights("finite-support laws push forward to explicit atoms");
  TorusLaw law;
  law.base_ = std::move(base);
  law.injection_ = injection;
  return law;
}

const std::vector<TorusLaw::Atom>& TorusLaw::atoms() const {
  if (!is_finite()) throw InvalidSample("pushforward law has no explicit atoms");
  return atoms_;
}

const dist::Law& TorusLaw::base() const {
  if (is_finite()) throw InvalidSample("finite law has no pushforward base");
  return *base_;
}

bool TorusLaw::all_exact() const {
  if (!is_finite()) return true;  // the injection lands in the rationals
  return std::all_of(atoms_.begin(), atoms_.end(),
                     [](const Atom& a) { return a.point.is_exact(); });
}

TorusLaw pushforward(const dist::Law& mu, Injection injection) {
  if (const auto* finite = std::get_if<dist::FinitePmf>(&mu)) {
    std::vector<TorusLaw::Atom> atoms;
    atoms.reserve(finite->size());
    for (std::size_t i = 0; i < finite->size(); ++i)
      atoms.push_back({inject_f(finite->support()[i]), finite->probs()[i]});
    return TorusLaw::finite(std::move(atoms));
  }
  return TorusLaw::pushforward_of(mu, injection);
}

int case_number(const CaseLabel& label) {
  return std::visit(
      [](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Case1>) return 1;
        else if constexpr (std::is_same_v<T, Case2>) return 2;
        else return 3;
      },
      label);
}

CaseLabel classify(const TorusLaw& nu) {
  if (!nu.is_finite()) return Case3{};
  if (!nu.all_exact())
    throw NotClassifiable("classification needs exact rational atoms; rounded values cannot witness rationality");
  const auto& atoms = nu.atoms();
  if (atoms.size() == 1) return Case1{};
  // atoms are sorted, so the first one is the canonical x; the minimal p is
  // the lcm of the denominators of the differences s - x
  const Rational x = atoms.front().point.fraction();
  std::int64_t p = 1;
  for (const auto& atom : atoms) {
    const Rational d = sub_mod1(atom.point.fraction(), x);
    p = checked_lcm(p, d.den);
  }
  return Case2{p, atoms.front().point};
}

namespace {

// One increment distributed as nu, in the requested mode.
class IncrementSampler {
 public:
  IncrementSampler(const TorusLaw& nu, std::uint64_t seed, bool exact_mode, std::int64_t count)
      : nu_(nu), exact_mode_(exact_mode) {
    if (nu.is_finite()) {
      rng_.emplace(seed);
    } else {
      base_draws_ = dist::sample(nu.base(), seed, count);
    }
  }

  TorusPoint next() {
    if (!nu_.is_finite()) {
      const std::int64_t x = base_draws_[static_cast<std::size_t>(next_index_++)];
      const TorusPoint pt = inject_f(x);
      return exact_mode_ ? pt : TorusPoint::real(pt.value());
    }
    const double u = rng_->next_unit();
    double cum = 0.0;
    const auto& atoms = nu_.atoms();
    std::size_t pick = atoms.size() - 1;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      cum += atoms[i].prob;
      if (u < cum) {
        pick = i;
        break;
      }
    }
    const TorusPoint& pt = atoms[pick].point;
    if (exact_mode_) {
      if (!pt.is_exact()) throw TorusArithmeticError("grid-mode simulation needs exact atoms");
      return pt;
    }
    return TorusPoint::real(pt.value());
  }

 private:
  const TorusLaw& nu_;
  bool exact_mode_;
  std::optional<Rng> rng_;
  std::vector<std::int64_t> base_draws_;
  std::int64_t next_index_ = 0;
};

}  // namespace

std::vector<TorusPoint> simulate_uniform_solution(const TorusLaw& nu, std::int64_t depth,
                                                  std::uint64_t seed, const SimulateOptions& opts) {
  if (depth < 0) throw InvalidSample("path depth must be nonnegative");
  const bool exact_mode = opts.mode == PathMode::grid;
  TorusPoint u = exact_mode
                     ? TorusPoint::exact(static_cast<std::int64_t>(
                                             Rng(derive_seed(seed, 0)).below(
                                                 static_cast<std::uint64_t>(opts.grid_denominator))),
                                         opts.grid_denominator)
                     : TorusPoint::real(Rng(derive_seed(seed, 0)).next_unit());
  IncrementSampler zetas(nu, derive_seed(seed, 1), exact_mode, depth);
  std::vector<TorusPoint> path;
  path.reserve(static_cast<std::size_t>(depth) + 1);
  path.push_back(u);
  TorusPoint eta = u;
  for (std::int64_t j = 0; j < depth; ++j) {
    eta = eta - zetas.next();
    path.push_back(eta);
  }
  return path;
}

PathIncrements path_increments(std::span<const TorusPoint> path) {
  if (path.size() < 2) throw InvalidSample("increments need a path of length >= 2");
  PathIncrements out;
  out.xi.reserve(path.size() - 1);
  for (std::size_t j = 0; j + 1 < path.size(); ++j) out.xi.push_back(path[j] - path[j + 1]);
  if (path.size() >= 3) {
    out.rho.reserve(out.xi.size() - 1);
    for (std::size_t j = 0; j + 1 < out.xi.size(); ++j) out.rho.push_back(out.xi[j] - out.xi[j + 1]);
  }
  return out;
}

Rational arc_length(const TorusArc& arc) {
  const int c = compare(arc.lo, arc.hi);
  if (c == 0) return kZero;
  if (c < 0) return sub_exact(arc.hi, arc.lo);
  return add_exact(sub_exact(kOne, arc.lo), arc.hi);  // wraps through 0
}

bool arc_contains(const TorusArc& arc, const TorusPoint& t) {
  const int c = compare(arc.lo, arc.hi);
  if (c == 0) return false;
  if (t.is_exact()) {
    const Rational v = t.fraction();
    if (c < 0) return compare(arc.lo, v) <= 0 && compare(v, arc.hi) < 0;
    return compare(arc.lo, v) <= 0 || compare(v, arc.hi) < 0;
  }
  const double v = t.value();
  const double lo = to_double(arc.lo);
  const double hi = to_double(arc.hi);
  if (c < 0) return lo <= v && v < hi;
  return v >= lo || v < hi;
}

bool PathEvent::contains(std::span<const TorusPoint> point) const {
  if (static_cast<std::int64_t>(point.size()) != coords)
    throw InvalidSample("event membership needs one point per coordinate");
  for (const auto& product : products) {
    bool inside = true;
    for (std::int64_t j = 0; j < coords && inside; ++j)
      inside = arc_contains(product[static_cast<std::size_t>(j)], point[static_cast<std::size_t>(j)]);
    if (inside) return true;
  }
  return false;
}

namespace {

void validate_arc(const TorusArc& arc) {
  if (arc.lo.den < 1 || arc.hi.den < 1) throw InvalidWeights("arc endpoints need positive denominators");
  if (compare(arc.lo, kZero) < 0 || compare(arc.lo, kOne) >= 0)
    throw InvalidWeights("arc start must lie in [0,1)");
  if (compare(arc.hi, kZero) < 0 || compare(arc.hi, kOne) > 0)
    throw InvalidWeights("arc end must lie in [0,1]");
}

}  // namespace

PathEventFamily::PathEventFamily(SampleSizeMap phi, std::vector<PathEvent> events)
    : phi_(std::move(phi)), events_(std::move(events)) {
  for (const auto& event : events_) {
    if (event.rank < 1) throw InvalidWeights("event ranks start at 1");
    if (event.coords != phi_(event.rank) + 1)
      throw InvalidWeights("event must constrain phi(n)+1 coordinates");
    for (const auto& product : event.products) {
      if (static_cast<std::int64_t>(product.size()) != event.coords)
        throw InvalidWeights("each product needs one arc per coordinate");
      for (const auto& arc : product) validate_arc(arc);
    }
  }
}

bool PathEventFamily::has(std::int64_t n) const {
  return std::any_of(events_.begin(), events_.end(),
                     [n](const PathEvent& e) { return e.rank == n; });
}

const PathEvent& PathEventFamily::at(std::int64_t n) const {
  for (const auto& e : events_)
    if (e.rank == n) return e;
  throw InvalidSample("no event recorded at this rank");
}

namespace {

// Shifts of the path coordinates: eta_{-j} = u - c_j with c_0 = 0 and
// c_j = f(x_1) + ... + f(x_j).
std::vector<Rational> coordinate_shifts(std::span<const std::int64_t> sample) {
  std::vector<Rational> shifts;
  shifts.reserve(sample.size() + 1);
  shifts.push_back(kZero);
  Rational run = kZero;
  for (const std::int64_t x : sample) {
    run = add_mod1(run, inject_f(x).fraction());
    shifts.push_back(run);
  }
  return shifts;
}

std::int64_t grid_points_in(const Rational& a, const Rational& b, std::int64_t q) {
  // #{r in [0,q) : a <= r/q < b} = ceil(bq) - ceil(aq)
  const auto ceil_mul = [q](const Rational& r) {
    const __int128 num = static_cast<__int128>(r.num) * q;
    return static_cast<std::int64_t>((num + r.den - 1) / r.den);
  };
  return ceil_mul(b) - ceil_mul(a);
}

// Breakpoints of u -> 1_B(u, u - c_1, ...): every shifted arc endpoint.
std::vector<Rational> event_breakpoints(const PathEvent& event, const std::vector<Rational>& shifts) {
  std::vector<Rational> cuts{kZero};
  for (const auto& product : event.products) {
    for (std::size_t j = 0; j < product.size(); ++j) {
      const auto& arc = product[j];
      const Rational len = arc_length(arc);
      if (compare(len, kZero) == 0 || compare(len, kOne) == 0) continue;
      const Rational start = wrap_unit(add_mod1(arc.lo, shifts[j]));
      cuts.push_back(start);
      cuts.push_back(wrap_unit(add_mod1(start, len)));
    }
  }
  std::sort(cuts.begin(), cuts.end(), [](const Rational& a, const Rational& b) { return compare(a, b) < 0; });
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

// Integrand value over [a, b): membership is constant there, so one exact
// midpoint probe decides the whole piece.
bool piece_member(const PathEvent& event, const std::vector<Rational>& shifts, const Rational& a,
                  const Rational& b) {
  const Rational mid = average(a, b);
  std::vector<TorusPoint> tuple;
  tuple.reserve(shifts.size());
  for (const auto& c : shifts) tuple.push_back(TorusPoint::exact(sub_mod1(mid, c)));
  return event.contains(tuple);
}

double integrate_exact(const PathEvent& event, const std::vector<Rational>& shifts) {
  const auto cuts = event_breakpoints(event, shifts);
  KahanSum total;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const Rational a = cuts[i];
    const Rational b = i + 1 < cuts.size() ? cuts[i + 1] : kOne;
    if (compare(a, b) >= 0) continue;
    if (piece_member(event, shifts, a, b)) total.add(to_double(sub_exact(b, a)));
  }
  return std::min(total.sum, 1.0);
}

double integrate_grid(const PathEvent& event, const std::vector<Rational>& shifts, std::int64_t q) {
  const auto cuts = event_breakpoints(event, shifts);
  std::int64_t count = 0;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const Rational a = cuts[i];
    const Rational b = i + 1 < cuts.size() ? cuts[i + 1] : kOne;
    if (compare(a, b) >= 0) continue;
    if (piece_member(event, shifts, a, b)) count += grid_points_in(a, b, q);
  }
  return static_cast<double>(count) / static_cast<double>(q);
}

double integrate_monte_carlo(const PathEvent& event, std::int64_t n,
                             std::span<const std::int64_t> sample, const UIntegration& integ) {
  // pure in (n, sample): the stream is derived from both
  std::uint64_t h = fnv1a64_mix(0xa2bd4c5e6f718391ULL, static_cast<std::uint64_t>(n));
  for (const std::int64_t x : sample) h = fnv1a64_mix(h, static_cast<std::uint64_t>(x));
  Rng rng(derive_seed(integ.mc_seed, h));
  // shifts in doubles; no exact denominators, so deep paths cannot overflow
  std::vector<double> shift_values{0.0};
  shift_values.reserve(sample.size() + 1);
  for (const std::int64_t x : sample) {
    double next = shift_values.back() + inject_f(x).value();
    if (next >= 1.0) next -= 1.0;
    shift_values.push_back(next);
  }
  std::int64_t hits = 0;
  std::vector<TorusPoint> tuple;
  for (std::int64_t i = 0; i < integ.mc_samples; ++i) {
    const double u = rng.next_unit();
    tuple.clear();
    for (const double c : shift_values) tuple.push_back(TorusPoint::real(u - c));
    if (event.contains(tuple)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(integ.mc_samples);
}

}  // namespace

teststat::TestFamily reduce_event(const PathEventFamily& events, const UIntegration& integration) {
  auto family_copy = events;
  auto eval = [family = std::move(family_copy), integration](
                  std::int64_t n, std::span<const std::int64_t> sample) -> double {
    const PathEvent& event = family.at(n);
    switch (integration.mode) {
      case UIntegration::Mode::exact_arcs:
        return integrate_exact(event, coordinate_shifts(sample));
      case UIntegration::Mode::grid:
        return integrate_grid(event, coordinate_shifts(sample), integration.grid_denominator);
      case UIntegration::Mode::monte_carlo:
        return integrate_monte_carlo(event, n, sample, integration);
    }
    throw ConfigError("unknown integration mode");
  };
  return teststat::TestFamily("reduced_event", events.phi(), std::move(eval));
}

double reduced_eval_half_width(const UIntegration& integration) {
  if (integration.mode != UIntegration::Mode::monte_carlo) return 0.0;
  return teststat::hoeffding_half_width(integration.mc_samples, integration.mc_confidence);
}

namespace {

struct Interval {
  Rational a;
  Rational b;  // [a, b), 0 <= a < b <= 1
};

// An arc shifted into (start, length) form, cut into plain intervals.
void append_arc_pieces(const Rational& start, const Rational& len, std::vector<Interval>& out) {
  const Rational end = add_exact(start, len);
  if (compare(end, kOne) <= 0) {
    out.push_back({start, end});
  } else {
    out.push_back({start, kOne});
    out.push_back({kZero, sub_exact(end, kOne)});
  }
}

std::vector<Interval> intersect(const std::vector<Interval>& xs, const std::vector<Interval>& ys) {
  std::vector<Interval> out;
  for (const auto& x : xs) {
    for (const auto& y : ys) {
      const Rational a = compare(x.a, y.a) >= 0 ? x.a : y.a;
      const Rational b = compare(x.b, y.b) <= 0 ? x.b : y.b;
      if (compare(a, b) < 0) out.push_back({a, b});
    }
  }
  return out;
}

std::vector<Interval> merge_union(std::vector<Interval> xs) {
  std::sort(xs.begin(), xs.end(),
            [](const Interval& p, const Interval& q) { return compare(p.a, q.a) < 0; });
  std::vector<Interval> out;
  for (const auto& x : xs) {
    if (!out.empty() && compare(x.a, out.back().b) <= 0) {
      if (compare(x.b, out.back().b) > 0) out.back().b = x.b;
    } else {
      out.push_back(x);
    }
  }
  return out;
}

// Grid values of u for which the whole tuple lands in the event, computed
// with interval arithmetic only; deliberately shares no code with the
// midpoint-probe integrator it is checked against.
std::int64_t tuple_grid_count(const PathEvent& event, const std::vector<Rational>& shifts,
                              std::int64_t q) {
  std::vector<Interval> total;
  for (const auto& product : event.products) {
    std::vector<Interval> piece{{kZero, kOne}};
    for (std::size_t j = 0; j < product.size() && !piece.empty(); ++j) {
      const auto& arc = product[j];
      const Rational len = arc_length(arc);
      if (compare(len, kZero) == 0) {
        piece.clear();
        break;
      }
      std::vector<Interval> constraint;
      if (compare(len, kOne) == 0) {
        constraint.push_back({kZero, kOne});
      } else {
        const Rational start = wrap_unit(add_mod1(arc.lo, shifts[j]));
        append_arc_pieces(start, len, constraint);
      }
      piece = intersect(piece, constraint);
    }
    total.insert(total.end(), piece.begin(), piece.end());
  }
  std::int64_t count = 0;
  for (const auto& iv : merge_union(std::move(total))) count += grid_points_in(iv.a, iv.b, q);
  return count;
}

}  // namespace

teststat::ExpectationReport event_probability(const TorusLaw& nu, const PathEventFamily& events,
                                              std::int64_t n, const EventProbabilityOptions& opts) {
  const PathEvent& event = events.at(n);
  const std::int64_t depth = events.phi()(n);

  if (opts.method == EventProbabilityOptions::Method::monte_carlo) {
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < opts.paths; ++i) {
      const auto path = simulate_uniform_solution(nu, depth, derive_seed(opts.seed, static_cast<std::uint64_t>(i)),
                                                  {PathMode::real, opts.grid_denominator});
      if (event.contains(path)) ++hits;
    }
    return {static_cast<double>(hits) / static_cast<double>(opts.paths),
            teststat::ErrorKind::monte_carlo,
            teststat::hoeffding_half_width(opts.paths, opts.confidence), opts.confidence, opts.paths};
  }

  if (!nu.is_finite() || !nu.all_exact())
    throw ConfigError("exact grid probabilities need a finite law with exact atoms");
  const auto& atoms = nu.atoms();
  const auto natoms = static_cast<double>(atoms.size());
  if (static_cast<double>(depth) * std::log(natoms) > std::log(static_cast<double>(opts.tuple_budget)) + 1e-9)
    throw TooLarge("increment tuple space exceeds the enumeration budget");

  std::vector<std::size_t> idx(static_cast<std::size_t>(depth), 0);
  std::vector<Rational> shifts(static_cast<std::size_t>(depth) + 1, kZero);
  std::vector<double> weight(static_cast<std::size_t>(depth) + 1, 1.0);
  const auto refresh_from = [&](std::size_t pos) {
    for (std::size_t j = pos; j < idx.size(); ++j) {
      shifts[j + 1] = add_mod1(shifts[j], atoms[idx[j]].point.fraction());
      weight[j + 1] = weight[j] * atoms[idx[j]].prob;
    }
  };
  refresh_from(0);

  KahanSum acc;
  std::int64_t tuples = 0;
  const auto q = static_cast<double>(opts.grid_denominator);
  bool done = false;
  while (!done) {
    acc.add(weight.back() * (static_cast<double>(tuple_grid_count(event, shifts, opts.grid_denominator)) / q));
    ++tuples;
    std::size_t pos = idx.size();
    while (true) {
      if (pos == 0) {
        done = true;
        break;
      }
      --pos;
      if (idx[pos] + 1 < atoms.size()) {
        ++idx[pos];
        for (std::size_t j = pos + 1; j < idx.size(); ++j) idx[j] = 0;
        refresh_from(pos);
        break;
      }
    }
  }
  return {std::min(acc.sum, 1.0), teststat::ErrorKind::exact, 0.0, 1.0, tuples};
}

}  // namespace finsup::tsirelson
