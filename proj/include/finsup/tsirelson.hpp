#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "finsup/dist.hpp"
#include "finsup/sample_size_map.hpp"
#include "finsup/teststat.hpp"
#include "finsup/torus.hpp"

namespace finsup::tsirelson {

enum class Injection { one_over_k_plus_2 };

/// f(k) = 1/(k+2): injects the nonnegative integers into the rational circle.
TorusPoint inject_f(std::int64_t k);

// Law on the torus: either a finite list of atoms, or the pushforward of an
// infinite-support integer law through the injection (kept symbolic, since
// its support is infinite).
class TorusLaw {
 public:
  struct Atom {
    TorusPoint point;
    double prob;
  };

  /// Atoms must be distinct, positive, and sum to one within 1e-12.
  static TorusLaw finite(std::vector<Atom> atoms);
  static TorusLaw pushforward_of(dist::Law base, Injection injection = Injection::one_over_k_plus_2);

  bool is_finite() const { return !base_.has_value(); }
  const std::vector<Atom>& atoms() const;
  const dist::Law& base() const;
  Injection injection() const { return injection_; }
  bool all_exact() const;

 private:
  TorusLaw() = default;
  std::vector<Atom> atoms_;
  std::optional<dist::Law> base_;
  Injection injection_ = Injection::one_over_k_plus_2;
};

/// Image law of mu under f; finite input yields explicit atoms.
TorusLaw pushforward(const dist::Law& mu, Injection injection = Injection::one_over_k_plus_2);

struct Case1 {};
struct Case2 {
  std::int64_t p;   // minimal modulus
  TorusPoint x;     // smallest support point
};
struct Case3 {};
using CaseLabel = std::variant<Case1, Case2, Case3>;

int case_number(const CaseLabel& label);

// Dirac -> Case 1; support inside x + {k/p} with minimal p >= 2 -> Case 2;
// infinite support -> Case 3. Laws with real-mode atoms are rejected:
// rounded values cannot witness rationality.
CaseLabel classify(const TorusLaw& nu);

enum class PathMode { real, grid };

struct SimulateOptions {
  PathMode mode = PathMode::real;
  std::int64_t grid_denominator = std::int64_t{1} << 31;  // U drawn from {r/Q}
};

// Path (eta_0, eta_-1, ..., eta_-depth) of the uniform solution:
// eta_0 = U, eta_-j = U - zeta_0 - ... - zeta_-(j-1), everything mod 1.
std::vector<TorusPoint> simulate_uniform_solution(const TorusLaw& nu, std::int64_t depth,
                                                  std::uint64_t seed,
                                                  const SimulateOptions& opts = {});

struct PathIncrements {
  std::vector<TorusPoint> xi;   // xi[j] = eta_{-j} - eta_{-j-1}, each ~ nu
  std::vector<TorusPoint> rho;  // rho[j] = xi[j] - xi[j+1]
};
PathIncrements path_increments(std::span<const TorusPoint> path);

// Closed-open arc [lo, hi) on the circle; wraps through 0 when hi < lo,
// covers everything when lo == 0, hi == 1. lo == hi denotes the empty arc.
struct TorusArc {
  Rational lo;
  Rational hi;
};

/// Arc length as a fraction of the circle.
Rational arc_length(const TorusArc& arc);
bool arc_contains(const TorusArc& arc, const TorusPoint& t);

// Event in T^(coords): a union of arc products, one arc per coordinate and
// product. Membership is exact on exact points and float-compared on real
// ones, and is a pure function of the tuple.
struct PathEvent {
  std::int64_t rank = 0;    // the n this event belongs to
  std::int64_t coords = 0;  // phi(n) + 1
  std::vector<std::vector<TorusArc>> products;

  bool contains(std::span<const TorusPoint> point) const;
};

class PathEventFamily {
 public:
  PathEventFamily(SampleSizeMap phi, std::vector<PathEvent> events);
  const SampleSizeMap& phi() const { return phi_; }
  bool has(std::int64_t n) const;
  const PathEvent& at(std::int64_t n) const;
  const std::vector<PathEvent>& events() const { return events_; }

 private:
  SampleSizeMap phi_;
  std::vector<PathEvent> events_;
};

// How the u-integral of the reduced test is evaluated:
//  - exact_arcs: the integrand is piecewise constant with rational
//    breakpoints; decompose and sum lengths exactly;
//  - grid: same decomposition, but u ranges over the grid {r/Q}; counts are
//    closed-form, making the reduction identity bit-comparable with grid
//    simulation;
//  - monte_carlo: seeded draws of u, value is the hit fraction.
struct UIntegration {
  enum class Mode { exact_arcs, grid, monte_carlo };
  Mode mode = Mode::exact_arcs;
  std::int64_t grid_denominator = std::int64_t{1} << 31;
  std::int64_t mc_samples = 10000;
  double mc_confidence = 0.99;
  std::uint64_t mc_seed = 0;
};

// A_n(x_1..x_phi(n)) = integral over u of 1_B(u, u - f(x_1), ...). The
// returned family is pure: Monte Carlo mode derives its seed from (n, sample).
teststat::TestFamily reduce_event(const PathEventFamily& events, const UIntegration& integration);

/// Hoeffding half-width of a single reduced evaluation (0 in exact modes).
double reduced_eval_half_width(const UIntegration& integration);

struct EventProbabilityOptions {
  enum class Method { monte_carlo, exact_grid };
  Method method = Method::monte_carlo;
  std::int64_t paths = 100000;        // monte_carlo: simulated paths
  double confidence = 0.99;
  std::uint64_t seed = 0;
  std::int64_t grid_denominator = std::int64_t{1} << 31;
  std::int64_t tuple_budget = 10'000'000;  // exact_grid enumeration guard
};

// P*[ (eta_0, ..., eta_-phi(n)) in B_n ] under the uniform solution driven
// by nu. exact_grid enumerates increment tuples of a finite law and counts
// grid values of U by interval arithmetic; monte_carlo simulates paths.
teststat::ExpectationReport event_probability(const TorusLaw& nu, const PathEventFamily& events,
                                              std::int64_t n, const EventProbabilityOptions& opts);

}  // namespace finsup::tsirelson
