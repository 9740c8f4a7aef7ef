// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: acceptance [path-to-finsup-binary]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "finsup/adversary.hpp"
#include "finsup/cli.hpp"
#include "finsup/json_io.hpp"
#include "finsup/rng.hpp"
#include "finsup/tsirelson.hpp"

using namespace finsup;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failures = 0;
  void run(int id, const std::string& label, const std::function<void()>& body) {
    try {
      body();
      std::printf("[PASS] criterion %d: %s\n", id, label.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] criterion %d: %s (%s)\n", id, label.c_str(), e.what());
    }
  }
};

void expect(bool ok, const std::string& detail) {
  if (!ok) throw std::runtime_error(detail);
}

std::string fmt(double x) { return io::format_real(x); }

dist::FinitePmf random_small_law(Rng& rng) {
  const int count = 1 + static_cast<int>(rng.below(4));
  std::set<std::int64_t> points;
  while (static_cast<int>(points.size()) < count)
    points.insert(static_cast<std::int64_t>(rng.below(9)));
  std::vector<std::int64_t> support(points.begin(), points.end());
  std::vector<double> weights;
  for (std::size_t i = 0; i < support.size(); ++i) weights.push_back(0.05 + rng.next_unit());
  return dist::normalize_finite(std::move(support), weights);
}

tsirelson::PathEventFamily acceptance_events() {
  using tsirelson::PathEvent;
  using tsirelson::Rational;
  using tsirelson::TorusArc;
  const Rational zero{0, 1};
  const Rational one{1, 1};
  const TorusArc full{zero, one};
  PathEvent a{2, 3, {{TorusArc{zero, {1, 2}}, full, full}}};
  PathEvent b{3, 4, {{TorusArc{zero, {1, 3}}, TorusArc{{1, 4}, {3, 4}}, full, full}}};
  PathEvent c{4,
              5,
              {{TorusArc{{5, 6}, {1, 6}}, full, full, full, TorusArc{zero, {1, 2}}},
               {TorusArc{zero, {1, 4}}, TorusArc{{1, 2}, {9, 10}}, full, full, full}}};
  return tsirelson::PathEventFamily(SampleSizeMap::identity(), {a, b, c});
}

void criterion_oracle_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20260810);
  const auto family = teststat::split_max_family();
  for (int round = 0; round < 50; ++round) {
    const auto law = random_small_law(rng);
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(3));
    const double exact = teststat::exact_split_max_expectation(dist::Law{law}, n, 1e-13).value;
    const double brute = teststat::brute_force_expectation(family, law, n).value;
    expect(std::abs(exact - brute) <= 1e-12,
           "law " + std::to_string(round) + ": |" + fmt(exact) + " - " + fmt(brute) + "| > 1e-12");
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(elapsed < 10.0, "runtime " + fmt(elapsed) + "s exceeds 10s");
}

void criterion_finite_side() {
  const dist::Law law{dist::FinitePmf::uniform_range(0, 9)};
  const double at_1000 = teststat::exact_split_max_expectation(law, 1000, 1e-13).value;
  expect(at_1000 >= 0.99, "E[T] at n=1000 is " + fmt(at_1000));
  double prev = 0.0;
  for (const std::int64_t n : {100, 126, 158, 200, 251, 316, 398, 501, 631, 794, 1000}) {
    const double v = teststat::exact_split_max_expectation(law, n, 1e-13).value;
    expect(v >= prev, "not nondecreasing at n=" + std::to_string(n));
    prev = v;
  }
}

void criterion_infinite_side() {
  const dist::Law geo{dist::GeometricPmf(0.5)};
  const double first = teststat::exact_split_max_expectation(geo, 1, 1e-14).value;
  expect(std::abs(first - 1.0 / 3.0) <= 1e-12, "n=1 value " + fmt(first) + " is not 1/3");
  double sup = 0.0;
  for (std::int64_t n = 1; n <= (1 << 14); ++n)
    sup = std::max(sup, teststat::exact_split_max_expectation(geo, n, 1e-9).value);
  expect(sup < 1.0 - 1e-3, "sup over n<=2^14 is " + fmt(sup));
}

adversary::AdversarySchedule build_acceptance_schedule() {
  adversary::BuildOptions opts;
  opts.horizon.policy = adversary::HorizonPolicy::analytic;
  opts.evaluator.kind = adversary::Evaluator::exact;
  const auto outcome = adversary::build_adversary(teststat::dual_split_max_family(), 0.05, 5, opts);
  expect(outcome.ok(), "construction reported a level violation");
  return *outcome.schedule;
}

void criterion_construction() {
  const auto start = std::chrono::steady_clock::now();
  const auto schedule = build_acceptance_schedule();
  adversary::EvaluatorOptions ev;
  ev.kind = adversary::Evaluator::exact;
  ev.tol = 1e-6;
  const auto rows = adversary::verify_adversary(schedule, teststat::dual_split_max_family(), ev);
  expect(rows.size() == 5, "expected 5 ranks");
  for (const auto& row : rows) {
    if (row.n < 2) continue;
    const double chain = 0.05 + 1.0 / static_cast<double>(row.n) + 1.0 / static_cast<double>(row.n - 1);
    expect(row.measured.value + row.measured.half_width <= chain,
           "rank " + std::to_string(row.n) + ": measured " + fmt(row.measured.value) + " vs chain " +
               fmt(chain));
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(elapsed < 60.0, "runtime " + fmt(elapsed) + "s exceeds 60s");
}

void criterion_structure() {
  adversary::BuildOptions opts;
  opts.horizon.policy = adversary::HorizonPolicy::analytic;
  opts.evaluator.kind = adversary::Evaluator::exact;
  const std::vector<adversary::AdversarySchedule> schedules{
      build_acceptance_schedule(),
      *adversary::build_adversary(teststat::constant_family(0.0), 0.0, 6, opts).schedule};
  for (const auto& schedule : schedules) {
    expect(schedule.ranks.front().n == 1 && schedule.ranks.front().psi == 1, "rank 1 must pin psi(1)=1");
    const auto mu1 = schedule.truncated_law(1);
    expect(mu1.size() == 1 && mu1.support()[0] == 0 && mu1.probs()[0] == 1.0,
           "rank 1 law must be the Dirac mass at 0");
    std::int64_t prev = 0;
    for (const auto& rank : schedule.ranks) {
      expect(rank.psi > prev, "psi not strictly increasing at rank " + std::to_string(rank.n));
      if (rank.n >= 2)
        expect(rank.psi > rank.n * rank.n, "psi(n) <= n^2 at rank " + std::to_string(rank.n));
      prev = rank.psi;
    }
  }
}

void criterion_duality() {
  Rng rng(606);
  for (int round = 0; round < 20; ++round) {
    teststat::TestFamily test = (round % 3 == 0) ? teststat::split_max_family()
                                                 : teststat::constant_family(rng.next_unit());
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(3));
    const auto law = random_small_law(rng);
    const double direct = teststat::brute_force_expectation(test, law, n).value;
    const double dual = teststat::brute_force_expectation(adversary::dualize(test), law, n).value;
    expect(std::abs(direct + dual - 1.0) <= 1e-12,
           "E[A] + E[1-A] = " + fmt(direct + dual) + " at round " + std::to_string(round));
    const auto twice = adversary::dualize(adversary::dualize(test));
    std::vector<std::int64_t> sample(static_cast<std::size_t>(test.sample_size(n)));
    for (auto& x : sample) x = static_cast<std::int64_t>(rng.below(6));
    expect(twice.eval(n, sample) == test.eval(n, sample), "dualize is not an involution");
  }
}

void criterion_reduction_identity() {
  const auto mu = dist::FinitePmf::uniform({0, 1});
  const auto nu = tsirelson::pushforward(dist::Law{mu});
  const auto family = acceptance_events();
  for (const std::int64_t n : {2, 3, 4}) {
    tsirelson::EventProbabilityOptions mc;
    mc.method = tsirelson::EventProbabilityOptions::Method::monte_carlo;
    mc.paths = 100000;
    mc.confidence = 0.99;
    mc.seed = 7000 + static_cast<std::uint64_t>(n);
    const auto sim = tsirelson::event_probability(nu, family, n, mc);
    const auto exact = teststat::brute_force_expectation(tsirelson::reduce_event(family, {}), mu, n);
    expect(std::abs(sim.value - exact.value) <= sim.half_width,
           "n=" + std::to_string(n) + ": |" + fmt(sim.value) + " - " + fmt(exact.value) +
               "| > half width " + fmt(sim.half_width));

    tsirelson::EventProbabilityOptions grid;
    grid.method = tsirelson::EventProbabilityOptions::Method::exact_grid;
    grid.grid_denominator = std::int64_t{1} << 31;
    tsirelson::UIntegration ugrid;
    ugrid.mode = tsirelson::UIntegration::Mode::grid;
    ugrid.grid_denominator = grid.grid_denominator;
    const auto by_paths = tsirelson::event_probability(nu, family, n, grid);
    const auto by_test = teststat::brute_force_expectation(tsirelson::reduce_event(family, ugrid), mu, n);
    expect(std::abs(by_paths.value - by_test.value) <= 1e-12,
           "grid routes differ at n=" + std::to_string(n) + ": " + fmt(by_paths.value) + " vs " +
               fmt(by_test.value));
  }
}

void criterion_classifier() {
  using tsirelson::Case2;
  const auto dirac = tsirelson::TorusLaw::finite({{tsirelson::TorusPoint::exact(3, 10), 1.0}});
  expect(tsirelson::case_number(tsirelson::classify(dirac)) == 1, "Dirac must be Case 1");

  const auto quarters = tsirelson::classify(tsirelson::TorusLaw::finite(
      {{tsirelson::TorusPoint::exact(1, 4), 0.5}, {tsirelson::TorusPoint::exact(3, 4), 0.5}}));
  const auto* c2 = std::get_if<Case2>(&quarters);
  expect(c2 && c2->p == 2 && c2->x.fraction() == tsirelson::Rational{1, 4},
         "{1/4, 3/4} must be Case2(2, 1/4)");

  const auto halves = tsirelson::classify(tsirelson::TorusLaw::finite(
      {{tsirelson::TorusPoint::exact(1, 2), 0.5}, {tsirelson::TorusPoint::exact(1, 3), 0.5}}));
  const auto* c6 = std::get_if<Case2>(&halves);
  expect(c6 && c6->p == 6 && c6->x.fraction() == tsirelson::Rational{1, 3},
         "{1/2, 1/3} must be Case2(6, 1/3)");

  const dist::TailPmf tail({1, 1, 5, 26}, SampleSizeMap::identity());
  expect(tsirelson::case_number(tsirelson::classify(tsirelson::pushforward(dist::Law{tail}))) == 3,
         "pushforward of a tail law must be Case 3");
}

void criterion_tv_demo() {
  for (const auto& mu1 : {dist::FinitePmf::uniform_range(0, 4), dist::FinitePmf::dirac(0)}) {
    for (const double delta : {0.1, 0.01}) {
      const auto mixed = dist::mix_with_tail(mu1, delta);
      const double tv = dist::tv_distance(dist::Law{mu1}, dist::Law{mixed});
      expect(std::abs(tv - delta) <= 1e-10, "tv " + fmt(tv) + " vs delta " + fmt(delta));
      const double bound = dist::product_tv_bound(delta, 50);
      expect(bound == 50.0 * delta, "product bound " + fmt(bound));
    }
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  expect(static_cast<bool>(in), "missing artifact " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void compare_dirs(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(a)) names.push_back(entry.path().filename());
  expect(!names.empty(), "no artifacts produced in " + a.string());
  std::sort(names.begin(), names.end());
  for (const auto& name : names)
    expect(slurp(a / name) == slurp(b / name), "artifact " + name.string() + " differs between reruns");
}

void criterion_reproducibility(const std::string& binary) {
  const auto root = fs::temp_directory_path() / "finsup_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto write = [&](const char* name, const std::string& text) {
    std::ofstream(root / name) << text;
    return (root / name).string();
  };
  const auto eval_cfg = write("eval.json", R"({
    "schema": 1, "seed": 31,
    "law": {"kind": "geometric", "p": 0.5},
    "test": {"family": "split_max"},
    "n": [1, 2, 4, 8],
    "evaluator": "monte_carlo", "reps": 20000, "confidence": 0.99,
    "out_csv": "rows.csv"
  })");
  const auto build_cfg = write("build.json", R"({
    "schema": 1, "seed": 8,
    "test": {"family": "dual_split_max"},
    "alpha": 0.05, "num_ranks": 4,
    "horizon": {"policy": "analytic"},
    "evaluator": "exact"
  })");

  const auto run_both = [&](const std::string& sub, const std::string& cfg, const char* tag) {
    const auto out1 = root / (std::string(tag) + "_1");
    const auto out2 = root / (std::string(tag) + "_2");
    if (!binary.empty()) {
      for (const auto& out : {out1, out2}) {
        const std::string cmd = binary + " " + sub + " --config " + cfg + " --out " + out.string();
        expect(std::system(cmd.c_str()) == 0, "command failed: " + cmd);
      }
    } else {
      for (const auto& out : {out1, out2})
        expect(cli::run({sub, "--config", cfg, "--out", out.string()}) == 0, sub + " run failed");
    }
    compare_dirs(out1, out2);
  };
  run_both("eval-test", eval_cfg, "eval");
  run_both("build-adversary", build_cfg, "build");
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string binary = argc > 1 ? argv[1] : "";
  Harness h;
  h.run(1, "oracle equivalence of exact and brute-force split-max expectations",
        criterion_oracle_equivalence);
  h.run(2, "finite support drives E[T_2n] to one (uniform{0..9})", criterion_finite_side);
  h.run(3, "infinite support keeps sup E[T_2n] under 1 - 1e-3 (Geometric(1/2))",
        criterion_infinite_side);
  h.run(4, "adversary construction and verified bound chain (alpha=0.05, 5 ranks)",
        criterion_construction);
  h.run(5, "schedule structure: psi growth and the rank-1 Dirac mass", criterion_structure);
  h.run(6, "duality: complement expectations sum to one, dualize is an involution",
        criterion_duality);
  h.run(7, "path-event probabilities match the reduced tests (MC and exact grid)",
        criterion_reduction_identity);
  h.run(8, "torus law classifier on the canonical examples", criterion_classifier);
  h.run(9, "mixture demo: tv equals delta and the product bound is n*delta", criterion_tv_demo);
  h.run(10, "CLI reruns with the same seed are byte identical",
        [&] { criterion_reproducibility(binary); });
  if (h.failures == 0) {
    std::printf("acceptance: all 10 criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", h.failures);
  return 1;
}
