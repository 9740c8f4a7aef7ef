#include "finsup/cli.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "finsup/adversary.hpp"
#include "finsup/json_io.hpp"
#include "finsup/rng.hpp"
#include "finsup/tsirelson.hpp"
#include "finsup/version.hpp"

namespace finsup::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Context {
  std::string subcommand;
  json config;
  std::string config_bytes;
  std::string config_hash;
  fs::path config_dir;
  fs::path out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
};

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

void write_artifact(Context& ctx, const std::string& name, std::string_view content) {
  fs::create_directories(ctx.out_dir);
  io::write_file_atomic(ctx.out_dir / name, content);
  ctx.artifacts.push_back(name);
}

// Every artifact embeds the config hash: CSVs carry it as a leading comment
// line, JSON objects as a trailing field.
void write_csv(Context& ctx, const std::string& name, const std::string& body) {
  write_artifact(ctx, name, "# config_hash=" + ctx.config_hash + "\n" + body);
}

void write_json(Context& ctx, const std::string& name, std::string object_text) {
  if (!object_text.empty() && object_text.back() == '}')
    object_text.insert(object_text.size() - 1, ",\"config_hash\":\"" + ctx.config_hash + "\"");
  write_artifact(ctx, name, object_text);
}

void write_manifest(Context& ctx) {
  std::string m = "{\"schema\":1,\"subcommand\":\"" + ctx.subcommand + "\",\"config_hash\":\"" +
                  ctx.config_hash + "\",\"seed\":" + std::to_string(ctx.seed) +
                  ",\"versions\":{\"finsup\":\"" + std::string(kVersion) + "\"},\"artifacts\":[";
  for (std::size_t i = 0; i < ctx.artifacts.size(); ++i) {
    if (i) m += ",";
    m += "\"" + ctx.artifacts[i] + "\"";
  }
  m += "]}";
  fs::create_directories(ctx.out_dir);
  io::write_file_atomic(ctx.out_dir / "manifest.json", m);
}

std::uint64_t seed_from_config(const json& cfg) {
  if (!cfg.contains("seed")) return 0;
  const auto& s = cfg.at("seed");
  if (!s.is_number_integer() && !s.is_number_unsigned()) throw ConfigError("seed must be an integer");
  return s.get<std::uint64_t>();
}

void require_schema(const json& cfg) {
  if (io::require_int(cfg, "schema", "config") != 1) throw ConfigError("unsupported config schema");
}

std::vector<std::int64_t> n_list(const json& cfg) {
  const auto& n = io::require_field(cfg, "n", "config");
  if (!n.is_array() || n.empty()) throw ConfigError("config field \"n\" must be a nonempty array");
  std::vector<std::int64_t> out;
  for (const auto& v : n) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("ranks must be integers");
    out.push_back(v.get<std::int64_t>());
  }
  return out;
}

adversary::EvaluatorOptions evaluator_options(const json& cfg, std::uint64_t seed) {
  adversary::EvaluatorOptions ev;
  ev.seed = seed;
  if (cfg.contains("evaluator")) {
    const std::string name = cfg.at("evaluator").get<std::string>();
    if (name == "exact")
      ev.kind = adversary::Evaluator::exact;
    else if (name == "brute_force")
      ev.kind = adversary::Evaluator::brute_force;
    else if (name == "monte_carlo")
      ev.kind = adversary::Evaluator::monte_carlo;
    else
      throw ConfigError("unknown evaluator \"" + name + "\"");
  }
  if (cfg.contains("tol")) ev.tol = cfg.at("tol").get<double>();
  if (cfg.contains("reps")) ev.reps = cfg.at("reps").get<std::int64_t>();
  if (cfg.contains("confidence")) ev.confidence = cfg.at("confidence").get<double>();
  return ev;
}

std::string csv_report_row(const teststat::ExpectationReport& r) {
  return io::format_real(r.value) + "," + io::error_kind_name(r.error_kind) + "," +
         io::format_real(r.half_width) + "," + io::format_real(r.confidence) + "," +
         std::to_string(r.evaluations);
}

// ---------------------------------------------------------------- eval-test

int cmd_eval_test(Context& ctx) {
  const auto& cfg = ctx.config;
  io::check_fields(cfg, {"schema", "seed", "law", "test", "n", "evaluator", "tol", "reps", "confidence",
                         "out_csv", "out_json"},
                   "eval-test config");
  const auto law = io::law_from_json(io::require_field(cfg, "law", "config"));
  const auto test = io::test_family_from_json(io::require_field(cfg, "test", "config"));
  const auto ev = evaluator_options(cfg, ctx.seed);

  std::string csv = "n,value,error_kind,half_width,confidence,evaluations\n";
  std::string jout = "{\"reports\":[";
  bool first = true;
  for (const std::int64_t n : n_list(cfg)) {
    teststat::ExpectationReport r;
    switch (ev.kind) {
      case adversary::Evaluator::exact:
        r = test.exact_expectation(law, n, ev.tol);
        break;
      case adversary::Evaluator::brute_force: {
        const auto* finite = std::get_if<dist::FinitePmf>(&law);
        if (!finite) throw ConfigError("brute_force needs a finite-support law");
        r = teststat::brute_force_expectation(test, *finite, n);
        break;
      }
      case adversary::Evaluator::monte_carlo:
        r = teststat::mc_expectation(test, law, n, ev.reps, ev.confidence,
                                     derive_seed(ctx.seed, static_cast<std::uint64_t>(n)));
        break;
    }
    csv += std::to_string(n) + "," + csv_report_row(r) + "\n";
    if (!first) jout += ",";
    first = false;
    jout += "{\"n\":" + std::to_string(n) + ",\"report\":" + io::report_to_json(r) + "}";
  }
  jout += "]}";
  write_csv(ctx, cfg.value("out_csv", std::string("expectations.csv")), csv);
  if (cfg.contains("out_json")) write_json(ctx, cfg.at("out_json").get<std::string>(), jout);
  return 0;
}

// ----------------------------------------------------------- build-adversary

int cmd_build_adversary(Context& ctx) {
  const auto& cfg = ctx.config;
  io::check_fields(cfg, {"schema", "seed", "test", "alpha", "num_ranks", "horizon", "evaluator", "tol",
                         "reps", "confidence", "search_budget", "normalizer_eps", "out_schedule", "out_csv"},
                   "build-adversary config");
  const auto test = io::test_family_from_json(io::require_field(cfg, "test", "config"));
  adversary::BuildOptions opts;
  opts.evaluator = evaluator_options(cfg, ctx.seed);
  if (cfg.contains("search_budget")) opts.search_budget = cfg.at("search_budget").get<std::int64_t>();
  if (cfg.contains("normalizer_eps")) opts.normalizer_eps = cfg.at("normalizer_eps").get<double>();
  if (cfg.contains("horizon")) {
    const auto& h = cfg.at("horizon");
    io::check_fields(h, {"policy", "multiplier"}, "horizon");
    const std::string policy = io::require_string(h, "policy", "horizon");
    if (policy == "analytic")
      opts.horizon.policy = adversary::HorizonPolicy::analytic;
    else if (policy == "finite")
      opts.horizon.policy = adversary::HorizonPolicy::finite_horizon;
    else
      throw ConfigError("horizon policy must be \"analytic\" or \"finite\"");
    if (h.contains("multiplier")) opts.horizon.multiplier = h.at("multiplier").get<double>();
  }

  const auto outcome = adversary::build_adversary(test, io::require_real(cfg, "alpha", "config"),
                                                  io::require_int(cfg, "num_ranks", "config"), opts);
  if (!outcome.ok()) {
    const auto& v = *outcome.violation;
    write_json(ctx, "finding.json",
               "{\"finding\":\"level_violation\",\"rank\":" + std::to_string(v.rank) +
                   ",\"m\":" + std::to_string(v.m) + ",\"value\":" + io::format_real(v.value) +
                   ",\"bound\":" + io::format_real(v.bound) + "}");
    write_manifest(ctx);
    return 3;
  }

  const auto& schedule = *outcome.schedule;
  write_json(ctx, cfg.value("out_schedule", std::string("schedule.json")),
             io::schedule_to_json(schedule));
  std::string csv = "n,psi,c_n,max_expectation,bound,method,analytic\n";
  for (const auto& rank : schedule.ranks) {
    const auto& c = rank.certificate;
    csv += std::to_string(rank.n) + "," + std::to_string(rank.psi) + "," + io::format_real(rank.c_n) +
           "," + io::format_real(c.max_expectation) + "," + io::format_real(c.bound) + "," +
           (c.method == adversary::Evaluator::exact
                ? "exact"
                : c.method == adversary::Evaluator::brute_force ? "brute_force" : "monte_carlo") +
           "," + (c.analytic ? "1" : "0") + "\n";
  }
  write_csv(ctx, cfg.value("out_csv", std::string("ranks.csv")), csv);
  write_manifest(ctx);
  return 0;
}

// ---------------------------------------------------------- verify-adversary

int cmd_verify_adversary(Context& ctx) {
  const auto& cfg = ctx.config;
  io::check_fields(cfg, {"schema", "seed", "schedule", "test", "evaluator", "tol", "reps", "confidence",
                         "out_csv"},
                   "verify-adversary config");
  const fs::path schedule_path = ctx.config_dir / io::require_string(cfg, "schedule", "config");
  const auto schedule_json = json::parse(io::read_file(schedule_path));
  const auto schedule = io::schedule_from_json(schedule_json);
  const auto test = io::test_family_from_json(io::require_field(cfg, "test", "config"));
  auto ev = evaluator_options(cfg, ctx.seed);
  if (!cfg.contains("tol")) ev.tol = 1e-6;

  const auto rows = adversary::verify_adversary(schedule, test, ev, /*throw_on_failure=*/false);
  std::string csv = "rank,psi,measured,term_level,term_tail,total,pass\n";
  std::optional<adversary::RankVerification> failed;
  for (const auto& row : rows) {
    csv += std::to_string(row.n) + "," + std::to_string(row.psi) + "," + io::format_real(row.measured.value) +
           "," + io::format_real(row.term_level) + "," + io::format_real(row.term_tail) + "," +
           io::format_real(row.total) + "," + (row.pass ? "1" : "0") + "\n";
    if (!row.pass && !failed) failed = row;
  }
  write_csv(ctx, cfg.value("out_csv", std::string("verify.csv")), csv);
  if (failed) {
    write_json(ctx, "finding.json",
               "{\"finding\":\"verification_failure\",\"rank\":" + std::to_string(failed->n) +
                   ",\"measured\":" + io::format_real(failed->measured.value) +
                   ",\"total\":" + io::format_real(failed->total) + "}");
    write_manifest(ctx);
    return 3;
  }
  write_manifest(ctx);
  return 0;
}

// --------------------------------------------------------- simulate-tsirelson

int cmd_simulate_tsirelson(Context& ctx) {
  const auto& cfg = ctx.config;
  io::check_fields(cfg, {"schema", "seed", "law", "depth", "mode", "grid_denominator", "out_csv"},
                   "simulate-tsirelson config");
  const auto law = io::torus_law_from_json(io::require_field(cfg, "law", "config"));
  tsirelson::SimulateOptions opts;
  const std::string mode = cfg.value("mode", std::string("real"));
  if (mode == "grid")
    opts.mode = tsirelson::PathMode::grid;
  else if (mode != "real")
    throw ConfigError("mode must be \"real\" or \"grid\"");
  if (cfg.contains("grid_denominator")) opts.grid_denominator = cfg.at("grid_denominator").get<std::int64_t>();

  const auto path = tsirelson::simulate_uniform_solution(law, io::require_int(cfg, "depth", "config"),
                                                         ctx.seed, opts);
  std::string csv;
  if (opts.mode == tsirelson::PathMode::grid) {
    csv = "k,num,den\n";
    for (std::size_t j = 0; j < path.size(); ++j) {
      const auto frac = path[j].fraction();
      csv += std::to_string(-static_cast<std::int64_t>(j)) + "," + std::to_string(frac.num) + "," +
             std::to_string(frac.den) + "\n";
    }
  } else {
    csv = "k,value\n";
    for (std::size_t j = 0; j < path.size(); ++j)
      csv += std::to_string(-static_cast<std::int64_t>(j)) + "," + io::format_real(path[j].value()) + "\n";
  }
  write_csv(ctx, cfg.value("out_csv", std::string("path.csv")), csv);
  write_manifest(ctx);
  return 0;
}

// ------------------------------------------------------------------ classify

int cmd_classify(Context& ctx) {
  const auto& cfg = ctx.config;
  io::check_fields(cfg, {"schema", "seed", "law", "out_json"}, "classify config");
  const auto law = io::torus_law_from_json(io::require_field(cfg, "law", "config"));
  const auto label = tsirelson::classify(law);
  std::string out;
  if (const auto* two = std::get_if<tsirelson::Case2>(&label)) {
    const auto frac = two->x.fraction();
    out = "{\"case\":2,\"p\":" + std::to_string(two->p) + ",\"x\":{\"num\":" + std::to_string(frac.num) +
          ",\"den\":" + std::to_string(frac.den) + "}}";
  } else {
    out = "{\"case\":" + std::to_string(tsirelson::case_number(label)) + "}";
  }
  write_json(ctx, cfg.value("out_json", std::string("classification.json")), out);
  write_manifest(ctx);
  return 0;
}

// -------------------------------------------------------------- reduce-event

int cmd_reduce_event(Context& ctx) {
  const auto& cfg = ctx.config;
  io::check_fields(cfg, {"schema", "seed", "events", "law", "n", "u_mode", "grid_denominator", "u_samples",
                         "u_confidence", "expectation", "reps", "confidence", "event_probability", "out_csv"},
                   "reduce-event config");
  const auto events = io::event_family_from_json(io::require_field(cfg, "events", "config"));
  const auto law = io::law_from_json(io::require_field(cfg, "law", "config"));

  tsirelson::UIntegration integ;
  const std::string u_mode = cfg.value("u_mode", std::string("exact_arcs"));
  if (u_mode == "exact_arcs")
    integ.mode = tsirelson::UIntegration::Mode::exact_arcs;
  else if (u_mode == "grid")
    integ.mode = tsirelson::UIntegration::Mode::grid;
  else if (u_mode == "monte_carlo")
    integ.mode = tsirelson::UIntegration::Mode::monte_carlo;
  else
    throw ConfigError("u_mode must be exact_arcs, grid, or monte_carlo");
  if (cfg.contains("grid_denominator")) integ.grid_denominator = cfg.at("grid_denominator").get<std::int64_t>();
  if (cfg.contains("u_samples")) integ.mc_samples = cfg.at("u_samples").get<std::int64_t>();
  if (cfg.contains("u_confidence")) integ.mc_confidence = cfg.at("u_confidence").get<double>();
  integ.mc_seed = derive_seed(ctx.seed, 0x7265647563654555ULL);

  const auto test = tsirelson::reduce_event(events, integ);
  const std::string expectation = cfg.value("expectation", std::string("brute_force"));

  std::optional<tsirelson::EventProbabilityOptions> prob_opts;
  if (cfg.contains("event_probability")) {
    const auto& p = cfg.at("event_probability");
    io::check_fields(p, {"method", "paths", "confidence", "grid_denominator"}, "event_probability");
    tsirelson::EventProbabilityOptions po;
    const std::string method = io::require_string(p, "method", "event_probability");
    if (method == "monte_carlo")
      po.method = tsirelson::EventProbabilityOptions::Method::monte_carlo;
    else if (method == "exact_grid")
      po.method = tsirelson::EventProbabilityOptions::Method::exact_grid;
    else
      throw ConfigError("event_probability method must be monte_carlo or exact_grid");
    if (p.contains("paths")) po.paths = p.at("paths").get<std::int64_t>();
    if (p.contains("confidence")) po.confidence = p.at("confidence").get<double>();
    po.grid_denominator = p.value("grid_denominator", integ.grid_denominator);
    po.seed = derive_seed(ctx.seed, 0x70617468730a0a0aULL);
    prob_opts = po;
  }

  std::string csv = prob_opts
                        ? "n,value,error_kind,half_width,confidence,evaluations,event_prob,event_half_width\n"
                        : "n,value,error_kind,half_width,confidence,evaluations\n";
  for (const std::int64_t n : n_list(cfg)) {
    teststat::ExpectationReport r;
    if (expectation == "brute_force") {
      const auto* finite = std::get_if<dist::FinitePmf>(&law);
      if (!finite) throw ConfigError("brute_force expectation needs a finite-support law");
      r = teststat::brute_force_expectation(test, *finite, n);
      // a Monte Carlo inner integral makes the whole row Monte Carlo
      if (integ.mode == tsirelson::UIntegration::Mode::monte_carlo) {
        r.error_kind = teststat::ErrorKind::monte_carlo;
        r.half_width = tsirelson::reduced_eval_half_width(integ);
        r.confidence = integ.mc_confidence;
      }
    } else if (expectation == "monte_carlo") {
      r = teststat::mc_expectation(test, law, n, cfg.value("reps", std::int64_t{20000}),
                                   cfg.value("confidence", 0.99),
                                   derive_seed(ctx.seed, static_cast<std::uint64_t>(n)));
    } else {
      throw ConfigError("expectation must be brute_force or monte_carlo");
    }
    csv += std::to_string(n) + "," + csv_report_row(r);
    if (prob_opts) {
      const auto nu = tsirelson::pushforward(law);
      const auto pr = tsirelson::event_probability(nu, events, n, *prob_opts);
      csv += "," + io::format_real(pr.value) + "," + io::format_real(pr.half_width);
    }
    csv += "\n";
  }
  write_csv(ctx, cfg.value("out_csv", std::string("reduced.csv")), csv);
  write_manifest(ctx);
  return 0;
}

// ------------------------------------------------------------------- tv-demo

int cmd_tv_demo(Context& ctx) {
  const auto& cfg = ctx.config;
  io::check_fields(cfg, {"schema", "seed", "law", "deltas", "n", "out_csv"}, "tv-demo config");
  const auto law = io::law_from_json(io::require_field(cfg, "law", "config"));
  const auto* mu1 = std::get_if<dist::FinitePmf>(&law);
  if (!mu1) throw ConfigError("tv-demo needs a finite-support law");
  const auto& deltas_json = io::require_field(cfg, "deltas", "config");
  if (!deltas_json.is_array() || deltas_json.empty()) throw ConfigError("deltas must be a nonempty array");
  const std::int64_t n = io::require_int(cfg, "n", "config");

  std::string csv = "delta,tv,n,product_bound\n";
  for (const auto& d : deltas_json) {
    const double delta = d.get<double>();
    const auto mixed = dist::mix_with_tail(*mu1, delta);
    const double tv = dist::tv_distance(law, dist::Law{mixed});
    csv += io::format_real(delta) + "," + io::format_real(tv) + "," + std::to_string(n) + "," +
           io::format_real(dist::product_tv_bound(delta, n)) + "\n";
  }
  write_csv(ctx, cfg.value("out_csv", std::string("tv_demo.csv")), csv);
  write_manifest(ctx);
  return 0;
}

int dispatch(Context& ctx) {
  if (ctx.subcommand == "eval-test") {
    const int rc = cmd_eval_test(ctx);
    write_manifest(ctx);
    return rc;
  }
  if (ctx.subcommand == "build-adversary") return cmd_build_adversary(ctx);
  if (ctx.subcommand == "verify-adversary") return cmd_verify_adversary(ctx);
  if (ctx.subcommand == "simulate-tsirelson") return cmd_simulate_tsirelson(ctx);
  if (ctx.subcommand == "classify") return cmd_classify(ctx);
  if (ctx.subcommand == "reduce-event") return cmd_reduce_event(ctx);
  if (ctx.subcommand == "tv-demo") return cmd_tv_demo(ctx);
  throw ConfigError("unknown subcommand " + ctx.subcommand);
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"finsup: executable experiments around support-finiteness testing"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
  };
  std::vector<std::pair<CLI::App*, std::shared_ptr<SubArgs>>> subs;
  for (const char* name : {"eval-test", "build-adversary", "verify-adversary", "simulate-tsirelson",
                           "classify", "reduce-event", "tv-demo"}) {
    auto* sub = app.add_subcommand(name);
    auto args = std::make_shared<SubArgs>();
    sub->add_option("--config", args->config, "JSON experiment config")->required();
    sub->add_option("--seed", args->seed, "overrides the config seed");
    sub->add_option("--out", args->out, "output directory");
    subs.emplace_back(sub, args);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    for (const auto& [sub, args] : subs) {
      if (!sub->parsed()) continue;
      Context ctx;
      ctx.subcommand = sub->get_name();
      ctx.config_bytes = io::read_file(args->config);
      ctx.config_hash = "fnv1a64:" + hex64(fnv1a64(ctx.config_bytes));
      ctx.config = json::parse(ctx.config_bytes);
      require_schema(ctx.config);
      ctx.config_dir = fs::absolute(fs::path(args->config)).parent_path();
      ctx.out_dir = args->out;
      ctx.seed = args->seed ? *args->seed : seed_from_config(ctx.config);
      return dispatch(ctx);
    }
    return 2;
  } catch (const VerificationFailure& e) {
    std::cerr << "verification failure: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("finsup");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace finsup::cli
