#include "finsup/json_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace finsup::io {

namespace {

using nlohmann::json;

std::string join_ints(const std::vector<std::int64_t>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  out += "]";
  return out;
}

std::string join_reals(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format_real(values[i]);
  }
  out += "]";
  return out;
}

std::string phi_fields(const SampleSizeMap& phi) {
  if (phi.is_identity()) return "\"phi\":\"identity\"";
  return "\"phi\":\"table\",\"phi_table\":" + join_ints(phi.table());
}

std::vector<std::int64_t> int_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of integers");
  std::vector<std::int64_t> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
      throw ConfigError(where + ": expected integer entries");
    out.push_back(v.get<std::int64_t>());
  }
  return out;
}

std::vector<double> real_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of reals");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(where + ": expected numeric entries");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void check_fields(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(where + ": unknown field \"" + item.key() + "\"");
  }
}

const json& require_field(const json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing field \"" + key + "\"");
  return *it;
}

double require_real(const json& j, const char* key, const std::string& where) {
  const auto& v = require_field(j, key, where);
  if (!v.is_number()) throw ConfigError(where + ": field \"" + key + "\" must be numeric");
  return v.get<double>();
}

std::int64_t require_int(const json& j, const char* key, const std::string& where) {
  const auto& v = require_field(j, key, where);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(where + ": field \"" + key + "\" must be an integer");
  return v.get<std::int64_t>();
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  const auto& v = require_field(j, key, where);
  if (!v.is_string()) throw ConfigError(where + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

SampleSizeMap phi_from_json(const json& owner, const std::string& mode_key, const std::string& table_key) {
  const std::string mode = require_string(owner, mode_key.c_str(), "phi");
  if (mode == "identity") return SampleSizeMap::identity();
  if (mode == "table")
    return SampleSizeMap::from_table(int_list(require_field(owner, table_key.c_str(), "phi"), "phi_table"));
  throw ConfigError("phi must be \"identity\" or \"table\"");
}

std::string law_to_json(const dist::Law& law) {
  if (const auto* finite = std::get_if<dist::FinitePmf>(&law)) {
    return "{\"kind\":\"finite\",\"support\":" + join_ints(finite->support()) +
           ",\"probs\":" + join_reals(finite->probs()) + "}";
  }
  if (const auto* tail = std::get_if<dist::TailPmf>(&law)) {
    return "{\"kind\":\"tail\",\"psi_table\":" + join_ints(tail->psi_table()) + "," +
           phi_fields(tail->phi()) + ",\"c\":" + format_real(tail->c()) +
           ",\"c_error\":" + format_real(tail->c_error()) + "}";
  }
  if (const auto* geo = std::get_if<dist::GeometricPmf>(&law)) {
    return "{\"kind\":\"geometric\",\"p\":" + format_real(geo->p()) + "}";
  }
  throw ConfigError("mixture laws are constructed by tv-demo, not serialized");
}

dist::Law law_from_json(const json& j) {
  const std::string kind = require_string(j, "kind", "law");
  if (kind == "finite") {
    check_fields(j, {"kind", "support", "probs"}, "finite law");
    return dist::FinitePmf(int_list(require_field(j, "support", "law"), "support"),
                           real_list(require_field(j, "probs", "law"), "probs"));
  }
  if (kind == "tail") {
    check_fields(j, {"kind", "psi_table", "phi", "phi_table", "c", "c_error"}, "tail law");
    auto phi = phi_from_json(j, "phi", "phi_table");
    auto psi = int_list(require_field(j, "psi_table", "law"), "psi_table");
    if (j.contains("c") || j.contains("c_error")) {
      return dist::TailPmf::with_normalizer(std::move(psi), std::move(phi),
                                            require_real(j, "c", "law"), require_real(j, "c_error", "law"));
    }
    return dist::TailPmf(std::move(psi), std::move(phi));
  }
  if (kind == "geometric") {
    check_fields(j, {"kind", "p"}, "geometric law");
    return dist::GeometricPmf(require_real(j, "p", "law"));
  }
  throw ConfigError("unknown law kind \"" + kind + "\"");
}

std::string torus_law_to_json(const tsirelson::TorusLaw& law) {
  if (law.is_finite()) {
    std::string out = "{\"kind\":\"finite\",\"atoms\":[";
    bool first = true;
    for (const auto& atom : law.atoms()) {
      if (!first) out += ",";
      first = false;
      const auto frac = atom.point.fraction();
      out += "{\"num\":" + std::to_string(frac.num) + ",\"den\":" + std::to_string(frac.den) +
             ",\"prob\":" + format_real(atom.prob) + "}";
    }
    out += "]}";
    return out;
  }
  return "{\"kind\":\"pushforward\",\"base\":" + law_to_json(law.base()) +
         ",\"injection\":\"one_over_k_plus_2\"}";
}

tsirelson::TorusLaw torus_law_from_json(const json& j) {
  const std::string kind = require_string(j, "kind", "torus law");
  if (kind == "finite") {
    check_fields(j, {"kind", "atoms"}, "torus law");
    const auto& atoms_json = require_field(j, "atoms", "torus law");
    if (!atoms_json.is_array()) throw ConfigError("torus law atoms must be an array");
    std::vector<tsirelson::TorusLaw::Atom> atoms;
    for (const auto& a : atoms_json) {
      check_fields(a, {"num", "den", "prob"}, "torus atom");
      atoms.push_back({tsirelson::TorusPoint::exact(require_int(a, "num", "atom"), require_int(a, "den", "atom")),
                       require_real(a, "prob", "atom")});
    }
    return tsirelson::TorusLaw::finite(std::move(atoms));
  }
  if (kind == "pushforward") {
    check_fields(j, {"kind", "base", "injection"}, "torus law");
    const std::string inj = require_string(j, "injection", "torus law");
    if (inj != "one_over_k_plus_2") throw ConfigError("unknown injection \"" + inj + "\"");
    return tsirelson::pushforward(law_from_json(require_field(j, "base", "torus law")));
  }
  throw ConfigError("unknown torus law kind \"" + kind + "\"");
}

std::string error_kind_name(teststat::ErrorKind kind) {
  switch (kind) {
    case teststat::ErrorKind::exact:
      return "exact";
    case teststat::ErrorKind::truncated:
      return "truncated";
    case teststat::ErrorKind::monte_carlo:
      return "monte_carlo";
  }
  return "unknown";
}

std::string report_to_json(const teststat::ExpectationReport& report) {
  return "{\"value\":" + format_real(report.value) + ",\"error_kind\":\"" + error_kind_name(report.error_kind) +
         "\",\"half_width\":" + format_real(report.half_width) +
         ",\"confidence\":" + format_real(report.confidence) +
         ",\"evaluations\":" + std::to_string(report.evaluations) + "}";
}

namespace {

std::string method_name(adversary::Evaluator method) {
  switch (method) {
    case adversary::Evaluator::exact:
      return "exact";
    case adversary::Evaluator::brute_force:
      return "brute_force";
    case adversary::Evaluator::monte_carlo:
      return "monte_carlo";
  }
  return "unknown";
}

adversary::Evaluator method_from_name(const std::string& name) {
  if (name == "exact") return adversary::Evaluator::exact;
  if (name == "brute_force") return adversary::Evaluator::brute_force;
  if (name == "monte_carlo") return adversary::Evaluator::monte_carlo;
  throw ConfigError("unknown evaluator \"" + name + "\"");
}

}  // namespace

std::string schedule_to_json(const adversary::AdversarySchedule& schedule) {
  std::string out = "{\"alpha\":" + format_real(schedule.alpha) + ",\"ranks\":[";
  bool first = true;
  for (const auto& rank : schedule.ranks) {
    if (!first) out += ",";
    first = false;
    const auto& c = rank.certificate;
    out += "{\"n\":" + std::to_string(rank.n) + ",\"psi\":" + std::to_string(rank.psi) +
           ",\"c_n\":" + format_real(rank.c_n) + ",\"certificate\":{\"rank\":" + std::to_string(c.rank) +
           ",\"m_lo\":" + std::to_string(c.m_lo) + ",\"m_hi\":" + std::to_string(c.m_hi) +
           ",\"max_expectation\":" + format_real(c.max_expectation) + ",\"bound\":" + format_real(c.bound) +
           ",\"method\":\"" + method_name(c.method) + "\",\"confidence\":" + format_real(c.confidence) +
           ",\"analytic\":" + (c.analytic ? "true" : "false") + "}}";
  }
  out += "],\"final_law\":" + law_to_json(dist::Law{schedule.final_law}) + "}";
  return out;
}

adversary::AdversarySchedule schedule_from_json(const json& j) {
  check_fields(j, {"alpha", "ranks", "final_law", "config_hash"}, "schedule");
  const auto& ranks_json = require_field(j, "ranks", "schedule");
  if (!ranks_json.is_array() || ranks_json.empty()) throw ConfigError("schedule needs a nonempty rank list");
  std::vector<adversary::AdversaryRank> ranks;
  for (const auto& r : ranks_json) {
    check_fields(r, {"n", "psi", "c_n", "certificate"}, "rank");
    const auto& c = require_field(r, "certificate", "rank");
    check_fields(c, {"rank", "m_lo", "m_hi", "max_expectation", "bound", "method", "confidence", "analytic"},
                 "certificate");
    adversary::LevelCertificate cert;
    cert.rank = require_int(c, "rank", "certificate");
    cert.m_lo = require_int(c, "m_lo", "certificate");
    cert.m_hi = require_int(c, "m_hi", "certificate");
    cert.max_expectation = require_real(c, "max_expectation", "certificate");
    cert.bound = require_real(c, "bound", "certificate");
    cert.method = method_from_name(require_string(c, "method", "certificate"));
    cert.confidence = require_real(c, "confidence", "certificate");
    const auto& analytic = require_field(c, "analytic", "certificate");
    if (!analytic.is_boolean()) throw ConfigError("certificate analytic flag must be boolean");
    cert.analytic = analytic.get<bool>();
    ranks.push_back({require_int(r, "n", "rank"), require_int(r, "psi", "rank"),
                     require_real(r, "c_n", "rank"), cert});
  }
  auto law = law_from_json(require_field(j, "final_law", "schedule"));
  const auto* tail = std::get_if<dist::TailPmf>(&law);
  if (!tail) throw ConfigError("schedule final_law must be a tail law");
  return {require_real(j, "alpha", "schedule"), std::move(ranks), *tail};
}

teststat::TestFamily test_family_from_json(const json& j) {
  const std::string family = require_string(j, "family", "test");
  if (family == "split_max") {
    check_fields(j, {"family"}, "test");
    return teststat::split_max_family();
  }
  if (family == "dual_split_max") {
    check_fields(j, {"family"}, "test");
    return teststat::dual_split_max_family();
  }
  if (family == "constant") {
    check_fields(j, {"family", "value", "phi", "phi_table"}, "test");
    const double value = require_real(j, "value", "test");
    SampleSizeMap phi = j.contains("phi") ? phi_from_json(j, "phi", "phi_table") : SampleSizeMap::identity();
    return teststat::constant_family(value, std::move(phi));
  }
  throw ConfigError("unknown test family \"" + family + "\"");
}

tsirelson::PathEventFamily event_family_from_json(const json& j) {
  check_fields(j, {"phi", "phi_table", "events"}, "event family");
  SampleSizeMap phi = j.contains("phi") ? phi_from_json(j, "phi", "phi_table") : SampleSizeMap::identity();
  const auto& events_json = require_field(j, "events", "event family");
  if (!events_json.is_array()) throw ConfigError("events must be an array");
  std::vector<tsirelson::PathEvent> events;
  for (const auto& e : events_json) {
    check_fields(e, {"n", "arcs"}, "event");
    tsirelson::PathEvent event;
    event.rank = require_int(e, "n", "event");
    event.coords = phi(event.rank) + 1;
    const auto& arcs = require_field(e, "arcs", "event");
    if (!arcs.is_array()) throw ConfigError("event arcs must be an array of products");
    for (const auto& product_json : arcs) {
      if (!product_json.is_array()) throw ConfigError("each product must be an array of arcs");
      std::vector<tsirelson::TorusArc> product;
      for (const auto& arc_json : product_json) {
        const auto quad = int_list(arc_json, "arc");
        if (quad.size() != 4) throw ConfigError("an arc is [lo_num, lo_den, hi_num, hi_den]");
        product.push_back({tsirelson::make_rational(quad[0], quad[1]),
                           tsirelson::make_rational(quad[2], quad[3])});
      }
      event.products.push_back(std::move(product));
    }
    events.push_back(std::move(event));
  }
  return tsirelson::PathEventFamily(std::move(phi), std::move(events));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace finsup::io
