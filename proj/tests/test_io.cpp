#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "finsup/json_io.hpp"

using namespace finsup;
using nlohmann::json;

TEST_CASE("reals carry 17 significant digits") {
  CHECK(io::format_real(0.1) == "0.10000000000000001");
  CHECK(io::format_real(0.5) == "0.5");
  CHECK(io::format_real(1.0 / 3.0) == "0.33333333333333331");
}

TEST_CASE("law serialization round-trips with fixed field order") {
  const dist::Law finite{dist::normalize_finite({0, 2, 5}, {1.0, 2.0, 1.0})};
  const auto text = io::law_to_json(finite);
  CHECK(text.rfind("{\"kind\":\"finite\",\"support\":[0,2,5],\"probs\":[", 0) == 0);
  const auto back = io::law_from_json(json::parse(text));
  CHECK(io::law_to_json(back) == text);

  const dist::Law tail{dist::TailPmf({1, 1, 5, 26}, SampleSizeMap::from_table({2, 4}))};
  const auto tail_text = io::law_to_json(tail);
  CHECK(tail_text.rfind("{\"kind\":\"tail\",\"psi_table\":[1,1,5,26],\"phi\":\"table\",\"phi_table\":[2,4],\"c\":",
                        0) == 0);
  CHECK(io::law_to_json(io::law_from_json(json::parse(tail_text))) == tail_text);

  const dist::Law geo{dist::GeometricPmf(0.25)};
  CHECK(io::law_to_json(geo) == "{\"kind\":\"geometric\",\"p\":0.25}");
  CHECK(io::law_to_json(io::law_from_json(json::parse(io::law_to_json(geo)))) == io::law_to_json(geo));
}

TEST_CASE("identity sample-size maps serialize as a bare tag") {
  const dist::Law tail{dist::TailPmf({1}, SampleSizeMap::identity())};
  const auto text = io::law_to_json(tail);
  CHECK(text.find("\"phi\":\"identity\"") != std::string::npos);
  CHECK(text.find("phi_table") == std::string::npos);
}

TEST_CASE("unknown fields are rejected") {
  CHECK_THROWS_AS(io::law_from_json(json::parse(
                      R"({"kind":"finite","support":[0],"probs":[1.0],"extra":1})")),
                  ConfigError);
  CHECK_THROWS_AS(io::law_from_json(json::parse(R"({"kind":"nope"})")), ConfigError);
  CHECK_THROWS_AS(io::law_from_json(json::parse(R"({"kind":"geometric"})")), ConfigError);
  CHECK_THROWS_AS(io::torus_law_from_json(json::parse(
                      R"({"kind":"finite","atoms":[{"num":1,"den":2,"prob":1.0,"label":"x"}]})")),
                  ConfigError);
}

TEST_CASE("torus laws round-trip") {
  const auto law = tsirelson::TorusLaw::finite({{tsirelson::TorusPoint::exact(1, 3), 0.5},
                                                {tsirelson::TorusPoint::exact(1, 2), 0.5}});
  const auto text = io::torus_law_to_json(law);
  CHECK(text ==
        R"({"kind":"finite","atoms":[{"num":1,"den":3,"prob":0.5},{"num":1,"den":2,"prob":0.5}]})");
  CHECK(io::torus_law_to_json(io::torus_law_from_json(json::parse(text))) == text);

  const auto tagged = tsirelson::pushforward(dist::Law{dist::GeometricPmf(0.5)});
  const auto tagged_text = io::torus_law_to_json(tagged);
  CHECK(tagged_text ==
        R"({"kind":"pushforward","base":{"kind":"geometric","p":0.5},"injection":"one_over_k_plus_2"})");
  CHECK(io::torus_law_to_json(io::torus_law_from_json(json::parse(tagged_text))) == tagged_text);
}

TEST_CASE("expectation reports serialize in the documented shape") {
  const teststat::ExpectationReport r{0.5, teststat::ErrorKind::monte_carlo, 0.01, 0.99, 1000};
  CHECK(io::report_to_json(r) ==
        R"({"value":0.5,"error_kind":"monte_carlo","half_width":0.01,"confidence":0.98999999999999999,"evaluations":1000})");
}

TEST_CASE("schedules round-trip bit for bit") {
  adversary::BuildOptions opts;
  opts.horizon.policy = adversary::HorizonPolicy::analytic;
  opts.evaluator.kind = adversary::Evaluator::exact;
  const auto outcome = adversary::build_adversary(teststat::dual_split_max_family(), 0.05, 4, opts);
  REQUIRE(outcome.ok());
  const auto text = io::schedule_to_json(*outcome.schedule);
  const auto back = io::schedule_from_json(json::parse(text));
  CHECK(io::schedule_to_json(back) == text);
  CHECK(back.ranks.size() == outcome.schedule->ranks.size());
  CHECK(back.final_law.c() == outcome.schedule->final_law.c());
}

TEST_CASE("test family descriptors parse") {
  CHECK(io::test_family_from_json(json::parse(R"({"family":"split_max"})")).sample_size(3) == 6);
  CHECK(io::test_family_from_json(json::parse(R"({"family":"dual_split_max"})")).complemented());
  const auto c = io::test_family_from_json(json::parse(R"({"family":"constant","value":0.25})"));
  CHECK(c.eval(2, std::vector<std::int64_t>{0, 0}) == 0.25);
  CHECK_THROWS_AS(io::test_family_from_json(json::parse(R"({"family":"constant"})")), ConfigError);
  CHECK_THROWS_AS(io::test_family_from_json(json::parse(R"({"family":"split_max","value":1})")),
                  ConfigError);
}

TEST_CASE("event families parse from arc quadruples") {
  const auto family = io::event_family_from_json(json::parse(R"({
    "phi": "identity",
    "events": [{"n": 2, "arcs": [[[0,1,1,2],[0,1,1,1],[0,1,1,1]]]}]
  })"));
  CHECK(family.has(2));
  CHECK(family.at(2).coords == 3);
  CHECK_THROWS_AS(io::event_family_from_json(json::parse(
                      R"({"phi":"identity","events":[{"n":2,"arcs":[[[0,1,1,2]]]}]})")),
                  InvalidWeights);
}

TEST_CASE("atomic writes land complete files") {
  const auto dir = std::filesystem::temp_directory_path() / "finsup_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "artifact.txt";
  io::write_file_atomic(path, "payload\n");
  CHECK(io::read_file(path) == "payload\n");
  io::write_file_atomic(path, "replaced\n");
  CHECK(io::read_file(path) == "replaced\n");
  CHECK_FALSE(std::filesystem::exists(dir / "artifact.txt.tmp"));
  std::filesystem::remove_all(dir);
}
