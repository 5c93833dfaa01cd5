#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lrlab/harness.hpp"

using namespace lrlab;

namespace {

std::string minimal_zz_config(const std::string& extra = "") {
  return R"({
    "scenario_id": "zz_oracle",
    "kind": "lightcone",
    "model": {"kind": "custom", "bond": "zz", "num_sites": 2},
    "disorder": {"width": 0.0, "base_seed": 7, "n_realizations": 1},
    "probes": {"a_op": "sx", "a_site": 0, "b_op": "sx", "distances": [1]},
    "schedule": {"times": [0.2, 0.5, 0.7853981633974483, 1.1, 2.0]})" +
         extra + "\n}";
}

std::string xx_config(int n_sites, int n_real, double width, const std::string& id) {
  char buf[512];
  std::snprintf(buf, sizeof buf, R"({
    "scenario_id": "%s",
    "kind": "lightcone",
    "model": {"kind": "xxz", "delta": 0.0, "num_sites": %d},
    "disorder": {"width": %g, "base_seed": 11, "n_realizations": %d},
    "probes": {"a_op": "sx", "a_site": 0, "b_op": "sx", "distances": [1, 2, 3]},
    "schedule": {"times": [0.5, 1.0, 2.0]},
    "analysis": {"fit": true}
  })",
                id.c_str(), n_sites, width, n_real);
  return buf;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("config validation with field paths") {
  CHECK_THROWS_AS(parse_scenario_config("{"), validation_error);

  try {
    parse_scenario_config(R"({"model": {"num_sites": 4}, "nonsense": 1})");
    CHECK(false);
  } catch (const validation_error& e) {
    CHECK(e.field_path == "config.nonsense");
  }

  try {
    parse_scenario_config(
        R"({"model": {"num_sites": 4}, "disorder": {"n_realizations": 0}})");
    CHECK(false);
  } catch (const validation_error& e) {
    CHECK(e.field_path == "disorder.n_realizations");
  }

  // budget guard becomes a budget error
  CHECK_THROWS_AS(parse_scenario_config(R"({"model": {"num_sites": 30}})"),
                  budget_error);
}

TEST_CASE("minimal scenario reproduces the two-site closed form") {
  ScenarioConfig cfg = parse_scenario_config(minimal_zz_config());
  ResultSet rs = run_scenario(cfg, 1);
  REQUIRE(rs.records.size() == 5);
  for (const auto& r : rs.records) {
    CHECK(r.scenario_id == "zz_oracle");
    CHECK(r.d == 1);
    CHECK(r.value ==
          doctest::Approx(2.0 * std::abs(std::sin(2.0 * r.t))).epsilon(1e-10));
  }
}

TEST_CASE("determinism across worker counts") {
  ScenarioConfig cfg = parse_scenario_config(xx_config(6, 8, 3.0, "det"));
  ResultSet a = run_scenario(cfg, 1);
  ResultSet b = run_scenario(cfg, 4);
  ResultSet c = run_scenario(cfg, 8);
  CHECK(records_csv(a) == records_csv(b));
  CHECK(records_csv(a) == records_csv(c));
  CHECK(fits_csv(a) == fits_csv(b));
}

TEST_CASE("csv export round trip") {
  ScenarioConfig cfg = parse_scenario_config(xx_config(5, 3, 2.0, "roundtrip"));
  cfg.output.dir = "/tmp/lrlab_test_out";
  ResultSet rs = run_scenario(cfg, 2);
  export_results(rs, cfg.output.dir);

  auto records = import_records(cfg.output.dir + "/records.csv");
  REQUIRE(records.size() == rs.records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].scenario_id == rs.records[i].scenario_id);
    CHECK(records[i].kind == rs.records[i].kind);
    CHECK(records[i].realization == rs.records[i].realization);
    CHECK(records[i].d == rs.records[i].d);
    CHECK(records[i].t == rs.records[i].t);  // 17 digits round-trip exactly
    CHECK(records[i].value == rs.records[i].value);
    CHECK(records[i].a_support == rs.records[i].a_support);
    CHECK(records[i].b_support == rs.records[i].b_support);
  }

  // summary carries the recomputed hash
  std::ifstream in(cfg.output.dir + "/summary.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find(config_hash(cfg)) != std::string::npos);
}

TEST_CASE("config hash tracks semantic fields only") {
  ScenarioConfig cfg = parse_scenario_config(xx_config(5, 3, 2.0, "hash"));
  std::string h0 = config_hash(cfg);
  CHECK(h0 == config_hash(cfg));

  ScenarioConfig other = cfg;
  other.output.dir = "elsewhere";
  CHECK(config_hash(other) == h0);

  other = cfg;
  other.disorder.width = 2.5;
  CHECK(config_hash(other) != h0);

  other = cfg;
  other.schedule.times.push_back(9.0);
  CHECK(config_hash(other) != h0);
}

TEST_CASE("sweep") {
  ScenarioConfig cfg = parse_scenario_config(xx_config(4, 2, 0.0, "sweep"));

  CHECK(run_sweep(cfg, "disorder.width", {}, 1).empty());
  CHECK_THROWS_AS(run_sweep(cfg, "no.such.axis", {1.0}, 1), parameter_error);

  // W = {0} sweep equals the single run byte for byte
  auto swept = run_sweep(cfg, "disorder.width", {0.0}, 1);
  REQUIRE(swept.size() == 1);
  ResultSet single = run_scenario(cfg, 1);
  CHECK(records_csv(swept[0]) == records_csv(single));
}

TEST_CASE("adiabatic switching weakens early-time deviations monotonically") {
  // deviation of the perturbed commutator from the unperturbed one at fixed t
  // shrinks as the ramp slows
  const char* base = R"({
    "scenario_id": "adiabatic",
    "kind": "perturbed",
    "model": {"kind": "xxz", "delta": 0.3, "num_sites": 4},
    "disorder": {"width": 1.0, "base_seed": 3, "n_realizations": 1},
    "perturbations": [{"kind": "adiabatic", "tau": 1.0,
                       "base": [{"kind": "field", "support": [3, 3], "op": "sx",
                                  "coupling": 1.0}]}],
    "probes": {"a_op": "sx", "a_site": 0, "b_op": "sx", "distances": [2]},
    "schedule": {"times": [1.0], "tol": 1e-9}
  })";
  ScenarioConfig cfg = parse_scenario_config(base);

  ScenarioConfig unpert = cfg;
  unpert.kind = "lightcone";
  unpert.perturbations.clear();
  double reference = run_scenario(unpert, 1).records.at(0).value;

  double prev = std::numeric_limits<double>::infinity();
  for (double tau : {1.0, 10.0, 100.0}) {
    ScenarioConfig item = cfg;
    item.perturbations[0].tau = tau;
    double value = run_scenario(item, 1).records.at(0).value;
    double deviation = std::abs(value - reference);
    CHECK(deviation <= prev + 1e-9);
    prev = deviation;
  }
}

TEST_CASE("entropy and restriction probes") {
  const char* text = R"({
    "scenario_id": "probes",
    "kind": "lightcone",
    "model": {"kind": "xxz", "delta": 0.0, "num_sites": 4},
    "disorder": {"width": 4.0, "base_seed": 5, "n_realizations": 2},
    "probes": {"a_op": "sx", "a_site": 0, "b_op": "sx", "distances": [1, 2],
               "restriction_radii": [0, 1], "entropy_cut": 1},
    "schedule": {"times": [0.5, 1.5]}
  })";
  ResultSet rs = run_scenario(parse_scenario_config(text), 2);
  int n_comm = 0, n_restr = 0, n_ent = 0;
  for (const auto& r : rs.records) {
    if (r.kind == RecordKind::commutator) ++n_comm;
    if (r.kind == RecordKind::restriction_error) ++n_restr;
    if (r.kind == RecordKind::entropy) {
      ++n_ent;
      CHECK(r.value >= 0.0);
      CHECK(r.value <= std::log(4.0) + 1e-12);
    }
  }
  CHECK(n_comm == 2 * 2 * 2);
  CHECK(n_restr == 2 * 2 * 2);
  CHECK(n_ent == 2 * 2);
}

TEST_CASE("dual scenario checks the pair identity") {
  const char* text = R"({
    "scenario_id": "dual_small",
    "kind": "dual",
    "model": {"kind": "xxz", "delta": 1.0, "num_sites": 5},
    "disorder": {"region": [1, 2], "width": 3.0, "base_seed": 9,
                 "n_realizations": 3},
    "probes": {"a_op": "sx", "a_site": 1, "b_op": "sx", "distances": [1, 2]},
    "schedule": {"times": [0.5, 1.0]}
  })";
  ResultSet rs = run_scenario(parse_scenario_config(text), 2);
  REQUIRE(rs.proof_checks.size() == 1);
  CHECK(rs.proof_checks[0].name == "dual_pair_identity");
  CHECK(rs.proof_checks[0].pass);
  CHECK(rs.proof_checks[0].lhs <= 1e-13);
}

TEST_CASE("free region precondition is enforced") {
  const char* text = R"({
    "scenario_id": "blocked",
    "kind": "perturbed",
    "model": {"kind": "xxz", "delta": 0.0, "num_sites": 6},
    "disorder": {"width": 2.0, "base_seed": 2, "n_realizations": 1},
    "perturbations": [{"kind": "field", "support": [2, 3], "op": "zz",
                       "coupling": 0.5}],
    "probes": {"a_op": "sx", "a_site": 0, "b_op": "sx", "distances": [4]},
    "schedule": {"times": [1.0]},
    "analysis": {"bounds": ["full"], "params": {"K": 1.0, "xi": 1.0, "beta": 1.0}}
  })";
  CHECK_THROWS_AS(run_scenario(parse_scenario_config(text), 1), geometry_error);
}

TEST_CASE("proofcheck scenario runs the battery") {
  const char* text = R"({
    "scenario_id": "battery",
    "kind": "proofcheck",
    "model": {"kind": "xxz", "delta": 0.0, "num_sites": 6},
    "disorder": {"width": 4.0, "base_seed": 12, "n_realizations": 4},
    "probes": {"a_op": "sx", "a_site": 0, "b_op": "sx", "distances": [1, 2, 3]},
    "schedule": {"times": [0.5, 1.0, 2.0], "tol": 1e-7}
  })";
  ResultSet rs = run_scenario(parse_scenario_config(text), 2);
  REQUIRE(rs.proof_checks.size() == 5);
  for (const auto& p : rs.proof_checks) {
    INFO(p.name, ": ", p.details);
    CHECK(p.pass);
  }
}

TEST_SUITE_END();
