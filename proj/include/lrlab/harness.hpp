#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lrlab/metrics.hpp"
#include "lrlab/proof_checks.hpp"

namespace lrlab {

// ---------------------------------------------------------------------------
// Scenario configuration (mirrors the JSON schema; see README)
// ---------------------------------------------------------------------------

struct ModelConfig {
  std::string kind = "xxz";  // xxz | custom (nearest-neighbour bond by name)
  int num_sites = 2;
  int local_dim = 2;
  double delta = 0.0;
  double coupling = 1.0;
  std::string bond = "zz";  // custom kind: two-letter bond like "zz", "xx"
};

struct DisorderConfig {
  int region_lo = 0;
  int region_hi = -1;  // -1: whole chain
  double width = 0.0;
  std::uint64_t base_seed = 1;
  int n_realizations = 1;
};

struct PerturbationConfig {
  std::string kind = "field";  // field | grain | avalanche | adiabatic | periodic
  int support_lo = 0;
  int support_hi = 0;
  std::string op = "sz";   // field: local operator name ("sx", "zz", ...)
  double coupling = 1.0;
  double sigma = -1.0;     // grain / avalanche: GOE scale, <=0 means default
  std::uint64_t seed_offset = 0;
  // adiabatic / periodic wrap a base perturbation
  std::vector<PerturbationConfig> base;
  double tau = 1.0;
  std::string ramp = "linear";
  double period = 1.0;
  std::string waveform = "cosine";
};

struct ProbesConfig {
  std::string a_op = "sx";
  int a_site = 0;
  std::string b_op = "sx";
  std::vector<int> distances;          // B placed at these distances right of A
  std::vector<int> restriction_radii;  // optional restriction-error records
  int entropy_cut = -1;                // optional entropy records at this cut
};

struct ScheduleConfig {
  std::vector<double> times;
  double tol = 1e-8;
  double initial_step = 0.25;
};

struct ParamsConfig {
  double K = 1.0;
  double xi = 1.0;
  double beta = 1.0;
  std::string shape = "power";
  double v = 1.0;
};

struct AnalysisConfig {
  std::vector<std::string> bounds;
  bool fit = false;
  bool fit_first = false;
  std::optional<ParamsConfig> params;
  double safety_factor = 2.0;
  double noise_floor = 1e-12;
  double free_region_n = 1.0;
};

struct SplitConfig {
  int cut = -1;
  std::vector<int> half_widths;
};

struct OutputConfig {
  std::string dir = "out";
  std::vector<std::string> formats = {"csv", "json"};
};

struct ScenarioConfig {
  std::string scenario_id = "scenario";
  std::string kind = "lightcone";  // lightcone|perturbed|dual|avalanche|splitting|proofcheck
  ModelConfig model;
  DisorderConfig disorder;
  std::vector<PerturbationConfig> perturbations;
  ProbesConfig probes;
  ScheduleConfig schedule;
  AnalysisConfig analysis;
  SplitConfig split;
  OutputConfig output;
};

/// Parse + validate a config document; unknown keys are rejected and errors
/// carry the JSON path of the offending field.
ScenarioConfig parse_scenario_config(const std::string& json_text);
ScenarioConfig load_scenario_config(const std::string& path);
std::string scenario_config_to_json(const ScenarioConfig& cfg);

/// FNV-1a over the canonical form of the semantically meaningful fields
/// (everything except the output block), as a 16-digit hex string.
std::string config_hash(const ScenarioConfig& cfg);

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct NamedFit {
  std::string scenario_id;
  FitResult fit;
};

struct ResultSet {
  ScenarioConfig config;
  std::string hash;
  std::string tool_version;
  std::vector<ScanRecord> records;
  std::vector<NamedFit> fits;
  std::vector<MarginReport> margins;
  std::vector<ProofCheckReport> proof_checks;
  double wall_seconds = 0.0;
};

/// Build, evolve, measure, aggregate, fit, check. Deterministic: the output
/// is byte-identical for any worker count.
ResultSet run_scenario(const ScenarioConfig& cfg, int workers = 0);

/// One run per value of the swept scalar config field (dot-separated path,
/// e.g. "disorder.width"). Each run's records land under
/// output.dir/<axis>=<value>/.
std::vector<ResultSet> run_sweep(const ScenarioConfig& cfg, const std::string& axis,
                                 const std::vector<double>& values, int workers = 0);

/// records.csv, fits.csv, summary.json into `dir` (created if needed).
void export_results(const ResultSet& results, const std::string& dir);

/// Re-read records.csv (schema-validated); inverse of export for the records
/// payload.
std::vector<ScanRecord> import_records(const std::string& csv_path);

/// CSV payloads as strings, for determinism checks.
std::string records_csv(const ResultSet& results);
std::string fits_csv(const ResultSet& results);

}  // namespace lrlab
