#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "lrlab/harness.hpp"
#include "lrlab/linalg.hpp"
#include "lrlab/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double tol = 0.0;
  bool tol_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* c = cmd->add_option("--config", args.config_path, "scenario config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--workers", args.workers, "worker threads (0 = all cores)");
  cmd->add_option("--seed", args.seed, "override disorder.base_seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--tol", args.tol, "override schedule.tol")
      ->each([&args](const std::string&) { args.tol_set = true; });
}

lrlab::ScenarioConfig load_with_overrides(const CommonArgs& args,
                                          const std::string& expected_kind) {
  lrlab::ScenarioConfig cfg = lrlab::load_scenario_config(args.config_path);
  if (!expected_kind.empty()) cfg.kind = expected_kind;
  if (args.seed_set) cfg.disorder.base_seed = args.seed;
  if (args.tol_set) cfg.schedule.tol = args.tol;
  if (!args.out_dir.empty()) cfg.output.dir = args.out_dir;
  return cfg;
}

void report(const lrlab::ResultSet& rs) {
  std::printf("scenario %s  hash %s  records %zu  wall %.2fs\n",
              rs.config.scenario_id.c_str(), rs.hash.c_str(), rs.records.size(),
              rs.wall_seconds);
  for (const auto& f : rs.fits)
    std::printf("  fit %-28s K=%.6g xi=%.6g beta=%.6g rms=%.3g (n=%d)\n",
                f.scenario_id.c_str(), f.fit.K, f.fit.xi, f.fit.beta,
                f.fit.rms_log_residual, f.fit.n_used);
  for (const auto& m : rs.margins)
    std::printf("  bound %-12s violations=%d min_rel_margin=%.4g uninformative=%.0f%%\n",
                lrlab::to_string(m.kind).c_str(), m.violations, m.min_rel_margin,
                100.0 * m.uninformative_fraction);
  for (const auto& p : rs.proof_checks)
    std::printf("  check %-26s %s  (%s)\n", p.name.c_str(),
                p.pass ? "pass" : "FAIL", p.details.c_str());
}

int run_kind(const CommonArgs& args, const std::string& kind) {
  lrlab::ScenarioConfig cfg = load_with_overrides(args, kind);
  lrlab::ResultSet rs = lrlab::run_scenario(cfg, args.workers);
  lrlab::export_results(rs, cfg.output.dir);
  report(rs);
  int bad = 0;
  for (const auto& m : rs.margins) bad += m.violations;
  for (const auto& p : rs.proof_checks)
    if (!p.pass) ++bad;
  return bad == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  lrlab::init_runtime();
  CLI::App app{"lrlab: exact lightcone scans and stability bound checks for "
               "disordered spin chains"};
  app.set_version_flag("--version", lrlab::version);
  app.require_subcommand(1);

  CommonArgs a_light, a_pert, a_dual, a_aval, a_proof, a_sweep, a_split;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::string export_in, export_out;

  add_common(app.add_subcommand("lightcone", "unperturbed scan and lightcone fit"),
             a_light);
  add_common(app.add_subcommand("perturbed",
                                "scan with perturbations and bound checks"),
             a_pert);
  add_common(app.add_subcommand("dual", "dual-pair scenario"), a_dual);
  add_common(app.add_subcommand("avalanche", "ergodic-grain scenario"), a_aval);
  add_common(app.add_subcommand("splitting", "interaction-factor splitting scan"),
             a_split);
  add_common(app.add_subcommand("proofcheck", "run the proof-step verifiers"),
             a_proof);

  auto* sweep = app.add_subcommand("sweep", "run a scenario along a parameter axis");
  add_common(sweep, a_sweep);
  sweep->add_option("--axis", sweep_axis, "config field path, e.g. disorder.width")
      ->required();
  sweep->add_option("--values", sweep_values, "axis values")->required();

  auto* exp = app.add_subcommand("export", "re-serialize a result directory");
  exp->add_option("--in", export_in, "directory holding records.csv")->required();
  exp->add_option("--out", export_out, "destination directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("lightcone")) return run_kind(a_light, "lightcone");
    if (app.got_subcommand("perturbed")) return run_kind(a_pert, "perturbed");
    if (app.got_subcommand("dual")) return run_kind(a_dual, "dual");
    if (app.got_subcommand("avalanche")) return run_kind(a_aval, "avalanche");
    if (app.got_subcommand("splitting")) return run_kind(a_split, "splitting");
    if (app.got_subcommand("proofcheck")) return run_kind(a_proof, "proofcheck");
    if (app.got_subcommand("sweep")) {
      lrlab::ScenarioConfig cfg = load_with_overrides(a_sweep, "");
      auto sets = lrlab::run_sweep(cfg, sweep_axis, sweep_values, a_sweep.workers);
      for (const auto& rs : sets) {
        lrlab::export_results(rs, rs.config.output.dir);
        report(rs);
      }
      return 0;
    }
    if (app.got_subcommand("export")) {
      auto records = lrlab::import_records(export_in + "/records.csv");
      std::filesystem::create_directories(export_out);
      std::ifstream src(export_in + "/records.csv", std::ios::binary);
      std::ofstream dst(export_out + "/records.csv", std::ios::binary);
      dst << src.rdbuf();
      std::printf("validated %zu records -> %s\n", records.size(), export_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
