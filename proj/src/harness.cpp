#include "lrlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "lrlab/rng.hpp"
#include "lrlab/version.hpp"

namespace lrlab {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// JSON helpers: strict parsing with field-path diagnostics
// ---------------------------------------------------------------------------

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw validation_error(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw validation_error(path + "." + it.key(), "unknown field");
  }
}

template <typename T>
T get_field(const json& j, const std::string& path, const char* key, T def) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw validation_error(path + "." + key, e.what());
  }
}

template <typename T>
T require_field(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw validation_error(path + "." + key, "missing field");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw validation_error(path + "." + key, e.what());
  }
}

PerturbationConfig parse_perturbation(const json& j, const std::string& path);

std::vector<PerturbationConfig> parse_perturbations(const json& j,
                                                    const std::string& path) {
  std::vector<PerturbationConfig> out;
  if (!j.is_array()) throw validation_error(path, "expected an array");
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_perturbation(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

PerturbationConfig parse_perturbation(const json& j, const std::string& path) {
  check_keys(j, path,
             {"kind", "support", "op", "coupling", "sigma", "seed_offset", "base",
              "tau", "ramp", "period", "waveform"});
  PerturbationConfig p;
  p.kind = get_field<std::string>(j, path, "kind", "field");
  if (j.contains("support")) {
    auto s = require_field<std::vector<int>>(j, path, "support");
    if (s.size() != 2) throw validation_error(path + ".support", "expected [lo, hi]");
    p.support_lo = s[0];
    p.support_hi = s[1];
  }
  p.op = get_field<std::string>(j, path, "op", "sz");
  p.coupling = get_field<double>(j, path, "coupling", 1.0);
  p.sigma = get_field<double>(j, path, "sigma", -1.0);
  p.seed_offset = get_field<std::uint64_t>(j, path, "seed_offset", 0);
  p.tau = get_field<double>(j, path, "tau", 1.0);
  p.ramp = get_field<std::string>(j, path, "ramp", "linear");
  p.period = get_field<double>(j, path, "period", 1.0);
  p.waveform = get_field<std::string>(j, path, "waveform", "cosine");
  if (j.contains("base")) p.base = parse_perturbations(j.at("base"), path + ".base");
  if (p.kind != "field" && p.kind != "grain" && p.kind != "avalanche" &&
      p.kind != "adiabatic" && p.kind != "periodic")
    throw validation_error(path + ".kind", "unknown perturbation kind " + p.kind);
  if ((p.kind == "adiabatic" || p.kind == "periodic") && p.base.size() != 1)
    throw validation_error(path + ".base", p.kind + " needs exactly one base term");
  return p;
}

json perturbation_to_json(const PerturbationConfig& p) {
  json j;
  j["kind"] = p.kind;
  j["support"] = {p.support_lo, p.support_hi};
  j["op"] = p.op;
  j["coupling"] = p.coupling;
  j["sigma"] = p.sigma;
  j["seed_offset"] = p.seed_offset;
  if (!p.base.empty()) {
    json b = json::array();
    for (const auto& q : p.base) b.push_back(perturbation_to_json(q));
    j["base"] = b;
  }
  if (p.kind == "adiabatic") {
    j["tau"] = p.tau;
    j["ramp"] = p.ramp;
  }
  if (p.kind == "periodic") {
    j["period"] = p.period;
    j["waveform"] = p.waveform;
  }
  return j;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json semantic_json(const ScenarioConfig& c);

// ---------------------------------------------------------------------------
// Probe construction
// ---------------------------------------------------------------------------

LocalOperator build_probe(const std::string& name, int site) {
  if (name.size() == 2 && name[0] != 's' && name[0] != 'i') {
    // two-site product like "xx", "zz", "xy"
    Matrix m = kron(named_pauli(std::string(1, name[0])),
                    named_pauli(std::string(1, name[1])));
    return {{site, site + 1}, std::move(m)};
  }
  return {{site, site}, named_pauli(name)};
}

// ---------------------------------------------------------------------------
// Perturbation realization
// ---------------------------------------------------------------------------

PerturbationTerm realize_perturbation(const PerturbationConfig& p,
                                      const ScenarioConfig& cfg,
                                      const Hamiltonian& base,
                                      std::uint64_t realization) {
  SiteInterval support{p.support_lo, p.support_hi};
  if (p.kind == "field") {
    LocalOperator probe = build_probe(p.op, 0);
    if (probe.support.size() != support.size())
      throw validation_error("perturbations.op",
                             "operator size does not match support");
    return PerturbationTerm::constant(support, p.coupling * probe.matrix);
  }
  if (p.kind == "grain") {
    LocalOperator grain =
        build_goe_grain(support.size(), cfg.model.local_dim,
                        cfg.disorder.base_seed + p.seed_offset, realization, p.sigma);
    return PerturbationTerm::constant(support, p.coupling * grain.matrix);
  }
  if (p.kind == "avalanche") {
    LocalOperator grain =
        build_goe_grain(support.size(), cfg.model.local_dim,
                        cfg.disorder.base_seed + p.seed_offset, realization, p.sigma);
    grain = grain.anchored_at(support.lo);
    if (p.coupling != 1.0) grain.matrix *= p.coupling;
    return build_avalanche(base, support, grain);
  }
  if (p.kind == "adiabatic") {
    PerturbationTerm inner = realize_perturbation(p.base[0], cfg, base, realization);
    Shape1D ramp = p.ramp == "linear" ? Shape1D::linear_ramp()
                   : p.ramp == "cosine" ? Shape1D::cosine_wave()
                                        : throw validation_error(
                                              "perturbations.ramp",
                                              "unknown ramp " + p.ramp);
    return make_adiabatic(inner, p.tau, ramp);
  }
  if (p.kind == "periodic") {
    PerturbationTerm inner = realize_perturbation(p.base[0], cfg, base, realization);
    Shape1D wave = p.waveform == "cosine" ? Shape1D::cosine_wave()
                   : p.waveform == "linear" ? Shape1D::linear_ramp()
                                            : throw validation_error(
                                                  "perturbations.waveform",
                                                  "unknown waveform " + p.waveform);
    return make_periodic(inner, p.period, wave);
  }
  throw validation_error("perturbations.kind", "unknown kind " + p.kind);
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

struct RealizationOutput {
  std::vector<ScanRecord> records;
  double identity_residual = -1.0;  // dual kind
  double h_sup = 0.0;               // largest perturbation norm seen
};

void parallel_realizations(int n, int workers,
                           const std::function<RealizationOutput(int)>& work,
                           std::vector<RealizationOutput>& out) {
  out.resize(n);
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) out[i] = work(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto body = [&] {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= n) break;
      try {
        out[i] = work(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Scenario pieces
// ---------------------------------------------------------------------------

SiteInterval disorder_region(const ScenarioConfig& cfg) {
  int hi = cfg.disorder.region_hi < 0 ? cfg.model.num_sites - 1 : cfg.disorder.region_hi;
  return {cfg.disorder.region_lo, hi};
}

Hamiltonian build_clean_model(const ScenarioConfig& cfg) {
  Lattice lat(cfg.model.num_sites, cfg.model.local_dim);
  if (cfg.model.kind == "xxz")
    return build_xxz(lat, cfg.model.delta, cfg.model.coupling);
  if (cfg.model.kind == "custom") {
    if (cfg.model.bond.size() != 2)
      throw validation_error("model.bond", "expected a two-letter bond name");
    Matrix bond = cfg.model.coupling *
                  kron(named_pauli(std::string(1, cfg.model.bond[0])),
                       named_pauli(std::string(1, cfg.model.bond[1])));
    std::vector<LocalOperator> terms;
    for (int j = 0; j + 1 < lat.num_sites; ++j) terms.push_back({{j, j + 1}, bond});
    return Hamiltonian::from_terms(lat, std::move(terms));
  }
  throw validation_error("model.kind", "unknown model " + cfg.model.kind);
}

std::vector<LocalOperator> probe_b_list(const ScenarioConfig& cfg,
                                        const SiteInterval& a_support) {
  std::vector<LocalOperator> out;
  for (int d : cfg.probes.distances) {
    int lo = a_support.hi + d;
    LocalOperator b = build_probe(cfg.probes.b_op, lo);
    if (!b.support.within(Lattice(cfg.model.num_sites, cfg.model.local_dim)))
      throw validation_error("probes.distances",
                             "distance " + std::to_string(d) + " puts B outside the chain");
    out.push_back(std::move(b));
  }
  return out;
}

Vector neel_state(const Lattice& lat) {
  Vector psi = Vector::Zero(lat.dim());
  long idx = 0;
  for (int j = 0; j < lat.num_sites; ++j)
    if (j % 2 == 1) idx += lat.pow_dim(lat.num_sites - 1 - j);
  psi(idx) = 1.0;
  return psi;
}

/// The largest perturbation-free run of sites strictly between A and B must
/// reach dist/n when the full bound is checked.
void validate_free_region(const SiteInterval& a, const SiteInterval& b,
                          const std::vector<PerturbationConfig>& perts, double n_frac) {
  int lo = a.hi + 1, hi = b.lo - 1;
  if (lo > hi) throw geometry_error("probes overlap, no free region possible");
  int best = 0, run = 0;
  for (int s = lo; s <= hi; ++s) {
    bool covered = false;
    for (const auto& p : perts)
      if (s >= p.support_lo && s <= p.support_hi) covered = true;
    run = covered ? 0 : run + 1;
    best = std::max(best, run);
  }
  double need = static_cast<double>(distance(a, b)) / n_frac;
  if (static_cast<double>(best) + 1e-9 < need)
    throw geometry_error("free region of " + std::to_string(best) +
                         " sites is smaller than dist/n = " + format_double(need));
}

BoundParams params_from_config(const ParamsConfig& p) {
  BoundParams out;
  out.K = p.K;
  out.xi = p.xi;
  out.beta = p.beta;
  out.v = p.v;
  if (p.shape == "power")
    out.shape = FShape::power;
  else if (p.shape == "exponential")
    out.shape = FShape::exponential;
  else if (p.shape == "constant")
    out.shape = FShape::constant;
  else
    throw validation_error("analysis.params.shape", "unknown shape " + p.shape);
  out.validate();
  return out;
}

ResultSet run_scenario_internal(const ScenarioConfig& cfg, int workers);

/// Unperturbed twin of the scenario, fitted to supply (K, xi, beta).
FitResult fit_unperturbed_twin(const ScenarioConfig& cfg, int workers,
                               bool disorder_everywhere) {
  ScenarioConfig twin = cfg;
  twin.kind = "lightcone";
  twin.scenario_id = cfg.scenario_id + "_unperturbed";
  twin.perturbations.clear();
  twin.analysis = AnalysisConfig{};
  twin.analysis.fit = true;
  twin.analysis.noise_floor = cfg.analysis.noise_floor;
  twin.probes.restriction_radii.clear();
  twin.probes.entropy_cut = -1;
  twin.split = SplitConfig{};
  if (disorder_everywhere) {
    twin.disorder.region_lo = 0;
    twin.disorder.region_hi = -1;
  }
  ResultSet rs = run_scenario_internal(twin, workers);
  for (const auto& f : rs.fits)
    if (f.scenario_id == twin.scenario_id) return f.fit;
  throw fit_error("unperturbed twin produced no fit");
}

// ---------------------------------------------------------------------------
// run_scenario
// ---------------------------------------------------------------------------

ResultSet run_scenario_internal(const ScenarioConfig& cfg, int workers) {
  auto t_start = std::chrono::steady_clock::now();
  ResultSet rs;
  rs.config = cfg;
  rs.hash = config_hash(cfg);
  rs.tool_version = version;

  const Lattice lat(cfg.model.num_sites, cfg.model.local_dim);
  const Hamiltonian clean = build_clean_model(cfg);
  const DisorderSpec disorder{disorder_region(cfg), cfg.disorder.width,
                              cfg.disorder.base_seed};
  const int n_real = cfg.disorder.n_realizations;
  if (n_real < 1)
    throw validation_error("disorder.n_realizations", "must be >= 1");

  TimeGridControl ctl;
  ctl.tol = cfg.schedule.tol;
  ctl.initial_step = cfg.schedule.initial_step;

  ProfileOptions base_opts;
  base_opts.scenario_id = cfg.scenario_id;
  base_opts.seed = cfg.disorder.base_seed;

  if (cfg.kind == "proofcheck") {
    // handled separately below the realization machinery
  } else if (cfg.probes.distances.empty() && cfg.kind != "splitting") {
    throw validation_error("probes.distances", "at least one distance is required");
  }
  if (cfg.schedule.times.empty())
    throw validation_error("schedule.times", "at least one time is required");

  // ---- proofcheck scenario: small, single-threaded battery -----------------
  if (cfg.kind == "proofcheck") {
    if (lat.num_sites > 8)
      throw validation_error("model.num_sites", "proofcheck runs at N <= 8");
    Hamiltonian h = clean.with_terms([&] {
      std::vector<LocalOperator> f;
      auto terms = build_disorder_field(lat, disorder, 0);
      for (auto& t : terms) f.push_back({t.support, t.static_matrix});
      return f;
    }());
    double t = cfg.schedule.times.back();
    double tol = cfg.schedule.tol;

    // driven single-site term
    PerturbationTerm driven;
    driven.support = {0, 0};
    driven.time_independent = false;
    driven.generator = [](double s) { return (std::sin(s) * pauli_x()).eval(); };
    driven.envelope = [](double s) { return std::abs(std::sin(s)); };
    rs.proof_checks.push_back(verify_interaction_picture(h, driven, t, tol));

    const long dim = lat.dim();
    Matrix gl = embed({{0, 0}, pauli_x()}, lat).matrix;
    Matrix gr = embed({{lat.num_sites - 1, lat.num_sites - 1}, pauli_y()}, lat).matrix;
    auto g1 = [gl](double s) { return (std::sin(s) * gl).eval(); };
    auto g2 = [gr](double s) { return (std::cos(s) * gr).eval(); };
    rs.proof_checks.push_back(verify_commuting_factorization(lat, g1, g2, t, tol));

    Matrix zero = Matrix::Zero(dim, dim);
    auto gx = [gl](double) { return gl; };
    auto ge = [zero](double) { return zero; };
    rs.proof_checks.push_back(
        verify_duhamel(lat, gx, ge, 3.14159265358979323846, tol));

    BoundParams fitted = cfg.analysis.params
                             ? params_from_config(*cfg.analysis.params)
                             : [&] {
                                 FitResult f = fit_unperturbed_twin(cfg, workers, false);
                                 BoundParams p;
                                 p.K = f.K;
                                 p.xi = f.xi;
                                 p.beta = f.beta;
                                 p.shape = FShape::power;
                                 return p;
                               }();
    int cut = cfg.split.cut >= 0 ? cfg.split.cut : lat.num_sites / 2;
    int w = cfg.split.half_widths.empty() ? 1 : cfg.split.half_widths.front();
    if (lat.num_sites <= 2 * w + 2)
      throw validation_error("model.num_sites",
                             "proofcheck splitting with half width " +
                                 std::to_string(w) + " needs more than " +
                                 std::to_string(2 * w + 2) + " sites");
    std::vector<PerturbationTerm> side_terms;
    side_terms.push_back(PerturbationTerm::constant({0, 0}, pauli_x()));
    side_terms.push_back(
        PerturbationTerm::constant({lat.num_sites - 1, lat.num_sites - 1}, pauli_x()));
    rs.proof_checks.push_back(
        verify_splitting_bound(h, side_terms, cut, w, t, fitted, tol));

    LocalOperator a = build_probe(cfg.probes.a_op, cfg.probes.a_site);
    rs.proof_checks.push_back(verify_restriction_equivalence(h, a, 1, t, fitted));

    rs.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return rs;
  }

  // ---- probes ---------------------------------------------------------------
  LocalOperator a_probe = build_probe(cfg.probes.a_op, cfg.probes.a_site);
  const bool single_kind =
      cfg.kind == "avalanche" ||
      std::count(cfg.analysis.bounds.begin(), cfg.analysis.bounds.end(), "single") > 0 ||
      std::count(cfg.analysis.bounds.begin(), cfg.analysis.bounds.end(),
                 "single_slow") > 0;
  if (single_kind && cfg.perturbations.size() != 1)
    throw validation_error("perturbations",
                           "single-perturbation bounds need exactly one perturbation");

  // A for the single kinds is the perturbation itself; its support comes from
  // the config even though the matrix is realization-dependent.
  SiteInterval a_support = single_kind
                               ? SiteInterval{cfg.perturbations[0].support_lo,
                                              cfg.perturbations[0].support_hi}
                               : a_probe.support;
  std::vector<LocalOperator> b_list = probe_b_list(cfg, a_support);

  // ---- per-realization work ---------------------------------------------------
  auto realize = [&](int i) -> RealizationOutput {
    RealizationOutput out;
    ProfileOptions opts = base_opts;
    opts.realization = static_cast<std::uint64_t>(i);

    auto field_terms = build_disorder_field(lat, disorder, i);
    std::vector<LocalOperator> field_ops;
    for (const auto& t : field_terms) field_ops.push_back({t.support, t.static_matrix});

    if (cfg.kind == "lightcone") {
      Hamiltonian h = clean.with_terms(field_ops);
      Propagator prop = Propagator::make(h);
      out.records = commutator_profile(prop, a_probe, b_list, cfg.schedule.times, opts);
      for (int radius : cfg.probes.restriction_radii)
        for (double t : cfg.schedule.times)
          out.records.push_back(restriction_error(prop, a_probe, radius, t, opts));
      if (cfg.probes.entropy_cut >= 0) {
        Vector psi0 = neel_state(lat);
        for (double t : cfg.schedule.times) {
          ScanRecord r;
          r.scenario_id = cfg.scenario_id;
          r.kind = RecordKind::entropy;
          r.realization = i;
          r.d = cfg.probes.entropy_cut;
          r.t = t;
          r.value = entanglement_entropy(prop.evolve_state(psi0, t),
                                         cfg.probes.entropy_cut, lat);
          r.a_support = {0, cfg.probes.entropy_cut};
          r.b_support = {cfg.probes.entropy_cut + 1, lat.num_sites - 1};
          out.records.push_back(std::move(r));
        }
      }
      return out;
    }

    if (cfg.kind == "perturbed" || cfg.kind == "avalanche") {
      Hamiltonian h = clean.with_terms(field_ops);
      std::vector<PerturbationTerm> perts;
      for (const auto& pc : cfg.perturbations)
        perts.push_back(realize_perturbation(pc, cfg, h, i));
      for (const auto& p : perts) {
        double sup = p.time_independent ? p.static_norm : 0.0;
        if (!p.time_independent)
          for (double t : cfg.schedule.times) sup = std::max(sup, p.envelope_at(t));
        out.h_sup = std::max(out.h_sup, sup);
      }
      LocalOperator a = single_kind
                            ? LocalOperator{perts[0].support, perts[0].static_matrix}
                            : a_probe;
      if (single_kind && !perts[0].time_independent)
        throw validation_error("perturbations",
                               "single-perturbation probe needs a static term");
      out.records =
          commutator_profile(h, perts, a, b_list, cfg.schedule.times, opts, ctl);
      return out;
    }

    if (cfg.kind == "dual") {
      DualPair dual = build_dual_pair(clean, disorder, i);
      Hamiltonian total = clean.with_terms(field_ops);  // clean + disorder on R
      // identity residual || (H + sum h) - (H' + sum h') ||
      Matrix rhs = dual.h_prime.global;
      for (const auto& u : dual.undo_terms)
        embed_add_into({u.support, u.static_matrix}, lat, rhs);
      out.identity_residual = matrix_spectral_norm(total.global - rhs);
      for (const auto& u : dual.undo_terms)
        out.h_sup = std::max(out.h_sup, u.static_norm);
      Propagator prop = Propagator::make(total);
      out.records = commutator_profile(prop, a_probe, b_list, cfg.schedule.times, opts);
      return out;
    }

    if (cfg.kind == "splitting") {
      Hamiltonian h = clean.with_terms(field_ops);
      std::vector<PerturbationTerm> perts;
      for (const auto& pc : cfg.perturbations)
        perts.push_back(realize_perturbation(pc, cfg, h, i));
      for (const auto& p : perts)
        out.h_sup = std::max(out.h_sup, p.static_norm);
      Propagator prop = Propagator::make(h);
      bool all_static = true;
      for (const auto& p : perts)
        if (!p.time_independent) all_static = false;
      SiteInterval left_hull{0, 0}, right_hull{lat.num_sites - 1, lat.num_sites - 1};
      for (const auto& p : perts) {
        if (p.support.hi < cfg.split.cut) left_hull = p.support;
        if (p.support.lo > cfg.split.cut) right_hull = p.support;
      }
      // the factors depend on the cut only; each half width is a separate
      // (validated) claim about the same quantity
      int w_max = *std::max_element(cfg.split.half_widths.begin(),
                                    cfg.split.half_widths.end());
      for (double t : cfg.schedule.times) {
        GlobalOperator factor = all_static
                                    ? interaction_factor_exact(prop, perts, t)
                                    : interaction_factor(prop, perts, t, ctl);
        SplitFactors split = split_factors(prop, perts, cfg.split.cut, w_max, t, ctl);
        Matrix prod = split.hat.matrix * split.bar.matrix;
        double value = matrix_spectral_norm(factor.matrix - prod);
        for (int w : cfg.split.half_widths) {
          ScanRecord r;
          r.scenario_id = cfg.scenario_id;
          r.kind = RecordKind::splitting_error;
          r.realization = i;
          r.d = w;
          r.t = t;
          r.value = value;
          r.a_support = left_hull;
          r.b_support = right_hull;
          out.records.push_back(std::move(r));
        }
      }
      return out;
    }

    throw validation_error("kind", "unknown scenario kind " + cfg.kind);
  };

  std::vector<RealizationOutput> outputs;
  parallel_realizations(n_real, workers, realize, outputs);

  for (const auto& o : outputs)
    rs.records.insert(rs.records.end(), o.records.begin(), o.records.end());

  double h_sup = 0.0;
  for (const auto& o : outputs) h_sup = std::max(h_sup, o.h_sup);

  if (cfg.kind == "dual") {
    double worst = 0.0;
    for (const auto& o : outputs) worst = std::max(worst, o.identity_residual);
    ProofCheckReport rep;
    rep.name = "dual_pair_identity";
    rep.lhs = worst;
    rep.tolerance = 1e-13;
    rep.pass = worst <= rep.tolerance;
    rep.details = "max residual over " + std::to_string(n_real) + " realizations";
    rs.proof_checks.push_back(rep);
  }

  // ---- analysis ---------------------------------------------------------------
  auto cells = disorder_average(rs.records);

  if (cfg.analysis.fit && cfg.kind != "splitting") {
    NamedFit nf;
    nf.scenario_id = cfg.scenario_id;
    nf.fit = fit_lightcone_cells(cells, cfg.analysis.noise_floor);
    rs.fits.push_back(nf);
  }

  if (!cfg.analysis.bounds.empty()) {
    BoundParams params;
    if (cfg.analysis.params) {
      params = params_from_config(*cfg.analysis.params);
    } else if (cfg.analysis.fit_first) {
      FitResult f = fit_unperturbed_twin(cfg, workers, cfg.kind == "dual");
      NamedFit nf;
      nf.scenario_id = cfg.scenario_id + "_unperturbed";
      nf.fit = f;
      rs.fits.push_back(nf);
      params.K = f.K;
      params.xi = f.xi;
      params.beta = f.beta;
      params.shape = FShape::power;
    } else if (!rs.fits.empty()) {
      const FitResult& f = rs.fits.front().fit;
      params.K = f.K;
      params.xi = f.xi;
      params.beta = f.beta;
      params.shape = FShape::power;
    } else {
      throw validation_error("analysis",
                             "bound checks need params, fit or fit_first");
    }
    params.n = cfg.analysis.free_region_n;
    params.validate();
    BoundParams safe = params.scaled_K(cfg.analysis.safety_factor);

    double norm_a = single_kind ? h_sup : spectral_norm(a_probe);
    double norm_b = spectral_norm(build_probe(cfg.probes.b_op, 0));
    bool any_timedep = false;
    for (const auto& pc : cfg.perturbations)
      if (pc.kind == "adiabatic" || pc.kind == "periodic") any_timedep = true;
    EnvelopeFn env;
    if (cfg.kind == "dual") {
      env = EnvelopeFn::constant(cfg.disorder.width);
    } else if (!any_timedep) {
      env = EnvelopeFn::constant(h_sup);
    } else {
      // shape from realization 0, rescaled to the ensemble sup so the
      // envelope stays an upper bound for every realization
      auto terms0 = std::make_shared<std::vector<PerturbationTerm>>();
      for (const auto& pc : cfg.perturbations)
        terms0->push_back(realize_perturbation(pc, cfg, clean, 0));
      double sup0 = 0.0;
      for (double t : cfg.schedule.times)
        for (const auto& p : *terms0) sup0 = std::max(sup0, p.envelope_at(t));
      double scale = sup0 > 0 ? h_sup / sup0 : 1.0;
      double hint = 0.0;
      for (const auto& pc : cfg.perturbations)
        if (pc.kind == "periodic")
          hint = hint == 0.0 ? pc.period / 4.0 : std::min(hint, pc.period / 4.0);
      env = EnvelopeFn::of(
          [terms0, scale](double s) {
            double m = 0.0;
            for (const auto& p : *terms0) m = std::max(m, p.envelope_at(s));
            return scale * m;
          },
          hint);
    }

    for (const auto& bname : cfg.analysis.bounds) {
      BoundKind kind = bound_kind_from_string(bname);
      BoundGeometry geom;
      geom.norm_a = norm_a;
      geom.norm_b = norm_b;
      geom.half_width = cfg.split.half_widths.empty() ? 1.0
                                                      : cfg.split.half_widths.front();

      std::function<BoundGeometry(const BoundGeometry&, int)> per_cell;
      if (kind == BoundKind::full) {
        for (int d : cfg.probes.distances) {
          SiteInterval b{a_support.hi + d, a_support.hi + d};
          validate_free_region(a_support, b, cfg.perturbations,
                               cfg.analysis.free_region_n);
        }
      }
      if (kind == BoundKind::far) {
        auto perts = cfg.perturbations;
        SiteInterval a_sup = a_support;
        per_cell = [perts, a_sup](const BoundGeometry& g, int d) {
          BoundGeometry out = g;
          out.dist = d;
          SiteInterval b{a_sup.hi + d, a_sup.hi + d};
          double dmin = std::numeric_limits<double>::infinity();
          for (const auto& p : perts)
            dmin = std::min(dmin,
                            static_cast<double>(distance({p.support_lo, p.support_hi}, b)));
          out.d_min = dmin;
          return out;
        };
      }
      rs.margins.push_back(check_bound(cells, safe, kind, geom, env, per_cell));
    }
  }

  rs.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parse / serialize / hash
// ---------------------------------------------------------------------------

ScenarioConfig parse_scenario_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw validation_error("config", e.what());
  }
  check_keys(j, "config",
             {"scenario_id", "kind", "model", "disorder", "perturbations", "probes",
              "schedule", "analysis", "split", "output"});
  ScenarioConfig c;
  c.scenario_id = get_field<std::string>(j, "config", "scenario_id", "scenario");
  c.kind = get_field<std::string>(j, "config", "kind", "lightcone");
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model",
               {"kind", "num_sites", "local_dim", "delta", "coupling", "bond"});
    c.model.kind = get_field<std::string>(m, "model", "kind", "xxz");
    c.model.num_sites = require_field<int>(m, "model", "num_sites");
    c.model.local_dim = get_field<int>(m, "model", "local_dim", 2);
    c.model.delta = get_field<double>(m, "model", "delta", 0.0);
    c.model.coupling = get_field<double>(m, "model", "coupling", 1.0);
    c.model.bond = get_field<std::string>(m, "model", "bond", "zz");
  }
  if (j.contains("disorder")) {
    const json& d = j["disorder"];
    check_keys(d, "disorder", {"region", "width", "base_seed", "n_realizations"});
    if (d.contains("region")) {
      auto r = require_field<std::vector<int>>(d, "disorder", "region");
      if (r.size() != 2) throw validation_error("disorder.region", "expected [lo, hi]");
      c.disorder.region_lo = r[0];
      c.disorder.region_hi = r[1];
    }
    c.disorder.width = get_field<double>(d, "disorder", "width", 0.0);
    c.disorder.base_seed = get_field<std::uint64_t>(d, "disorder", "base_seed", 1);
    c.disorder.n_realizations = get_field<int>(d, "disorder", "n_realizations", 1);
  }
  if (j.contains("perturbations"))
    c.perturbations = parse_perturbations(j["perturbations"], "perturbations");
  if (j.contains("probes")) {
    const json& p = j["probes"];
    check_keys(p, "probes",
               {"a_op", "a_site", "b_op", "distances", "restriction_radii",
                "entropy_cut"});
    c.probes.a_op = get_field<std::string>(p, "probes", "a_op", "sx");
    c.probes.a_site = get_field<int>(p, "probes", "a_site", 0);
    c.probes.b_op = get_field<std::string>(p, "probes", "b_op", "sx");
    c.probes.distances = get_field<std::vector<int>>(p, "probes", "distances", {});
    c.probes.restriction_radii =
        get_field<std::vector<int>>(p, "probes", "restriction_radii", {});
    c.probes.entropy_cut = get_field<int>(p, "probes", "entropy_cut", -1);
  }
  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, "schedule", {"times", "tol", "initial_step"});
    c.schedule.times = get_field<std::vector<double>>(s, "schedule", "times", {});
    c.schedule.tol = get_field<double>(s, "schedule", "tol", 1e-8);
    c.schedule.initial_step = get_field<double>(s, "schedule", "initial_step", 0.25);
  }
  if (j.contains("analysis")) {
    const json& a = j["analysis"];
    check_keys(a, "analysis",
               {"bounds", "fit", "fit_first", "params", "safety_factor", "noise_floor",
                "free_region_n"});
    c.analysis.bounds = get_field<std::vector<std::string>>(a, "analysis", "bounds", {});
    c.analysis.fit = get_field<bool>(a, "analysis", "fit", false);
    c.analysis.fit_first = get_field<bool>(a, "analysis", "fit_first", false);
    c.analysis.safety_factor = get_field<double>(a, "analysis", "safety_factor", 2.0);
    c.analysis.noise_floor = get_field<double>(a, "analysis", "noise_floor", 1e-12);
    c.analysis.free_region_n = get_field<double>(a, "analysis", "free_region_n", 1.0);
    if (a.contains("params") && !a["params"].is_null()) {
      const json& q = a["params"];
      check_keys(q, "analysis.params", {"K", "xi", "beta", "shape", "v"});
      ParamsConfig pc;
      pc.K = require_field<double>(q, "analysis.params", "K");
      pc.xi = require_field<double>(q, "analysis.params", "xi");
      pc.beta = get_field<double>(q, "analysis.params", "beta", 1.0);
      pc.shape = get_field<std::string>(q, "analysis.params", "shape", "power");
      pc.v = get_field<double>(q, "analysis.params", "v", 1.0);
      c.analysis.params = pc;
    }
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    check_keys(s, "split", {"cut", "half_widths"});
    c.split.cut = get_field<int>(s, "split", "cut", -1);
    c.split.half_widths = get_field<std::vector<int>>(s, "split", "half_widths", {});
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, "output", {"dir", "formats"});
    c.output.dir = get_field<std::string>(o, "output", "dir", "out");
    c.output.formats =
        get_field<std::vector<std::string>>(o, "output", "formats", {"csv", "json"});
  }

  // semantic validation
  if (c.model.num_sites < 1) throw validation_error("model.num_sites", "must be >= 1");
  Lattice lat(c.model.num_sites, c.model.local_dim);  // budget check
  SiteInterval region{c.disorder.region_lo,
                      c.disorder.region_hi < 0 ? c.model.num_sites - 1
                                               : c.disorder.region_hi};
  if (!region.within(lat)) throw validation_error("disorder.region", "outside lattice");
  if (c.disorder.width < 0) throw validation_error("disorder.width", "must be >= 0");
  if (c.disorder.n_realizations < 1)
    throw validation_error("disorder.n_realizations", "must be >= 1");
  for (double t : c.schedule.times)
    if (t < 0) throw validation_error("schedule.times", "times must be >= 0");
  if (c.kind == "splitting") {
    if (c.split.cut < 0 || c.split.cut > c.model.num_sites - 2)
      throw validation_error("split.cut", "cut must leave sites on both sides");
    if (c.split.half_widths.empty())
      throw validation_error("split.half_widths", "at least one half width");
  }
  return c;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_config(ss.str());
}

namespace {

json semantic_json(const ScenarioConfig& c) {
  json j;
  j["scenario_id"] = c.scenario_id;
  j["kind"] = c.kind;
  j["model"] = {{"kind", c.model.kind},
                {"num_sites", c.model.num_sites},
                {"local_dim", c.model.local_dim},
                {"delta", c.model.delta},
                {"coupling", c.model.coupling},
                {"bond", c.model.bond}};
  j["disorder"] = {{"region", {c.disorder.region_lo, c.disorder.region_hi}},
                   {"width", c.disorder.width},
                   {"base_seed", c.disorder.base_seed},
                   {"n_realizations", c.disorder.n_realizations}};
  json perts = json::array();
  for (const auto& p : c.perturbations) perts.push_back(perturbation_to_json(p));
  j["perturbations"] = perts;
  j["probes"] = {{"a_op", c.probes.a_op},
                 {"a_site", c.probes.a_site},
                 {"b_op", c.probes.b_op},
                 {"distances", c.probes.distances},
                 {"restriction_radii", c.probes.restriction_radii},
                 {"entropy_cut", c.probes.entropy_cut}};
  j["schedule"] = {{"times", c.schedule.times},
                   {"tol", c.schedule.tol},
                   {"initial_step", c.schedule.initial_step}};
  json an = {{"bounds", c.analysis.bounds},
             {"fit", c.analysis.fit},
             {"fit_first", c.analysis.fit_first},
             {"safety_factor", c.analysis.safety_factor},
             {"noise_floor", c.analysis.noise_floor},
             {"free_region_n", c.analysis.free_region_n}};
  if (c.analysis.params)
    an["params"] = {{"K", c.analysis.params->K},
                    {"xi", c.analysis.params->xi},
                    {"beta", c.analysis.params->beta},
                    {"shape", c.analysis.params->shape},
                    {"v", c.analysis.params->v}};
  j["analysis"] = an;
  j["split"] = {{"cut", c.split.cut}, {"half_widths", c.split.half_widths}};
  return j;
}

}  // namespace

std::string scenario_config_to_json(const ScenarioConfig& c) {
  json j = semantic_json(c);
  j["output"] = {{"dir", c.output.dir}, {"formats", c.output.formats}};
  return j.dump(2);
}

std::string config_hash(const ScenarioConfig& c) {
  std::uint64_t h = fnv1a(semantic_json(c).dump());
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Run / sweep / export
// ---------------------------------------------------------------------------

ResultSet run_scenario(const ScenarioConfig& cfg, int workers) {
  return run_scenario_internal(cfg, workers);
}

std::vector<ResultSet> run_sweep(const ScenarioConfig& cfg, const std::string& axis,
                                 const std::vector<double>& values, int workers) {
  // resolve the axis against the JSON form so any scalar field is sweepable
  json base = json::parse(scenario_config_to_json(cfg));
  std::vector<std::string> parts;
  {
    std::stringstream ss(axis);
    std::string item;
    while (std::getline(ss, item, '.')) parts.push_back(item);
  }
  if (parts.empty()) throw parameter_error("empty sweep axis");
  {
    json* node = &base;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i]))
        throw parameter_error("unknown sweep axis " + axis);
      node = &(*node)[parts[i]];
    }
    if (!node->contains(parts.back()) || !(*node)[parts.back()].is_number())
      throw parameter_error("sweep axis " + axis + " is not a scalar config field");
  }
  std::vector<ResultSet> out;
  for (size_t k = 0; k < values.size(); ++k) {
    json doc = base;
    json* node = &doc;
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = values[k];
    doc["output"]["dir"] = cfg.output.dir + "/" + axis + "=" + format_double(values[k]);
    ScenarioConfig item = parse_scenario_config(doc.dump());
    out.push_back(run_scenario(item, workers));
  }
  return out;
}

std::string records_csv(const ResultSet& rs) {
  std::string out =
      "scenario_id,kind,realization,d,t,value,stderr_placeholder,A_support_lo,"
      "A_support_hi,B_support_lo,B_support_hi,config_hash\n";
  for (const auto& r : rs.records) {
    out += r.scenario_id;
    out += ',';
    out += to_string(r.kind);
    out += ',';
    out += std::to_string(r.realization);
    out += ',';
    out += std::to_string(r.d);
    out += ',';
    out += format_double(r.t);
    out += ',';
    out += format_double(r.value);
    out += ",0,";
    out += std::to_string(r.a_support.lo);
    out += ',';
    out += std::to_string(r.a_support.hi);
    out += ',';
    out += std::to_string(r.b_support.lo);
    out += ',';
    out += std::to_string(r.b_support.hi);
    out += ',';
    out += rs.hash;
    out += '\n';
  }
  return out;
}

std::string fits_csv(const ResultSet& rs) {
  std::string out = "scenario_id,K,xi,beta,rms_log_residual,n_points,config_hash\n";
  for (const auto& f : rs.fits) {
    out += f.scenario_id;
    out += ',';
    out += format_double(f.fit.K);
    out += ',';
    out += format_double(f.fit.xi);
    out += ',';
    out += format_double(f.fit.beta);
    out += ',';
    out += format_double(f.fit.rms_log_residual);
    out += ',';
    out += std::to_string(f.fit.n_used);
    out += ',';
    out += rs.hash;
    out += '\n';
  }
  return out;
}

namespace {

json margin_to_json(const MarginReport& m) {
  json cells = json::array();
  for (const auto& c : m.cells)
    cells.push_back({{"d", c.d},
                     {"t", c.t},
                     {"mean", c.mean},
                     {"stderr", std::isnan(c.stderr_) ? json() : json(c.stderr_)},
                     {"rhs", c.rhs},
                     {"margin", c.margin},
                     {"rel_margin", c.rel_margin},
                     {"violation", c.violation},
                     {"uninformative", c.uninformative}});
  return {{"kind", to_string(m.kind)},
          {"violations", m.violations},
          {"min_rel_margin", m.min_rel_margin},
          {"uninformative_fraction", m.uninformative_fraction},
          {"trivial_cap", m.trivial_cap},
          {"cells", cells}};
}

json proof_check_to_json(const ProofCheckReport& p) {
  return {{"name", p.name},      {"lhs", p.lhs},   {"rhs", p.rhs},
          {"tolerance", p.tolerance}, {"pass", p.pass}, {"details", p.details}};
}

}  // namespace

void export_results(const ResultSet& rs, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw error("cannot create output directory " + dir + ": " + ec.message());

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir + "/" + name, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot write " + dir + "/" + name);
    out << content;
  };
  bool csv = false, js = false;
  for (const auto& f : rs.config.output.formats) {
    if (f == "csv") csv = true;
    else if (f == "json") js = true;
    else throw validation_error("output.formats", "unknown format " + f);
  }
  if (csv) {
    write("records.csv", records_csv(rs));
    write("fits.csv", fits_csv(rs));
  }
  if (js) {
    json j;
    j["config"] = json::parse(scenario_config_to_json(rs.config));
    j["config_hash"] = rs.hash;
    j["tool_version"] = rs.tool_version;
    j["wall_time_seconds"] = rs.wall_seconds;
    json fits = json::array();
    for (const auto& f : rs.fits)
      fits.push_back({{"scenario_id", f.scenario_id},
                      {"K", f.fit.K},
                      {"xi", f.fit.xi},
                      {"beta", f.fit.beta},
                      {"rms_log_residual", f.fit.rms_log_residual},
                      {"n_points", f.fit.n_used},
                      {"n_discarded", f.fit.n_discarded}});
    j["fits"] = fits;
    json margins = json::array();
    for (const auto& m : rs.margins) margins.push_back(margin_to_json(m));
    j["margin_reports"] = margins;
    json checks = json::array();
    for (const auto& p : rs.proof_checks) checks.push_back(proof_check_to_json(p));
    j["proof_checks"] = checks;
    write("summary.json", j.dump(2) + "\n");
  }
}

std::vector<ScanRecord> import_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw error("empty records file " + path);
  const std::string header =
      "scenario_id,kind,realization,d,t,value,stderr_placeholder,A_support_lo,"
      "A_support_hi,B_support_lo,B_support_hi,config_hash";
  if (line != header) throw error("unexpected records.csv header");
  std::vector<ScanRecord> out;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 12)
      throw error("records.csv line " + std::to_string(lineno) + ": expected 12 fields");
    ScanRecord r;
    r.scenario_id = f[0];
    r.kind = record_kind_from_string(f[1]);
    r.realization = std::stoull(f[2]);
    r.d = std::stoi(f[3]);
    r.t = std::stod(f[4]);
    r.value = std::stod(f[5]);
    r.a_support = {std::stoi(f[7]), std::stoi(f[8])};
    r.b_support = {std::stoi(f[9]), std::stoi(f[10])};
    if (!(r.value >= 0) || !std::isfinite(r.value))
      throw error("records.csv line " + std::to_string(lineno) + ": bad value");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lrlab
