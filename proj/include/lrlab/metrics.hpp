#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrlab/propagation.hpp"

namespace lrlab {

// ---------------------------------------------------------------------------
// Bound parameterization
// ---------------------------------------------------------------------------

enum class FShape { power, exponential, constant };

/// (K, xi, n, f) parameterizing the right-hand sides: f(t) = t^beta,
/// e^{v t / xi}, or 1.
struct BoundParams {
  double K = 1.0;
  double xi = 1.0;
  double n = 1.0;
  FShape shape = FShape::power;
  double beta = 1.0;
  double v = 1.0;

  void validate() const {
    if (K <= 0) throw parameter_error("K must be > 0");
    if (xi <= 0) throw parameter_error("xi must be > 0");
    if (n < 1) throw parameter_error("free-region fraction n must be >= 1");
  }
  BoundParams scaled_K(double factor) const {
    BoundParams p = *this;
    p.K *= factor;
    return p;
  }
};

double f_value(const BoundParams& p, double t);

/// Norm envelope h_max(t) of the perturbations. `panel_hint`, when positive,
/// caps the quadrature panel width; set it for oscillatory envelopes whose
/// period the adaptive rule could alias.
struct EnvelopeFn {
  std::function<double(double)> f;
  bool is_constant = false;
  double value = 0.0;
  double panel_hint = 0.0;

  double operator()(double s) const { return is_constant ? value : f(s); }
  static EnvelopeFn constant(double v) {
    EnvelopeFn e;
    e.is_constant = true;
    e.value = v;
    return e;
  }
  static EnvelopeFn of(std::function<double(double)> fn, double panel_hint = 0.0) {
    EnvelopeFn e;
    e.f = std::move(fn);
    e.panel_hint = panel_hint;
    return e;
  }
};

// ---------------------------------------------------------------------------
// Records and statistics
// ---------------------------------------------------------------------------

enum class RecordKind { commutator, restriction_error, splitting_error, entropy };

std::string to_string(RecordKind k);
RecordKind record_kind_from_string(const std::string& s);

/// One measured point of a scan.
struct ScanRecord {
  std::string scenario_id;
  RecordKind kind = RecordKind::commutator;
  std::uint64_t realization = 0;
  int d = 0;
  double t = 0.0;
  double value = 0.0;
  SiteInterval a_support;
  SiteInterval b_support;
};

/// Disorder-averaged cell of the (kind, d, t) grid. stderr is NaN when only
/// one sample contributed.
struct CellStat {
  RecordKind kind;
  int d = 0;
  double t = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

/// Sample mean and standard error per (kind, d, t) cell, reduced in
/// realization order regardless of how the records are stored.
std::vector<CellStat> disorder_average(const std::vector<ScanRecord>& records);

// ---------------------------------------------------------------------------
// Bound evaluation and checking
// ---------------------------------------------------------------------------

enum class BoundKind { lightcone, full, far, single, single_slow, restriction, splitting };

std::string to_string(BoundKind k);
BoundKind bound_kind_from_string(const std::string& s);

/// Scenario geometry feeding the right-hand sides; only the fields a given
/// kind needs are read.
struct BoundGeometry {
  double dist = 0.0;        // dist(A,B), or dist(h,B) for the single kinds
  double d_min = 0.0;       // far kind
  double radius = 0.0;      // restriction kind
  double half_width = 0.0;  // splitting kind
  double norm_a = 1.0;      // ||A||, or sup_t h_max for the single kinds
  double norm_b = 1.0;
};

double evaluate_bound(BoundKind kind, const BoundParams& params,
                      const BoundGeometry& geom, double t, const EnvelopeFn& h_max);

struct CellMargin {
  int d = 0;
  double t = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double rhs = 0.0;
  double margin = 0.0;      // rhs - mean
  double rel_margin = 0.0;  // margin / rhs
  bool violation = false;
  bool uninformative = false;  // rhs above the trivial commutator cap
};

struct MarginReport {
  BoundKind kind = BoundKind::lightcone;
  std::vector<CellMargin> cells;
  int violations = 0;
  double min_rel_margin = 0.0;
  double uninformative_fraction = 0.0;
  double trivial_cap = 0.0;
};

/// Compare measured cell means against the bound: a cell violates when the
/// mean exceeds the RHS by more than 3 standard errors (the theorem is an
/// ensemble statement). Geometry fields other than dist are taken from
/// `geom`; dist is the cell's d. `per_cell`, when given, maps (template, d)
/// to the cell geometry instead (for d-dependent d_min and the like).
MarginReport check_bound(
    const std::vector<CellStat>& cells, const BoundParams& params, BoundKind kind,
    const BoundGeometry& geom, const EnvelopeFn& h_max,
    const std::function<BoundGeometry(const BoundGeometry&, int)>& per_cell = {});

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitResult {
  double K = 0.0;
  double xi = 0.0;
  double beta = 0.0;
  double rms_log_residual = 0.0;
  int n_used = 0;
  int n_discarded = 0;
};

/// Least squares of log mean = log K + beta log t - d / xi over the
/// disorder-averaged cells above the noise floor.
FitResult fit_lightcone(const std::vector<ScanRecord>& records,
                        double noise_floor = 1e-12);
FitResult fit_lightcone_cells(const std::vector<CellStat>& cells,
                              double noise_floor = 1e-12);

/// t_max with C t_max^beta = e^{d / (2 xi)}.
double t_max_horizon(const BoundParams& params, double d, double C);

/// Von Neumann entropy (natural log) of the reduced state on sites 0..cut.
double entanglement_entropy(const Vector& state, int cut, const Lattice& lattice);

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

struct ProfileOptions {
  std::string scenario_id;
  std::uint64_t realization = 0;
  std::uint64_t seed = 0;         // Lanczos start vectors
  double lanczos_rtol = 1e-7;
  int lanczos_max_iter = 160;
  long dense_threshold = 512;     // dims up to this use the dense norm path
};

/// ||[W^dagger(t) A W(t), B]|| for each b in b_list and each time, where W is
/// the exact evolution of `prop`. Large dimensions use a batched Lanczos on
/// the Hermitian form of the commutator; small ones the dense eigensolve.
std::vector<ScanRecord> commutator_profile(const Propagator& prop,
                                           const LocalOperator& a,
                                           const std::vector<LocalOperator>& b_list,
                                           const std::vector<double>& times,
                                           const ProfileOptions& opts);

/// The same with perturbations: static terms fold into an exact total
/// propagator; time-dependent ones evolve with the Strang product.
std::vector<ScanRecord> commutator_profile(const Hamiltonian& model,
                                           const std::vector<PerturbationTerm>& perts,
                                           const LocalOperator& a,
                                           const std::vector<LocalOperator>& b_list,
                                           const std::vector<double>& times,
                                           const ProfileOptions& opts,
                                           const TimeGridControl& control = {});

/// || A(t) - restrict(A(t), ball of `radius` around supp A) ||.
ScanRecord restriction_error(const Propagator& prop, const LocalOperator& a,
                             int radius, double t, const ProfileOptions& opts);

}  // namespace lrlab
