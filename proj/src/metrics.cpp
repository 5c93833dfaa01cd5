#include "lrlab/metrics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "lrlab/rng.hpp"

namespace lrlab {

double f_value(const BoundParams& p, double t) {
  switch (p.shape) {
    case FShape::power:
      return t <= 0 ? 0.0 : std::pow(t, p.beta);
    case FShape::exponential:
      return std::exp(p.v * t / p.xi);
    case FShape::constant:
      return 1.0;
  }
  return 0.0;
}

std::string to_string(RecordKind k) {
  switch (k) {
    case RecordKind::commutator: return "commutator";
    case RecordKind::restriction_error: return "restriction_error";
    case RecordKind::splitting_error: return "splitting_error";
    case RecordKind::entropy: return "entropy";
  }
  return "?";
}

RecordKind record_kind_from_string(const std::string& s) {
  if (s == "commutator") return RecordKind::commutator;
  if (s == "restriction_error") return RecordKind::restriction_error;
  if (s == "splitting_error") return RecordKind::splitting_error;
  if (s == "entropy") return RecordKind::entropy;
  throw parameter_error("unknown record kind: " + s);
}

std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::lightcone: return "lightcone";
    case BoundKind::full: return "full";
    case BoundKind::far: return "far";
    case BoundKind::single: return "single";
    case BoundKind::single_slow: return "single_slow";
    case BoundKind::restriction: return "restriction";
    case BoundKind::splitting: return "splitting";
  }
  return "?";
}

BoundKind bound_kind_from_string(const std::string& s) {
  if (s == "lightcone") return BoundKind::lightcone;
  if (s == "full") return BoundKind::full;
  if (s == "far") return BoundKind::far;
  if (s == "single") return BoundKind::single;
  if (s == "single_slow") return BoundKind::single_slow;
  if (s == "restriction") return BoundKind::restriction;
  if (s == "splitting") return BoundKind::splitting;
  throw parameter_error("unknown bound kind: " + s);
}

std::vector<CellStat> disorder_average(const std::vector<ScanRecord>& records) {
  // (kind, d, t) -> samples tagged by realization; the final reduction runs
  // in realization order so the result does not depend on storage order.
  std::map<std::tuple<int, int, double>, std::vector<std::pair<std::uint64_t, double>>>
      cells;
  for (const auto& r : records)
    cells[{static_cast<int>(r.kind), r.d, r.t}].push_back({r.realization, r.value});
  std::vector<CellStat> out;
  out.reserve(cells.size());
  for (auto& [key, samples] : cells) {
    std::sort(samples.begin(), samples.end());
    double sum = 0.0;
    for (const auto& [rid, v] : samples) sum += v;
    const int count = static_cast<int>(samples.size());
    double mean = sum / count;
    double stderr_ = std::numeric_limits<double>::quiet_NaN();
    if (count > 1) {
      double ss = 0.0;
      for (const auto& [rid, v] : samples) ss += (v - mean) * (v - mean);
      stderr_ = std::sqrt(ss / (count - 1)) / std::sqrt(static_cast<double>(count));
    }
    CellStat c;
    c.kind = static_cast<RecordKind>(std::get<0>(key));
    c.d = std::get<1>(key);
    c.t = std::get<2>(key);
    c.mean = mean;
    c.stderr_ = stderr_;
    c.count = count;
    out.push_back(c);
  }
  return out;
}

namespace {

double bound_quadrature(const BoundParams& p, const EnvelopeFn& h, double t) {
  if (t <= 0) return 0.0;
  if (p.shape == FShape::power && h.is_constant)
    return h.value * std::pow(t, p.beta + 1.0) / (p.beta + 1.0);
  auto fh = [&](double s) { return f_value(p, s) * h(s); };
  if (h.panel_hint > 0 && h.panel_hint < t) {
    // panel the range so an oscillatory envelope cannot alias the subdivision
    long panels = static_cast<long>(std::ceil(t / h.panel_hint));
    double acc = 0.0;
    for (long k = 0; k < panels; ++k)
      acc += integrate(fh, t * k / panels, t * (k + 1) / panels, 1e-13);
    return acc;
  }
  return integrate(fh, 0.0, t, 1e-13);
}

}  // namespace

double evaluate_bound(BoundKind kind, const BoundParams& p, const BoundGeometry& g,
                      double t, const EnvelopeFn& h_max) {
  p.validate();
  const double ab = g.norm_a * g.norm_b;
  switch (kind) {
    case BoundKind::lightcone:
      return p.K * ab * f_value(p, t) * std::exp(-g.dist / p.xi);
    case BoundKind::full:
      return 2.0 * p.K * ab * std::exp(-(1.0 - 0.5 / p.n) * g.dist / p.xi) *
                 f_value(p, t) +
             16.0 * p.K * ab * p.xi * std::exp(-g.dist / (2.0 * p.n * p.xi)) *
                 bound_quadrature(p, h_max, t);
    case BoundKind::far:
      return 2.0 * p.K * ab * std::exp(-g.dist / p.xi) * f_value(p, t) +
             16.0 * p.K * ab * p.xi * std::exp(-g.d_min / p.xi) *
                 bound_quadrature(p, h_max, t);
    case BoundKind::single:
      // norm_a carries sup_s h_max(s); the second term uses h_max at time t.
      return 2.0 * p.K * g.norm_a * g.norm_b * std::exp(-g.dist / p.xi) *
                 f_value(p, t) +
             16.0 * p.K * h_max(t) * g.norm_b * std::exp(-g.dist / p.xi) *
                 bound_quadrature(p, h_max, t);
    case BoundKind::single_slow: {
      if (p.shape != FShape::power || !h_max.is_constant)
        throw parameter_error(
            "single_slow closed form needs power-law f and constant envelope");
      double h = h_max.value;
      return 2.0 * p.K * h * g.norm_b * std::exp(-g.dist / p.xi) *
             (std::pow(t, p.beta) +
              8.0 * h * std::pow(t, p.beta + 1.0) / (p.beta + 1.0));
    }
    case BoundKind::restriction:
      return p.K * g.norm_a * f_value(p, t) * std::exp(-g.radius / p.xi);
    case BoundKind::splitting:
      return 4.0 * p.K * p.xi * std::exp(-g.half_width / p.xi) *
             bound_quadrature(p, h_max, t);
  }
  throw parameter_error("unknown bound kind");
}

MarginReport check_bound(
    const std::vector<CellStat>& cells, const BoundParams& params, BoundKind kind,
    const BoundGeometry& geom, const EnvelopeFn& h_max,
    const std::function<BoundGeometry(const BoundGeometry&, int)>& per_cell) {
  MarginReport rep;
  rep.kind = kind;
  rep.trivial_cap = 2.0 * geom.norm_a * geom.norm_b;
  rep.min_rel_margin = std::numeric_limits<double>::infinity();
  const RecordKind want =
      kind == BoundKind::splitting ? RecordKind::splitting_error
      : kind == BoundKind::restriction ? RecordKind::restriction_error
                                       : RecordKind::commutator;
  int uninformative = 0;
  for (const auto& c : cells) {
    if (c.kind != want) continue;
    BoundGeometry g;
    if (per_cell) {
      g = per_cell(geom, c.d);
    } else {
      g = geom;
      g.dist = static_cast<double>(c.d);
      if (kind == BoundKind::restriction) g.radius = static_cast<double>(c.d);
      if (kind == BoundKind::splitting) g.half_width = static_cast<double>(c.d);
    }
    CellMargin m;
    m.d = c.d;
    m.t = c.t;
    m.mean = c.mean;
    m.stderr_ = c.stderr_;
    m.rhs = evaluate_bound(kind, params, g, c.t, h_max);
    m.margin = m.rhs - c.mean;
    m.rel_margin = m.rhs > 0 ? m.margin / m.rhs : (c.mean > 0 ? -1.0 : 0.0);
    double slack = std::isnan(c.stderr_) ? 0.0 : 3.0 * c.stderr_;
    m.violation = m.margin < -slack;
    m.uninformative = m.rhs > rep.trivial_cap;
    if (m.violation) ++rep.violations;
    if (m.uninformative) ++uninformative;
    rep.min_rel_margin = std::min(rep.min_rel_margin, m.rel_margin);
    rep.cells.push_back(m);
  }
  if (!rep.cells.empty())
    rep.uninformative_fraction =
        static_cast<double>(uninformative) / static_cast<double>(rep.cells.size());
  else
    rep.min_rel_margin = 0.0;
  return rep;
}

FitResult fit_lightcone_cells(const std::vector<CellStat>& cells, double noise_floor) {
  std::vector<const CellStat*> used;
  int discarded = 0;
  for (const auto& c : cells) {
    if (c.kind != RecordKind::commutator) continue;
    if (c.mean < noise_floor || c.t <= 0) {
      ++discarded;
      continue;
    }
    used.push_back(&c);
  }
  std::vector<int> ds;
  std::vector<double> ts;
  for (auto* c : used) {
    ds.push_back(c->d);
    ts.push_back(c->t);
  }
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  if (ds.size() < 3 || ts.size() < 3)
    throw fit_error("need >= 3 distances and >= 3 times above the noise floor, have " +
                    std::to_string(ds.size()) + " and " + std::to_string(ts.size()));

  // log mean = log K + beta log t - d / xi
  Eigen::MatrixXd a(used.size(), 3);
  Eigen::VectorXd y(used.size());
  for (size_t i = 0; i < used.size(); ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = std::log(used[i]->t);
    a(i, 2) = -static_cast<double>(used[i]->d);
    y(i) = std::log(used[i]->mean);
  }
  Eigen::VectorXd x = a.colPivHouseholderQr().solve(y);
  double inv_xi = x(2);
  if (inv_xi <= 0) throw fit_error("fitted decay rate is not positive");
  FitResult r;
  r.K = std::exp(x(0));
  r.beta = x(1);
  r.xi = 1.0 / inv_xi;
  r.n_used = static_cast<int>(used.size());
  r.n_discarded = discarded;
  r.rms_log_residual = std::sqrt((a * x - y).squaredNorm() / used.size());
  return r;
}

FitResult fit_lightcone(const std::vector<ScanRecord>& records, double noise_floor) {
  return fit_lightcone_cells(disorder_average(records), noise_floor);
}

double t_max_horizon(const BoundParams& params, double d, double C) {
  if (params.shape != FShape::power || params.beta <= 0)
    throw parameter_error("horizon needs power-law f with beta > 0");
  if (C <= 0) throw parameter_error("horizon needs C > 0");
  params.validate();
  return std::pow(std::exp(d / (2.0 * params.xi)) / C, 1.0 / params.beta);
}

double entanglement_entropy(const Vector& state, int cut, const Lattice& lattice) {
  if (state.size() != lattice.dim())
    throw shape_error("state dimension does not match lattice");
  if (std::abs(state.norm() - 1.0) > 1e-8)
    throw normalization_error("state is not normalized");
  if (cut < 0 || cut >= lattice.num_sites - 1)
    throw range_error("cut must leave sites on both sides");
  const long left = lattice.pow_dim(cut + 1);
  const long right = lattice.pow_dim(lattice.num_sites - 1 - cut);
  // psi(a * right + b) = M(b, a): column-major map, no copy
  Eigen::Map<const Matrix> m(state.data(), right, left);
  Eigen::JacobiSVD<Matrix> svd(m);
  double s = 0.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    double p = svd.singularValues()(i);
    p *= p;
    if (p > 1e-300) s -= p * std::log(p);
  }
  return std::max(0.0, s);
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

namespace {

/// out = e^{iHt} A e^{-iHt} in, for a block of column vectors in the
/// computational basis. atilde is the eigenbasis image of A; z the phase
/// vector e^{-i lambda t}.
void heisenberg_apply_block(const Propagator& prop, const RealMatrix& atilde_re,
                            const Matrix& atilde_cx, const Vector& z,
                            const Matrix& in, Matrix& out) {
  Matrix x;
  if (prop.real())
    multiply_realT_complex(prop.eig.vectors_real, in, x);
  else
    x.noalias() = prop.eig.vectors.adjoint() * in;
  for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) *= z(i);
  Matrix y;
  if (prop.real() && atilde_re.size() > 0)
    multiply_real_complex(atilde_re, x, y);
  else
    y.noalias() = atilde_cx * x;
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) *= std::conj(z(i));
  if (prop.real())
    multiply_real_complex(prop.eig.vectors_real, y, out);
  else
    out.noalias() = prop.eig.vectors * y;
}

struct LanczosColumn {
  std::vector<Vector> basis;
  std::vector<double> alpha, beta;
  bool converged = false;
  double theta = 0.0;
};

double tridiag_extreme(const std::vector<double>& alpha, const std::vector<double>& beta,
                       double* last_component) {
  const int k = static_cast<int>(alpha.size());
  Eigen::VectorXd diag(k), sub(std::max(0, k - 1));
  for (int i = 0; i < k; ++i) diag(i) = alpha[i];
  for (int i = 0; i + 1 < k; ++i) sub(i) = beta[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub);
  int idx = 0;
  for (int i = 1; i < k; ++i)
    if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(idx))) idx = i;
  *last_component = std::abs(es.eigenvectors()(k - 1, idx));
  return es.eigenvalues()(idx);
}

/// ||[A(t), B_d]|| for all d at one t, via Lanczos on the Hermitian operator
/// i[A(t), B_d] with matrix-vector products batched across d into BLAS-3
/// calls through the eigenbasis of the propagator.
std::vector<double> lanczos_commutator_scan(const Propagator& prop,
                                            const RealMatrix& atilde_re,
                                            const Matrix& atilde_cx, double t,
                                            const std::vector<LocalOperator>& b_list,
                                            std::uint64_t seed, double rtol,
                                            int max_iter) {
  const long n = prop.dim();
  const int m = static_cast<int>(b_list.size());
  Vector z(prop.values().size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    z(i) = std::polar(1.0, -prop.values()(i) * t);

  std::vector<LanczosColumn> cols(m);
  for (int d = 0; d < m; ++d) {
    CounterRng rng(seed, rng_stream::lanczos, 0, static_cast<std::uint64_t>(d));
    Vector v(n);
    for (long i = 0; i < n; ++i)
      v(i) = cxd(2.0 * rng.next_uniform01() - 1.0, 2.0 * rng.next_uniform01() - 1.0);
    v.normalize();
    cols[d].basis.push_back(std::move(v));
  }

  Matrix in(n, 2 * m), s(n, 2 * m);
  Vector w(n), tmp(n);
  for (int it = 0; it < max_iter; ++it) {
    bool all_done = true;
    for (int d = 0; d < m; ++d)
      if (!cols[d].converged) all_done = false;
    if (all_done) break;

    for (int d = 0; d < m; ++d) {
      if (cols[d].converged) {
        in.col(d).setZero();
        in.col(m + d).setZero();
      } else {
        const Vector& u = cols[d].basis.back();
        in.col(d) = u;
        in.col(m + d) = u;
        apply_local_left(b_list[d], prop.lattice, in.middleCols(m + d, 1));
      }
    }
    heisenberg_apply_block(prop, atilde_re, atilde_cx, z, in, s);

    for (int d = 0; d < m; ++d) {
      auto& c = cols[d];
      if (c.converged) continue;
      // w = i (A(t) B u - B A(t) u)
      tmp = s.col(d);
      apply_local_left(b_list[d], prop.lattice, tmp);
      w = cxd(0, 1) * (s.col(m + d) - tmp);

      const int k = static_cast<int>(c.alpha.size());
      double a = std::real(c.basis[k].dot(w));
      c.alpha.push_back(a);
      w -= a * c.basis[k];
      if (k > 0) w -= c.beta[k - 1] * c.basis[k - 1];
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : c.basis) w -= q.dot(w) * q;
      double b = w.norm();

      double last = 0.0;
      double theta = tridiag_extreme(c.alpha, c.beta, &last);
      c.theta = std::abs(theta);
      double resid = b * last;
      if (resid <= std::max(1e-15, rtol * c.theta) || b <= 1e-15 ||
          k + 1 >= static_cast<int>(n)) {
        c.converged = true;
        continue;
      }
      c.beta.push_back(b);
      c.basis.push_back(w / b);
    }
  }
  std::vector<double> out(m);
  for (int d = 0; d < m; ++d) out[d] = cols[d].theta;
  return out;
}

}  // namespace

std::vector<ScanRecord> commutator_profile(const Propagator& prop,
                                           const LocalOperator& a,
                                           const std::vector<LocalOperator>& b_list,
                                           const std::vector<double>& times,
                                           const ProfileOptions& opts) {
  if (!a.support.within(prop.lattice)) throw range_error("probe A outside lattice");
  for (const auto& b : b_list)
    if (!b.support.within(prop.lattice)) throw range_error("probe B outside lattice");
  const long n = prop.dim();
  const double na = spectral_norm(a);
  std::vector<double> nb(b_list.size());
  for (size_t i = 0; i < b_list.size(); ++i) nb[i] = spectral_norm(b_list[i]);

  std::vector<ScanRecord> records;
  records.reserve(times.size() * b_list.size());

  if (n > opts.dense_threshold) {
    // eigenbasis image of A, built with one large product
    RealMatrix atilde_re;
    Matrix atilde_cx;
    bool a_real = a.matrix.imag().isZero(0.0);
    if (prop.real() && a_real) {
      RealMatrix av = prop.eig.vectors_real;
      apply_local_left(a, prop.lattice, av);
      atilde_re.noalias() = prop.eig.vectors_real.transpose() * av;
    } else if (prop.real()) {
      Matrix av = prop.eig.vectors_real.cast<cxd>();
      apply_local_left(a, prop.lattice, av);
      multiply_realT_complex(prop.eig.vectors_real, av, atilde_cx);
    } else {
      Matrix av = prop.eig.vectors;
      apply_local_left(a, prop.lattice, av);
      atilde_cx.noalias() = prop.eig.vectors.adjoint() * av;
    }
    for (size_t ti = 0; ti < times.size(); ++ti) {
      std::uint64_t seed =
          mix_key(opts.seed, rng_stream::probe, opts.realization, ti);
      auto values = lanczos_commutator_scan(prop, atilde_re, atilde_cx, times[ti],
                                            b_list, seed, opts.lanczos_rtol,
                                            opts.lanczos_max_iter);
      for (size_t bi = 0; bi < b_list.size(); ++bi) {
        ScanRecord r;
        r.scenario_id = opts.scenario_id;
        r.kind = RecordKind::commutator;
        r.realization = opts.realization;
        r.d = distance(a.support, b_list[bi].support);
        r.t = times[ti];
        r.value = values[bi];
        r.a_support = a.support;
        r.b_support = b_list[bi].support;
        if (r.value > 2.0 * na * nb[bi] + 1e-10)
          throw numeric_error("commutator value above the trivial cap");
        records.push_back(std::move(r));
      }
    }
    return records;
  }

  // dense path
  GlobalOperator ga = embed(a, prop.lattice);
  for (double t : times) {
    GlobalOperator at = prop.heisenberg(ga, t);
    for (size_t bi = 0; bi < b_list.size(); ++bi) {
      GlobalOperator gb = embed(b_list[bi], prop.lattice);
      ScanRecord r;
      r.scenario_id = opts.scenario_id;
      r.kind = RecordKind::commutator;
      r.realization = opts.realization;
      r.d = distance(a.support, b_list[bi].support);
      r.t = t;
      r.value = commutator_norm(at, gb);
      r.a_support = a.support;
      r.b_support = b_list[bi].support;
      if (r.value > 2.0 * na * nb[bi] + 1e-10)
        throw numeric_error("commutator value above the trivial cap");
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<ScanRecord> commutator_profile(const Hamiltonian& model,
                                           const std::vector<PerturbationTerm>& perts,
                                           const LocalOperator& a,
                                           const std::vector<LocalOperator>& b_list,
                                           const std::vector<double>& times,
                                           const ProfileOptions& opts,
                                           const TimeGridControl& control) {
  bool all_static = true;
  for (const auto& p : perts)
    if (!p.time_independent) all_static = false;

  if (all_static) {
    Matrix total = model.global;
    for (const auto& p : perts)
      embed_add_into({p.support, p.static_matrix}, model.lattice, total);
    Propagator prop = Propagator::make(GlobalOperator{std::move(total), model.lattice});
    return commutator_profile(prop, a, b_list, times, opts);
  }

  // time-dependent: V(t) from the Strang product, dense norms
  Propagator base = Propagator::make(model);
  const double na = spectral_norm(a);
  GlobalOperator ga = embed(a, model.lattice);
  std::vector<ScanRecord> records;
  for (double t : times) {
    GlobalOperator v = evolve_perturbed(base, perts, t, control);
    Matrix av = v.matrix.adjoint() * ga.matrix * v.matrix;
    GlobalOperator at{std::move(av), model.lattice};
    for (const auto& b : b_list) {
      GlobalOperator gb = embed(b, model.lattice);
      ScanRecord r;
      r.scenario_id = opts.scenario_id;
      r.kind = RecordKind::commutator;
      r.realization = opts.realization;
      r.d = distance(a.support, b.support);
      r.t = t;
      r.value = commutator_norm(at, gb);
      r.a_support = a.support;
      r.b_support = b.support;
      if (r.value > 2.0 * na * spectral_norm(b) + 1e-10)
        throw numeric_error("commutator value above the trivial cap");
      records.push_back(std::move(r));
    }
  }
  return records;
}

ScanRecord restriction_error(const Propagator& prop, const LocalOperator& a,
                             int radius, double t, const ProfileOptions& opts) {
  if (radius < 0) throw range_error("radius must be >= 0");
  SiteInterval ball{std::max(0, a.support.lo - radius),
                    std::min(prop.lattice.num_sites - 1, a.support.hi + radius)};
  GlobalOperator at = prop.heisenberg(embed(a, prop.lattice), t);
  GlobalOperator restricted = restrict_to(at, ball);
  ScanRecord r;
  r.scenario_id = opts.scenario_id;
  r.kind = RecordKind::restriction_error;
  r.realization = opts.realization;
  r.d = radius;
  r.t = t;
  r.value = matrix_spectral_norm(at.matrix - restricted.matrix);
  r.a_support = a.support;
  r.b_support = ball;
  return r;
}

}  // namespace lrlab
