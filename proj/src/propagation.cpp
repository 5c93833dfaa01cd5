#include "lrlab/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace lrlab {

namespace {

Vector phase_vector(const RealVector& lambda, double t) {
  Vector z(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    z(i) = std::polar(1.0, -lambda(i) * t);  // e^{-i lambda t}
  return z;
}

/// exp(-i dt g) for Hermitian g via its spectral decomposition.
Matrix herm_exp(const Matrix& g, double dt) {
  HermitianEig e = hermitian_eigensolve(g);
  Vector z = phase_vector(e.values, dt);
  if (e.real()) {
    Matrix p = e.vectors_real.cast<cxd>();
    for (Eigen::Index k = 0; k < p.cols(); ++k) p.col(k) *= z(k);
    Matrix out;
    multiply_complex_realT(p, e.vectors_real, out);
    return out;
  }
  Matrix p = e.vectors;
  for (Eigen::Index k = 0; k < p.cols(); ++k) p.col(k) *= z(k);
  return p * e.vectors.adjoint();
}

/// Nearest unitary (polar factor) of m.
Matrix polar_unitary(const Matrix& m) {
  HermitianEig e = hermitian_eigensolve(m.adjoint() * m);
  Vector inv_sqrt(e.values.size());
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    inv_sqrt(i) = 1.0 / std::sqrt(std::max(e.values(i), 1e-300));
  const Matrix& v = e.real() ? Matrix(e.vectors_real.cast<cxd>()) : e.vectors;
  Matrix s = v * inv_sqrt.asDiagonal() * v.adjoint();
  return m * s;
}

/// Shared step-halving driver. eval_level(K) runs the second-order product
/// with K steps; levels double K until successive candidates agree to tol.
Matrix halving_driver(const std::function<Matrix(long)>& eval_level, double t,
                      const TimeGridControl& c, const char* what) {
  long steps = std::max<long>(1, std::lround(t / std::max(c.initial_step, 1e-12)));
  std::optional<Matrix> prev_u, prev_cand;
  double last_diff = std::numeric_limits<double>::infinity();
  for (int level = 0; level <= c.max_halvings; ++level, steps *= 2) {
    Matrix u = eval_level(steps);
    std::optional<Matrix> cand;
    if (!c.extrapolate)
      cand = u;
    else if (prev_u)
      cand = ((4.0 * u - *prev_u) / 3.0).eval();
    if (cand && prev_cand) {
      last_diff = matrix_spectral_norm(*cand - *prev_cand);
      if (last_diff <= c.tol) {
        if (c.extrapolate && c.reunitarize) return polar_unitary(*cand);
        return *cand;
      }
    }
    if (cand) prev_cand = std::move(cand);
    prev_u = std::move(u);
  }
  throw convergence_error(std::string(what) + ": step halving did not converge",
                          last_diff);
}

/// Overlapping perturbation supports merged into disjoint clusters, with the
/// member terms embedded into the cluster interval.
struct Cluster {
  SiteInterval region;
  std::vector<const PerturbationTerm*> members;
};

std::vector<Cluster> cluster_terms(const std::vector<PerturbationTerm>& terms,
                                   const Lattice& lat) {
  std::vector<const PerturbationTerm*> sorted;
  for (const auto& t : terms) {
    if (!t.support.within(lat)) throw range_error("perturbation support outside lattice");
    sorted.push_back(&t);
  }
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
    return a->support.lo < b->support.lo;
  });
  std::vector<Cluster> out;
  for (auto* t : sorted) {
    if (!out.empty() && t->support.lo <= out.back().region.hi) {
      out.back().region.hi = std::max(out.back().region.hi, t->support.hi);
      out.back().members.push_back(t);
    } else {
      out.push_back({t->support, {t}});
    }
  }
  for (const auto& c : out)
    if (lat.pow_dim(c.region.size()) > 4096)
      throw budget_error("perturbation cluster too large for local exponentials");
  return out;
}

/// Sum of a cluster's local matrices at time s, on the cluster interval.
Matrix cluster_matrix(const Cluster& c, const Lattice& lat, double s) {
  Lattice sub(c.region.size(), lat.local_dim);
  Matrix m = Matrix::Zero(sub.dim(), sub.dim());
  for (const auto* t : c.members) {
    LocalOperator shifted{{t->support.lo - c.region.lo, t->support.hi - c.region.lo},
                          t->at(s)};
    m += embed(shifted, sub).matrix;
  }
  return m;
}

void apply_cluster_exponentials(const std::vector<Cluster>& clusters,
                                const Lattice& lat, double s, double dt,
                                Matrix& p) {
  for (const auto& c : clusters) {
    Matrix e = herm_exp(cluster_matrix(c, lat, s), dt);
    apply_local_left(LocalOperator{c.region, std::move(e)}, lat, p);
  }
}

}  // namespace

Propagator Propagator::make(const GlobalOperator& h) {
  if (h.matrix.rows() != h.lattice.dim())
    throw shape_error("generator dimension does not match lattice");
  if (!is_hermitian(h.matrix))
    throw numeric_error("propagator needs a Hermitian generator");
  Propagator p;
  p.lattice = h.lattice;
  p.eig = hermitian_eigensolve(h.matrix);
  return p;
}

Propagator Propagator::make(const Hamiltonian& h) { return make(h.global_op()); }

GlobalOperator Propagator::evolve(double t) const {
  Vector z = phase_vector(eig.values, t);
  if (real()) {
    Matrix p = eig.vectors_real.cast<cxd>();
    for (Eigen::Index k = 0; k < p.cols(); ++k) p.col(k) *= z(k);
    Matrix out;
    multiply_complex_realT(p, eig.vectors_real, out);
    return {std::move(out), lattice};
  }
  Matrix p = eig.vectors;
  for (Eigen::Index k = 0; k < p.cols(); ++k) p.col(k) *= z(k);
  return {p * eig.vectors.adjoint(), lattice};
}

Matrix Propagator::to_eigenbasis(const Matrix& m) const {
  if (real()) {
    Matrix t;
    multiply_realT_complex(eig.vectors_real, m, t);
    Matrix out;
    multiply_complex_real(t, eig.vectors_real, out);
    return out;
  }
  return eig.vectors.adjoint() * m * eig.vectors;
}

Matrix Propagator::from_eigenbasis(const Matrix& m) const {
  if (real()) {
    Matrix t;
    multiply_real_complex(eig.vectors_real, m, t);
    Matrix out;
    multiply_complex_realT(t, eig.vectors_real, out);
    return out;
  }
  return eig.vectors * m * eig.vectors.adjoint();
}

GlobalOperator Propagator::heisenberg(const GlobalOperator& a, double t) const {
  if (!(a.lattice == lattice)) throw shape_error("operator lattice mismatch");
  Matrix m = to_eigenbasis(a.matrix);
  Vector z = phase_vector(eig.values, t);
  // e^{iHt} a e^{-iHt}: rows pick up conj(z), columns z.
  for (Eigen::Index k = 0; k < m.cols(); ++k) m.col(k) *= z(k);
  for (Eigen::Index k = 0; k < m.rows(); ++k) m.row(k) *= std::conj(z(k));
  return {from_eigenbasis(m), lattice};
}

Vector Propagator::evolve_state(const Vector& psi, double t) const {
  Vector tilde;
  if (real()) {
    Matrix tmp;
    multiply_realT_complex(eig.vectors_real, psi, tmp);
    tilde = tmp;
  } else {
    tilde = eig.vectors.adjoint() * psi;
  }
  Vector z = phase_vector(eig.values, t);
  tilde.array() *= z.array();
  if (real()) {
    Matrix tmp;
    multiply_real_complex(eig.vectors_real, tilde, tmp);
    return tmp;
  }
  return eig.vectors * tilde;
}

std::pair<double, double> Propagator::verify(const GlobalOperator& h) const {
  Matrix v = real() ? Matrix(eig.vectors_real.cast<cxd>()) : eig.vectors;
  Matrix rec = v * eig.values.cast<cxd>().asDiagonal() * v.adjoint() - h.matrix;
  double unit = matrix_spectral_norm(v.adjoint() * v -
                                     Matrix::Identity(v.rows(), v.cols()));
  return {matrix_spectral_norm(rec), unit};
}

GlobalOperator evolve_time_ordered(const TimeOrderedEvolution& gen, double t) {
  const long n = gen.lattice.dim();
  if (t < 0) throw parameter_error("time-ordered evolution needs t >= 0");
  if (t == 0) return GlobalOperator::identity(gen.lattice);
  {
    Matrix g0 = gen.generator(0.5 * std::min(t, gen.control.initial_step));
    if (g0.rows() != n) throw shape_error("generator dimension mismatch");
    if (!is_hermitian(g0, 1e-10)) throw numeric_error("generator is not Hermitian");
  }
  auto level = [&](long steps) {
    double h = t / static_cast<double>(steps);
    Matrix p = Matrix::Identity(n, n);
    for (long k = 0; k < steps; ++k) {
      double s = (static_cast<double>(k) + 0.5) * h;
      Matrix e = herm_exp(gen.generator(s), h);
      p = (e * p).eval();
    }
    return p;
  };
  Matrix u = halving_driver(level, t, gen.control, "evolve_time_ordered");
  return {std::move(u), gen.lattice};
}

GlobalOperator evolve_perturbed(const Propagator& base,
                                const std::vector<PerturbationTerm>& terms,
                                double t, const TimeGridControl& control) {
  if (t < 0) throw parameter_error("evolution needs t >= 0");
  if (t == 0) return GlobalOperator::identity(base.lattice);
  if (terms.empty()) return base.evolve(t);
  auto clusters = cluster_terms(terms, base.lattice);
  auto level = [&](long steps) {
    double h = t / static_cast<double>(steps);
    Matrix full = base.evolve(h).matrix;
    Matrix half = base.evolve(0.5 * h).matrix;
    Matrix p = half;
    for (long k = 0; k < steps; ++k) {
      double s = (static_cast<double>(k) + 0.5) * h;
      apply_cluster_exponentials(clusters, base.lattice, s, h, p);
      p = ((k + 1 < steps ? full : half) * p).eval();
    }
    return p;
  };
  Matrix u = halving_driver(level, t, control, "evolve_perturbed");
  return {std::move(u), base.lattice};
}

GlobalOperator interaction_generator(const Propagator& base,
                                     const PerturbationTerm& term, double s) {
  GlobalOperator g = embed({term.support, term.at(s)}, base.lattice);
  return base.heisenberg(g, s);
}

GlobalOperator interaction_factor(const Propagator& base,
                                  const std::vector<PerturbationTerm>& terms,
                                  double t, const TimeGridControl& control) {
  if (t < 0) throw parameter_error("interaction factor needs t >= 0");
  if (t == 0 || terms.empty()) return GlobalOperator::identity(base.lattice);
  auto clusters = cluster_terms(terms, base.lattice);
  // T = e^{iH s_K} E_K e^{-iHh} E_{K-1} ... e^{-iHh} E_1 e^{-iH s_1}
  // with E_k = exp(-i h h_loc(s_k)) and s_k the midpoints: the frame
  // conjugations collapse into one cached full step between local factors.
  auto level = [&](long steps) {
    double h = t / static_cast<double>(steps);
    Matrix back = base.evolve(h).matrix;
    Matrix p = Matrix::Identity(base.dim(), base.dim());
    for (long k = 0; k < steps; ++k) {
      double s = (static_cast<double>(k) + 0.5) * h;
      if (k > 0) p = (back * p).eval();
      apply_cluster_exponentials(clusters, base.lattice, s, h, p);
    }
    double s_first = 0.5 * h, s_last = t - 0.5 * h;
    p = (base.evolve(-s_last).matrix * p).eval();
    p = (p * base.evolve(s_first).matrix).eval();
    return p;
  };
  Matrix u = halving_driver(level, t, control, "interaction_factor");
  return {std::move(u), base.lattice};
}

GlobalOperator interaction_factor_exact(const Propagator& base,
                                        const std::vector<PerturbationTerm>& terms,
                                        double t) {
  for (const auto& term : terms)
    if (!term.time_independent)
      throw parameter_error("exact interaction factor needs static terms");
  if (terms.empty()) return GlobalOperator::identity(base.lattice);
  Matrix diag = base.eig.values.cast<cxd>().asDiagonal();
  Matrix total = base.from_eigenbasis(diag);
  for (const auto& term : terms)
    embed_add_into({term.support, term.static_matrix}, base.lattice, total);
  Propagator full = Propagator::make(GlobalOperator{std::move(total), base.lattice});
  return {base.evolve(-t).matrix * full.evolve(t).matrix, base.lattice};
}

// ---------------------------------------------------------------------------
// Split factors
// ---------------------------------------------------------------------------

namespace {

/// Normalized partial trace of (V w V^T) onto the leading factor [0, cut]
/// (keep_left) or the trailing factor [cut+1, N-1], for real V. Returns the
/// reduced matrix of the kept factor.
Matrix conjugated_partial_trace(const RealMatrix& v, const Matrix& w, long keep_dim,
                                long lose_dim, bool keep_left) {
  Matrix y;
  multiply_real_complex(v, w, y);  // y = V w
  const long n = v.rows();
  Matrix m = Matrix::Zero(keep_dim, keep_dim);
  RealMatrix vt(keep_dim, n);
  Matrix yt(keep_dim, n);
  RealMatrix mre = RealMatrix::Zero(keep_dim, keep_dim);
  RealMatrix mim = RealMatrix::Zero(keep_dim, keep_dim);
  for (long b = 0; b < lose_dim; ++b) {
    if (keep_left) {
      // rows a*lose_dim + b
      for (long a = 0; a < keep_dim; ++a) {
        vt.row(a) = v.row(a * lose_dim + b);
        yt.row(a) = y.row(a * lose_dim + b);
      }
    } else {
      // rows b*keep_dim + a (contiguous block)
      vt = v.middleRows(b * keep_dim, keep_dim);
      yt = y.middleRows(b * keep_dim, keep_dim);
    }
    mre.noalias() += yt.real() * vt.transpose();
    mim.noalias() += yt.imag() * vt.transpose();
  }
  m.real() = mre / static_cast<double>(lose_dim);
  m.imag() = mim / static_cast<double>(lose_dim);
  return m;
}

/// Complex-eigenvector variant.
Matrix conjugated_partial_trace(const Matrix& v, const Matrix& w, long keep_dim,
                                long lose_dim, bool keep_left) {
  Matrix y = v * w;
  Matrix m = Matrix::Zero(keep_dim, keep_dim);
  Matrix vt(keep_dim, v.rows()), yt(keep_dim, v.rows());
  for (long b = 0; b < lose_dim; ++b) {
    if (keep_left) {
      for (long a = 0; a < keep_dim; ++a) {
        vt.row(a) = v.row(a * lose_dim + b);
        yt.row(a) = y.row(a * lose_dim + b);
      }
    } else {
      vt = v.middleRows(b * keep_dim, keep_dim);
      yt = y.middleRows(b * keep_dim, keep_dim);
    }
    m.noalias() += yt * vt.conjugate().transpose();
  }
  return m / static_cast<double>(lose_dim);
}

/// Time-ordered product of the restricted frame generators of `terms` over
/// [0, t], reduced to the kept factor. Each step integrates the restricted
/// generator exactly in time (elementwise sinc average over the eigenphase
/// differences) before exponentiating.
Matrix restricted_factor(const Propagator& base,
                         const std::vector<const PerturbationTerm*>& terms,
                         long keep_dim, long lose_dim, bool keep_left, double t,
                         const TimeGridControl& control, const char* what) {
  if (terms.empty() || t == 0) return Matrix::Identity(keep_dim, keep_dim);
  const long n = base.dim();
  const RealVector& lam = base.values();

  // eigenbasis images of the static local matrices, shared across levels
  std::vector<Matrix> tilde_static(terms.size());
  for (size_t j = 0; j < terms.size(); ++j)
    if (terms[j]->time_independent)
      tilde_static[j] =
          base.to_eigenbasis(embed({terms[j]->support, terms[j]->static_matrix},
                                   base.lattice)
                                 .matrix);

  auto level = [&](long steps) {
    double h = t / static_cast<double>(steps);
    Matrix acc = Matrix::Identity(keep_dim, keep_dim);
    Matrix w(n, n);
    for (long k = 0; k < steps; ++k) {
      double s0 = static_cast<double>(k) * h;
      double smid = s0 + 0.5 * h;
      Matrix gen = Matrix::Zero(keep_dim, keep_dim);
      for (size_t j = 0; j < terms.size(); ++j) {
        const Matrix& tilde =
            terms[j]->time_independent
                ? tilde_static[j]
                : base.to_eigenbasis(
                      embed({terms[j]->support, terms[j]->at(smid)}, base.lattice)
                          .matrix);
        // (1/h) int_{s0}^{s0+h} e^{i(l_a - l_b)s} ds
        //   = e^{i(l_a - l_b) smid} sinc((l_a - l_b) h / 2)
        Vector zmid(n);
        for (long i = 0; i < n; ++i) zmid(i) = std::polar(1.0, lam(i) * smid);
        for (long col = 0; col < n; ++col) {
          const double lc = lam(col);
          const cxd zc = std::conj(zmid(col));
          for (long row = 0; row < n; ++row) {
            double x = 0.5 * (lam(row) - lc) * h;
            double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
            w(row, col) = tilde(row, col) * (zmid(row) * zc * sinc);
          }
        }
        if (base.real())
          gen += conjugated_partial_trace(base.eig.vectors_real, w, keep_dim,
                                          lose_dim, keep_left);
        else
          gen += conjugated_partial_trace(base.eig.vectors, w, keep_dim, lose_dim,
                                          keep_left);
      }
      acc = (herm_exp(gen, h) * acc).eval();
    }
    return acc;
  };
  return halving_driver(level, t, control, what);
}

}  // namespace

SplitFactors split_factors(const Propagator& base,
                           const std::vector<PerturbationTerm>& terms, int cut,
                           int half_width, double t,
                           const TimeGridControl& control) {
  const int N = base.lattice.num_sites;
  if (cut < 0 || cut > N - 2) throw geometry_error("cut must leave sites on both sides");
  if (half_width < 0) throw parameter_error("half width must be >= 0");
  std::vector<const PerturbationTerm*> left, right;
  for (const auto& term : terms) {
    if (!term.support.within(base.lattice))
      throw range_error("perturbation support outside lattice");
    if (term.support.hi < cut - half_width)
      left.push_back(&term);
    else if (term.support.lo > cut + half_width)
      right.push_back(&term);
    else
      throw geometry_error(
          "perturbation on [" + std::to_string(term.support.lo) + "," +
          std::to_string(term.support.hi) + "] intersects the free region around cut " +
          std::to_string(cut));
  }
  SiteInterval hat_region{0, cut}, bar_region{cut + 1, N - 1};
  long hat_dim = base.lattice.pow_dim(cut + 1);
  long bar_dim = base.lattice.pow_dim(N - 1 - cut);

  Matrix hat_small = restricted_factor(base, left, hat_dim, bar_dim, true, t,
                                       control, "split_factors(left)");
  Matrix bar_small = restricted_factor(base, right, bar_dim, hat_dim, false, t,
                                       control, "split_factors(right)");

  SplitFactors out;
  out.hat_region = hat_region;
  out.bar_region = bar_region;
  out.hat = embed({hat_region, std::move(hat_small)}, base.lattice);
  out.bar = embed({bar_region, std::move(bar_small)}, base.lattice);
  return out;
}

}  // namespace lrlab
