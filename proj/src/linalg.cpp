#include "lrlab/linalg.hpp"

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <string>
#include <vector>

#include "lrlab/rng.hpp"

#ifdef LRLAB_USE_LAPACKE
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>
#endif

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace lrlab {

namespace {

bool cpu_has_avx512() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq") &&
         __builtin_cpu_supports("avx512bw") && __builtin_cpu_supports("avx512vl");
#else
  return false;
#endif
}

bool is_real(const Matrix& m, double tol = 0.0) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j).imag()) > tol) return false;
  return true;
}

}  // namespace

void init_runtime(int blas_threads) {
  static std::once_flag flag;
  std::call_once(flag, [blas_threads] {
    std::string t = std::to_string(blas_threads > 0 ? blas_threads : 1);
    ::setenv("OPENBLAS_NUM_THREADS", t.c_str(), 0);
    ::setenv("OMP_NUM_THREADS", t.c_str(), 0);
    if (cpu_has_avx512()) ::setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
  });
}

HermitianEig hermitian_eigensolve(const Matrix& m) {
  if (m.rows() != m.cols()) throw shape_error("eigensolve needs a square matrix");
  if (!m.allFinite()) throw numeric_error("eigensolve: non-finite entries");
  const long n = m.rows();
  HermitianEig out;
  if (is_real(m)) {
    RealMatrix a = m.real();
#ifdef LRLAB_USE_LAPACKE
    out.values.resize(n);
    int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<int>(n),
                              a.data(), static_cast<int>(n), out.values.data());
    if (info != 0) throw numeric_error("dsyevd failed, info=" + std::to_string(info));
    out.vectors_real = std::move(a);
#else
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(a);
    if (es.info() != Eigen::Success) throw numeric_error("real eigensolve failed");
    out.values = es.eigenvalues();
    out.vectors_real = es.eigenvectors();
#endif
    // complex copy left empty on purpose: real-path consumers use vectors_real
  } else {
#ifdef LRLAB_USE_LAPACKE
    Matrix a = m;
    out.values.resize(n);
    int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<int>(n),
                              a.data(), static_cast<int>(n), out.values.data());
    if (info != 0) throw numeric_error("zheevd failed, info=" + std::to_string(info));
    out.vectors = std::move(a);
#else
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw numeric_error("eigensolve failed");
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
#endif
  }
  return out;
}

RealVector hermitian_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw shape_error("eigenvalues need a square matrix");
  if (!m.allFinite()) throw numeric_error("eigenvalues: non-finite entries");
  const long n = m.rows();
#ifdef LRLAB_USE_LAPACKE
  RealVector w(n);
  if (is_real(m)) {
    RealMatrix a = m.real();
    int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', static_cast<int>(n),
                              a.data(), static_cast<int>(n), w.data());
    if (info != 0) throw numeric_error("dsyevd failed, info=" + std::to_string(info));
  } else {
    Matrix a = m;
    int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', static_cast<int>(n),
                              a.data(), static_cast<int>(n), w.data());
    if (info != 0) throw numeric_error("zheevd failed, info=" + std::to_string(info));
  }
  return w;
#else
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numeric_error("eigensolve failed");
  return es.eigenvalues();
#endif
}

double matrix_spectral_norm(const Matrix& m) {
  if (!m.allFinite()) throw numeric_error("spectral norm: non-finite entries");
  if (m.size() == 0) return 0.0;
  if (m.rows() <= 96 && m.cols() <= 96) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
  }
  // Largest eigenvalue of the Gram matrix; relative accuracy survives the
  // squaring since eig errors scale with ||m||^2.
  Matrix g;
  if (m.rows() >= m.cols())
    g.noalias() = m.adjoint() * m;
  else
    g.noalias() = m * m.adjoint();
  RealVector ev = hermitian_eigenvalues(g);
  double top = std::max(0.0, ev(ev.size() - 1));
  return std::sqrt(top);
}

double lanczos_extreme_magnitude(
    const std::function<void(const Vector&, Vector&)>& apply_op, long dim,
    std::uint64_t seed, double rtol, int max_iter, double abs_floor) {
  if (dim <= 0) throw parameter_error("lanczos: empty space");
  max_iter = static_cast<int>(std::min<long>(max_iter, dim));

  CounterRng rng(seed, rng_stream::lanczos, 0);
  Vector v(dim);
  for (long i = 0; i < dim; ++i)
    v(i) = cxd(2.0 * rng.next_uniform01() - 1.0, 2.0 * rng.next_uniform01() - 1.0);
  v.normalize();

  std::vector<Vector> basis;
  basis.reserve(max_iter + 1);
  basis.push_back(v);
  std::vector<double> alpha, beta;
  Vector w(dim);

  double theta = 0.0;
  for (int k = 0; k < max_iter; ++k) {
    apply_op(basis[k], w);
    double a = std::real(basis[k].dot(w));
    alpha.push_back(a);
    w -= a * basis[k];
    if (k > 0) w -= beta[k - 1] * basis[k - 1];
    // Two passes of Gram-Schmidt keep the basis orthogonal at machine level.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) w -= q.dot(w) * q;
    double b = w.norm();

    // Ritz values of the current tridiagonal matrix.
    const int kk = static_cast<int>(alpha.size());
    RealMatrix t = RealMatrix::Zero(kk, kk);
    for (int i = 0; i < kk; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < kk) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(t);
    int idx = 0;
    for (int i = 1; i < kk; ++i)
      if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(idx))) idx = i;
    theta = es.eigenvalues()(idx);
    double resid = b * std::abs(es.eigenvectors()(kk - 1, idx));

    if (resid <= std::max(abs_floor, rtol * std::abs(theta))) return std::abs(theta);
    if (b <= abs_floor) return std::abs(theta);  // invariant subspace
    if (kk >= dim) break;

    beta.push_back(b);
    basis.push_back(w / b);
  }
  return std::abs(theta);
}

void multiply_real_complex(const RealMatrix& a, const Matrix& b, Matrix& out) {
  RealMatrix re(a.rows(), b.cols()), im(a.rows(), b.cols());
  re.noalias() = a * b.real();
  im.noalias() = a * b.imag();
  out.resize(a.rows(), b.cols());
  out.real() = re;
  out.imag() = im;
}

void multiply_realT_complex(const RealMatrix& a, const Matrix& b, Matrix& out) {
  RealMatrix re(a.cols(), b.cols()), im(a.cols(), b.cols());
  re.noalias() = a.transpose() * b.real();
  im.noalias() = a.transpose() * b.imag();
  out.resize(a.cols(), b.cols());
  out.real() = re;
  out.imag() = im;
}

void multiply_complex_real(const Matrix& a, const RealMatrix& b, Matrix& out) {
  RealMatrix re(a.rows(), b.cols()), im(a.rows(), b.cols());
  re.noalias() = a.real() * b;
  im.noalias() = a.imag() * b;
  out.resize(a.rows(), b.cols());
  out.real() = re;
  out.imag() = im;
}

void multiply_complex_realT(const Matrix& a, const RealMatrix& b, Matrix& out) {
  RealMatrix re(a.rows(), b.rows()), im(a.rows(), b.rows());
  re.noalias() = a.real() * b.transpose();
  im.noalias() = a.imag() * b.transpose();
  out.resize(a.rows(), b.rows());
  out.real() = re;
  out.imag() = im;
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double fa,
               double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double fa,
                double b, double fb, double m, double fm, double whole,
                double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(f, a, fa, m, fm, lm, flm);
  double right = simpson(f, m, fm, b, fb, rm, frm);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, int max_depth) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  double whole = simpson(f, a, fa, b, fb, m, fm);
  double scale = std::max({std::abs(whole), std::abs(b - a) * std::abs(fm), 1e-300});
  return adaptive(f, a, fa, b, fb, m, fm, whole, rel_tol * scale, max_depth);
}

}  // namespace lrlab
