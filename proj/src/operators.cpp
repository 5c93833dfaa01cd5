#include "lrlab/operators.hpp"

#include <vector>

#include "lrlab/linalg.hpp"

namespace lrlab {

Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Matrix pauli_y() {
  Matrix m(2, 2);
  m << cxd(0, 0), cxd(0, -1), cxd(0, 1), cxd(0, 0);
  return m;
}
Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
Matrix pauli_id() { return Matrix::Identity(2, 2); }

Matrix named_pauli(const std::string& name) {
  if (name == "sx" || name == "x") return pauli_x();
  if (name == "sy" || name == "y") return pauli_y();
  if (name == "sz" || name == "z") return pauli_z();
  if (name == "id" || name == "1") return pauli_id();
  if (name == "sp") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1;
    return m;
  }
  if (name == "sm") {
    Matrix m = Matrix::Zero(2, 2);
    m(1, 0) = 1;
    return m;
  }
  throw parameter_error("unknown operator name: " + name);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

namespace {

void check_support(const LocalOperator& op, const Lattice& lat) {
  if (!op.support.within(lat))
    throw range_error("support [" + std::to_string(op.support.lo) + "," +
                      std::to_string(op.support.hi) + "] outside lattice of " +
                      std::to_string(lat.num_sites) + " sites");
  long want = lat.pow_dim(op.support.size());
  if (op.matrix.rows() != want || op.matrix.cols() != want)
    throw shape_error("local matrix is " + std::to_string(op.matrix.rows()) +
                      "x" + std::to_string(op.matrix.cols()) + ", support needs " +
                      std::to_string(want));
}

struct Split {
  long left, mid, right;  // dims of the factors left/of/right of the support
};

Split split_dims(const SiteInterval& s, const Lattice& lat) {
  return {lat.pow_dim(s.lo), lat.pow_dim(s.size()),
          lat.pow_dim(lat.num_sites - 1 - s.hi)};
}

}  // namespace

void embed_add_into(const LocalOperator& op, const Lattice& lattice, Matrix& target) {
  check_support(op, lattice);
  if (!op.matrix.allFinite()) throw numeric_error("embed: non-finite entries");
  if (target.rows() != lattice.dim() || target.cols() != lattice.dim())
    throw shape_error("embed target dimension mismatch");
  auto [L, M, R] = split_dims(op.support, lattice);
  for (long a = 0; a < L; ++a)
    for (long m = 0; m < M; ++m)
      for (long mp = 0; mp < M; ++mp) {
        cxd v = op.matrix(m, mp);
        if (v == cxd(0, 0)) continue;
        long row0 = (a * M + m) * R;
        long col0 = (a * M + mp) * R;
        for (long b = 0; b < R; ++b) target(row0 + b, col0 + b) += v;
      }
}

GlobalOperator embed(const LocalOperator& op, const Lattice& lattice) {
  Matrix out = Matrix::Zero(lattice.dim(), lattice.dim());
  embed_add_into(op, lattice, out);
  return {std::move(out), lattice};
}

namespace {

template <typename Mat>
void apply_local_left_impl(const LocalOperator& op, const Lattice& lattice,
                           Eigen::Ref<Mat> block) {
  check_support(op, lattice);
  if (block.rows() != lattice.dim())
    throw shape_error("block rows do not match lattice dimension");
  auto [L, M, R] = split_dims(op.support, lattice);
  using Stride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
  using Scalar = typename Mat::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> lm;
  if constexpr (std::is_same_v<Scalar, double>)
    lm = op.matrix.real();
  else
    lm = op.matrix;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> tmp(M, block.cols());
  for (long a = 0; a < L; ++a)
    for (long b = 0; b < R; ++b) {
      Eigen::Map<Mat, 0, Stride> sub(block.data() + a * M * R + b, M,
                                     block.cols(),
                                     Stride(block.outerStride(), R));
      tmp.noalias() = lm * sub;
      sub = tmp;
    }
}

}  // namespace

void apply_local_left(const LocalOperator& op, const Lattice& lattice,
                      Eigen::Ref<Matrix> block) {
  apply_local_left_impl<Matrix>(op, lattice, block);
}
void apply_local_left(const LocalOperator& op, const Lattice& lattice,
                      Eigen::Ref<RealMatrix> block) {
  if (!op.matrix.imag().isZero(0.0))
    throw shape_error("real block apply needs a real local operator");
  apply_local_left_impl<RealMatrix>(op, lattice, block);
}

double spectral_norm(const GlobalOperator& x) { return matrix_spectral_norm(x.matrix); }
double spectral_norm(const LocalOperator& x) { return matrix_spectral_norm(x.matrix); }

bool is_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  double scale = 1.0, defect = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i <= j; ++i) {
      scale = std::max(scale, std::abs(m(i, j)));
      defect = std::max(defect, std::abs(m(i, j) - std::conj(m(j, i))));
    }
  return defect <= tol * scale;
}

double commutator_norm(const GlobalOperator& x, const GlobalOperator& y) {
  if (!(x.lattice == y.lattice) || x.matrix.rows() != y.matrix.rows())
    throw shape_error("commutator of operators on different spaces");
  Matrix c(x.matrix.rows(), x.matrix.cols());
  c.noalias() = x.matrix * y.matrix;
  c.noalias() -= y.matrix * x.matrix;
  if (is_hermitian(x.matrix) && is_hermitian(y.matrix)) {
    // i[x,y] is Hermitian.
    Matrix ic = cxd(0, 1) * c;
    RealVector ev = hermitian_eigenvalues(ic);
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  }
  return matrix_spectral_norm(c);
}

GlobalOperator restrict_to(const GlobalOperator& x, const SiteInterval& region) {
  if (!region.within(x.lattice)) throw range_error("restriction region outside lattice");
  auto [L, M, R] = split_dims(region, x.lattice);
  if (L == 1 && R == 1) return x;  // full lattice: nothing traced out
  Matrix reduced = Matrix::Zero(M, M);
  for (long a = 0; a < L; ++a)
    for (long m = 0; m < M; ++m)
      for (long mp = 0; mp < M; ++mp) {
        long row0 = (a * M + m) * R;
        long col0 = (a * M + mp) * R;
        cxd s(0, 0);
        for (long b = 0; b < R; ++b) s += x.matrix(row0 + b, col0 + b);
        reduced(m, mp) += s;
      }
  reduced /= static_cast<double>(L * R);
  return embed({region, std::move(reduced)}, x.lattice);
}

GlobalOperator pauli_twirl(const GlobalOperator& x, const SiteInterval& region,
                           int max_complement_sites) {
  if (!region.within(x.lattice)) throw range_error("twirl region outside lattice");
  if (x.lattice.local_dim != 2)
    throw parameter_error("pauli twirl is defined for local dimension 2");
  const int N = x.lattice.num_sites;
  std::vector<int> comp;
  for (int j = 0; j < N; ++j)
    if (!region.contains(j)) comp.push_back(j);
  const int c = static_cast<int>(comp.size());
  if (c > max_complement_sites)
    throw budget_error("twirl complement has " + std::to_string(c) +
                       " sites, budget is " + std::to_string(max_complement_sites));
  const long n = x.lattice.dim();
  long strings = 1;
  for (int i = 0; i < c; ++i) strings *= 4;

  Matrix acc = Matrix::Zero(n, n);
  std::vector<long> flip(n);
  std::vector<cxd> phase(n);
  for (long code = 0; code < strings; ++code) {
    // digits of `code` in base 4 select I,X,Y,Z per complement site
    long mask = 0;
    long rem = code;
    std::vector<int> which(c);
    for (int i = 0; i < c; ++i) {
      which[i] = static_cast<int>(rem % 4);
      rem /= 4;
      if (which[i] == 1 || which[i] == 2)
        mask |= 1L << (N - 1 - comp[i]);  // site 0 is the most significant bit
    }
    for (long g = 0; g < n; ++g) {
      flip[g] = g ^ mask;
      cxd ph(1, 0);
      for (int i = 0; i < c; ++i) {
        int bit = static_cast<int>((g >> (N - 1 - comp[i])) & 1L);
        switch (which[i]) {
          case 2: ph *= bit == 0 ? cxd(0, 1) : cxd(0, -1); break;  // Y
          case 3: ph *= bit == 0 ? 1.0 : -1.0; break;              // Z
          default: break;
        }
      }
      phase[g] = ph;
    }
    // (P x P^dagger)(g,g') = ph(flip g) conj(ph(flip g')) x(flip g, flip g')
    for (long gp = 0; gp < n; ++gp)
      for (long g = 0; g < n; ++g)
        acc(g, gp) += phase[flip[g]] * std::conj(phase[flip[gp]]) *
                      x.matrix(flip[g], flip[gp]);
  }
  acc /= static_cast<double>(strings);
  return {std::move(acc), x.lattice};
}

}  // namespace lrlab
