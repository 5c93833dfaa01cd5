#pragma once

#include "lrlab/types.hpp"

namespace lrlab {

/// Dense operator acting on the sites of `support`; identity elsewhere.
struct LocalOperator {
  SiteInterval support;
  Matrix matrix;

  LocalOperator() = default;
  LocalOperator(SiteInterval s, Matrix m) : support(s), matrix(std::move(m)) {}

  /// Same matrix anchored at a different left edge.
  LocalOperator anchored_at(int lo) const {
    return LocalOperator({lo, lo + support.size() - 1}, matrix);
  }
};

/// Dense operator on the full chain.
struct GlobalOperator {
  Matrix matrix;
  Lattice lattice;

  GlobalOperator() = default;
  GlobalOperator(Matrix m, Lattice lat) : matrix(std::move(m)), lattice(lat) {}

  static GlobalOperator identity(const Lattice& lat) {
    return {Matrix::Identity(lat.dim(), lat.dim()), lat};
  }
  static GlobalOperator zero(const Lattice& lat) {
    return {Matrix::Zero(lat.dim(), lat.dim()), lat};
  }
};

// Pauli matrices and friends, for building probes and spin models.
Matrix pauli_x();
Matrix pauli_y();
Matrix pauli_z();
Matrix pauli_id();
/// "sx","sy","sz","sp","sm","id" -> 2x2 matrix.
Matrix named_pauli(const std::string& name);

/// Tensor product with index convention: site 0 is the leftmost (most
/// significant) factor.
Matrix kron(const Matrix& a, const Matrix& b);

/// Tensor the local operator with identities into the full chain.
GlobalOperator embed(const LocalOperator& op, const Lattice& lattice);

/// target += embed(op) without materializing the embedding.
void embed_add_into(const LocalOperator& op, const Lattice& lattice, Matrix& target);

/// In-place block ^= embed(op) * block without materializing embed(op).
/// `block` has lattice.dim() rows.
void apply_local_left(const LocalOperator& op, const Lattice& lattice,
                      Eigen::Ref<Matrix> block);
void apply_local_left(const LocalOperator& op, const Lattice& lattice,
                      Eigen::Ref<RealMatrix> block);

/// Largest singular value; for (anti-)Hermitian input this is the largest
/// eigenvalue magnitude.
double spectral_norm(const GlobalOperator& x);
double spectral_norm(const LocalOperator& x);

/// ||xy - yx||. Hermitian pairs are routed through a Hermitian eigensolve of
/// i[x,y]; the general case falls back to singular values.
double commutator_norm(const GlobalOperator& x, const GlobalOperator& y);

/// Whether m is Hermitian to within `tol` times its scale.
bool is_hermitian(const Matrix& m, double tol = 1e-12);

/// Normalized partial trace over the complement of `region`, tensored back
/// with identity: the best region-supported approximation used throughout.
GlobalOperator restrict_to(const GlobalOperator& x, const SiteInterval& region);

/// The same channel realized as the exact average over all Pauli strings on
/// the complement. Only for local_dim == 2 and small complements; agrees with
/// restrict_to to round-off.
GlobalOperator pauli_twirl(const GlobalOperator& x, const SiteInterval& region,
                           int max_complement_sites = 8);

}  // namespace lrlab
