#pragma once

#include "lrlab/linalg.hpp"
#include "lrlab/models.hpp"
#include "lrlab/operators.hpp"

namespace lrlab {

/// Exact spectral propagator for a time-independent Hermitian generator.
struct Propagator {
  Lattice lattice;
  HermitianEig eig;

  static Propagator make(const GlobalOperator& h);
  static Propagator make(const Hamiltonian& h);

  long dim() const { return lattice.dim(); }
  bool real() const { return eig.real(); }
  const RealVector& values() const { return eig.values; }

  /// e^{-iHt} as a dense matrix.
  GlobalOperator evolve(double t) const;
  /// e^{iHt} a e^{-iHt}.
  GlobalOperator heisenberg(const GlobalOperator& a, double t) const;
  /// e^{-iHt} applied to a state vector.
  Vector evolve_state(const Vector& psi, double t) const;

  /// V^dagger m V and back.
  Matrix to_eigenbasis(const Matrix& m) const;
  Matrix from_eigenbasis(const Matrix& m) const;

  /// Reconstruction and unitarity residuals against the source operator.
  std::pair<double, double> verify(const GlobalOperator& h) const;
};

/// Step control for the time-ordered product integrators. Each level runs the
/// second-order midpoint product at half the previous step; with `extrapolate`
/// the two finest levels are Richardson-combined (and the result polar-
/// projected back to the unitary group when `reunitarize` is set).
struct TimeGridControl {
  double initial_step = 0.25;
  double tol = 1e-8;
  int max_halvings = 16;
  bool extrapolate = true;
  bool reunitarize = true;

  TimeGridControl with_tol(double t) const {
    TimeGridControl c = *this;
    c.tol = t;
    return c;
  }
};

/// Unitary evolution generated by an arbitrary time-dependent Hermitian
/// G(s), evaluated densely at each midpoint. Costs one dense exponential per
/// step; intended for small chains.
struct TimeOrderedEvolution {
  Lattice lattice;
  std::function<Matrix(double)> generator;
  TimeGridControl control;
};

GlobalOperator evolve_time_ordered(const TimeOrderedEvolution& gen, double t);

/// V(t) for H + sum_j h_j(t) via a Strang product: the cached exact step of H
/// sandwiches the local exponentials of the perturbations, so each step costs
/// one dense multiply plus local work.
GlobalOperator evolve_perturbed(const Propagator& base,
                                const std::vector<PerturbationTerm>& terms,
                                double t, const TimeGridControl& control);

/// Frame generator e^{iHs} h(s) e^{-iHs}.
GlobalOperator interaction_generator(const Propagator& base,
                                     const PerturbationTerm& term, double s);

/// The time-ordered factor T with V(t) = e^{-iHt} T. Midpoint product of the
/// exactly-conjugated frame exponentials: per step one dense multiply.
GlobalOperator interaction_factor(const Propagator& base,
                                  const std::vector<PerturbationTerm>& terms,
                                  double t, const TimeGridControl& control);

/// T computed as e^{+iHt} V(t) with V from the eigendecomposition of the
/// total generator. Exact up to round-off; requires every term static.
GlobalOperator interaction_factor_exact(const Propagator& base,
                                        const std::vector<PerturbationTerm>& terms,
                                        double t);

/// The commuting split T-hat (left restrictions) and T-bar (right
/// restrictions) of the interaction factor around `cut`.
struct SplitFactors {
  GlobalOperator hat;   // supported on [0, cut]
  GlobalOperator bar;   // supported on [cut+1, N-1]
  SiteInterval hat_region;
  SiteInterval bar_region;
};

/// Every perturbation must sit entirely left of cut - half_width or right of
/// cut + half_width. The factors are built from the support-restricted frame
/// generators, integrated with the per-step time average of the restricted
/// generator (the restriction mixes eigenphases, so plain midpoint sampling
/// would need oscillation-resolving steps).
SplitFactors split_factors(const Propagator& base,
                           const std::vector<PerturbationTerm>& terms, int cut,
                           int half_width, double t,
                           const TimeGridControl& control);

}  // namespace lrlab
