#pragma once

#include "lrlab/metrics.hpp"

namespace lrlab {

/// One lemma-level numerical check: either an identity (residual vs
/// tolerance) or an inequality (lhs vs rhs + tolerance).
struct ProofCheckReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string details;
};

/// || V(t) - e^{-iHt} T || with both sides integrated independently.
ProofCheckReport verify_interaction_picture(const Hamiltonian& model,
                                            const PerturbationTerm& pert, double t,
                                            double tol);

/// || T_{g1+g2} - T_{g1} T_{g2} || for generators that commute at all time
/// pairs; rejects pairs whose sampled commutation defect exceeds 1e-12.
ProofCheckReport verify_commuting_factorization(
    const Lattice& lattice, const std::function<Matrix(double)>& g1,
    const std::function<Matrix(double)>& g2, double t, double tol);

/// || T_g - T_e || <= int_0^t || g(s) - e(s) || ds.
ProofCheckReport verify_duhamel(const Lattice& lattice,
                                const std::function<Matrix(double)>& g,
                                const std::function<Matrix(double)>& e, double t,
                                double tol = 1e-8);

/// || T - T_hat T_bar || <= 4 K xi e^{-w/xi} int f h_max, with safety factor 2
/// on the fitted K.
ProofCheckReport verify_splitting_bound(const Hamiltonian& model,
                                        const std::vector<PerturbationTerm>& perts,
                                        int cut, int half_width, double t,
                                        const BoundParams& fitted, double tol);

/// Both directions of the restriction/commutator equivalence: (i) the
/// restriction error at `radius` against K ||a|| f(t) e^{-radius/xi} (safety
/// factor 2), and (ii) the two-step estimate of the commutator at distance
/// radius+1 through the restriction error plus the exactly-commuting rest.
ProofCheckReport verify_restriction_equivalence(const Hamiltonian& model,
                                                const LocalOperator& a, int radius,
                                                double t, const BoundParams& fitted);

}  // namespace lrlab
