#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lrlab/operators.hpp"

namespace lrlab {

/// Sum of Hermitian local terms with the embedded total cached.
struct Hamiltonian {
  Lattice lattice;
  std::vector<LocalOperator> terms;
  Matrix global;

  static Hamiltonian from_terms(const Lattice& lat, std::vector<LocalOperator> terms);

  GlobalOperator global_op() const { return {global, lattice}; }
  /// Hamiltonian with extra terms added (global matrix rebuilt).
  Hamiltonian with_terms(const std::vector<LocalOperator>& extra) const;
};

/// A perturbation h_j(t): fixed support, time-dependent Hermitian local
/// generator, and a norm envelope with ||generator(t)|| <= envelope(t).
struct PerturbationTerm {
  SiteInterval support;
  std::function<Matrix(double)> generator;
  std::function<double(double)> envelope;
  bool time_independent = false;
  Matrix static_matrix;
  double static_norm = 0.0;

  Matrix at(double t) const { return time_independent ? static_matrix : generator(t); }
  double envelope_at(double t) const {
    return time_independent ? static_norm : envelope(t);
  }

  static PerturbationTerm constant(const SiteInterval& support, Matrix local);
};

/// Site disorder: omega_j drawn uniformly from [-width, width], a pure
/// function of (base_seed, realization, site).
struct DisorderSpec {
  SiteInterval region;
  double width = 0.0;
  std::uint64_t base_seed = 0;
};

double disorder_value(const DisorderSpec& spec, std::uint64_t realization, int site);

/// The same total Hamiltonian written as (clean + disorder on R) and as
/// (disordered-everywhere + undo terms on the complement of R).
struct DualPair {
  Hamiltonian h_prime;
  std::vector<PerturbationTerm> undo_terms;
};

/// Scalar shape on [0,1]: ramps for adiabatic switching, waveforms for
/// periodic driving. Tables are linearly interpolated.
struct Shape1D {
  std::function<double(double)> f;
  double operator()(double u) const { return f(u); }

  static Shape1D linear_ramp();   // clamp(u, 0, 1)
  static Shape1D cosine_wave();   // cos(2 pi u)
  static Shape1D table(std::vector<double> xs, std::vector<double> ys);
};

/// Open XXZ chain: sum_j (sx sx + sy sy + delta sz sz), coupling = 1.
Hamiltonian build_xxz(const Lattice& lattice, double delta, double coupling = 1.0);

/// One term omega_j sz_j per site of spec.region.
std::vector<PerturbationTerm> build_disorder_field(const Lattice& lattice,
                                                   const DisorderSpec& spec,
                                                   std::uint64_t realization);

/// GOE draw: real symmetric, off-diagonal variance sigma^2, diagonal 2 sigma^2,
/// anchored at [0, n_sites-1]. sigma <= 0 selects the default 1/sqrt(r^n_sites)
/// that keeps the norm O(1).
LocalOperator build_goe_grain(int n_sites, int r, std::uint64_t seed,
                              std::uint64_t realization = 0, double sigma = -1.0);

/// Ergodic-grain perturbation: remove the model's bonds inside `region` and
/// add `grain` there. The envelope is the (constant) norm of the result.
PerturbationTerm build_avalanche(const Hamiltonian& model, const SiteInterval& region,
                                 const LocalOperator& grain);

/// clean + disorder-on-region == h_prime + undo, exactly, per realization.
DualPair build_dual_pair(const Hamiltonian& clean, const DisorderSpec& spec,
                         std::uint64_t realization);

/// h(t) = ramp(t / tau) * h0(t).
PerturbationTerm make_adiabatic(const PerturbationTerm& h0, double tau,
                                const Shape1D& ramp);

/// h(t) = waveform((t mod T) / T) * h0(t); envelope takes the max over one
/// period.
PerturbationTerm make_periodic(const PerturbationTerm& h0, double period,
                               const Shape1D& waveform);

}  // namespace lrlab
