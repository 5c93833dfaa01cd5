#include "lrlab/models.hpp"

#include <algorithm>
#include <cmath>

#include "lrlab/linalg.hpp"
#include "lrlab/rng.hpp"

namespace lrlab {

Hamiltonian Hamiltonian::from_terms(const Lattice& lat,
                                    std::vector<LocalOperator> terms) {
  Hamiltonian h;
  h.lattice = lat;
  h.global = Matrix::Zero(lat.dim(), lat.dim());
  for (const auto& term : terms) {
    if (!is_hermitian(term.matrix))
      throw numeric_error("Hamiltonian term is not Hermitian");
    embed_add_into(term, lat, h.global);
  }
  h.terms = std::move(terms);
  return h;
}

Hamiltonian Hamiltonian::with_terms(const std::vector<LocalOperator>& extra) const {
  std::vector<LocalOperator> all = terms;
  all.insert(all.end(), extra.begin(), extra.end());
  return from_terms(lattice, std::move(all));
}

PerturbationTerm PerturbationTerm::constant(const SiteInterval& support, Matrix local) {
  if (!is_hermitian(local)) throw numeric_error("perturbation generator is not Hermitian");
  PerturbationTerm t;
  t.support = support;
  t.time_independent = true;
  t.static_norm = matrix_spectral_norm(local);
  t.static_matrix = std::move(local);
  Matrix m = t.static_matrix;
  double nrm = t.static_norm;
  t.generator = [m](double) { return m; };
  t.envelope = [nrm](double) { return nrm; };
  return t;
}

double disorder_value(const DisorderSpec& spec, std::uint64_t realization, int site) {
  return uniform_symmetric(
      mix_key(spec.base_seed, rng_stream::disorder, realization,
              static_cast<std::uint64_t>(site)),
      spec.width);
}

Shape1D Shape1D::linear_ramp() {
  return {[](double u) { return std::clamp(u, 0.0, 1.0); }};
}

Shape1D Shape1D::cosine_wave() {
  return {[](double u) { return std::cos(6.283185307179586476925286766559 * u); }};
}

Shape1D Shape1D::table(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw parameter_error("shape table needs >= 2 matching samples");
  for (size_t i = 1; i < xs.size(); ++i)
    if (xs[i] <= xs[i - 1]) throw parameter_error("shape table abscissae must increase");
  return {[xs = std::move(xs), ys = std::move(ys)](double u) {
    if (u <= xs.front()) return ys.front();
    if (u >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), u);
    size_t i = static_cast<size_t>(it - xs.begin());
    double w = (u - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + w * (ys[i] - ys[i - 1]);
  }};
}

Hamiltonian build_xxz(const Lattice& lattice, double delta, double coupling) {
  if (lattice.num_sites < 2) throw parameter_error("XXZ chain needs at least 2 sites");
  if (lattice.local_dim != 2) throw parameter_error("XXZ chain is a spin-1/2 model");
  Matrix bond = kron(pauli_x(), pauli_x()) + kron(pauli_y(), pauli_y()) +
                delta * kron(pauli_z(), pauli_z());
  bond *= coupling;
  std::vector<LocalOperator> terms;
  terms.reserve(lattice.num_sites - 1);
  for (int j = 0; j + 1 < lattice.num_sites; ++j)
    terms.push_back({{j, j + 1}, bond});
  return Hamiltonian::from_terms(lattice, std::move(terms));
}

std::vector<PerturbationTerm> build_disorder_field(const Lattice& lattice,
                                                   const DisorderSpec& spec,
                                                   std::uint64_t realization) {
  if (!spec.region.within(lattice)) throw range_error("disorder region outside lattice");
  if (spec.width < 0) throw parameter_error("disorder width must be >= 0");
  std::vector<PerturbationTerm> terms;
  terms.reserve(spec.region.size());
  for (int j = spec.region.lo; j <= spec.region.hi; ++j) {
    double w = disorder_value(spec, realization, j);
    terms.push_back(PerturbationTerm::constant({j, j}, w * pauli_z()));
  }
  return terms;
}

LocalOperator build_goe_grain(int n_sites, int r, std::uint64_t seed,
                              std::uint64_t realization, double sigma) {
  if (n_sites < 1) throw parameter_error("grain needs at least one site");
  long dim = 1;
  for (int i = 0; i < n_sites; ++i) {
    dim *= r;
    if (dim > Lattice::default_max_dim)
      throw budget_error("grain dimension exceeds dense budget");
  }
  if (sigma <= 0) sigma = 1.0 / std::sqrt(static_cast<double>(dim));
  CounterRng rng(seed, rng_stream::grain, realization);
  Matrix m(dim, dim);
  for (long i = 0; i < dim; ++i)
    for (long j = i; j < dim; ++j) {
      double g = sigma * rng.next_gaussian();
      if (i == j) g *= std::sqrt(2.0);
      m(i, j) = g;
      m(j, i) = g;
    }
  return {{0, n_sites - 1}, std::move(m)};
}

PerturbationTerm build_avalanche(const Hamiltonian& model, const SiteInterval& region,
                                 const LocalOperator& grain) {
  if (!(grain.support == region))
    throw shape_error("grain support must equal the avalanche region");
  if (!region.within(model.lattice)) throw range_error("avalanche region outside lattice");
  Lattice sub(region.size(), model.lattice.local_dim);
  Matrix local = grain.matrix;
  if (local.rows() != sub.dim()) throw shape_error("grain matrix does not match region");
  for (const auto& term : model.terms) {
    if (!region.contains(term.support)) continue;
    LocalOperator shifted{{term.support.lo - region.lo, term.support.hi - region.lo},
                          term.matrix};
    local -= embed(shifted, sub).matrix;
  }
  return PerturbationTerm::constant(region, std::move(local));
}

DualPair build_dual_pair(const Hamiltonian& clean, const DisorderSpec& spec,
                         std::uint64_t realization) {
  if (!spec.region.within(clean.lattice))
    throw range_error("dual-pair disorder region outside lattice");
  DualPair pair;
  std::vector<LocalOperator> field;
  for (int j = 0; j < clean.lattice.num_sites; ++j) {
    double w = disorder_value(spec, realization, j);
    field.push_back({{j, j}, w * pauli_z()});
    if (!spec.region.contains(j))
      pair.undo_terms.push_back(PerturbationTerm::constant({j, j}, -w * pauli_z()));
  }
  pair.h_prime = clean.with_terms(field);
  return pair;
}

PerturbationTerm make_adiabatic(const PerturbationTerm& h0, double tau,
                                const Shape1D& ramp) {
  if (tau <= 0) throw parameter_error("adiabatic time scale must be > 0");
  PerturbationTerm t;
  t.support = h0.support;
  t.time_independent = false;
  auto shape = ramp;
  t.generator = [h0, shape, tau](double s) { return shape(s / tau) * h0.at(s); };
  t.envelope = [h0, shape, tau](double s) {
    return std::abs(shape(s / tau)) * h0.envelope_at(s);
  };
  return t;
}

PerturbationTerm make_periodic(const PerturbationTerm& h0, double period,
                               const Shape1D& waveform) {
  if (period <= 0) throw parameter_error("period must be > 0");
  double wmax = 0.0;
  for (int i = 0; i < 4096; ++i)
    wmax = std::max(wmax, std::abs(waveform(i / 4096.0)));
  PerturbationTerm t;
  t.support = h0.support;
  t.time_independent = false;
  auto shape = waveform;
  t.generator = [h0, shape, period](double s) {
    return shape(std::fmod(s, period) / period) * h0.at(s);
  };
  t.envelope = [h0, wmax](double s) { return wmax * h0.envelope_at(s); };
  return t;
}

}  // namespace lrlab
