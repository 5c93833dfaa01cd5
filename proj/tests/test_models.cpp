#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lrlab/linalg.hpp"
#include "lrlab/models.hpp"

using namespace lrlab;

TEST_SUITE_BEGIN("models");

TEST_CASE("xxz two-site spectra") {
  Lattice lat(2);
  {
    Hamiltonian h = build_xxz(lat, 1.0);
    RealVector ev = hermitian_eigenvalues(h.global);
    CHECK(ev(0) == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(ev(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev(2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev(3) == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    Hamiltonian h = build_xxz(lat, 0.0);
    RealVector ev = hermitian_eigenvalues(h.global);
    CHECK(ev(0) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(std::abs(ev(1)) <= 1e-12);
    CHECK(std::abs(ev(2)) <= 1e-12);
    CHECK(ev(3) == doctest::Approx(2.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(build_xxz(Lattice(1), 0.5), parameter_error);
}

TEST_CASE("xxz commutes with total magnetization") {
  Lattice lat(5);
  Hamiltonian h = build_xxz(lat, 0.7);
  CHECK(is_hermitian(h.global));
  Matrix sz_total = Matrix::Zero(lat.dim(), lat.dim());
  for (int j = 0; j < lat.num_sites; ++j)
    embed_add_into({{j, j}, pauli_z()}, lat, sz_total);
  CHECK(commutator_norm({h.global, lat}, {sz_total, lat}) <= 1e-12);
}

TEST_CASE("disorder field determinism and moments") {
  Lattice lat(6);
  DisorderSpec spec{{0, 5}, 2.5, 99};

  auto t0 = build_disorder_field(lat, spec, 4);
  auto t1 = build_disorder_field(lat, spec, 4);
  REQUIRE(t0.size() == 6);
  for (size_t i = 0; i < t0.size(); ++i)
    CHECK((t0[i].static_matrix - t1[i].static_matrix).cwiseAbs().maxCoeff() == 0.0);

  DisorderSpec zero{{0, 5}, 0.0, 99};
  for (const auto& t : build_disorder_field(lat, zero, 0))
    CHECK(t.static_norm == 0.0);

  // mean over many draws: 0 +- 3 sigma / sqrt(n), sigma = W / sqrt(3)
  const int n = 100000;
  double sum = 0.0;
  for (int r = 0; r < n; ++r) sum += disorder_value(spec, r, 3);
  double mean = sum / n;
  double sigma = spec.width / std::sqrt(3.0);
  CHECK(std::abs(mean) <= 3.0 * sigma / std::sqrt(static_cast<double>(n)));

  for (const auto& t : t0) CHECK(std::abs(t.static_norm) <= spec.width);
}

TEST_CASE("goe grain") {
  LocalOperator g = build_goe_grain(2, 2, 11, 0);
  CHECK(g.matrix.rows() == 4);
  CHECK((g.matrix - g.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.matrix.imag().isZero(0.0));

  // default sigma keeps the norm O(1): mean over draws lands in [1, 3]
  double acc = 0.0;
  for (int r = 0; r < 200; ++r)
    acc += matrix_spectral_norm(build_goe_grain(2, 2, 11, r).matrix);
  double mean_norm = acc / 200.0;
  CHECK(mean_norm >= 1.0);
  CHECK(mean_norm <= 3.0);

  CHECK_THROWS_AS(build_goe_grain(20, 2, 1), budget_error);
}

TEST_CASE("avalanche construction") {
  Lattice lat(6);
  Hamiltonian h = build_xxz(lat, 0.4);
  SiteInterval region{1, 3};

  // grain equal to the removed bonds cancels exactly
  Lattice sub(region.size());
  Matrix bonds = Matrix::Zero(sub.dim(), sub.dim());
  for (const auto& term : h.terms)
    if (region.contains(term.support))
      embed_add_into({{term.support.lo - 1, term.support.hi - 1}, term.matrix}, sub,
                     bonds);
  PerturbationTerm cancel = build_avalanche(h, region, {region, bonds});
  CHECK(cancel.static_norm <= 1e-14);

  // with a GOE grain, the combined Hamiltonian has no model bonds inside
  LocalOperator grain = build_goe_grain(region.size(), 2, 5, 0).anchored_at(region.lo);
  PerturbationTerm av = build_avalanche(h, region, grain);
  Matrix combined = h.global;
  embed_add_into({av.support, av.static_matrix}, lat, combined);
  Matrix expect = embed(grain, lat).matrix;
  for (const auto& term : h.terms)
    if (!region.contains(term.support)) embed_add_into(term, lat, expect);
  CHECK((combined - expect).cwiseAbs().maxCoeff() <= 1e-13);

  // triangle inequality on the norm
  double bound = matrix_spectral_norm(grain.matrix);
  for (const auto& term : h.terms)
    if (region.contains(term.support)) bound += matrix_spectral_norm(term.matrix);
  CHECK(av.static_norm <= bound + 1e-12);

  CHECK_THROWS_AS(build_avalanche(h, region, grain.anchored_at(0)), shape_error);
}

TEST_CASE("dual pair identity") {
  Lattice lat(4);
  Hamiltonian clean = build_xxz(lat, 1.0);
  DisorderSpec spec{{1, 2}, 3.0, 21};

  for (std::uint64_t r = 0; r < 3; ++r) {
    DualPair dual = build_dual_pair(clean, spec, r);
    Matrix lhs = clean.global;
    for (int j = spec.region.lo; j <= spec.region.hi; ++j)
      embed_add_into({{j, j}, disorder_value(spec, r, j) * pauli_z()}, lat, lhs);
    Matrix rhs = dual.h_prime.global;
    for (const auto& u : dual.undo_terms)
      embed_add_into({u.support, u.static_matrix}, lat, rhs);
    CHECK(matrix_spectral_norm(lhs - rhs) <= 1e-13);
  }

  DisorderSpec zero{{1, 2}, 0.0, 21};
  DualPair flat = build_dual_pair(clean, zero, 0);
  for (const auto& u : flat.undo_terms) CHECK(u.static_norm == 0.0);
  CHECK((flat.h_prime.global - clean.global).cwiseAbs().maxCoeff() == 0.0);

  DisorderSpec full{{0, 3}, 2.0, 21};
  CHECK(build_dual_pair(clean, full, 0).undo_terms.empty());
}

TEST_CASE("adiabatic ramp") {
  PerturbationTerm h0 = PerturbationTerm::constant({0, 0}, 0.8 * pauli_x());
  PerturbationTerm ad = make_adiabatic(h0, 4.0, Shape1D::linear_ramp());
  CHECK(ad.at(0.0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ad.at(4.0) - h0.static_matrix).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(make_adiabatic(h0, 0.0, Shape1D::linear_ramp()), parameter_error);

  // mean value point: int_0^t ||h(s)|| f(s) ds = ||h(s')|| int_0^t f(s) ds
  // for some s' in [0, t/tau], with f(s) = s
  const double tau = 4.0, t = 2.0;
  auto f = [](double s) { return s; };
  double lhs = integrate([&](double s) { return ad.envelope_at(s) * f(s); }, 0, t);
  double integral_f = integrate(f, 0, t);
  auto g = [&](double u) { return std::abs(u <= 1.0 ? u : 1.0) * h0.static_norm; };
  // bisection for g(s') = lhs / integral_f on [0, t/tau]
  double target = lhs / integral_f;
  double lo = 0.0, hi = t / tau;
  REQUIRE(g(lo) <= target);
  REQUIRE(g(hi) >= target);
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) < target ? lo : hi) = mid;
  }
  double sp = 0.5 * (lo + hi);
  CHECK(sp >= 0.0);
  CHECK(sp <= t / tau);
  CHECK(g(sp) == doctest::Approx(target).epsilon(1e-9));
}

TEST_CASE("periodic envelope and decoupling") {
  PerturbationTerm h0 = PerturbationTerm::constant({0, 0}, pauli_z());
  const double T = 0.5;
  PerturbationTerm per = make_periodic(h0, T, Shape1D::cosine_wave());
  for (double t : {0.1, 0.33, 0.49})
    CHECK((per.at(t + T) - per.at(t)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(make_periodic(h0, -1.0, Shape1D::cosine_wave()), parameter_error);

  // decoupling: int ||h|| f -> (1/T int_period ||h||) int f + O(T), f(s) = s.
  // Integrate panel-by-panel at a quarter period so the oscillation cannot
  // alias the adaptive rule.
  auto f = [](double s) { return s; };
  const double t_end = 10.0;
  auto panel_integrate = [&](const std::function<double(double)>& fn, double a,
                             double b, double width) {
    long panels = std::max<long>(1, static_cast<long>(std::ceil((b - a) / width)));
    double acc = 0.0;
    for (long k = 0; k < panels; ++k)
      acc += integrate(fn, a + (b - a) * k / panels, a + (b - a) * (k + 1) / panels);
    return acc;
  };
  std::vector<double> residual_over_T;
  for (double period : {1.0, 0.1, 0.01}) {
    auto envelope = [&](double s) {
      return std::abs(std::cos(6.283185307179586 * std::fmod(s, period) / period));
    };
    double lhs = panel_integrate([&](double s) { return envelope(s) * f(s); }, 0,
                                 t_end, period / 4.0);
    double period_mean = panel_integrate(envelope, 0, period, period / 4.0) / period;
    double rhs = period_mean * integrate(f, 0, t_end);
    double max_h = 1.0, max_f = t_end;
    double resid = std::abs(lhs - rhs);
    CHECK(resid <= 3.0 * period * max_h * max_f);
    residual_over_T.push_back(resid / period);
  }
  // O(T): residual / T stays bounded as T shrinks
  for (double r : residual_over_T) CHECK(r <= 3.0 * 10.0);

  // constant waveform decouples exactly at any period
  std::vector<double> xs{0.0, 1.0}, ys{1.0, 1.0};
  PerturbationTerm flat = make_periodic(h0, 0.37, Shape1D::table(xs, ys));
  double lhs = integrate([&](double s) { return flat.envelope_at(s) * f(s); }, 0, 5.0);
  CHECK(lhs == doctest::Approx(integrate(f, 0, 5.0)).epsilon(1e-10));
}

TEST_CASE("generators stay Hermitian and inside their envelopes") {
  PerturbationTerm h0 = PerturbationTerm::constant({0, 0}, 1.3 * pauli_y());
  PerturbationTerm ad = make_adiabatic(h0, 2.0, Shape1D::linear_ramp());
  PerturbationTerm per = make_periodic(h0, 0.7, Shape1D::cosine_wave());
  for (double t = 0.0; t <= 3.0; t += 0.17) {
    for (const auto* p : {&ad, &per}) {
      Matrix m = p->at(t);
      CHECK(is_hermitian(m));
      CHECK(matrix_spectral_norm(m) <= p->envelope_at(t) + 1e-12);
    }
  }
}

TEST_CASE("shape tables interpolate") {
  Shape1D s = Shape1D::table({0.0, 0.5, 1.0}, {0.0, 2.0, 1.0});
  CHECK(s(0.25) == doctest::Approx(1.0));
  CHECK(s(0.75) == doctest::Approx(1.5));
  CHECK(s(-1.0) == doctest::Approx(0.0));
  CHECK(s(2.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(Shape1D::table({0.0}, {1.0}), parameter_error);
  CHECK_THROWS_AS(Shape1D::table({0.0, 0.0}, {1.0, 2.0}), parameter_error);
}

TEST_SUITE_END();
