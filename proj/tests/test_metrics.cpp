#include <doctest.h>

#include <cmath>

#include "lrlab/metrics.hpp"
#include "lrlab/models.hpp"
#include "lrlab/rng.hpp"

using namespace lrlab;

namespace {

constexpr double e5 = 0.006737946999085467;  // e^{-5}

std::vector<ScanRecord> synthetic_records(double K, double xi, double beta,
                                          const std::vector<int>& ds,
                                          const std::vector<double>& ts,
                                          std::uint64_t realizations = 1,
                                          double noise = 0.0,
                                          std::uint64_t seed = 17) {
  std::vector<ScanRecord> out;
  CounterRng rng(seed, 0x90, 0);
  for (std::uint64_t r = 0; r < realizations; ++r)
    for (int d : ds)
      for (double t : ts) {
        ScanRecord rec;
        rec.scenario_id = "synthetic";
        rec.kind = RecordKind::commutator;
        rec.realization = r;
        rec.d = d;
        rec.t = t;
        rec.value = K * std::pow(t, beta) * std::exp(-d / xi);
        if (noise > 0) rec.value *= 1.0 + noise * (2.0 * rng.next_uniform01() - 1.0);
        rec.a_support = {0, 0};
        rec.b_support = {d, d};
        out.push_back(rec);
      }
  return out;
}

Hamiltonian disordered_xx(const Lattice& lat, double width, std::uint64_t seed,
                          std::uint64_t realization) {
  Hamiltonian h = build_xxz(lat, 0.0);
  DisorderSpec spec{{0, lat.num_sites - 1}, width, seed};
  std::vector<LocalOperator> field;
  for (const auto& t : build_disorder_field(lat, spec, realization))
    field.push_back({t.support, t.static_matrix});
  return h.with_terms(field);
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("bound evaluator closed-form values") {
  BoundParams p;  // K=1, xi=1, beta=1, power
  EnvelopeFn one = EnvelopeFn::constant(1.0);

  BoundGeometry full_geom;
  full_geom.dist = 10.0;
  full_geom.norm_a = full_geom.norm_b = 1.0;
  p.n = 1.0;
  double full = evaluate_bound(BoundKind::full, p, full_geom, 1.0, one);
  CHECK(std::abs(full - 10.0 * e5) <= 1e-12);
  CHECK(full == doctest::Approx(0.067379).epsilon(1e-4));

  BoundGeometry single_geom;
  single_geom.dist = 5.0;
  single_geom.norm_a = single_geom.norm_b = 1.0;
  double single = evaluate_bound(BoundKind::single, p, single_geom, 2.0, one);
  double slow = evaluate_bound(BoundKind::single_slow, p, single_geom, 2.0, one);
  CHECK(std::abs(single - 36.0 * e5) <= 1e-12);
  CHECK(std::abs(slow - 36.0 * e5) <= 1e-12);
  CHECK(single == doctest::Approx(0.24256).epsilon(1e-4));

  CHECK(evaluate_bound(BoundKind::lightcone, p, single_geom, 0.0, one) == 0.0);
}

TEST_CASE("single bound equals its closed form for power-law f") {
  CounterRng rng(4, 0x91, 0);
  EnvelopeFn one = EnvelopeFn::constant(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    BoundParams p;
    p.K = 0.1 + 3.0 * rng.next_uniform01();
    p.xi = 0.3 + 2.0 * rng.next_uniform01();
    p.beta = 0.2 + 1.8 * rng.next_uniform01();
    BoundGeometry g;
    g.dist = 1.0 + 8.0 * rng.next_uniform01();
    g.norm_b = 0.5 + rng.next_uniform01();
    g.norm_a = 1.0;  // h_max sup = envelope = 1
    double t = 0.2 + 4.0 * rng.next_uniform01();
    double a = evaluate_bound(BoundKind::single, p, g, t, one);
    double b = evaluate_bound(BoundKind::single_slow, p, g, t, one);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
  BoundParams pexp;
  pexp.shape = FShape::exponential;
  BoundGeometry g;
  CHECK_THROWS_AS(evaluate_bound(BoundKind::single_slow, pexp, g, 1.0, one),
                  parameter_error);
}

TEST_CASE("bound parameter guards") {
  BoundParams p;
  p.K = 0.0;
  CHECK_THROWS_AS(p.validate(), parameter_error);
  p = BoundParams{};
  p.n = 0.5;
  CHECK_THROWS_AS(p.validate(), parameter_error);
}

TEST_CASE("disorder averages") {
  auto records = synthetic_records(1.0, 1.0, 1.0, {1, 2}, {1.0});
  auto cells = disorder_average(records);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].count == 1);
  CHECK(std::isnan(cells[0].stderr_));

  // synthetic mean recovery: value = c + uniform noise
  const double c = 0.5;
  std::vector<ScanRecord> noisy;
  CounterRng rng(9, 0x92, 0);
  for (int r = 0; r < 400; ++r) {
    ScanRecord rec;
    rec.kind = RecordKind::commutator;
    rec.realization = r;
    rec.d = 1;
    rec.t = 1.0;
    rec.value = c + 0.1 * (2.0 * rng.next_uniform01() - 1.0);
    noisy.push_back(rec);
  }
  auto stats = disorder_average(noisy);
  REQUIRE(stats.size() == 1);
  CHECK(std::abs(stats[0].mean - c) <= 3.0 * stats[0].stderr_);
  CHECK(stats[0].count == 400);
}

TEST_CASE("lightcone fit recovers synthetic parameters") {
  auto records = synthetic_records(0.7, 1.3, 1.0, {1, 2, 3, 4}, {0.5, 1.0, 2.0, 4.0});
  FitResult fit = fit_lightcone(records);
  CHECK(std::abs(fit.K - 0.7) <= 1e-6);
  CHECK(std::abs(fit.xi - 1.3) <= 1e-6);
  CHECK(std::abs(fit.beta - 1.0) <= 1e-6);
  CHECK(fit.rms_log_residual <= 1e-10);

  // flat time dependence fits beta ~ 0
  auto flat = synthetic_records(0.5, 1.1, 0.0, {1, 2, 3}, {1.0, 2.0, 4.0});
  CHECK(std::abs(fit_lightcone(flat).beta) <= 1e-9);

  // multiplicative noise x[0.9, 1.1]: parameters within 10%
  auto noisy =
      synthetic_records(0.7, 1.3, 1.0, {1, 2, 3, 4}, {0.5, 1.0, 2.0, 4.0}, 40, 0.1);
  FitResult nf = fit_lightcone(noisy);
  CHECK(std::abs(nf.K - 0.7) <= 0.07);
  CHECK(std::abs(nf.xi - 1.3) <= 0.13);
  CHECK(std::abs(nf.beta - 1.0) <= 0.1);

  // too few distances
  auto thin = synthetic_records(0.7, 1.3, 1.0, {1, 2}, {0.5, 1.0, 2.0});
  CHECK_THROWS_AS(fit_lightcone(thin), fit_error);
}

TEST_CASE("bound checking margins") {
  BoundParams p;
  p.K = 2.0;
  p.xi = 1.0;
  p.beta = 1.0;
  BoundGeometry geom;
  EnvelopeFn none = EnvelopeFn::constant(0.0);

  // records at exactly half the RHS: min relative margin 0.5
  std::vector<ScanRecord> half;
  for (int d : {1, 2, 3})
    for (double t : {1.0, 2.0}) {
      ScanRecord r;
      r.kind = RecordKind::commutator;
      r.realization = 0;
      r.d = d;
      r.t = t;
      BoundGeometry g = geom;
      g.dist = d;
      r.value = 0.5 * evaluate_bound(BoundKind::lightcone, p, g, t, none);
      half.push_back(r);
    }
  MarginReport rep = check_bound(disorder_average(half), p, BoundKind::lightcone,
                                 geom, none);
  CHECK(rep.violations == 0);
  CHECK(rep.min_rel_margin == doctest::Approx(0.5).epsilon(1e-12));

  // a huge K never violates
  MarginReport vac = check_bound(disorder_average(half), p.scaled_K(1e12),
                                 BoundKind::lightcone, geom, none);
  CHECK(vac.violations == 0);
  CHECK(vac.uninformative_fraction == doctest::Approx(1.0));

  // doubling the measured values violates everywhere (single sample, no slack)
  for (auto& r : half) r.value *= 4.0;
  MarginReport bad = check_bound(disorder_average(half), p, BoundKind::lightcone,
                                 geom, none);
  CHECK(bad.violations == static_cast<int>(bad.cells.size()));
}

TEST_CASE("horizon time") {
  BoundParams p;  // K=1, xi=1, beta=1
  CHECK(t_max_horizon(p, 10.0, 1.0) == doctest::Approx(std::exp(5.0)).epsilon(1e-12));
  CHECK(t_max_horizon(p, 0.0, 2.0) == doctest::Approx(0.5).epsilon(1e-12));
  // doubling xi: t_max^beta becomes the square root of the previous e-factor
  BoundParams p2 = p;
  p2.xi = 2.0;
  CHECK(t_max_horizon(p2, 10.0, 1.0) ==
        doctest::Approx(std::sqrt(t_max_horizon(p, 10.0, 1.0))).epsilon(1e-12));
  BoundParams flat = p;
  flat.beta = 0.0;
  CHECK_THROWS_AS(t_max_horizon(flat, 1.0, 1.0), parameter_error);
}

TEST_CASE("entanglement entropy") {
  Lattice two(2);
  Vector product = Vector::Zero(4);
  product(2) = 1.0;  // |10>
  CHECK(entanglement_entropy(product, 0, two) <= 1e-14);

  Vector singlet(4);
  singlet << 0, 1 / std::sqrt(2.0), -1 / std::sqrt(2.0), 0;
  CHECK(entanglement_entropy(singlet, 0, two) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Lattice four(4);
  Vector ghz = Vector::Zero(16);
  ghz(0) = ghz(15) = 1 / std::sqrt(2.0);
  for (int cut : {0, 1, 2})
    CHECK(entanglement_entropy(ghz, cut, four) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Vector bad = 2.0 * singlet;
  CHECK_THROWS_AS(entanglement_entropy(bad, 0, two), normalization_error);
}

TEST_CASE("commutator profile against the two-site closed form") {
  Lattice lat(2);
  Hamiltonian zz = Hamiltonian::from_terms(lat, {{{0, 1}, kron(pauli_z(), pauli_z())}});
  Propagator prop = Propagator::make(zz);
  LocalOperator a{{0, 0}, pauli_x()};
  std::vector<LocalOperator> bs{{{1, 1}, pauli_x()}};
  std::vector<double> times{0.1, 0.5, 0.7853981633974483, 1.4, 2.9};
  ProfileOptions opts;
  auto records = commutator_profile(prop, a, bs, times, opts);
  REQUIRE(records.size() == times.size());
  for (size_t i = 0; i < times.size(); ++i) {
    CHECK(records[i].d == 1);
    CHECK(records[i].value ==
          doctest::Approx(2.0 * std::abs(std::sin(2.0 * times[i]))).epsilon(1e-10));
  }
}

TEST_CASE("restriction error closed form and monotonicity") {
  Lattice lat(2);
  Hamiltonian zz = Hamiltonian::from_terms(lat, {{{0, 1}, kron(pauli_z(), pauli_z())}});
  Propagator prop = Propagator::make(zz);
  LocalOperator a{{0, 0}, pauli_x()};
  ProfileOptions opts;
  for (double t : {0.3, 0.7853981633974483, 1.9}) {
    ScanRecord r0 = restriction_error(prop, a, 0, t, opts);
    CHECK(r0.value == doctest::Approx(std::abs(std::sin(2.0 * t))).epsilon(1e-10));
    ScanRecord r1 = restriction_error(prop, a, 1, t, opts);
    CHECK(r1.value <= 1e-12);
    CHECK(r1.value <= r0.value + 1e-10);
  }
  CHECK(restriction_error(prop, a, 0, 0.0, opts).value <= 1e-12);

  // radius monotonicity on a disordered chain
  Lattice lat6(6);
  Propagator p6 = Propagator::make(disordered_xx(lat6, 3.0, 5, 0));
  double prev = std::numeric_limits<double>::infinity();
  for (int radius : {0, 1, 2, 3, 4}) {
    double err = restriction_error(p6, a, radius, 1.5, opts).value;
    CHECK(err <= prev + 1e-10);
    prev = err;
  }
  CHECK(restriction_error(p6, a, 5, 1.5, opts).value <= 1e-12);
}

TEST_CASE("lanczos scan path matches the dense path") {
  Lattice lat(6);
  Hamiltonian h = disordered_xx(lat, 2.0, 31, 0);
  Propagator prop = Propagator::make(h);
  LocalOperator a{{0, 0}, pauli_x()};
  std::vector<LocalOperator> bs{{{2, 2}, pauli_x()}, {{4, 4}, pauli_x()},
                                {{5, 5}, pauli_x()}};
  std::vector<double> times{0.5, 1.5, 4.0};

  ProfileOptions dense_opts;
  dense_opts.dense_threshold = 1 << 12;
  auto dense = commutator_profile(prop, a, bs, times, dense_opts);

  ProfileOptions lanczos_opts;
  lanczos_opts.dense_threshold = 16;  // force the batched path
  lanczos_opts.lanczos_rtol = 1e-9;
  auto fast = commutator_profile(prop, a, bs, times, lanczos_opts);

  REQUIRE(dense.size() == fast.size());
  for (size_t i = 0; i < dense.size(); ++i) {
    CHECK(dense[i].d == fast[i].d);
    CHECK(std::abs(dense[i].value - fast[i].value) <=
          1e-8 * std::max(1.0, dense[i].value));
  }

  // a complex-valued probe pair exercises the complex branches
  LocalOperator ay{{0, 0}, pauli_y()};
  std::vector<LocalOperator> bys{{{3, 3}, pauli_y()}};
  auto dy = commutator_profile(prop, ay, bys, times, dense_opts);
  auto fy = commutator_profile(prop, ay, bys, times, lanczos_opts);
  for (size_t i = 0; i < dy.size(); ++i)
    CHECK(std::abs(dy[i].value - fy[i].value) <= 1e-8 * std::max(1.0, dy[i].value));
}

TEST_CASE("profile with static perturbations folds them exactly") {
  Lattice lat(5);
  Hamiltonian h = disordered_xx(lat, 1.0, 8, 0);
  PerturbationTerm pert = PerturbationTerm::constant({2, 2}, 0.8 * pauli_x());
  LocalOperator a{{0, 0}, pauli_x()};
  std::vector<LocalOperator> bs{{{4, 4}, pauli_x()}};
  std::vector<double> times{1.0, 2.5};
  ProfileOptions opts;

  auto with_pert = commutator_profile(h, {pert}, a, bs, times, opts);

  Matrix total = h.global;
  embed_add_into({pert.support, pert.static_matrix}, lat, total);
  Propagator direct = Propagator::make(GlobalOperator{total, lat});
  auto expect = commutator_profile(direct, a, bs, times, opts);
  for (size_t i = 0; i < expect.size(); ++i)
    CHECK(with_pert[i].value == doctest::Approx(expect[i].value).epsilon(1e-12));
}

TEST_SUITE_END();
