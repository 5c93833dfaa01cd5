#include "lrlab/proof_checks.hpp"

#include <cmath>
#include <sstream>

namespace lrlab {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

ProofCheckReport verify_interaction_picture(const Hamiltonian& model,
                                            const PerturbationTerm& pert, double t,
                                            double tol) {
  if (model.lattice.num_sites > 8)
    throw budget_error("interaction-picture check is limited to 8 sites");
  Propagator base = Propagator::make(model);
  TimeGridControl ctl;
  ctl.tol = tol;

  TimeOrderedEvolution full;
  full.lattice = model.lattice;
  full.control = ctl;
  Matrix h = model.global;
  full.generator = [&model, &pert, h](double s) {
    return h + embed({pert.support, pert.at(s)}, model.lattice).matrix;
  };
  GlobalOperator v = evolve_time_ordered(full, t);
  GlobalOperator factor = interaction_factor(base, {pert}, t, ctl);
  double residual =
      matrix_spectral_norm(v.matrix - base.evolve(t).matrix * factor.matrix);

  ProofCheckReport rep;
  rep.name = "interaction_picture";
  rep.lhs = residual;
  rep.rhs = 0.0;
  rep.tolerance = 10.0 * tol;
  rep.pass = residual <= rep.tolerance;
  rep.details = "N=" + std::to_string(model.lattice.num_sites) + " t=" + fmt(t) +
                " residual=" + fmt(residual);
  return rep;
}

ProofCheckReport verify_commuting_factorization(
    const Lattice& lattice, const std::function<Matrix(double)>& g1,
    const std::function<Matrix(double)>& g2, double t, double tol) {
  // commutation defect on a coarse (s1, s2) grid
  double defect = 0.0;
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 4; ++j) {
      Matrix a = g1(t * i / 4.0), b = g2(t * j / 4.0);
      defect = std::max(defect, matrix_spectral_norm(a * b - b * a));
    }
  if (defect > 1e-12)
    throw geometry_error("generators do not commute, defect " + fmt(defect));

  TimeGridControl ctl;
  ctl.tol = tol;
  TimeOrderedEvolution sum{lattice, [&](double s) { return (g1(s) + g2(s)).eval(); }, ctl};
  TimeOrderedEvolution e1{lattice, g1, ctl};
  TimeOrderedEvolution e2{lattice, g2, ctl};
  Matrix t12 = evolve_time_ordered(sum, t).matrix;
  Matrix ta = evolve_time_ordered(e1, t).matrix;
  Matrix tb = evolve_time_ordered(e2, t).matrix;
  double residual = matrix_spectral_norm(t12 - ta * tb);

  ProofCheckReport rep;
  rep.name = "commuting_factorization";
  rep.lhs = residual;
  rep.tolerance = 10.0 * tol;
  rep.pass = residual <= rep.tolerance;
  rep.details = "defect=" + fmt(defect) + " residual=" + fmt(residual);
  return rep;
}

ProofCheckReport verify_duhamel(const Lattice& lattice,
                                const std::function<Matrix(double)>& g,
                                const std::function<Matrix(double)>& e, double t,
                                double tol) {
  TimeGridControl ctl;
  ctl.tol = tol;
  TimeOrderedEvolution eg{lattice, g, ctl};
  TimeOrderedEvolution ee{lattice, e, ctl};
  double lhs = matrix_spectral_norm(evolve_time_ordered(eg, t).matrix -
                                    evolve_time_ordered(ee, t).matrix);
  double quad_tol = 1e-10;
  double rhs = integrate([&](double s) { return matrix_spectral_norm(g(s) - e(s)); },
                         0.0, t, quad_tol);
  ProofCheckReport rep;
  rep.name = "duhamel";
  rep.lhs = lhs;
  rep.rhs = rhs;
  rep.tolerance = 20.0 * tol + quad_tol * std::max(1.0, rhs);
  rep.pass = lhs <= rhs + rep.tolerance;
  rep.details = "lhs=" + fmt(lhs) + " rhs=" + fmt(rhs);
  return rep;
}

ProofCheckReport verify_splitting_bound(const Hamiltonian& model,
                                        const std::vector<PerturbationTerm>& perts,
                                        int cut, int half_width, double t,
                                        const BoundParams& fitted, double tol) {
  Propagator base = Propagator::make(model);
  TimeGridControl ctl;
  ctl.tol = tol;

  bool all_static = true;
  for (const auto& p : perts)
    if (!p.time_independent) all_static = false;
  GlobalOperator factor = all_static ? interaction_factor_exact(base, perts, t)
                                     : interaction_factor(base, perts, t, ctl);
  SplitFactors split = split_factors(base, perts, cut, half_width, t, ctl);
  double lhs =
      matrix_spectral_norm(factor.matrix - split.hat.matrix * split.bar.matrix);

  EnvelopeFn env = EnvelopeFn::of([&perts](double s) {
    double m = 0.0;
    for (const auto& p : perts) m = std::max(m, p.envelope_at(s));
    return m;
  });
  BoundGeometry geom;
  geom.half_width = half_width;
  double rhs = evaluate_bound(BoundKind::splitting, fitted.scaled_K(2.0), geom, t, env);

  ProofCheckReport rep;
  rep.name = "splitting_bound";
  rep.lhs = lhs;
  rep.rhs = rhs;
  rep.tolerance = 0.0;
  rep.pass = lhs <= rhs;
  rep.details = "cut=" + std::to_string(cut) + " w=" + std::to_string(half_width) +
                " t=" + fmt(t) + " lhs=" + fmt(lhs) + " rhs=" + fmt(rhs);
  return rep;
}

ProofCheckReport verify_restriction_equivalence(const Hamiltonian& model,
                                                const LocalOperator& a, int radius,
                                                double t, const BoundParams& fitted) {
  Propagator prop = Propagator::make(model);
  ProfileOptions opts;
  ScanRecord err = restriction_error(prop, a, radius, t, opts);

  // (i) forward direction: restriction error against the bound's RHS
  BoundGeometry geom;
  geom.radius = radius;
  geom.norm_a = spectral_norm(a);
  double rhs_restr = evaluate_bound(BoundKind::restriction, fitted.scaled_K(2.0), geom,
                                    t, EnvelopeFn::constant(0.0));
  bool pass_restr = err.value <= rhs_restr;

  // (ii) reverse direction: put B just outside the ball so the restricted
  // part commutes with it exactly, and bound the commutator in two steps.
  const int d = radius + 1;
  int b_lo = a.support.hi + d;
  if (b_lo + a.support.size() - 1 > model.lattice.num_sites - 1)
    throw geometry_error("no room for the reverse-direction probe");
  LocalOperator b = a.anchored_at(b_lo);
  GlobalOperator ga = embed(a, model.lattice);
  GlobalOperator gb = embed(b, model.lattice);
  GlobalOperator at = prop.heisenberg(ga, t);
  SiteInterval ball{std::max(0, a.support.lo - radius),
                    std::min(model.lattice.num_sites - 1, a.support.hi + radius)};
  GlobalOperator restricted = restrict_to(at, ball);
  double comm = commutator_norm(at, gb);
  double comm_restricted = commutator_norm(restricted, gb);
  double two_step = 2.0 * spectral_norm(b) * err.value + comm_restricted;
  bool pass_two_step = comm <= two_step + 1e-10;

  ProofCheckReport rep;
  rep.name = "restriction_equivalence";
  rep.lhs = comm;
  rep.rhs = two_step;
  rep.tolerance = 1e-10;
  rep.pass = pass_restr && pass_two_step;
  rep.details = "restriction_error=" + fmt(err.value) + " bound=" + fmt(rhs_restr) +
                " comm=" + fmt(comm) + " two_step=" + fmt(two_step) +
                " restricted_comm=" + fmt(comm_restricted);
  return rep;
}

}  // namespace lrlab
