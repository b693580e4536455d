#include <cmath>
#include <random>

#include "doctest.h"
#include "ldrx/detplan.hpp"
#include "ldrx/ldrplan.hpp"
#include "test_instances.hpp"

using namespace ldrx;
using namespace ldrx::testing;

namespace {

UncertaintyModel scalar_model(double var) {
  UncertaintyModel u;
  u.stages = StageIndexer::make({1, 1});
  auto one = Eigen::MatrixXd::Ones(1, 1);
  auto two = Eigen::MatrixXd::Ones(1, 2);
  u.inv_cost_gen = {one, two};
  u.inv_cost_storage_energy = {one, two};
  u.inv_cost_storage_power = {one, two};
  u.load = {one, two};
  u.fuel_exist = {one, two};
  u.fuel_cand = {one, two};
  u.emis_cap = {Eigen::RowVectorXd::Ones(1), Eigen::RowVectorXd::Ones(2)};
  u.sigma = Eigen::MatrixXd::Zero(2, 2);
  u.sigma(1, 1) = var;
  u.sigma_factor = semidefinite_cholesky(u.sigma);
  return u;
}

/// Worst-case P(w outside [l,u]) over all distributions with mean m, std s.
/// Violating atoms sit at the interval endpoints; at most one interior atom.
double worst_case_violation(double m, double s, double l, double u) {
  const double c = 0.5 * (u + l), d = 0.5 * (u - l);
  const double mu = m - c, m2 = s * s + mu * mu;
  if (d <= 0.0) return 1.0;
  double best = 0.0;
  // three atoms (-d, v2, d)
  const int grid = 20001;
  for (int g = 0; g < grid; ++g) {
    const double v2 = -d + 2.0 * d * (g + 0.5) / grid;
    Eigen::Matrix3d A;
    A << 1, 1, 1, -d, v2, d, d * d, v2 * v2, d * d;
    Eigen::Vector3d rhs(1.0, mu, m2);
    Eigen::Vector3d p = A.fullPivLu().solve(rhs);
    if ((A * p - rhs).cwiseAbs().maxCoeff() > 1e-9) continue;
    if (p.minCoeff() >= -1e-12) best = std::max(best, p(0) + p(2));
  }
  // two atoms (endpoint e, interior v2): v2 determined by the moments
  for (double e : {d, -d}) {
    if (std::abs(mu - e) < 1e-14) continue;
    const double v2 = (m2 - e * mu) / (mu - e);
    if (v2 >= -d - 1e-12 && v2 <= d + 1e-12 && std::abs(e - v2) > 1e-14) {
      const double p = (mu - v2) / (e - v2);
      if (p >= -1e-12 && p <= 1 + 1e-12) best = std::max(best, p);
    }
  }
  // all probability mass outside the interval
  const double span = 10.0 * (s + std::abs(mu) + 1.0);
  for (int g = 0; g <= 4000; ++g) {
    const double a = d + span * g / 4000.0;
    if (std::abs(mu + a) < 1e-14) continue;
    const double b = (m2 + a * mu) / (mu + a);
    if (b < d - 1e-12 || mu + a <= 0) continue;
    const double p = (b - mu) / (b + a);
    if (p < -1e-12 || p > 1 + 1e-12) continue;
    if (std::abs(p * a * a + (1 - p) * b * b - m2) < 1e-6 * std::max(1.0, m2)) return 1.0;
  }
  return std::min(best, 1.0);
}

/// Feasibility verdict of the exact double-sided encoding for a constant rule
/// with mean m and std s against box [l,u] at budget eps, decided by solving
/// the emitted conic system.
bool reformulation_feasible(double m, double s, double l, double u, double eps) {
  UncertaintyModel um = scalar_model(1.0);
  ConicProgram prog;
  ChanceReformulator refo(prog, um, RiskMode::Dro);
  XiAffine row(2);
  row.add_const(0, m - s);
  row.add_const(1, s);
  refo.double_sided(row, l, u, eps, "probe");
  auto sol = solve(prog);
  if (sol.status == SolveStatus::Optimal) return true;
  REQUIRE(sol.status == SolveStatus::Infeasible);
  return false;
}

}  // namespace

TEST_CASE("expected objective terms scalar example") {
  // Q = [1,1], Ybar = [1,1], Sigma = diag(0, 0.25): E[q ybar] = 4.25.
  auto u = scalar_model(0.25);
  Eigen::MatrixXd factor = Eigen::MatrixXd::Ones(1, 2);
  Eigen::MatrixXd policy = Eigen::MatrixXd::Ones(1, 2);
  CHECK(expected_product(u, 1, factor, policy) == doctest::Approx(4.25).epsilon(1e-12));
  SUBCASE("zero covariance collapses to product of means") {
    auto u0 = scalar_model(0.0);
    CHECK(expected_product(u0, 1, factor, policy) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("zero coefficients give zero objective") {
    CHECK(expected_product(u, 1, factor, Eigen::MatrixXd::Zero(1, 2)) == 0.0);
  }
}

TEST_CASE("investment std worked expansion") {
  // Ybar_2 S_2 = [a, b], Sigma = diag(0, 0.25) -> std = 0.5 |b|
  auto u = scalar_model(0.25);
  Eigen::MatrixXd policy(1, 2);
  policy << 7.0, 3.0;
  CHECK(investment_std(u, 1, policy)[0] == doctest::Approx(1.5).epsilon(1e-12));
  policy << 7.0, 0.0;  // deterministic rule
  CHECK(investment_std(u, 1, policy)[0] == 0.0);
}

TEST_CASE("single sided reformulation arithmetic") {
  // a = (0, 1), Sigma_factor = diag(0, 0.5), eps = 0.2 DRO: cone norm = 2 * 0.5 = 1.
  auto u = scalar_model(0.25);
  ConicProgram prog;
  ChanceReformulator refo(prog, u, RiskMode::Dro);
  const int slack = prog.add_variable("slack");
  XiAffine row(2);
  row.add(0, slack, 1.0);
  row.add_const(1, 1.0);
  refo.single_sided(row, 0.2, "probe");
  // Feasibility requires slack + 1 >= 2 * 0.5 = 1, so min slack = 0.
  prog.add_objective_term(slack, 1.0);
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[slack] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("single sided zero-uncertainty row reduces to nominal inequality") {
  auto u = scalar_model(0.25);
  ConicProgram prog;
  ChanceReformulator refo(prog, u, RiskMode::Dro);
  const int v = prog.add_variable("v");
  XiAffine row(2);
  row.add(0, v, 1.0);  // deterministic coordinate only
  refo.single_sided(row, 0.05, "probe");
  CHECK(prog.soc_blocks().empty());
  prog.add_objective_term(v, 1.0);
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("normal mode enlarges the feasible set") {
  // Same row, eps = 0.05: Normal quantile 1.645 vs DRO 4.359.
  auto u = scalar_model(1.0);
  for (RiskMode mode : {RiskMode::Dro, RiskMode::Normal}) {
    ConicProgram prog;
    ChanceReformulator refo(prog, u, mode);
    const int v = prog.add_variable("v");
    XiAffine row(2);
    row.add(0, v, 1.0);
    row.add_const(1, 1.0);  // unit std
    refo.single_sided(row, 0.05, "probe");
    prog.add_objective_term(v, 1.0);
    auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    // v* + 1 = factor  ->  v* = factor - 1
    const double expect = mode == RiskMode::Dro ? std::sqrt(19.0) - 1.0 : 0.6448536269514722;
    CHECK(sol.x[v] == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("double sided box center point feasible") {
  // box [0,10], rule fixed at midpoint, no uncertainty.
  CHECK(reformulation_feasible(5.0, 0.0, 0.0, 10.0, 0.4));
  // mean 5 std 2 at eps 0.05 must be infeasible (worst case 0.16 > 0.05).
  CHECK(!reformulation_feasible(5.0, 2.0, 0.0, 10.0, 0.05));
  CHECK(reformulation_feasible(5.0, 2.0, 0.0, 10.0, 0.17));
  // zero variance, eps -> 0.5-: reduces to the deterministic box.
  CHECK(reformulation_feasible(9.99, 0.0, 0.0, 10.0, 0.4999));
  CHECK(!reformulation_feasible(10.01, 0.0, 0.0, 10.0, 0.4999));
}

TEST_CASE("double sided verdicts match worst-case probability oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const double l = -5.0 * unif(rng);
    const double u = l + 0.5 + 7.5 * unif(rng);
    const double m = l - 1.0 + (u - l + 2.0) * unif(rng);
    const double s = 0.05 + 2.5 * unif(rng);
    const double eps = 0.02 + 0.43 * unif(rng);
    const double wc = worst_case_violation(m, s, l, u);
    if (std::abs(wc - eps) < 1e-6) continue;  // boundary tolerance band
    const bool feas = reformulation_feasible(m, s, l, u, eps);
    CHECK(feas == (wc <= eps));
    ++checked;
  }
  CHECK(checked >= 95);
}

TEST_CASE("degenerate double-sided interval rejected") {
  auto u = scalar_model(0.25);
  ConicProgram prog;
  ChanceReformulator refo(prog, u, RiskMode::Dro);
  XiAffine row(2);
  row.add_const(0, 1.0);
  CHECK_THROWS(refo.double_sided(row, 2.0, 2.0, 0.1, "probe"));
}

TEST_CASE("ldr with zero covariance equals deterministic optimum") {
  auto m = micro2(0.0);
  auto det = solve_deterministic(m.sys);
  RiskConfig risk;
  risk.direct_individual = true;
  risk.eps_flow = 0.125;
  risk.eps_gen = risk.eps_ramp = 0.01;
  risk.eps_storage = 0.04;
  risk.eps_emission = 0.2;
  risk.eps_investment = 0.05;
  for (RiskMode mode : {RiskMode::Dro, RiskMode::Normal}) {
    risk.mode = mode;
    auto pol = solve_primal_ldr(m.sys, m.unc, risk);
    CHECK(std::abs(pol.objective - det.objective) <=
          1e-6 * std::max(1.0, std::abs(det.objective)));
  }
}

namespace {

RiskConfig default_risk(RiskMode mode) {
  RiskConfig risk;
  risk.mode = mode;
  risk.direct_individual = true;
  risk.eps_flow = 0.125;
  risk.eps_gen = risk.eps_ramp = 0.01;
  risk.eps_storage = 0.04;
  risk.eps_emission = 0.2;
  risk.eps_investment = 0.05;
  return risk;
}

}  // namespace

TEST_CASE("ldr policy structural checks on micro instance") {
  auto m = micro2(0.04);
  auto risk = default_risk(RiskMode::Dro);
  auto build = build_primal_ldr(m.sys, m.unc, risk);
  auto sol = solve(build.program);
  REQUIRE(sol.status == SolveStatus::Optimal);
  auto pol = extract_policy(m.sys, m.unc, build.layout, sol, risk.mode);

  SUBCASE("balance holds for random xi") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd(1.0, 0.2);
    for (int rep = 0; rep < 200; ++rep) {
      Eigen::VectorXd xi(4);
      xi << 1.0, nd(rng), nd(rng), nd(rng);
      auto rp = realize_parameters(m.unc, xi);
      for (int t = 0; t < 2; ++t)
        for (int h = 0; h < 2; ++h) {
          double lhs = 0.0;
          for (int i = 0; i < 2; ++i)
            lhs += pol.op_at(LdrLayout::kDispatchExist, t, 0, h, xi)[i] +
                   pol.op_at(LdrLayout::kDispatchCand, t, 0, h, xi)[i] +
                   pol.op_at(LdrLayout::kDischarge, t, 0, h, xi)[i] -
                   pol.op_at(LdrLayout::kCharge, t, 0, h, xi)[i] -
                   m.sys.cf_load[t][0](i, h) * rp.load[t][i];
          CHECK(std::abs(lhs) <= 1e-5);
        }
    }
  }
  SUBCASE("storage recursion holds for random xi") {
    std::mt19937_64 rng(10);
    std::normal_distribution<double> nd(1.0, 0.2);
    for (int rep = 0; rep < 50; ++rep) {
      Eigen::VectorXd xi(4);
      xi << 1.0, nd(rng), nd(rng), nd(rng);
      for (int t = 0; t < 2; ++t)
        for (int h = 0; h < 2; ++h)
          for (int i = 0; i < 2; ++i) {
            const double prev =
                h == 0 ? 0.0 : pol.op_at(LdrLayout::kSoc, t, 0, h - 1, xi)[i];
            const double res = pol.op_at(LdrLayout::kSoc, t, 0, h, xi)[i] - prev -
                               m.sys.eta_charge * pol.op_at(LdrLayout::kCharge, t, 0, h, xi)[i] +
                               pol.op_at(LdrLayout::kDischarge, t, 0, h, xi)[i] /
                                   m.sys.eta_discharge;
            CHECK(std::abs(res) <= 1e-5);
          }
    }
  }
  SUBCASE("perturbing a balance coefficient breaks it for generic xi") {
    auto bad = pol;
    bad.ops[1][0][1][LdrLayout::kDispatchExist](0, 2) += 0.5;
    Eigen::VectorXd xi(4);
    xi << 1.0, 1.3, 0.7, 1.1;
    auto rp = realize_parameters(m.unc, xi);
    double lhs = 0.0;
    for (int i = 0; i < 2; ++i)
      lhs += bad.op_at(LdrLayout::kDispatchExist, 1, 0, 1, xi)[i] +
             bad.op_at(LdrLayout::kDispatchCand, 1, 0, 1, xi)[i] +
             bad.op_at(LdrLayout::kDischarge, 1, 0, 1, xi)[i] -
             bad.op_at(LdrLayout::kCharge, 1, 0, 1, xi)[i] -
             m.sys.cf_load[1][0](i, 1) * rp.load[1][i];
    CHECK(std::abs(lhs) > 1e-3);
  }
  SUBCASE("expected budget satisfied in trace form") {
    for (int t = 0; t < 2; ++t) {
      const double spend =
          expected_product(m.unc, t, m.unc.inv_cost_gen[t], pol.invest_gen[t]) +
          expected_product(m.unc, t, m.unc.inv_cost_storage_energy[t],
                           pol.invest_storage_energy[t]) +
          expected_product(m.unc, t, m.unc.inv_cost_storage_power[t],
                           pol.invest_storage_power[t]);
      CHECK(spend <= m.sys.budget[t] + 1e-6);
    }
  }
  SUBCASE("policy json round trip") {
    auto back = LdrPolicy::from_json(pol.to_json());
    CHECK(back.objective == doctest::Approx(pol.objective));
    for (int t = 0; t < 2; ++t)
      CHECK((back.invest_gen[t] - pol.invest_gen[t]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.ops[1][0][1][2] - pol.ops[1][0][1][2]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("dro cost dominates normal cost at matched eps") {
  auto m = micro2(0.04);
  auto dro = solve_primal_ldr(m.sys, m.unc, default_risk(RiskMode::Dro));
  auto nrm = solve_primal_ldr(m.sys, m.unc, default_risk(RiskMode::Normal));
  CHECK(dro.objective >= nrm.objective - 1e-8 * std::abs(nrm.objective));
}

TEST_CASE("tightening emission risk never lowers cost") {
  auto m = micro2(0.04);
  double prev = -1e30;
  for (double eps : {0.2, 0.1, 0.01}) {
    auto risk = default_risk(RiskMode::Dro);
    risk.eps_emission = eps;
    auto pol = solve_primal_ldr(m.sys, m.unc, risk);
    CHECK(pol.objective >= prev - 1e-8 * std::abs(prev));
    prev = pol.objective;
  }
}

TEST_CASE("variance constraints produce quasi-deterministic plans") {
  auto m = micro2(0.04);
  auto risk = default_risk(RiskMode::Dro);
  auto base = solve_primal_ldr(m.sys, m.unc, risk);
  auto tight = solve_primal_ldr(m.sys, m.unc, risk, VarianceConfig::uniform(2, 1e-3));
  CHECK(tight.objective >= base.objective - 1e-8 * std::abs(base.objective));
  for (int t = 0; t < 2; ++t) {
    auto stds = investment_std(m.unc, t, tight.invest_gen[t]);
    auto means = tight.invest_gen[t] * Eigen::VectorXd::Ones(tight.invest_gen[t].cols());
    for (int i = 0; i < 2; ++i) CHECK(stds[i] <= 1e-3 * means[i] + 1e-6);
  }
}
