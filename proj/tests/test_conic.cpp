#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "ldrx/conic.hpp"

using namespace ldrx;

TEST_CASE("one dimensional lp") {
  ConicProgram p;
  const int x = p.add_variable("x");
  p.add_objective_term(x, 1.0);
  p.add_inequality(AffineExpr{}.add(x, 1.0), RowSense::Ge, 3.0, "lb");
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[x] == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(sol.ineq_duals.size() == 1);
  CHECK(sol.ineq_duals[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("soc projection") {
  // min t s.t. ||x - 1|| <= t  (x in R^3)
  ConicProgram p;
  const int t = p.add_variable("t");
  std::vector<int> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(p.add_variable("x" + std::to_string(i)));
  p.add_objective_term(t, 1.0);
  std::vector<AffineExpr> u;
  for (int i = 0; i < 3; ++i) {
    AffineExpr e;
    e.add(xs[i], 1.0);
    e.constant = -1.0;
    u.push_back(e);
  }
  p.add_soc(u, AffineExpr{}.add(t, 1.0), "ball");
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-6));
  for (int i = 0; i < 3; ++i) CHECK(sol.x[xs[i]] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("infeasible pair detected") {
  ConicProgram p;
  const int x = p.add_variable("x");
  p.add_objective_term(x, 1.0);
  p.add_inequality(AffineExpr{}.add(x, 1.0), RowSense::Ge, 1.0, "family_a");
  p.add_inequality(AffineExpr{}.add(x, 1.0), RowSense::Le, 0.0, "family_b");
  auto sol = solve(p);
  CHECK(sol.status == SolveStatus::Infeasible);
  CHECK(!sol.failure_family.empty());
}

TEST_CASE("unbounded detected") {
  ConicProgram p;
  const int x = p.add_variable("x");
  p.add_objective_term(x, -1.0);
  p.add_inequality(AffineExpr{}.add(x, 1.0), RowSense::Ge, 0.0, "lb");
  auto sol = solve(p);
  CHECK(sol.status == SolveStatus::Unbounded);
}

TEST_CASE("equality and bounds") {
  // min x + y s.t. x + y = 2, 0 <= x <= 1, y >= 0
  ConicProgram p;
  const int x = p.add_variable("x", 0.0, 1.0);
  const int y = p.add_variable("y", 0.0);
  p.add_objective_term(x, 1.0);
  p.add_objective_term(y, 2.0);
  p.add_equality(AffineExpr{}.add(x, 1.0).add(y, 1.0), 2.0, "sum");
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[x] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.x[y] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("degenerate soc with zero u reduces to linear row") {
  // min v s.t. ||0|| <= v - 1   -> v >= 1
  ConicProgram p;
  const int v = p.add_variable("v");
  p.add_objective_term(v, 1.0);
  std::vector<AffineExpr> u(2);  // all-zero coordinates
  AffineExpr ve;
  ve.add(v, 1.0);
  ve.constant = -1.0;
  p.add_soc(u, ve, "degenerate");
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[v] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lp with larger random data agrees with kkt conditions") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  ConicProgram p;
  const int n = 20;
  std::vector<int> xs;
  for (int i = 0; i < n; ++i) xs.push_back(p.add_variable("x" + std::to_string(i), 0.0));
  for (int i = 0; i < n; ++i) p.add_objective_term(xs[i], dist(rng));
  for (int r = 0; r < 8; ++r) {
    AffineExpr e;
    for (int i = 0; i < n; ++i) e.add(xs[i], dist(rng));
    p.add_inequality(std::move(e), RowSense::Ge, 10.0 * dist(rng), "cover");
  }
  auto sol = solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.max_residual <= 1e-6);
  CHECK(sol.rel_gap <= 1e-7);
  // complementary slackness spot check
  for (size_t r = 0; r < p.inequalities().size(); ++r) {
    const auto& row = p.inequalities()[r];
    const double slack = p.eval(row.expr, sol.x) - row.rhs;
    CHECK(std::abs(slack * sol.ineq_duals[r]) <= 1e-4);
  }
}

TEST_CASE("dimensions") {
  ConicProgram p;
  auto d0 = p.dimensions();
  CHECK(d0.variables == 0);
  CHECK(d0.linear_rows == 0);
  CHECK(d0.conic_blocks == 0);
  const int x = p.add_variable("x");
  p.add_inequality(AffineExpr{}.add(x, 1.0), RowSense::Ge, 3.0);
  auto d1 = p.dimensions();
  CHECK(d1.variables == 1);
  CHECK(d1.linear_rows == 1);
  CHECK(d1.conic_blocks == 0);
}

TEST_CASE("serialize round trip") {
  ConicProgram p;
  const int x = p.add_variable("x", 0.0, 3.5);
  const int y = p.add_variable("y");
  p.set_objective_constant(0.125);
  p.add_objective_term(x, 1.0 / 3.0);
  p.add_objective_term(y, -2.0);
  p.add_equality(AffineExpr{}.add(x, 1.0).add(y, 0.7), 1.0, "bal");
  p.add_inequality(AffineExpr{}.add(y, 0.3), RowSense::Le, 2.0, "cap");
  std::vector<AffineExpr> u;
  u.push_back(AffineExpr{}.add(x, 0.1));
  AffineExpr v;
  v.add(y, 1.0);
  v.constant = 0.2;
  p.add_soc(u, v, "cone");

  const std::string text = p.serialize();
  ConicProgram q = ConicProgram::deserialize(text);
  CHECK(q.serialize() == text);

  auto s1 = solve(p);
  auto s2 = solve(q);
  REQUIRE(s1.status == SolveStatus::Optimal);
  REQUIRE(s2.status == SolveStatus::Optimal);
  CHECK(s1.objective ==
        doctest::Approx(s2.objective).epsilon(1e-8));
}

TEST_CASE("empty program serializes") {
  ConicProgram p;
  ConicProgram q = ConicProgram::deserialize(p.serialize());
  CHECK(q.num_variables() == 0);
  CHECK(q.serialize() == p.serialize());
}

TEST_CASE("malformed text raises parse error") {
  CHECK_THROWS_AS(ConicProgram::deserialize("not a program"), ParseError);
  CHECK_THROWS_AS(ConicProgram::deserialize("conicprogram v1\nvars nope"), ParseError);
  CHECK_THROWS_AS(ConicProgram::deserialize("conicprogram v1\nvars 1\nvar x 0 0\nobj 5 1.0"),
                  ParseError);
}

TEST_CASE("rows reference only declared variables") {
  ConicProgram p;
  p.add_variable("x");
  CHECK_THROWS(p.add_equality(AffineExpr{}.add(3, 1.0), 0.0));
  CHECK_THROWS(p.add_objective_term(-1, 1.0));
}
