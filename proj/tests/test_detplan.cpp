#include <cmath>

#include "doctest.h"
#include "ldrx/detplan.hpp"
#include "test_instances.hpp"

using namespace ldrx;
using namespace ldrx::testing;

TEST_CASE("one node plan solvable by hand") {
  // demand 10, candidate-only: build 10, dispatch 10.
  // cost = (q + om) * 10 + fuel * 10 = (50 + 5) * 10 + 2 * 10 = 570
  auto s = one_node_system(10.0);
  auto plan = solve_deterministic(s);
  CHECK(plan.build_gen[0][0] == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(plan.dispatch_cand[0][0](0, 0) == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(plan.objective == doctest::Approx(570.0).epsilon(1e-7));
  CHECK(plan.cost_invest + plan.cost_om + plan.cost_fuel ==
        doctest::Approx(plan.objective).epsilon(1e-8));
}

TEST_CASE("zero demand yields zero plan") {
  auto s = one_node_system(0.0);
  auto plan = solve_deterministic(s);
  CHECK(std::abs(plan.objective) <= 1e-6);
  CHECK(plan.build_gen[0][0] <= 1e-6);
}

TEST_CASE("zero emission cap with emitting units infeasible") {
  auto s = one_node_system(10.0, 0.0);
  s.emis_cand = vec({0.5});  // candidate emits too
  auto [prog, lay] = build_deterministic(s);
  auto sol = solve(prog);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("micro system invariants") {
  auto m = micro2();
  auto plan = solve_deterministic(m.sys);
  const auto& s = m.sys;

  SUBCASE("balance residual at every (t,w,h)") {
    for (int t = 0; t < s.T; ++t)
      for (int w = 0; w < s.W; ++w)
        for (int h = 0; h < s.H; ++h) {
          double lhs = 0.0;
          for (int i = 0; i < s.N; ++i)
            lhs += plan.dispatch_exist[t][w](i, h) + plan.dispatch_cand[t][w](i, h) +
                   plan.discharge[t][w](i, h) - plan.charge[t][w](i, h) -
                   s.cf_load[t][w](i, h) * s.peak_load[t][i];
          CHECK(std::abs(lhs) <= 1e-6);
        }
  }
  SUBCASE("storage recursion") {
    for (int t = 0; t < s.T; ++t)
      for (int w = 0; w < s.W; ++w)
        for (int h = 0; h < s.H; ++h)
          for (int i = 0; i < s.N; ++i) {
            const double prev = h == 0 ? 0.0 : plan.soc[t][w](i, h - 1);
            const double res = plan.soc[t][w](i, h) - prev -
                               s.eta_charge * plan.charge[t][w](i, h) +
                               plan.discharge[t][w](i, h) / s.eta_discharge;
            CHECK(std::abs(res) <= 1e-6);
          }
  }
  SUBCASE("emission accounting within caps") {
    for (int t = 0; t < s.T; ++t) {
      double e = 0.0;
      for (int w = 0; w < s.W; ++w)
        for (int h = 0; h < s.H; ++h)
          e += s.horizon_weight[w] * (s.emis_exist.dot(plan.dispatch_exist[t][w].col(h)) +
                                      s.emis_cand.dot(plan.dispatch_cand[t][w].col(h)));
      CHECK(e <= s.emis_cap[t] + 1e-6);
    }
  }
  SUBCASE("budget satisfied") {
    for (int t = 0; t < s.T; ++t) {
      const double spend = s.inv_cost_gen[t].dot(plan.build_gen[t]) +
                           s.inv_cost_storage_energy[t].dot(plan.build_storage_energy[t]) +
                           s.inv_cost_storage_power[t].dot(plan.build_storage_power[t]);
      CHECK(spend <= s.budget[t] + 1e-6);
    }
  }
  SUBCASE("cumulative candidate dispatch feasibility") {
    for (int t = 0; t < s.T; ++t)
      for (int w = 0; w < s.W; ++w)
        for (int h = 0; h < s.H; ++h)
          for (int i = 0; i < s.N; ++i) {
            double cum = 0.0;
            for (int tau = 0; tau <= t; ++tau) cum += plan.build_gen[tau][i];
            CHECK(plan.dispatch_cand[t][w](i, h) <= s.cf_cand[t][w](i, h) * cum + 1e-6);
          }
  }
  SUBCASE("cost decomposition sums to objective") {
    CHECK(plan.cost_invest + plan.cost_om + plan.cost_fuel ==
          doctest::Approx(plan.objective).epsilon(1e-8));
  }
}

TEST_CASE("objective monotonicity checks") {
  auto m = micro2();
  auto base = solve_deterministic(m.sys);

  SUBCASE("doubling fuel costs never lowers total cost") {
    auto s2 = m.sys;
    for (auto& c : s2.fuel_exist) c *= 2.0;
    for (auto& c : s2.fuel_cand) c *= 2.0;
    auto plan2 = solve_deterministic(s2);
    CHECK(plan2.objective >= base.objective - 1e-6 * (1 + std::abs(base.objective)));
  }
  SUBCASE("relaxing emission caps never raises cost") {
    auto s2 = m.sys;
    for (auto& cap : s2.emis_cap) cap = 1e12;
    auto plan2 = solve_deterministic(s2);
    CHECK(plan2.objective <= base.objective + 1e-6 * (1 + std::abs(base.objective)));
  }
}
