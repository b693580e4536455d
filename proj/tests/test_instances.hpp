#pragma once

#include "ldrx/system.hpp"
#include "ldrx/uncertainty.hpp"

namespace ldrx::testing {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// One node, one stage, one hour. Small enough to solve by hand.
inline SystemData one_node_system(double demand = 10.0, double emis_cap = 1e9) {
  SystemData s;
  s.T = 1;
  s.W = 1;
  s.H = 1;
  s.N = 1;
  s.E = 0;
  s.annual_hours = 1.0;
  s.node_names = {"n1"};
  s.ptdf = Eigen::MatrixXd::Zero(0, 1);
  s.line_limit = Eigen::VectorXd::Zero(0);
  s.existing_cap = {vec({0.0})};
  s.inv_cost_gen = {vec({50.0})};
  s.inv_cost_storage_energy = {vec({10.0})};
  s.inv_cost_storage_power = {vec({8.0})};
  s.om_exist = {vec({0.0})};
  s.om_gen = {vec({5.0})};
  s.om_storage_energy = {vec({0.0})};
  s.om_storage_power = {vec({0.0})};
  s.fuel_exist = {vec({30.0})};
  s.fuel_cand = {vec({2.0})};
  auto ones_cf = std::vector<std::vector<Eigen::MatrixXd>>{{Eigen::MatrixXd::Ones(1, 1)}};
  s.cf_exist = ones_cf;
  s.cf_cand = ones_cf;
  s.cf_load = ones_cf;
  s.ramp_up_exist = vec({1.0});
  s.ramp_dn_exist = vec({1.0});
  s.ramp_up_cand = vec({1.0});
  s.ramp_dn_cand = vec({1.0});
  s.eta_charge = 0.9;
  s.eta_discharge = 0.9;
  s.emis_exist = vec({1.0});
  s.emis_cand = vec({0.5});
  s.emis_cap = {emis_cap};
  s.horizon_weight = vec({1.0});
  s.peak_load = {vec({demand})};
  s.max_gen = {vec({1000.0})};
  s.max_storage_energy = {vec({0.0})};
  s.max_storage_power = {vec({0.0})};
  s.budget = {1e9};
  s.shed_penalty = 9000.0;
  return s;
}

/// Two nodes, two stages, one line, two hours; demand/capex/fuel uncertainty
/// revealed at stage 2. Small but exercises every constraint family.
struct Micro {
  SystemData sys;
  UncertaintyModel unc;
};

inline Micro micro2(double var = 0.04, int n2 = 3) {
  SystemData s;
  s.T = 2;
  s.W = 1;
  s.H = 2;
  s.N = 2;
  s.E = 1;
  s.annual_hours = 2.0;
  s.node_names = {"a", "b"};
  s.ptdf = (Eigen::MatrixXd(1, 2) << 0.5, -0.5).finished();
  s.line_limit = vec({40.0});
  s.existing_cap = {vec({60.0, 0.0}), vec({60.0, 0.0})};
  s.inv_cost_gen = {vec({40.0, 55.0}), vec({42.0, 50.0})};
  s.inv_cost_storage_energy = {vec({6.0, 6.0}), vec({5.0, 5.0})};
  s.inv_cost_storage_power = {vec({12.0, 12.0}), vec({11.0, 11.0})};
  s.om_exist = {vec({1.0, 0.0}), vec({1.0, 0.0})};
  s.om_gen = {vec({2.0, 2.0}), vec({2.0, 2.0})};
  s.om_storage_energy = {vec({0.5, 0.5}), vec({0.5, 0.5})};
  s.om_storage_power = {vec({0.5, 0.5}), vec({0.5, 0.5})};
  s.fuel_exist = {vec({25.0, 30.0}), vec({26.0, 30.0})};
  s.fuel_cand = {vec({4.0, 3.0}), vec({4.0, 3.0})};
  Eigen::MatrixXd cf_flat = Eigen::MatrixXd::Ones(2, 2);
  Eigen::MatrixXd cf_wind = (Eigen::MatrixXd(2, 2) << 1.0, 1.0, 0.6, 0.9).finished();
  Eigen::MatrixXd cf_l = (Eigen::MatrixXd(2, 2) << 1.0, 0.8, 0.9, 1.0).finished();
  s.cf_exist = {{cf_flat}, {cf_flat}};
  s.cf_cand = {{cf_wind}, {cf_wind}};
  s.cf_load = {{cf_l}, {cf_l}};
  s.ramp_up_exist = vec({0.6, 0.6});
  s.ramp_dn_exist = vec({0.6, 0.6});
  s.ramp_up_cand = vec({1.0, 1.0});
  s.ramp_dn_cand = vec({1.0, 1.0});
  s.eta_charge = 0.92;
  s.eta_discharge = 0.92;
  s.emis_exist = vec({0.8, 0.9});
  s.emis_cand = vec({0.0, 0.1});
  s.emis_cap = {140.0, 110.0};
  s.horizon_weight = vec({1.0});
  s.peak_load = {vec({50.0, 30.0}), vec({60.0, 36.0})};
  s.max_gen = {vec({400.0, 400.0}), vec({400.0, 400.0})};
  s.max_storage_energy = {vec({300.0, 300.0}), vec({300.0, 300.0})};
  s.max_storage_power = {vec({120.0, 120.0}), vec({120.0, 120.0})};
  s.budget = {1e8, 1e8};
  s.shed_penalty = 9000.0;

  UncertaintyModel u;
  u.stages = StageIndexer::make({1, n2});
  auto zero_delta = [&](const Eigen::VectorXd& base, int cols) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(base.size(), cols);
    m.col(0) = base;
    return m;
  };
  // Stage-1 factors are the stage-1 baselines; stage-2 factors append deltas
  // for (demand, capex, fuel) shocks when n2 == 3.
  u.load = {zero_delta(s.peak_load[0], 1), zero_delta(s.peak_load[0], 1 + n2)};
  u.inv_cost_gen = {zero_delta(s.inv_cost_gen[0], 1), zero_delta(s.inv_cost_gen[0], 1 + n2)};
  u.inv_cost_storage_energy = {zero_delta(s.inv_cost_storage_energy[0], 1),
                               zero_delta(s.inv_cost_storage_energy[0], 1 + n2)};
  u.inv_cost_storage_power = {zero_delta(s.inv_cost_storage_power[0], 1),
                              zero_delta(s.inv_cost_storage_power[0], 1 + n2)};
  u.fuel_exist = {zero_delta(s.fuel_exist[0], 1), zero_delta(s.fuel_exist[0], 1 + n2)};
  u.fuel_cand = {zero_delta(s.fuel_cand[0], 1), zero_delta(s.fuel_cand[0], 1 + n2)};
  u.emis_cap = {Eigen::RowVectorXd::Constant(1, s.emis_cap[0]),
                [&] {
                  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(1 + n2);
                  r(0) = s.emis_cap[1];
                  return r;
                }()};
  // Stage-2 additive deltas: realized-at-ones values equal the nominal
  // stage-2 trajectories above.
  u.load[1].col(0) = s.peak_load[0];
  u.load[1].col(1) = s.peak_load[1] - s.peak_load[0];
  u.inv_cost_gen[1].col(0) = s.inv_cost_gen[0];
  if (n2 >= 2) u.inv_cost_gen[1].col(2) = s.inv_cost_gen[1] - s.inv_cost_gen[0];
  u.fuel_exist[1].col(0) = s.fuel_exist[0];
  if (n2 >= 3) u.fuel_exist[1].col(3) = s.fuel_exist[1] - s.fuel_exist[0];
  if (n2 < 2) u.inv_cost_gen[1].col(0) = s.inv_cost_gen[1];
  if (n2 < 3) u.fuel_exist[1].col(0) = s.fuel_exist[1];
  u.inv_cost_storage_energy[1].col(0) = s.inv_cost_storage_energy[1];
  u.inv_cost_storage_power[1].col(0) = s.inv_cost_storage_power[1];
  u.fuel_cand[1].col(0) = s.fuel_cand[1];

  const int n = 1 + n2;
  u.sigma = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) u.sigma(i, i) = var;
  u.sigma_factor = semidefinite_cholesky(u.sigma);
  u.validate();
  return {std::move(s), std::move(u)};
}

}  // namespace ldrx::testing
