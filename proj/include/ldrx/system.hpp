#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ldrx {

/// Complete physical and economic description of one planning instance.
/// Nominal parameter trajectories equal the factor model realized at the
/// all-ones vector. Immutable after construction.
struct SystemData {
  int T = 0;  // investment stages
  int W = 0;  // operating horizons per stage
  int H = 0;  // representative hours per horizon
  int N = 0;  // nodes
  int E = 0;  // lines
  double annual_hours = 8760.0;

  std::vector<std::string> node_names;
  Eigen::MatrixXd ptdf;        // E x N
  Eigen::VectorXd line_limit;  // E

  std::vector<Eigen::VectorXd> existing_cap;  // per stage, N

  // Nominal cost trajectories per stage (N each).
  std::vector<Eigen::VectorXd> inv_cost_gen, inv_cost_storage_energy, inv_cost_storage_power;
  std::vector<Eigen::VectorXd> om_exist, om_gen, om_storage_energy, om_storage_power;
  std::vector<Eigen::VectorXd> fuel_exist, fuel_cand;

  // Capacity factors, [t][w] holding an N x H matrix.
  std::vector<std::vector<Eigen::MatrixXd>> cf_exist, cf_cand, cf_load;

  Eigen::VectorXd ramp_up_exist, ramp_dn_exist;  // fractions of installed capacity
  Eigen::VectorXd ramp_up_cand, ramp_dn_cand;

  double eta_charge = 1.0;
  double eta_discharge = 1.0;

  Eigen::VectorXd emis_exist, emis_cand;  // tCO2/MWh
  std::vector<double> emis_cap;           // per stage

  Eigen::VectorXd horizon_weight;          // W entries, sum_w weight*H == annual_hours
  std::vector<Eigen::VectorXd> peak_load;  // per stage, N

  std::vector<Eigen::VectorXd> max_gen, max_storage_energy, max_storage_power;  // per stage, N
  std::vector<double> budget;                                                   // per stage

  double shed_penalty = 9000.0;

  /// Throws std::invalid_argument with a field path on the first violation.
  void validate() const;
};

}  // namespace ldrx
