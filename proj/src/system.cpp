#include "ldrx/system.hpp"

#include <cmath>
#include <stdexcept>

namespace ldrx {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_nonneg(const Eigen::VectorXd& v, const std::string& what) {
  require(v.minCoeff() >= 0.0, what + ": negative entry");
}

void check_stage_vectors(const std::vector<Eigen::VectorXd>& vs, int T, int N,
                         const std::string& what) {
  require(static_cast<int>(vs.size()) == T, what + ": expected one vector per stage");
  for (const auto& v : vs) {
    require(v.size() == N, what + ": wrong length");
    check_nonneg(v, what);
  }
}

void check_capacity_factors(const std::vector<std::vector<Eigen::MatrixXd>>& cf, int T, int W,
                            int N, int H, const std::string& what) {
  require(static_cast<int>(cf.size()) == T, what + ": expected T stages");
  for (const auto& per_w : cf) {
    require(static_cast<int>(per_w.size()) == W, what + ": expected W horizons");
    for (const auto& m : per_w) {
      require(m.rows() == N && m.cols() == H, what + ": expected N x H");
      require(m.minCoeff() >= 0.0 && m.maxCoeff() <= 1.0, what + ": entries must lie in [0,1]");
    }
  }
}

}  // namespace

void SystemData::validate() const {
  require(T >= 1 && W >= 1 && H >= 1 && N >= 1 && E >= 0, "dimensions must be positive");
  require(ptdf.rows() == E && ptdf.cols() == N, "ptdf: expected E x N");
  require(line_limit.size() == E, "line_limit: expected E entries");
  if (E > 0) check_nonneg(line_limit, "line_limit");

  check_stage_vectors(existing_cap, T, N, "existing_cap");
  check_stage_vectors(inv_cost_gen, T, N, "inv_cost_gen");
  check_stage_vectors(inv_cost_storage_energy, T, N, "inv_cost_storage_energy");
  check_stage_vectors(inv_cost_storage_power, T, N, "inv_cost_storage_power");
  check_stage_vectors(om_exist, T, N, "om_exist");
  check_stage_vectors(om_gen, T, N, "om_gen");
  check_stage_vectors(om_storage_energy, T, N, "om_storage_energy");
  check_stage_vectors(om_storage_power, T, N, "om_storage_power");
  check_stage_vectors(fuel_exist, T, N, "fuel_exist");
  check_stage_vectors(fuel_cand, T, N, "fuel_cand");
  check_stage_vectors(peak_load, T, N, "peak_load");
  check_stage_vectors(max_gen, T, N, "max_gen");
  check_stage_vectors(max_storage_energy, T, N, "max_storage_energy");
  check_stage_vectors(max_storage_power, T, N, "max_storage_power");

  check_capacity_factors(cf_exist, T, W, N, H, "cf_exist");
  check_capacity_factors(cf_cand, T, W, N, H, "cf_cand");
  check_capacity_factors(cf_load, T, W, N, H, "cf_load");

  for (const auto* r : {&ramp_up_exist, &ramp_dn_exist, &ramp_up_cand, &ramp_dn_cand}) {
    require(r->size() == N, "ramp fractions: expected N entries");
    check_nonneg(*r, "ramp fractions");
  }

  require(eta_charge > 0.0 && eta_charge <= 1.0, "eta_charge outside (0,1]");
  require(eta_discharge > 0.0 && eta_discharge <= 1.0, "eta_discharge outside (0,1]");

  require(emis_exist.size() == N && emis_cand.size() == N, "emission intensities: expected N");
  check_nonneg(emis_exist, "emis_exist");
  check_nonneg(emis_cand, "emis_cand");
  require(static_cast<int>(emis_cap.size()) == T, "emis_cap: expected one cap per stage");
  for (double cap : emis_cap) require(cap >= 0.0, "emis_cap: negative cap");

  require(static_cast<int>(budget.size()) == T, "budget: expected one entry per stage");
  for (double b : budget) require(b >= 0.0, "budget: negative entry");

  require(horizon_weight.size() == W, "horizon_weight: expected W entries");
  check_nonneg(horizon_weight, "horizon_weight");
  const double hours = horizon_weight.sum() * H;
  require(std::abs(hours - annual_hours) <= 1e-6 * annual_hours,
          "horizon weights: sum_w weight*H must equal annual_hours");

  require(shed_penalty >= 0.0, "shed_penalty: negative");
}

}  // namespace ldrx
