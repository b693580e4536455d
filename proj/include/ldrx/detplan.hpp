#pragma once

#include "ldrx/conic.hpp"
#include "ldrx/system.hpp"

namespace ldrx {

/// Variable layout of the deterministic LP. Investment variables per stage,
/// operational variables per (stage, horizon, hour), N of each family.
struct DetLayout {
  int N = 0, T = 0, W = 0, H = 0;
  int invest_gen(int t, int i) const { return base_invest + 3 * N * t + i; }
  int invest_se(int t, int i) const { return base_invest + 3 * N * t + N + i; }
  int invest_sp(int t, int i) const { return base_invest + 3 * N * t + 2 * N + i; }
  int op(int family, int t, int w, int h, int i) const {
    return base_ops + (((t * W + w) * H + h) * 5 + family) * N + i;
  }
  // families
  static constexpr int kDispatchExist = 0;
  static constexpr int kDispatchCand = 1;
  static constexpr int kSoc = 2;
  static constexpr int kCharge = 3;
  static constexpr int kDischarge = 4;
  int base_invest = 0;
  int base_ops = 0;
  int total = 0;
};

struct DeterministicPlan {
  std::vector<Eigen::VectorXd> build_gen, build_storage_energy, build_storage_power;
  // dispatch[t][w] is N x H
  std::vector<std::vector<Eigen::MatrixXd>> dispatch_exist, dispatch_cand, soc, charge, discharge;
  double cost_invest = 0.0, cost_om = 0.0, cost_fuel = 0.0;
  double objective = 0.0;
};

/// Multi-stage deterministic investment LP: system-wide balance, PTDF flow
/// limits, generation/ramping/storage constraints with cumulative built
/// capacity, per-stage emission caps, investment boxes and budgets.
std::pair<ConicProgram, DetLayout> build_deterministic(const SystemData& s);

DeterministicPlan extract_deterministic(const SystemData& s, const DetLayout& lay,
                                        const Solution& sol);

/// build + solve + extract; throws std::runtime_error on non-optimal status.
DeterministicPlan solve_deterministic(const SystemData& s, const SolveOptions& opts = {});

}  // namespace ldrx
