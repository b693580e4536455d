#pragma once

#include <Eigen/Sparse>

#include "ldrx/conic.hpp"
#include "ldrx/system.hpp"
#include "ldrx/uncertainty.hpp"

namespace ldrx {

enum class RowKind {
  Inequality,  // chance row with its own dual rule
  Equality,    // holds surely; free dual
  Bound        // plain nonnegativity of one variable; dual eliminated
};

struct CanonicalRowInfo {
  RowKind kind = RowKind::Inequality;
  std::string name;
  int bound_var = -1;  // for Bound rows, the variable it bounds
};

/// Stagewise standard form min E[sum_t c_t(xi^t)' x_t(xi^t)] subject to
/// per-stage row blocks sum_{tau<=t} A[t][tau] x_tau >= b_t(xi^t), every row
/// at the uniform violation probability eps_hat. Rows and variables keep the
/// same layout across stages; equalities are stored as single rows with free
/// duals and every variable carries exactly one Bound row.
struct StagewiseStandardForm {
  StageIndexer stages{StageIndexer::make({1})};
  int vars_per_stage = 0;
  int rows_per_stage = 0;
  std::vector<std::vector<Eigen::SparseMatrix<double>>> A;  // A[t][tau], tau <= t
  std::vector<Eigen::MatrixXd> B;                           // rows_per_stage x revealed(t)
  std::vector<Eigen::MatrixXd> C;                           // vars_per_stage x revealed(t)
  double objective_constant = 0.0;
  std::vector<CanonicalRowInfo> row_info;   // shared across stages
  std::vector<std::string> var_names;       // shared across stages
  double eps_hat = 0.1;
  RiskMode mode = RiskMode::Dro;
};

/// Rewrites the planning model into the stagewise standard form with a
/// uniform per-row violation probability. Double-sided limits enter as row
/// pairs; the budget row uses nominal investment prices.
StagewiseStandardForm canonicalize(const SystemData& s, const UncertaintyModel& u, double eps_hat,
                                   RiskMode mode);

struct CompactLayout {
  std::vector<int> base;  // variable base per stage
  std::vector<int> nt;
  int vars_per_stage = 0;
  int var(int t, int i, int j) const { return base[t] + i * nt[t] + j; }
};

struct CompactPrimal {
  ConicProgram program;
  CompactLayout layout;
};

struct DualLayout {
  std::vector<int> base;        // per stage
  std::vector<int> dual_rows;   // canonical row index per dual row slot
  std::vector<int> slot_of_row; // canonical row index -> slot or -1
  std::vector<int> nt;
  int rows = 0;  // dual row slots per stage
  int var(int t, int slot, int j) const { return base[t] + slot * nt[t] + j; }
};

struct CompactDual {
  ConicProgram program;
  DualLayout layout;
};

/// Primal LDR approximation: rules X_t, trace objective, one chance row per
/// canonical row.
CompactPrimal build_primal_ldr_compact(const StagewiseStandardForm& f, const UncertaintyModel& u);

/// Dual LDR approximation: rules Lambda_t for equality/inequality rows,
/// time-reversed slack rows per primal variable, sign rows for inequality
/// duals. The program is stated as a minimization of the negated objective.
CompactDual build_dual_ldr_compact(const StagewiseStandardForm& f, const UncertaintyModel& u);

/// Dual decision-rule coefficients and the attained bound objective.
struct DualPolicy {
  std::vector<Eigen::MatrixXd> lambda;  // per stage, dual_rows x revealed(t)
  std::vector<int> row_of_slot;
  double objective = 0.0;
};

struct GapResult {
  double primal = 0.0;
  double dual = 0.0;
  double absolute = 0.0;
  double percent = 0.0;
  bool negative_gap = false;  // gap below -1e-6 * (1 + |primal|)
};

GapResult suboptimality_bound(double primal, double dual);

struct GapSolveResult {
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  GapResult gap;
  std::vector<Eigen::MatrixXd> primal_rules;  // X_t
  DualPolicy dual_policy;
};

/// Solves the compact primal and dual pair and certifies the bound.
GapSolveResult solve_gap(const StagewiseStandardForm& f, const UncertaintyModel& u,
                         const SolveOptions& opts = {});

/// Evaluates the dual slack rows at a given dual policy; returns the worst
/// violation of the Eq-style cone rows (<= tol means dual feasible).
double dual_feasibility_residual(const StagewiseStandardForm& f, const UncertaintyModel& u,
                                 const DualPolicy& dual);

}  // namespace ldrx
