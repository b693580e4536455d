#pragma once

#include <optional>

#include "ldrx/conic.hpp"
#include "ldrx/system.hpp"
#include "ldrx/uncertainty.hpp"

namespace ldrx {

/// Per-unit variance-control coefficients; infinity means unconstrained.
/// A uniform scalar applies to every unit of the family.
struct VarianceConfig {
  Eigen::VectorXd alpha_gen, alpha_storage_energy, alpha_storage_power;  // empty = all inf

  static VarianceConfig unconstrained() { return {}; }
  static VarianceConfig uniform(int nodes, double alpha);
  bool empty() const {
    return alpha_gen.size() == 0 && alpha_storage_energy.size() == 0 &&
           alpha_storage_power.size() == 0;
  }
};

/// A coefficient row over the uncertainty vector whose entries are affine in
/// the decision variables: row(x)[j] multiplies xi_j.
class XiAffine {
 public:
  explicit XiAffine(int dim) : coef_(dim) {}
  void add(int xi_index, int var, double c) {
    if (c != 0.0) coef_[xi_index].add(var, c);
  }
  void add_const(int xi_index, double c) { coef_[xi_index].constant += c; }
  int dim() const { return static_cast<int>(coef_.size()); }
  const AffineExpr& at(int j) const { return coef_[j]; }
  bool coord_empty(int j) const {
    return coef_[j].terms.empty() && coef_[j].constant == 0.0;
  }
  XiAffine& axpy(const XiAffine& other, double scale);

 private:
  std::vector<AffineExpr> coef_;
};

/// Emits the chance-constraint reformulations into a ConicProgram. All rows
/// are stated on full-length xi coefficient rows; the covariance factor of
/// the model supplies the std vectors.
class ChanceReformulator {
 public:
  ChanceReformulator(ConicProgram& prog, const UncertaintyModel& u, RiskMode mode)
      : prog_(prog), u_(u), mode_(mode) {}

  /// row(x)'xi == 0 surely: one equality per xi coordinate.
  void equality_all_xi(const XiAffine& row, const std::string& tag);

  /// P[row(x)'xi >= 0] >= 1 - eps as one second-order cone row.
  void single_sided(const XiAffine& row, double eps, const std::string& tag);

  /// P[lower <= row(x)'xi <= upper] >= 1 - eps. Exact one-cone-five-rows
  /// encoding under DRO; two Normal-quantile single-sided rows otherwise.
  /// Degenerate upper == lower is rejected.
  void double_sided(const XiAffine& row, double lower, double upper, double eps,
                    const std::string& tag);

  /// ||std(row)|| <= alpha * E[row'xi], the variance-control row.
  void variance_row(const XiAffine& row, double alpha, const std::string& tag);

  ConicProgram& program() { return prog_; }

 private:
  AffineExpr mean_expr(const XiAffine& row) const;
  std::vector<AffineExpr> std_exprs(const XiAffine& row) const;

  ConicProgram& prog_;
  const UncertaintyModel& u_;
  RiskMode mode_;
};

/// Objective coefficient matrix for E[(factor xi^t)'(X S_t xi)]: entry (i,j)
/// multiplies X(i,j); equals factor * second_moment_block(t).
Eigen::MatrixXd expected_bilinear_coefficients(const UncertaintyModel& u, int t,
                                               const Eigen::MatrixXd& factor);

/// E[(factor xi^t)'(policy S_t xi)] evaluated directly.
double expected_product(const UncertaintyModel& u, int t, const Eigen::MatrixXd& factor,
                        const Eigen::MatrixXd& policy);

/// Per-row standard deviations of policy_t S_t xi.
Eigen::VectorXd investment_std(const UncertaintyModel& u, int t, const Eigen::MatrixXd& policy);

struct LdrLayout {
  int N = 0, T = 0, W = 0, H = 0;
  std::vector<int> nt;        // revealed coordinates per stage
  std::vector<int> inv_base;  // per stage
  std::vector<int> ops_base;  // per stage
  std::vector<int> cum_base;  // per stage; equality-defined cumulative rules
  static constexpr int kDispatchExist = 0;
  static constexpr int kDispatchCand = 1;
  static constexpr int kSoc = 2;
  static constexpr int kCharge = 3;
  static constexpr int kDischarge = 4;
  int inv(int fam, int t, int i, int j) const {
    return inv_base[t] + (fam * N + i) * nt[t] + j;
  }
  int op(int fam, int t, int w, int h, int i, int j) const {
    return ops_base[t] + (((w * H + h) * 5 + fam) * N + i) * nt[t] + j;
  }
  int cum(int fam, int t, int i, int j) const {
    return cum_base[t] + (fam * N + i) * nt[t] + j;
  }
};

/// Optimized decision-rule coefficients for every investment and operational
/// variable. Evaluating at the all-ones vector gives the nominal plan.
struct LdrPolicy {
  StageIndexer stages{StageIndexer::make({1})};
  int N = 0, T = 0, W = 0, H = 0;
  std::vector<Eigen::MatrixXd> invest_gen, invest_storage_energy, invest_storage_power;
  // ops[t][w][h][family], each N x revealed(t)
  std::vector<std::vector<std::vector<std::vector<Eigen::MatrixXd>>>> ops;
  double objective = 0.0;
  RiskMode mode = RiskMode::Dro;

  Eigen::VectorXd invest_gen_at(int t, const Eigen::VectorXd& xi) const;
  Eigen::VectorXd invest_se_at(int t, const Eigen::VectorXd& xi) const;
  Eigen::VectorXd invest_sp_at(int t, const Eigen::VectorXd& xi) const;
  Eigen::VectorXd op_at(int fam, int t, int w, int h, const Eigen::VectorXd& xi) const;

  std::string to_json() const;
  static LdrPolicy from_json(const std::string& text);
};

struct LdrBuild {
  ConicProgram program;
  LdrLayout layout;
};

/// Full multi-stage chance-constrained SOCP: trace objective, sure
/// equalities, reformulated constraint families, optional variance rows and
/// the expected-budget row.
LdrBuild build_primal_ldr(const SystemData& s, const UncertaintyModel& u, const RiskConfig& risk,
                          const VarianceConfig& var = {}, bool budget_on = true);

LdrPolicy extract_policy(const SystemData& s, const UncertaintyModel& u, const LdrLayout& lay,
                         const Solution& sol, RiskMode mode);

/// build + solve + extract; throws std::runtime_error naming the infeasible
/// family when the solver certifies infeasibility.
LdrPolicy solve_primal_ldr(const SystemData& s, const UncertaintyModel& u, const RiskConfig& risk,
                           const VarianceConfig& var = {}, bool budget_on = true,
                           const SolveOptions& opts = {});

}  // namespace ldrx
