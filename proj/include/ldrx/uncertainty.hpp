#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldrx {

enum class RiskMode { Dro, Normal };

RiskMode parse_risk_mode(const std::string& tag);
const char* risk_mode_name(RiskMode mode);

/// Quantile of the standard Normal distribution (Wichura's AS241).
double normal_quantile(double p);

/// Chance-constraint safety factor for violation probability eps in (0, 0.5):
/// sqrt((1-eps)/eps) under distributional robustness, the (1-eps)-quantile of
/// the standard Normal otherwise.
double safety_factor(double eps, RiskMode mode);

/// Per-stage uncertainty bookkeeping. Stage t reveals stage_sizes[t] random
/// variables; the truncation to stage t keeps the leading revealed(t) entries.
/// Truncation matrices are identity blocks and never materialized.
class StageIndexer {
 public:
  static StageIndexer make(std::vector<int> stage_sizes);

  int stages() const { return static_cast<int>(sizes_.size()); }
  int total() const { return cum_.back(); }
  int size_of(int t) const { return sizes_[t]; }
  /// n^t: number of random variables revealed up to and including stage t.
  int revealed(int t) const { return cum_[t + 1]; }

  /// S_t xi
  Eigen::VectorXd truncate(const Eigen::VectorXd& xi, int t) const;

  const std::vector<int>& sizes() const { return sizes_; }

 private:
  std::vector<int> sizes_;
  std::vector<int> cum_;  // prefix sums, cum_[t+1] = n^t
};

/// Cholesky-like factorization F with F F^T = sigma for symmetric positive
/// semidefinite sigma. Zero pivots (eigenvalues clipped at 1e-10 relative)
/// produce zero columns, so the factor stays lower triangular in natural
/// order. Throws on asymmetric input or an eigenvalue below -1e-8 * ||sigma||.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& sigma);

/// Length-n uncertainty realization with the hear-and-now convention
/// xi[0] == 1.
struct ScenarioVector {
  Eigen::VectorXd xi;
  explicit ScenarioVector(Eigen::VectorXd v);
};

/// Stage-structured factor model for the uncertain planning parameters plus
/// the first two moments of xi. Immutable after construction.
struct UncertaintyModel {
  StageIndexer stages{StageIndexer::make({1})};

  // Factor matrices per stage, N x revealed(t); emission cap factor is a row.
  std::vector<Eigen::MatrixXd> inv_cost_gen;             // Q^g
  std::vector<Eigen::MatrixXd> inv_cost_storage_energy;  // Q^s
  std::vector<Eigen::MatrixXd> inv_cost_storage_power;   // Q^p
  std::vector<Eigen::MatrixXd> load;                     // L
  std::vector<Eigen::MatrixXd> fuel_exist;               // C^e
  std::vector<Eigen::MatrixXd> fuel_cand;                // C^c
  std::vector<Eigen::RowVectorXd> emis_cap;              // Ebar

  Eigen::MatrixXd sigma;         // covariance of xi, n x n
  Eigen::MatrixXd sigma_factor;  // F with F F^T = sigma

  int dim() const { return stages.total(); }

  /// sigma + 11^T, recomputed on demand.
  Eigen::MatrixXd second_moment() const;

  /// Leading revealed(t) x revealed(t) block of the second moment.
  Eigen::MatrixXd second_moment_block(int t) const;

  /// Std of a^T xi for a full-length coefficient row a: ||F^T a||.
  double row_std(const Eigen::VectorXd& a) const;

  /// F^T a, the vector whose norm is the std of a^T xi.
  Eigen::VectorXd std_vector(const Eigen::VectorXd& a) const;

  void validate() const;
};

/// Deterministic parameter values obtained by evaluating the factor model at
/// one realization.
struct RealizedParameters {
  std::vector<Eigen::VectorXd> inv_cost_gen, inv_cost_storage_energy, inv_cost_storage_power;
  std::vector<Eigen::VectorXd> load, fuel_exist, fuel_cand;
  std::vector<double> emis_cap;
};

RealizedParameters realize_parameters(const UncertaintyModel& u, const Eigen::VectorXd& xi);

/// Joint violation probabilities per constraint family and the Bonferroni
/// split into individual row budgets. With direct_individual the stored
/// values are already per-row (the case-study convention).
struct RiskConfig {
  RiskMode mode = RiskMode::Dro;
  bool direct_individual = false;
  double eps_flow = 0.125;
  double eps_gen = 0.01;
  double eps_ramp = 0.01;
  double eps_storage = 0.04;
  double eps_emission = 0.2;
  double eps_investment = 0.05;

  double flow_individual(int lines) const;
  double gen_individual(int nodes) const;
  double ramp_individual(int nodes) const;
  double storage_individual(int nodes) const;
  double emission_individual() const;
  double investment_individual(int nodes) const;

  // Joint family budgets implied by the individual values (capped at 1), used
  // for empirical violation checks.
  double flow_joint(int lines) const;
  double gen_joint(int nodes) const;
  double ramp_joint(int nodes) const;
  double storage_joint(int nodes) const;
  double emission_joint() const;
  double investment_joint(int nodes) const;

  void validate(int nodes, int lines) const;
};

double bonferroni_split(double eps, int rows);

}  // namespace ldrx
