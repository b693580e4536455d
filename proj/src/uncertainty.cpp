#include "ldrx/uncertainty.hpp"

#include <cmath>

namespace ldrx {

RiskMode parse_risk_mode(const std::string& tag) {
  if (tag == "dro" || tag == "DRO") return RiskMode::Dro;
  if (tag == "normal" || tag == "NORMAL") return RiskMode::Normal;
  throw std::invalid_argument("unknown risk mode '" + tag + "' (expected dro|normal)");
}

const char* risk_mode_name(RiskMode mode) {
  return mode == RiskMode::Dro ? "dro" : "normal";
}

double normal_quantile(double p) {
  // Wichura, Algorithm AS 241 (PPND16).
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e0) *
                  r +
              3.64784832476320460504e0) *
                 r +
             5.76949722146069140550e0) *
                r +
            4.63033784615654529590e0) *
               r +
           1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e0) *
                r +
            2.05319162663775882187e0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.72848273914949214920e0) *
                r +
            5.46378491116411436990e0) *
               r +
           6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

double safety_factor(double eps, RiskMode mode) {
  if (!(eps > 0.0 && eps < 0.5)) throw std::domain_error("safety_factor: eps must lie in (0, 0.5)");
  if (mode == RiskMode::Dro) return std::sqrt((1.0 - eps) / eps);
  return normal_quantile(1.0 - eps);
}

StageIndexer StageIndexer::make(std::vector<int> stage_sizes) {
  if (stage_sizes.empty()) throw std::invalid_argument("stage sizes empty");
  if (stage_sizes.front() != 1)
    throw std::invalid_argument("first stage size must be 1 (hear-and-now convention)");
  for (int s : stage_sizes)
    if (s < 1) throw std::invalid_argument("stage sizes must be >= 1");
  StageIndexer idx;
  idx.sizes_ = std::move(stage_sizes);
  idx.cum_.resize(idx.sizes_.size() + 1, 0);
  for (size_t t = 0; t < idx.sizes_.size(); ++t) idx.cum_[t + 1] = idx.cum_[t] + idx.sizes_[t];
  return idx;
}

Eigen::VectorXd StageIndexer::truncate(const Eigen::VectorXd& xi, int t) const {
  if (xi.size() != total()) throw std::invalid_argument("scenario length mismatch");
  return xi.head(revealed(t));
}

Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& sigma) {
  const int n = static_cast<int>(sigma.rows());
  if (sigma.cols() != n) throw std::invalid_argument("covariance not square");
  const double norm = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * norm)
    throw std::invalid_argument("covariance not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -1e-8 * norm)
    throw std::invalid_argument("covariance has negative eigenvalue " + std::to_string(min_eig));

  const double clip = 1e-10 * norm;
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd rem = sigma;
  for (int k = 0; k < n; ++k) {
    const double d = rem(k, k);
    if (d <= clip) continue;  // zero pivot: PSD forces the whole residual row to ~0
    const double root = std::sqrt(d);
    f(k, k) = root;
    for (int i = k + 1; i < n; ++i) f(i, k) = rem(i, k) / root;
    for (int j = k + 1; j < n; ++j)
      for (int i = j; i < n; ++i) rem(i, j) -= f(i, k) * f(j, k);
  }
  return f;
}

ScenarioVector::ScenarioVector(Eigen::VectorXd v) : xi(std::move(v)) {
  if (xi.size() < 1 || xi[0] != 1.0)
    throw std::invalid_argument("scenario first entry must equal 1");
}

Eigen::MatrixXd UncertaintyModel::second_moment() const {
  const int n = dim();
  return sigma + Eigen::MatrixXd::Ones(n, n);
}

Eigen::MatrixXd UncertaintyModel::second_moment_block(int t) const {
  const int nt = stages.revealed(t);
  return sigma.topLeftCorner(nt, nt) + Eigen::MatrixXd::Ones(nt, nt);
}

double UncertaintyModel::row_std(const Eigen::VectorXd& a) const {
  return std_vector(a).norm();
}

Eigen::VectorXd UncertaintyModel::std_vector(const Eigen::VectorXd& a) const {
  return sigma_factor.transpose() * a;
}

void UncertaintyModel::validate() const {
  const int T = stages.stages();
  const int n = dim();
  auto check_stage_count = [&](size_t got, const char* what) {
    if (static_cast<int>(got) != T)
      throw std::invalid_argument(std::string(what) + ": expected one factor matrix per stage");
  };
  check_stage_count(inv_cost_gen.size(), "inv_cost_gen");
  check_stage_count(inv_cost_storage_energy.size(), "inv_cost_storage_energy");
  check_stage_count(inv_cost_storage_power.size(), "inv_cost_storage_power");
  check_stage_count(load.size(), "load");
  check_stage_count(fuel_exist.size(), "fuel_exist");
  check_stage_count(fuel_cand.size(), "fuel_cand");
  check_stage_count(emis_cap.size(), "emis_cap");
  for (int t = 0; t < T; ++t) {
    const int nt = stages.revealed(t);
    for (const auto* m : {&inv_cost_gen[t], &inv_cost_storage_energy[t], &inv_cost_storage_power[t],
                          &load[t], &fuel_exist[t], &fuel_cand[t]})
      if (m->cols() != nt)
        throw std::invalid_argument("factor matrix at stage " + std::to_string(t + 1) +
                                    " has wrong column count");
    if (emis_cap[t].cols() != nt)
      throw std::invalid_argument("emission cap factor at stage " + std::to_string(t + 1) +
                                  " has wrong column count");
  }
  if (sigma.rows() != n || sigma.cols() != n)
    throw std::invalid_argument("covariance dimension mismatch");
  if (sigma_factor.rows() != n)
    throw std::invalid_argument("covariance factor dimension mismatch");
  const double err = (sigma_factor * sigma_factor.transpose() - sigma).norm();
  if (err > 1e-8 * std::max(1.0, sigma.norm()))
    throw std::invalid_argument("covariance factor does not reproduce covariance");
}

RealizedParameters realize_parameters(const UncertaintyModel& u, const Eigen::VectorXd& xi) {
  if (xi.size() != u.dim()) throw std::invalid_argument("realization length mismatch");
  if (xi[0] != 1.0) throw std::invalid_argument("realization first entry must equal 1");
  const int T = u.stages.stages();
  RealizedParameters r;
  for (int t = 0; t < T; ++t) {
    const auto xt = u.stages.truncate(xi, t);
    r.inv_cost_gen.push_back(u.inv_cost_gen[t] * xt);
    r.inv_cost_storage_energy.push_back(u.inv_cost_storage_energy[t] * xt);
    r.inv_cost_storage_power.push_back(u.inv_cost_storage_power[t] * xt);
    r.load.push_back(u.load[t] * xt);
    r.fuel_exist.push_back(u.fuel_exist[t] * xt);
    r.fuel_cand.push_back(u.fuel_cand[t] * xt);
    r.emis_cap.push_back(u.emis_cap[t] * xt);
  }
  return r;
}

double bonferroni_split(double eps, int rows) {
  if (rows < 1) throw std::invalid_argument("bonferroni_split: rows must be >= 1");
  return eps / rows;
}

double RiskConfig::flow_individual(int lines) const {
  return direct_individual ? eps_flow : bonferroni_split(eps_flow, lines);
}
double RiskConfig::gen_individual(int nodes) const {
  return direct_individual ? eps_gen : bonferroni_split(eps_gen, 3 * nodes);
}
double RiskConfig::ramp_individual(int nodes) const {
  return direct_individual ? eps_ramp : bonferroni_split(eps_ramp, 3 * nodes);
}
double RiskConfig::storage_individual(int nodes) const {
  return direct_individual ? eps_storage : bonferroni_split(eps_storage, 7 * nodes);
}
double RiskConfig::emission_individual() const { return eps_emission; }
double RiskConfig::investment_individual(int nodes) const {
  return direct_individual ? eps_investment : bonferroni_split(eps_investment, 3 * nodes);
}

static double cap1(double v) { return v > 1.0 ? 1.0 : v; }

double RiskConfig::flow_joint(int lines) const { return cap1(flow_individual(lines) * lines); }
double RiskConfig::gen_joint(int nodes) const { return cap1(gen_individual(nodes) * 3 * nodes); }
double RiskConfig::ramp_joint(int nodes) const { return cap1(ramp_individual(nodes) * 3 * nodes); }
double RiskConfig::storage_joint(int nodes) const {
  return cap1(storage_individual(nodes) * 7 * nodes);
}
double RiskConfig::emission_joint() const { return cap1(eps_emission); }
double RiskConfig::investment_joint(int nodes) const {
  return cap1(investment_individual(nodes) * 3 * nodes);
}

void RiskConfig::validate(int nodes, int lines) const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0 && v < 0.5))
      throw std::invalid_argument(std::string("individual violation probability ") + name +
                                  " outside (0, 0.5)");
  };
  check(flow_individual(lines), "flow");
  check(gen_individual(nodes), "gen");
  check(ramp_individual(nodes), "ramp");
  check(storage_individual(nodes), "storage");
  check(emission_individual(), "emission");
  check(investment_individual(nodes), "investment");
}

}  // namespace ldrx
