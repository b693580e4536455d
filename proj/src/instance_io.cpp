#include "ldrx/instance_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ldrx {

using nlohmann::json;

ValidationError::ValidationError(std::vector<std::string> list)
    : std::runtime_error([&] {
        std::string msg = "instance validation failed:";
        for (const auto& s : list) msg += "\n  " + s;
        return msg;
      }()),
      issues(std::move(list)) {}

namespace {

class Checker {
 public:
  std::vector<std::string> issues;

  void add(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

  const json* need(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) {
      add(path + "/" + key, "missing");
      return nullptr;
    }
    return &j.at(key);
  }

  double num(const json& j, const std::string& path, const char* key, double fallback = 0.0,
             bool required = true) {
    if (!j.contains(key)) {
      if (required) add(path + "/" + key, "missing number");
      return fallback;
    }
    if (!j.at(key).is_number()) {
      add(path + "/" + key, "expected a number");
      return fallback;
    }
    return j.at(key).get<double>();
  }

  Eigen::VectorXd vec(const json& j, const std::string& path, int expect) {
    if (!j.is_array()) {
      add(path, "expected an array");
      return Eigen::VectorXd::Zero(expect);
    }
    if (expect >= 0 && static_cast<int>(j.size()) != expect) {
      add(path, "expected " + std::to_string(expect) + " entries, got " +
                    std::to_string(j.size()));
      return Eigen::VectorXd::Zero(expect);
    }
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) {
        add(path + "[" + std::to_string(i) + "]", "expected a number");
        v[i] = 0.0;
      } else {
        v[i] = j[i].get<double>();
      }
    }
    return v;
  }

  std::vector<Eigen::VectorXd> stage_vectors(const json& j, const std::string& path, int T,
                                             int N) {
    std::vector<Eigen::VectorXd> out;
    if (!j.is_array() || static_cast<int>(j.size()) != T) {
      add(path, "expected one array per stage");
      out.assign(T, Eigen::VectorXd::Zero(N));
      return out;
    }
    for (int t = 0; t < T; ++t) out.push_back(vec(j[t], path + "[" + std::to_string(t) + "]", N));
    return out;
  }
};

// Assembled factor data for one uncertain parameter family.
struct FactorSpec {
  Eigen::VectorXd base;                          // rows
  std::vector<Eigen::VectorXd> drift;            // per stage 2..T, deterministic change
  std::vector<std::vector<Eigen::VectorXd>> deltas;  // per stage 2..T, per stage coordinate
};

FactorSpec parse_factor(Checker& ck, const json& j, const std::string& path, int rows, int T,
                        const std::vector<int>& stage_sizes) {
  FactorSpec spec;
  if (const json* b = ck.need(j, path, "base")) spec.base = ck.vec(*b, path + "/base", rows);
  if (spec.base.size() != rows) spec.base = Eigen::VectorXd::Zero(rows);
  spec.drift.assign(T - 1, Eigen::VectorXd::Zero(rows));
  if (j.contains("drift")) {
    const json& d = j.at("drift");
    if (!d.is_array() || static_cast<int>(d.size()) != T - 1)
      ck.add(path + "/drift", "expected one array per stage after the first");
    else
      for (int t = 0; t + 1 < T; ++t)
        spec.drift[t] = ck.vec(d[t], path + "/drift[" + std::to_string(t) + "]", rows);
  }
  spec.deltas.resize(T - 1);
  for (int t = 0; t + 1 < T; ++t)
    spec.deltas[t].assign(stage_sizes[t + 1], Eigen::VectorXd::Zero(rows));
  if (j.contains("deltas")) {
    const json& d = j.at("deltas");
    if (!d.is_array() || static_cast<int>(d.size()) != T - 1)
      ck.add(path + "/deltas", "expected one block per stage after the first");
    else
      for (int t = 0; t + 1 < T; ++t) {
        const std::string p = path + "/deltas[" + std::to_string(t) + "]";
        if (!d[t].is_array() || static_cast<int>(d[t].size()) != stage_sizes[t + 1]) {
          ck.add(p, "expected " + std::to_string(stage_sizes[t + 1]) + " coordinate arrays");
          continue;
        }
        for (int k = 0; k < stage_sizes[t + 1]; ++k)
          spec.deltas[t][k] = ck.vec(d[t][k], p + "[" + std::to_string(k) + "]", rows);
      }
  }
  return spec;
}

/// Stage-t factor matrix: column 0 carries the accumulated deterministic
/// part, later columns the additive deltas of the revealed coordinates.
std::vector<Eigen::MatrixXd> assemble_factors(const FactorSpec& spec, const StageIndexer& stages) {
  const int T = stages.stages();
  const int rows = static_cast<int>(spec.base.size());
  std::vector<Eigen::MatrixXd> out;
  Eigen::VectorXd det = spec.base;
  for (int t = 0; t < T; ++t) {
    if (t >= 1) det += spec.drift[t - 1];
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, stages.revealed(t));
    m.col(0) = det;
    int col = 1;
    for (int j = 1; j <= t; ++j)
      for (int k = 0; k < stages.size_of(j); ++k) m.col(col++) = spec.deltas[j - 1][k];
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Eigen::VectorXd> nominal_trajectory(const std::vector<Eigen::MatrixXd>& factors) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& m : factors) out.push_back(m.rowwise().sum());
  return out;
}

std::vector<std::vector<Eigen::MatrixXd>> parse_capacity_factors(Checker& ck, const json& sys,
                                                                 const std::string& key, int T,
                                                                 int W, int N, int H) {
  std::vector<std::vector<Eigen::MatrixXd>> out(
      T, std::vector<Eigen::MatrixXd>(W, Eigen::MatrixXd::Ones(N, H)));
  const std::string path = "/system/capacity_factors/" + key;
  if (!sys.contains("capacity_factors") || !sys.at("capacity_factors").contains(key)) {
    ck.add(path, "missing");
    return out;
  }
  const json& j = sys.at("capacity_factors").at(key);
  // [w][n][h], applied uniformly across stages.
  if (!j.is_array() || static_cast<int>(j.size()) != W) {
    ck.add(path, "expected one block per horizon");
    return out;
  }
  for (int w = 0; w < W; ++w) {
    if (!j[w].is_array() || static_cast<int>(j[w].size()) != N) {
      ck.add(path + "[" + std::to_string(w) + "]", "expected one row per node");
      continue;
    }
    for (int i = 0; i < N; ++i) {
      Eigen::VectorXd row =
          ck.vec(j[w][i], path + "[" + std::to_string(w) + "][" + std::to_string(i) + "]", H);
      for (int t = 0; t < T; ++t) out[t][w].row(i) = row.transpose();
    }
  }
  return out;
}

}  // namespace

Instance parse_instance(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("json: ") + e.what()});
  }
  Checker ck;
  Instance inst;
  inst.name = doc.value("name", "instance");

  const json* sysp = ck.need(doc, "", "system");
  const json* uncp = ck.need(doc, "", "uncertainty");
  const json* riskp = ck.need(doc, "", "risk");
  if (!ck.issues.empty()) throw ValidationError(std::move(ck.issues));
  const json& sys = *sysp;
  const json& unc = *uncp;
  const json& risk = *riskp;

  auto& s = inst.system;
  s.T = static_cast<int>(ck.num(sys, "/system", "stages"));
  s.W = static_cast<int>(ck.num(sys, "/system", "horizons"));
  s.H = static_cast<int>(ck.num(sys, "/system", "hours"));
  s.annual_hours = ck.num(sys, "/system", "annual_hours", 8760.0, false);
  if (const json* nodes = ck.need(sys, "/system", "nodes")) {
    if (!nodes->is_array() || nodes->empty())
      ck.add("/system/nodes", "expected a nonempty array of names");
    else
      for (const auto& n : *nodes) s.node_names.push_back(n.get<std::string>());
  }
  s.N = static_cast<int>(s.node_names.size());
  if (s.T < 1 || s.W < 1 || s.H < 1 || s.N < 1) {
    ck.add("/system", "dimensions must be positive");
    throw ValidationError(std::move(ck.issues));
  }

  // Lines.
  if (const json* lines = ck.need(sys, "/system", "lines")) {
    s.E = static_cast<int>(lines->size());
    s.ptdf = Eigen::MatrixXd::Zero(s.E, s.N);
    s.line_limit = Eigen::VectorXd::Zero(s.E);
    for (int e = 0; e < s.E; ++e) {
      const std::string path = "/system/lines[" + std::to_string(e) + "]";
      s.line_limit[e] = ck.num((*lines)[e], path, "limit");
      if (const json* p = ck.need((*lines)[e], path, "ptdf"))
        s.ptdf.row(e) = ck.vec(*p, path + "/ptdf", s.N).transpose();
    }
  }

  s.existing_cap = ck.stage_vectors(sys.value("existing_capacity", json::array()),
                                    "/system/existing_capacity", s.T, s.N);
  s.om_exist =
      ck.stage_vectors(sys.value("om_exist", json::array()), "/system/om_exist", s.T, s.N);
  s.om_gen = ck.stage_vectors(sys.value("om_gen", json::array()), "/system/om_gen", s.T, s.N);
  s.om_storage_energy = ck.stage_vectors(sys.value("om_storage_energy", json::array()),
                                         "/system/om_storage_energy", s.T, s.N);
  s.om_storage_power = ck.stage_vectors(sys.value("om_storage_power", json::array()),
                                        "/system/om_storage_power", s.T, s.N);
  s.max_gen = ck.stage_vectors(sys.value("max_gen", json::array()), "/system/max_gen", s.T, s.N);
  s.max_storage_energy = ck.stage_vectors(sys.value("max_storage_energy", json::array()),
                                          "/system/max_storage_energy", s.T, s.N);
  s.max_storage_power = ck.stage_vectors(sys.value("max_storage_power", json::array()),
                                         "/system/max_storage_power", s.T, s.N);

  s.cf_exist = parse_capacity_factors(ck, sys, "existing", s.T, s.W, s.N, s.H);
  s.cf_cand = parse_capacity_factors(ck, sys, "candidate", s.T, s.W, s.N, s.H);
  s.cf_load = parse_capacity_factors(ck, sys, "load", s.T, s.W, s.N, s.H);

  s.ramp_up_exist = ck.vec(sys.value("ramp_up_exist", json::array()), "/system/ramp_up_exist", s.N);
  s.ramp_dn_exist = ck.vec(sys.value("ramp_dn_exist", json::array()), "/system/ramp_dn_exist", s.N);
  s.ramp_up_cand = ck.vec(sys.value("ramp_up_cand", json::array()), "/system/ramp_up_cand", s.N);
  s.ramp_dn_cand = ck.vec(sys.value("ramp_dn_cand", json::array()), "/system/ramp_dn_cand", s.N);
  s.eta_charge = ck.num(sys, "/system", "eta_charge");
  s.eta_discharge = ck.num(sys, "/system", "eta_discharge");
  s.emis_exist = ck.vec(sys.value("emis_exist", json::array()), "/system/emis_exist", s.N);
  s.emis_cand = ck.vec(sys.value("emis_cand", json::array()), "/system/emis_cand", s.N);
  {
    Eigen::VectorXd w = ck.vec(sys.value("horizon_weights", json::array()),
                               "/system/horizon_weights", s.W);
    s.horizon_weight = w;
  }
  {
    Eigen::VectorXd b = ck.vec(sys.value("budget", json::array()), "/system/budget", s.T);
    s.budget.assign(b.data(), b.data() + b.size());
  }
  s.shed_penalty = ck.num(sys, "/system", "shed_penalty", 9000.0, false);

  // Uncertainty block.
  auto& u = inst.uncertainty;
  std::vector<int> stage_sizes;
  if (const json* ss = ck.need(unc, "/uncertainty", "stage_sizes")) {
    if (!ss->is_array() || static_cast<int>(ss->size()) != s.T)
      ck.add("/uncertainty/stage_sizes", "expected one size per stage");
    else
      for (const auto& v : *ss) stage_sizes.push_back(v.get<int>());
  }
  if (stage_sizes.empty()) stage_sizes.assign(s.T, 1);
  if (stage_sizes[0] != 1)
    ck.add("/uncertainty/stage_sizes", "first stage must have size 1 (hear-and-now)");
  try {
    u.stages = StageIndexer::make(stage_sizes);
  } catch (const std::exception& e) {
    ck.add("/uncertainty/stage_sizes", e.what());
    throw ValidationError(std::move(ck.issues));
  }
  const int n = u.stages.total();

  if (unc.contains("covariance")) {
    const json& cov = unc.at("covariance");
    u.sigma = Eigen::MatrixXd::Zero(n, n);
    if (!cov.is_array() || static_cast<int>(cov.size()) != n)
      ck.add("/uncertainty/covariance", "expected an n x n matrix with n=" + std::to_string(n));
    else
      for (int i = 0; i < n; ++i)
        u.sigma.row(i) = ck.vec(cov[i], "/uncertainty/covariance[" + std::to_string(i) + "]", n)
                             .transpose();
  } else {
    const double var = ck.num(unc, "/uncertainty", "variance");
    u.sigma = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) u.sigma(i, i) = var;
  }
  try {
    u.sigma_factor = semidefinite_cholesky(u.sigma);
  } catch (const std::exception& e) {
    ck.add("/uncertainty/covariance", e.what());
  }

  const json* params = ck.need(unc, "/uncertainty", "parameters");
  if (!params) throw ValidationError(std::move(ck.issues));
  auto factor_for = [&](const char* key, int rows) {
    FactorSpec spec;
    if (!params->contains(key)) {
      ck.add(std::string("/uncertainty/parameters/") + key, "missing");
      spec.base = Eigen::VectorXd::Zero(rows);
      spec.drift.assign(s.T - 1, Eigen::VectorXd::Zero(rows));
      spec.deltas.resize(s.T - 1);
      for (int t = 0; t + 1 < s.T; ++t)
        spec.deltas[t].assign(stage_sizes[t + 1], Eigen::VectorXd::Zero(rows));
      return spec;
    }
    return parse_factor(ck, params->at(key), std::string("/uncertainty/parameters/") + key, rows,
                        s.T, stage_sizes);
  };

  u.load = assemble_factors(factor_for("load", s.N), u.stages);
  u.inv_cost_gen = assemble_factors(factor_for("inv_cost_gen", s.N), u.stages);
  u.inv_cost_storage_energy =
      assemble_factors(factor_for("inv_cost_storage_energy", s.N), u.stages);
  u.inv_cost_storage_power = assemble_factors(factor_for("inv_cost_storage_power", s.N), u.stages);
  u.fuel_exist = assemble_factors(factor_for("fuel_exist", s.N), u.stages);
  u.fuel_cand = assemble_factors(factor_for("fuel_cand", s.N), u.stages);
  {
    auto caps = assemble_factors(factor_for("emis_cap", 1), u.stages);
    for (auto& m : caps) u.emis_cap.push_back(m.row(0));
  }

  // Nominal trajectories are the factors realized at ones.
  s.peak_load = nominal_trajectory(u.load);
  s.inv_cost_gen = nominal_trajectory(u.inv_cost_gen);
  s.inv_cost_storage_energy = nominal_trajectory(u.inv_cost_storage_energy);
  s.inv_cost_storage_power = nominal_trajectory(u.inv_cost_storage_power);
  s.fuel_exist = nominal_trajectory(u.fuel_exist);
  s.fuel_cand = nominal_trajectory(u.fuel_cand);
  for (const auto& m : u.emis_cap) s.emis_cap.push_back(m.sum());

  // Risk block.
  auto& rc = inst.risk;
  try {
    rc.mode = parse_risk_mode(risk.value("mode", "dro"));
  } catch (const std::exception& e) {
    ck.add("/risk/mode", e.what());
  }
  rc.direct_individual = risk.value("direct_individual", false);
  rc.eps_flow = ck.num(risk, "/risk", "flow");
  rc.eps_gen = ck.num(risk, "/risk", "gen");
  rc.eps_ramp = ck.num(risk, "/risk", "ramp");
  rc.eps_storage = ck.num(risk, "/risk", "storage");
  rc.eps_emission = ck.num(risk, "/risk", "emission");
  rc.eps_investment = ck.num(risk, "/risk", "investment");

  if (!ck.issues.empty()) throw ValidationError(std::move(ck.issues));

  try {
    inst.system.validate();
    inst.uncertainty.validate();
    inst.risk.validate(s.N, s.E);
  } catch (const std::exception& e) {
    throw ValidationError({e.what()});
  }
  // Cross-checks between sections.
  std::vector<std::string> cross;
  auto realized = realize_parameters(inst.uncertainty, Eigen::VectorXd::Ones(n));
  for (int t = 0; t < s.T; ++t)
    if ((realized.load[t] - s.peak_load[t]).cwiseAbs().maxCoeff() > 1e-9)
      cross.push_back("load factors do not reproduce the nominal trajectory at ones");
  if (!cross.empty()) throw ValidationError(std::move(cross));
  return inst;
}

Instance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError({"cannot open instance file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

}  // namespace ldrx
