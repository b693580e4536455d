#include "ldrx/ldrplan.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace ldrx {

VarianceConfig VarianceConfig::uniform(int nodes, double alpha) {
  VarianceConfig v;
  v.alpha_gen = Eigen::VectorXd::Constant(nodes, alpha);
  v.alpha_storage_energy = Eigen::VectorXd::Constant(nodes, alpha);
  v.alpha_storage_power = Eigen::VectorXd::Constant(nodes, alpha);
  return v;
}

XiAffine& XiAffine::axpy(const XiAffine& other, double scale) {
  for (int j = 0; j < dim() && j < other.dim(); ++j) {
    for (const auto& t : other.coef_[j].terms) coef_[j].add(t.var, scale * t.coef);
    coef_[j].constant += scale * other.coef_[j].constant;
  }
  return *this;
}

AffineExpr ChanceReformulator::mean_expr(const XiAffine& row) const {
  AffineExpr e;
  for (int j = 0; j < row.dim(); ++j) {
    if (row.coord_empty(j)) continue;
    for (const auto& t : row.at(j).terms) e.add(t.var, t.coef);
    e.constant += row.at(j).constant;
  }
  return e;
}

std::vector<AffineExpr> ChanceReformulator::std_exprs(const XiAffine& row) const {
  // Coordinate k of sigma_factor^T a, each an affine expression.
  const auto& f = u_.sigma_factor;
  std::vector<AffineExpr> out;
  for (int k = 0; k < row.dim(); ++k) {
    AffineExpr e;
    for (int j = 0; j < row.dim(); ++j) {
      const double w = f(j, k);
      if (w == 0.0 || row.coord_empty(j)) continue;
      for (const auto& t : row.at(j).terms) e.add(t.var, w * t.coef);
      e.constant += w * row.at(j).constant;
    }
    if (!e.terms.empty() || e.constant != 0.0) out.push_back(std::move(e));
  }
  return out;
}

void ChanceReformulator::equality_all_xi(const XiAffine& row, const std::string& tag) {
  for (int j = 0; j < row.dim(); ++j) {
    if (row.coord_empty(j)) continue;
    AffineExpr e = row.at(j);
    const double rhs = -e.constant;
    e.constant = 0.0;
    prog_.add_equality(std::move(e), rhs, tag + "_xi" + std::to_string(j + 1));
  }
}

void ChanceReformulator::single_sided(const XiAffine& row, double eps, const std::string& tag) {
  const double factor = safety_factor(eps, mode_);
  auto u = std_exprs(row);
  AffineExpr v = mean_expr(row);
  if (u.empty()) {
    // No exposure to uncertainty: nominal inequality.
    const double rhs = -v.constant;
    v.constant = 0.0;
    prog_.add_inequality(std::move(v), RowSense::Ge, rhs, tag);
    return;
  }
  for (auto& e : u) {
    for (auto& t : e.terms) t.coef *= factor;
    e.constant *= factor;
  }
  prog_.add_soc(std::move(u), std::move(v), tag);
}

void ChanceReformulator::double_sided(const XiAffine& row, double lower, double upper, double eps,
                                      const std::string& tag) {
  if (!(upper > lower)) throw std::invalid_argument("double_sided: degenerate interval " + tag);
  if (mode_ == RiskMode::Normal) {
    // Single-sided treatment of each side with the Normal quantile.
    XiAffine up(row.dim());
    up.axpy(row, -1.0);
    up.add_const(0, upper);
    single_sided(up, eps, tag + "_ub");
    XiAffine dn(row.dim());
    dn.axpy(row, 1.0);
    dn.add_const(0, -lower);
    single_sided(dn, eps, tag + "_lb");
    return;
  }
  const double half = 0.5 * (upper - lower);
  const double mid = 0.5 * (upper + lower);
  const int xv = prog_.add_variable(tag + "_x", 0.0, half);
  const int zv = prog_.add_variable(tag + "_z", 0.0);
  auto u = std_exprs(row);
  u.push_back(AffineExpr{}.add(zv, 1.0));
  const double root_eps = std::sqrt(eps);
  AffineExpr v;
  v.add(xv, -root_eps);
  v.constant = root_eps * half;
  prog_.add_soc(std::move(u), std::move(v), tag);
  // |mean - mid| <= z + x as two rows (expr constants offset the rhs).
  AffineExpr mean = mean_expr(row);
  AffineExpr abs_up = mean;
  abs_up.add(zv, -1.0).add(xv, -1.0);
  prog_.add_inequality(std::move(abs_up), RowSense::Le, mid, tag + "_absub");
  AffineExpr abs_dn = mean;
  abs_dn.add(zv, 1.0).add(xv, 1.0);
  prog_.add_inequality(std::move(abs_dn), RowSense::Ge, mid, tag + "_abslb");
}

void ChanceReformulator::variance_row(const XiAffine& row, double alpha, const std::string& tag) {
  auto u = std_exprs(row);
  AffineExpr v = mean_expr(row);
  for (auto& t : v.terms) t.coef *= alpha;
  v.constant *= alpha;
  if (u.empty()) {
    const double rhs = -v.constant;
    v.constant = 0.0;
    prog_.add_inequality(std::move(v), RowSense::Ge, rhs, tag);
    return;
  }
  prog_.add_soc(std::move(u), std::move(v), tag);
}

Eigen::MatrixXd expected_bilinear_coefficients(const UncertaintyModel& u, int t,
                                               const Eigen::MatrixXd& factor) {
  return factor * u.second_moment_block(t);
}

double expected_product(const UncertaintyModel& u, int t, const Eigen::MatrixXd& factor,
                        const Eigen::MatrixXd& policy) {
  return (expected_bilinear_coefficients(u, t, factor).array() * policy.array()).sum();
}

Eigen::VectorXd investment_std(const UncertaintyModel& u, int t, const Eigen::MatrixXd& policy) {
  const int n = u.dim();
  Eigen::VectorXd out(policy.rows());
  for (int i = 0; i < policy.rows(); ++i) {
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(n);
    padded.head(policy.cols()) = policy.row(i);
    out[i] = u.row_std(padded);
  }
  return out;
}

namespace {

struct Builder {
  const SystemData& s;
  const UncertaintyModel& u;
  const RiskConfig& risk;
  ConicProgram prog;
  LdrLayout lay;
  ChanceReformulator refo;
  int n;

  Builder(const SystemData& sys, const UncertaintyModel& unc, const RiskConfig& rc)
      : s(sys), u(unc), risk(rc), refo(prog, unc, rc.mode), n(unc.dim()) {}

  // Row helpers. All rows live on full-length xi coordinates.
  XiAffine op_row(int fam, int t, int w, int h, int i, double scale = 1.0) const {
    XiAffine row(n);
    for (int j = 0; j < lay.nt[t]; ++j) row.add(j, lay.op(fam, t, w, h, i, j), scale);
    return row;
  }
  void add_cum_invest(XiAffine& row, int fam, int t, int i, double scale) const {
    for (int j = 0; j < lay.nt[t]; ++j) row.add(j, lay.cum(fam, t, i, j), scale);
  }
  void add_factor_row(XiAffine& row, const Eigen::MatrixXd& factor, int t, int i,
                      double scale) const {
    for (int j = 0; j < lay.nt[t]; ++j) row.add_const(j, scale * factor(i, j));
  }

  void declare_variables() {
    lay.N = s.N;
    lay.T = s.T;
    lay.W = s.W;
    lay.H = s.H;
    lay.nt.resize(s.T);
    for (int t = 0; t < s.T; ++t) lay.nt[t] = u.stages.revealed(t);
    const char* inv_names[3] = {"Ybar", "Thetabar", "Phibar"};
    const char* op_names[5] = {"P", "Y", "Soc", "Chg", "Dis"};
    lay.inv_base.resize(s.T);
    lay.ops_base.resize(s.T);
    lay.cum_base.resize(s.T);
    for (int t = 0; t < s.T; ++t) {
      lay.inv_base[t] = prog.num_variables();
      for (int fam = 0; fam < 3; ++fam)
        for (int i = 0; i < s.N; ++i)
          for (int j = 0; j < lay.nt[t]; ++j)
            prog.add_variable(std::string(inv_names[fam]) + "_t" + std::to_string(t + 1) + "_n" +
                              std::to_string(i + 1) + "_c" + std::to_string(j + 1));
      lay.ops_base[t] = prog.num_variables();
      for (int w = 0; w < s.W; ++w)
        for (int h = 0; h < s.H; ++h)
          for (int fam = 0; fam < 5; ++fam)
            for (int i = 0; i < s.N; ++i)
              for (int j = 0; j < lay.nt[t]; ++j)
                prog.add_variable(std::string(op_names[fam]) + "_t" + std::to_string(t + 1) + "_w" +
                                  std::to_string(w + 1) + "_h" + std::to_string(h + 1) + "_n" +
                                  std::to_string(i + 1) + "_c" + std::to_string(j + 1));
      lay.cum_base[t] = prog.num_variables();
      for (int fam = 0; fam < 3; ++fam)
        for (int i = 0; i < s.N; ++i)
          for (int j = 0; j < lay.nt[t]; ++j)
            prog.add_variable(std::string("Cum") + inv_names[fam] + "_t" + std::to_string(t + 1) +
                              "_n" + std::to_string(i + 1) + "_c" + std::to_string(j + 1));
    }
    // Cumulative built-capacity rules, defined by coefficientwise equalities.
    for (int t = 0; t < s.T; ++t)
      for (int fam = 0; fam < 3; ++fam)
        for (int i = 0; i < s.N; ++i)
          for (int j = 0; j < lay.nt[t]; ++j) {
            AffineExpr e;
            e.add(lay.cum(fam, t, i, j), 1.0);
            e.add(lay.inv(fam, t, i, j), -1.0);
            if (t >= 1 && j < lay.nt[t - 1]) e.add(lay.cum(fam, t - 1, i, j), -1.0);
            prog.add_equality(std::move(e), 0.0,
                              std::string("cumdef_") + inv_names[fam] + "_t" +
                                  std::to_string(t + 1) + "_n" + std::to_string(i + 1) + "_c" +
                                  std::to_string(j + 1));
          }
  }

  void objective() {
    double constant = 0.0;
    for (int t = 0; t < s.T; ++t) {
      constant += s.om_exist[t].dot(s.existing_cap[t]);
      // Expected investment cost: trace of the bilinear cost-times-rule term.
      const Eigen::MatrixXd cg = expected_bilinear_coefficients(u, t, u.inv_cost_gen[t]);
      const Eigen::MatrixXd cs =
          expected_bilinear_coefficients(u, t, u.inv_cost_storage_energy[t]);
      const Eigen::MatrixXd cp = expected_bilinear_coefficients(u, t, u.inv_cost_storage_power[t]);
      for (int i = 0; i < s.N; ++i)
        for (int j = 0; j < lay.nt[t]; ++j) {
          prog.add_objective_term(lay.inv(0, t, i, j), cg(i, j));
          prog.add_objective_term(lay.inv(1, t, i, j), cs(i, j));
          prog.add_objective_term(lay.inv(2, t, i, j), cp(i, j));
        }
      // O&M on the expected cumulative built capacity: row sums of the rules.
      for (int tau = 0; tau <= t; ++tau)
        for (int i = 0; i < s.N; ++i)
          for (int j = 0; j < lay.nt[tau]; ++j) {
            prog.add_objective_term(lay.inv(0, tau, i, j), s.om_gen[t][i]);
            prog.add_objective_term(lay.inv(1, tau, i, j), s.om_storage_energy[t][i]);
            prog.add_objective_term(lay.inv(2, tau, i, j), s.om_storage_power[t][i]);
          }
      // Expected fuel cost.
      const Eigen::MatrixXd fe = expected_bilinear_coefficients(u, t, u.fuel_exist[t]);
      const Eigen::MatrixXd fc = expected_bilinear_coefficients(u, t, u.fuel_cand[t]);
      for (int w = 0; w < s.W; ++w)
        for (int h = 0; h < s.H; ++h)
          for (int i = 0; i < s.N; ++i)
            for (int j = 0; j < lay.nt[t]; ++j) {
              prog.add_objective_term(lay.op(LdrLayout::kDispatchExist, t, w, h, i, j),
                                      s.horizon_weight[w] * fe(i, j));
              prog.add_objective_term(lay.op(LdrLayout::kDispatchCand, t, w, h, i, j),
                                      s.horizon_weight[w] * fc(i, j));
            }
    }
    prog.set_objective_constant(constant);
  }

  void sure_equalities(int t, int w, int h) {
    const std::string swh = suffix(t, w, h);
    // Balance coefficients must vanish for every xi.
    XiAffine bal(n);
    for (int i = 0; i < s.N; ++i) {
      bal.axpy(op_row(LdrLayout::kDispatchExist, t, w, h, i), 1.0);
      bal.axpy(op_row(LdrLayout::kDispatchCand, t, w, h, i), 1.0);
      bal.axpy(op_row(LdrLayout::kDischarge, t, w, h, i), 1.0);
      bal.axpy(op_row(LdrLayout::kCharge, t, w, h, i), -1.0);
      add_factor_row(bal, u.load[t], t, i, -s.cf_load[t][w](i, h));
    }
    refo.equality_all_xi(bal, "balance" + swh);

    for (int i = 0; i < s.N; ++i) {
      XiAffine rec = op_row(LdrLayout::kSoc, t, w, h, i);
      if (h >= 1) rec.axpy(op_row(LdrLayout::kSoc, t, w, h - 1, i), -1.0);
      rec.axpy(op_row(LdrLayout::kCharge, t, w, h, i), -s.eta_charge);
      rec.axpy(op_row(LdrLayout::kDischarge, t, w, h, i), 1.0 / s.eta_discharge);
      refo.equality_all_xi(rec, "soc_rec" + swh + node(i));
    }
  }

  void flow_rows(int t, int w, int h) {
    const double eps = risk.flow_individual(s.E);
    for (int e = 0; e < s.E; ++e) {
      XiAffine row(n);
      for (int i = 0; i < s.N; ++i) {
        const double f = s.ptdf(e, i);
        if (f == 0.0) continue;
        row.axpy(op_row(LdrLayout::kDispatchExist, t, w, h, i), f);
        row.axpy(op_row(LdrLayout::kDispatchCand, t, w, h, i), f);
        row.axpy(op_row(LdrLayout::kDischarge, t, w, h, i), f);
        row.axpy(op_row(LdrLayout::kCharge, t, w, h, i), -f);
        add_factor_row(row, u.load[t], t, i, -f * s.cf_load[t][w](i, h));
      }
      refo.double_sided(row, -s.line_limit[e], s.line_limit[e], eps,
                        "flow" + suffix(t, w, h) + "_e" + std::to_string(e + 1));
    }
  }

  void exist_gen_rows(int t, int w, int h) {
    const double eps = risk.gen_individual(s.N);
    for (int i = 0; i < s.N; ++i) {
      const double cap = s.cf_exist[t][w](i, h) * s.existing_cap[t][i];
      XiAffine row = op_row(LdrLayout::kDispatchExist, t, w, h, i);
      const std::string tag = "gen_exist" + suffix(t, w, h) + node(i);
      if (cap <= 0.0)
        refo.equality_all_xi(row, tag + "_pinned");
      else
        refo.double_sided(row, 0.0, cap, eps, tag);
    }
  }

  void cand_gen_rows(int t, int w, int h) {
    const double eps = risk.gen_individual(s.N);
    for (int i = 0; i < s.N; ++i) {
      XiAffine upper(n);
      add_cum_invest(upper, 0, t, i, s.cf_cand[t][w](i, h));
      upper.axpy(op_row(LdrLayout::kDispatchCand, t, w, h, i), -1.0);
      refo.single_sided(upper, eps, "gen_cand_ub" + suffix(t, w, h) + node(i));
      refo.single_sided(op_row(LdrLayout::kDispatchCand, t, w, h, i), eps,
                        "gen_cand_lb" + suffix(t, w, h) + node(i));
    }
  }

  void ramp_rows(int t, int w, int h) {
    const double eps = risk.ramp_individual(s.N);
    for (int i = 0; i < s.N; ++i) {
      XiAffine diff = op_row(LdrLayout::kDispatchExist, t, w, h, i);
      diff.axpy(op_row(LdrLayout::kDispatchExist, t, w, h - 1, i), -1.0);
      const double up = s.ramp_up_exist[i] * s.existing_cap[t][i];
      const double dn = s.ramp_dn_exist[i] * s.existing_cap[t][i];
      const std::string tag = "ramp_exist" + suffix(t, w, h) + node(i);
      if (s.existing_cap[t][i] <= 0.0) {
        // dispatch already pinned to zero, nothing to constrain
      } else if (up + dn <= 0.0)
        refo.equality_all_xi(diff, tag + "_pinned");
      else
        refo.double_sided(diff, -dn, up, eps, tag);

      XiAffine cup(n);
      add_cum_invest(cup, 0, t, i, s.ramp_up_cand[i]);
      cup.axpy(op_row(LdrLayout::kDispatchCand, t, w, h, i), -1.0);
      cup.axpy(op_row(LdrLayout::kDispatchCand, t, w, h - 1, i), 1.0);
      refo.single_sided(cup, eps, "ramp_cand_ub" + suffix(t, w, h) + node(i));
      XiAffine cdn(n);
      add_cum_invest(cdn, 0, t, i, s.ramp_dn_cand[i]);
      cdn.axpy(op_row(LdrLayout::kDispatchCand, t, w, h, i), 1.0);
      cdn.axpy(op_row(LdrLayout::kDispatchCand, t, w, h - 1, i), -1.0);
      refo.single_sided(cdn, eps, "ramp_cand_lb" + suffix(t, w, h) + node(i));
    }
  }

  void storage_rows(int t, int w, int h) {
    const double eps = risk.storage_individual(s.N);
    for (int i = 0; i < s.N; ++i) {
      const std::string base = suffix(t, w, h) + node(i);
      refo.single_sided(op_row(LdrLayout::kSoc, t, w, h, i), eps, "stor_soc_lb" + base);
      XiAffine soc_ub(n);
      add_cum_invest(soc_ub, 1, t, i, 1.0);
      soc_ub.axpy(op_row(LdrLayout::kSoc, t, w, h, i), -1.0);
      refo.single_sided(soc_ub, eps, "stor_soc_ub" + base);
      for (int fam : {LdrLayout::kCharge, LdrLayout::kDischarge}) {
        const char* nm = fam == LdrLayout::kCharge ? "chg" : "dis";
        refo.single_sided(op_row(fam, t, w, h, i), eps, std::string("stor_") + nm + "_lb" + base);
        XiAffine ub(n);
        add_cum_invest(ub, 2, t, i, 1.0);
        ub.axpy(op_row(fam, t, w, h, i), -1.0);
        refo.single_sided(ub, eps, std::string("stor_") + nm + "_ub" + base);
      }
      XiAffine both(n);
      add_cum_invest(both, 2, t, i, 1.0);
      both.axpy(op_row(LdrLayout::kCharge, t, w, h, i), -1.0);
      both.axpy(op_row(LdrLayout::kDischarge, t, w, h, i), -1.0);
      refo.single_sided(both, eps, "stor_chgdis_ub" + base);
    }
  }

  void emission_row(int t) {
    XiAffine row(n);
    for (int j = 0; j < lay.nt[t]; ++j) row.add_const(j, u.emis_cap[t](j));
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h)
        for (int i = 0; i < s.N; ++i) {
          row.axpy(op_row(LdrLayout::kDispatchExist, t, w, h, i),
                   -s.horizon_weight[w] * s.emis_exist[i]);
          row.axpy(op_row(LdrLayout::kDispatchCand, t, w, h, i),
                   -s.horizon_weight[w] * s.emis_cand[i]);
        }
    refo.single_sided(row, risk.emission_individual(), "emission_t" + std::to_string(t + 1));
  }

  void investment_rows(int t) {
    const double eps = risk.investment_individual(s.N);
    const char* fams[3] = {"ybar", "thetabar", "phibar"};
    for (int fam = 0; fam < 3; ++fam) {
      const Eigen::VectorXd& cap = fam == 0   ? s.max_gen[t]
                                   : fam == 1 ? s.max_storage_energy[t]
                                              : s.max_storage_power[t];
      for (int i = 0; i < s.N; ++i) {
        XiAffine row(n);
        for (int j = 0; j < lay.nt[t]; ++j) row.add(j, lay.inv(fam, t, i, j), 1.0);
        const std::string tag =
            std::string("inv_") + fams[fam] + "_t" + std::to_string(t + 1) + node(i);
        if (cap[i] <= 0.0)
          refo.equality_all_xi(row, tag + "_pinned");
        else
          refo.double_sided(row, 0.0, cap[i], eps, tag);
      }
    }
  }

  void budget_row(int t) {
    AffineExpr e;
    const Eigen::MatrixXd cg = expected_bilinear_coefficients(u, t, u.inv_cost_gen[t]);
    const Eigen::MatrixXd cs = expected_bilinear_coefficients(u, t, u.inv_cost_storage_energy[t]);
    const Eigen::MatrixXd cp = expected_bilinear_coefficients(u, t, u.inv_cost_storage_power[t]);
    for (int i = 0; i < s.N; ++i)
      for (int j = 0; j < lay.nt[t]; ++j) {
        e.add(lay.inv(0, t, i, j), cg(i, j));
        e.add(lay.inv(1, t, i, j), cs(i, j));
        e.add(lay.inv(2, t, i, j), cp(i, j));
      }
    prog.add_inequality(std::move(e), RowSense::Le, s.budget[t],
                        "budget_t" + std::to_string(t + 1));
  }

  void variance_rows(int t, const VarianceConfig& var) {
    const Eigen::VectorXd* alphas[3] = {&var.alpha_gen, &var.alpha_storage_energy,
                                        &var.alpha_storage_power};
    const char* fams[3] = {"ybar", "thetabar", "phibar"};
    for (int fam = 0; fam < 3; ++fam) {
      if (alphas[fam]->size() == 0) continue;
      for (int i = 0; i < s.N; ++i) {
        const double a = (*alphas[fam])[i];
        if (!std::isfinite(a)) continue;
        XiAffine row(n);
        for (int j = 0; j < lay.nt[t]; ++j) row.add(j, lay.inv(fam, t, i, j), 1.0);
        refo.variance_row(row, a,
                          std::string("var_") + fams[fam] + "_t" + std::to_string(t + 1) + node(i));
      }
    }
  }

  static std::string node(int i) { return "_n" + std::to_string(i + 1); }
  std::string suffix(int t, int w, int h) const {
    return "_t" + std::to_string(t + 1) + "_w" + std::to_string(w + 1) + "_h" +
           std::to_string(h + 1);
  }
};

}  // namespace

LdrBuild build_primal_ldr(const SystemData& s, const UncertaintyModel& u, const RiskConfig& risk,
                          const VarianceConfig& var, bool budget_on) {
  s.validate();
  u.validate();
  risk.validate(s.N, s.E);
  if (u.stages.stages() != s.T)
    throw std::invalid_argument("uncertainty stage count does not match system stages");
  for (const auto& f : u.load)
    if (f.rows() != s.N) throw std::invalid_argument("factor row count does not match nodes");

  Builder b(s, u, risk);
  b.declare_variables();
  b.objective();
  for (int t = 0; t < s.T; ++t) {
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h) {
        b.sure_equalities(t, w, h);
        b.flow_rows(t, w, h);
        b.exist_gen_rows(t, w, h);
        b.cand_gen_rows(t, w, h);
        if (h >= 1) b.ramp_rows(t, w, h);
        b.storage_rows(t, w, h);
      }
    b.emission_row(t);
    b.investment_rows(t);
    if (budget_on) b.budget_row(t);
    b.variance_rows(t, var);
  }
  return {std::move(b.prog), std::move(b.lay)};
}

LdrPolicy extract_policy(const SystemData& s, const UncertaintyModel& u, const LdrLayout& lay,
                         const Solution& sol, RiskMode mode) {
  LdrPolicy pol;
  pol.stages = u.stages;
  pol.N = s.N;
  pol.T = s.T;
  pol.W = s.W;
  pol.H = s.H;
  pol.mode = mode;
  pol.objective = sol.objective;
  for (int t = 0; t < s.T; ++t) {
    const int nt = lay.nt[t];
    Eigen::MatrixXd g(s.N, nt), se(s.N, nt), sp(s.N, nt);
    for (int i = 0; i < s.N; ++i)
      for (int j = 0; j < nt; ++j) {
        g(i, j) = sol.x[lay.inv(0, t, i, j)];
        se(i, j) = sol.x[lay.inv(1, t, i, j)];
        sp(i, j) = sol.x[lay.inv(2, t, i, j)];
      }
    pol.invest_gen.push_back(g);
    pol.invest_storage_energy.push_back(se);
    pol.invest_storage_power.push_back(sp);
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> per_w;
    for (int w = 0; w < s.W; ++w) {
      std::vector<std::vector<Eigen::MatrixXd>> per_h;
      for (int h = 0; h < s.H; ++h) {
        std::vector<Eigen::MatrixXd> fams;
        for (int fam = 0; fam < 5; ++fam) {
          Eigen::MatrixXd m(s.N, nt);
          for (int i = 0; i < s.N; ++i)
            for (int j = 0; j < nt; ++j) m(i, j) = sol.x[lay.op(fam, t, w, h, i, j)];
          fams.push_back(std::move(m));
        }
        per_h.push_back(std::move(fams));
      }
      per_w.push_back(std::move(per_h));
    }
    pol.ops.push_back(std::move(per_w));
  }
  return pol;
}

LdrPolicy solve_primal_ldr(const SystemData& s, const UncertaintyModel& u, const RiskConfig& risk,
                           const VarianceConfig& var, bool budget_on, const SolveOptions& opts) {
  auto build = build_primal_ldr(s, u, risk, var, budget_on);
  Solution sol = solve(build.program, opts);
  if (sol.status != SolveStatus::Optimal) {
    std::string msg = std::string("LDR solve failed: ") + status_name(sol.status);
    if (!sol.failure_family.empty()) msg += " (strongest dual-ray support: " + sol.failure_family + ")";
    throw std::runtime_error(msg);
  }
  return extract_policy(s, u, build.layout, sol, risk.mode);
}

namespace {

Eigen::VectorXd eval_rule(const Eigen::MatrixXd& m, const Eigen::VectorXd& xi) {
  return m * xi.head(m.cols());
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

}  // namespace

Eigen::VectorXd LdrPolicy::invest_gen_at(int t, const Eigen::VectorXd& xi) const {
  return eval_rule(invest_gen[t], xi);
}
Eigen::VectorXd LdrPolicy::invest_se_at(int t, const Eigen::VectorXd& xi) const {
  return eval_rule(invest_storage_energy[t], xi);
}
Eigen::VectorXd LdrPolicy::invest_sp_at(int t, const Eigen::VectorXd& xi) const {
  return eval_rule(invest_storage_power[t], xi);
}
Eigen::VectorXd LdrPolicy::op_at(int fam, int t, int w, int h, const Eigen::VectorXd& xi) const {
  return eval_rule(ops[t][w][h][fam], xi);
}

std::string LdrPolicy::to_json() const {
  nlohmann::json j;
  j["stage_sizes"] = stages.sizes();
  j["N"] = N;
  j["T"] = T;
  j["W"] = W;
  j["H"] = H;
  j["objective"] = objective;
  j["mode"] = risk_mode_name(mode);
  nlohmann::json st = nlohmann::json::array();
  for (int t = 0; t < T; ++t) {
    nlohmann::json jt;
    jt["invest_gen"] = matrix_json(invest_gen[t]);
    jt["invest_storage_energy"] = matrix_json(invest_storage_energy[t]);
    jt["invest_storage_power"] = matrix_json(invest_storage_power[t]);
    nlohmann::json jw = nlohmann::json::array();
    for (int w = 0; w < W; ++w) {
      nlohmann::json jh = nlohmann::json::array();
      for (int h = 0; h < H; ++h) {
        nlohmann::json jf;
        const char* names[5] = {"dispatch_exist", "dispatch_cand", "soc", "charge", "discharge"};
        for (int fam = 0; fam < 5; ++fam) jf[names[fam]] = matrix_json(ops[t][w][h][fam]);
        jh.push_back(std::move(jf));
      }
      jw.push_back(std::move(jh));
    }
    jt["ops"] = std::move(jw);
    st.push_back(std::move(jt));
  }
  j["stages"] = std::move(st);
  return j.dump(1);
}

LdrPolicy LdrPolicy::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  LdrPolicy pol;
  pol.stages = StageIndexer::make(j.at("stage_sizes").get<std::vector<int>>());
  pol.N = j.at("N").get<int>();
  pol.T = j.at("T").get<int>();
  pol.W = j.at("W").get<int>();
  pol.H = j.at("H").get<int>();
  pol.objective = j.at("objective").get<double>();
  pol.mode = parse_risk_mode(j.at("mode").get<std::string>());
  for (const auto& jt : j.at("stages")) {
    pol.invest_gen.push_back(matrix_from_json(jt.at("invest_gen")));
    pol.invest_storage_energy.push_back(matrix_from_json(jt.at("invest_storage_energy")));
    pol.invest_storage_power.push_back(matrix_from_json(jt.at("invest_storage_power")));
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> per_w;
    for (const auto& jw : jt.at("ops")) {
      std::vector<std::vector<Eigen::MatrixXd>> per_h;
      for (const auto& jh : jw) {
        std::vector<Eigen::MatrixXd> fams;
        const char* names[5] = {"dispatch_exist", "dispatch_cand", "soc", "charge", "discharge"};
        for (int fam = 0; fam < 5; ++fam) fams.push_back(matrix_from_json(jh.at(names[fam])));
        per_h.push_back(std::move(fams));
      }
      per_w.push_back(std::move(per_h));
    }
    pol.ops.push_back(std::move(per_w));
  }
  return pol;
}

}  // namespace ldrx
