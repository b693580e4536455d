#include "ldrx/canonical.hpp"

#include <cmath>
#include <stdexcept>

#include "ldrx/ldrplan.hpp"

namespace ldrx {

namespace {

using Trip = Eigen::Triplet<double>;

struct CanonicalBuilder {
  const SystemData& s;
  const UncertaintyModel& u;
  StagewiseStandardForm f;

  // Variable layout within one stage: investments then ops.
  int inv(int fam, int i) const { return (fam * s.N) + i; }
  int op(int fam, int w, int h, int i) const {
    return 3 * s.N + (((w * s.H + h) * 5 + fam) * s.N + i);
  }

  std::vector<std::vector<Trip>> atrip;  // per tau, for the current stage t
  std::vector<Trip> btrip;               // rhs factor entries of the current stage
  int row = 0;

  explicit CanonicalBuilder(const SystemData& sys, const UncertaintyModel& unc) : s(sys), u(unc) {}

  int new_row(RowKind kind, std::string name, int bound_var = -1) {
    if (static_cast<int>(f.row_info.size()) <= row)
      f.row_info.push_back({kind, std::move(name), bound_var});
    return row++;
  }

  void a(int tau, int r, int var, double coef) {
    if (coef != 0.0) atrip[tau].emplace_back(r, var, coef);
  }
  void b(int r, int j, double coef) {
    if (coef != 0.0) btrip.emplace_back(r, j, coef);
  }
  void b_factor(int t, int r, const Eigen::MatrixXd& factor, int i, double scale) {
    for (int j = 0; j < factor.cols(); ++j) b(r, j, scale * factor(i, j));
  }

  void stage_rows(int t) {
    const std::string st = "_t" + std::to_string(t + 1);
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h) {
        const std::string swh =
            st + "_w" + std::to_string(w + 1) + "_h" + std::to_string(h + 1);
        {  // balance as equality row: 1'(p + y + dis - chg) = 1'(k o load)
          const int r = new_row(RowKind::Equality, "balance" + swh);
          for (int i = 0; i < s.N; ++i) {
            a(t, r, op(1, w, h, i), 1.0);  // y
            a(t, r, op(0, w, h, i), 1.0);  // p
            a(t, r, op(4, w, h, i), 1.0);  // dis
            a(t, r, op(3, w, h, i), -1.0); // chg
            b_factor(t, r, u.load[t], i, s.cf_load[t][w](i, h));
          }
        }
        for (int i = 0; i < s.N; ++i) {  // storage recursion
          const int r = new_row(RowKind::Equality, "soc_rec" + swh + "_n" + std::to_string(i + 1));
          a(t, r, op(2, w, h, i), 1.0);
          if (h >= 1) a(t, r, op(2, w, h - 1, i), -1.0);
          a(t, r, op(3, w, h, i), -s.eta_charge);
          a(t, r, op(4, w, h, i), 1.0 / s.eta_discharge);
        }
        for (int e = 0; e < s.E; ++e) {  // flow pair
          for (int sgn : {+1, -1}) {
            const int r = new_row(RowKind::Inequality,
                                  std::string(sgn > 0 ? "flow_up" : "flow_dn") + swh + "_e" +
                                      std::to_string(e + 1));
            for (int i = 0; i < s.N; ++i) {
              const double fl = s.ptdf(e, i);
              if (fl == 0.0) continue;
              // up: f_e - F(inj - load) >= 0 ; dn: f_e + F(inj - load) >= 0
              a(t, r, op(0, w, h, i), -sgn * fl);
              a(t, r, op(1, w, h, i), -sgn * fl);
              a(t, r, op(4, w, h, i), -sgn * fl);
              a(t, r, op(3, w, h, i), sgn * fl);
              b_factor(t, r, u.load[t], i, -sgn * fl * s.cf_load[t][w](i, h));
            }
            b(r, 0, -s.line_limit[e]);
          }
        }
        for (int i = 0; i < s.N; ++i) {
          const std::string sn = swh + "_n" + std::to_string(i + 1);
          const double pcap = s.cf_exist[t][w](i, h) * s.existing_cap[t][i];
          if (pcap <= 0.0) {
            // Pinned existing dispatch.
            const int r = new_row(RowKind::Equality, "gen_exist_pin" + sn);
            a(t, r, op(0, w, h, i), 1.0);
          } else {
            const int rlb = new_row(RowKind::Bound, "gen_exist_lb" + sn, op(0, w, h, i));
            a(t, rlb, op(0, w, h, i), 1.0);
            const int rub = new_row(RowKind::Inequality, "gen_exist_ub" + sn);
            a(t, rub, op(0, w, h, i), -1.0);
            b(rub, 0, -pcap);
          }
          {  // candidate dispatch
            const int rlb = new_row(RowKind::Bound, "gen_cand_lb" + sn, op(1, w, h, i));
            a(t, rlb, op(1, w, h, i), 1.0);
            const int rub = new_row(RowKind::Inequality, "gen_cand_ub" + sn);
            for (int tau = 0; tau <= t; ++tau) a(tau, rub, inv(0, i), s.cf_cand[t][w](i, h));
            a(t, rub, op(1, w, h, i), -1.0);
          }
          if (h >= 1) {
            const double rup = s.ramp_up_exist[i] * s.existing_cap[t][i];
            const double rdn = s.ramp_dn_exist[i] * s.existing_cap[t][i];
            if (rup + rdn > 0.0) {
              const int r1 = new_row(RowKind::Inequality, "ramp_exist_up" + sn);
              a(t, r1, op(0, w, h, i), -1.0);
              a(t, r1, op(0, w, h - 1, i), 1.0);
              b(r1, 0, -rup);
              const int r2 = new_row(RowKind::Inequality, "ramp_exist_dn" + sn);
              a(t, r2, op(0, w, h, i), 1.0);
              a(t, r2, op(0, w, h - 1, i), -1.0);
              b(r2, 0, -rdn);
            }
            const int r3 = new_row(RowKind::Inequality, "ramp_cand_up" + sn);
            for (int tau = 0; tau <= t; ++tau) a(tau, r3, inv(0, i), s.ramp_up_cand[i]);
            a(t, r3, op(1, w, h, i), -1.0);
            a(t, r3, op(1, w, h - 1, i), 1.0);
            const int r4 = new_row(RowKind::Inequality, "ramp_cand_dn" + sn);
            for (int tau = 0; tau <= t; ++tau) a(tau, r4, inv(0, i), s.ramp_dn_cand[i]);
            a(t, r4, op(1, w, h, i), 1.0);
            a(t, r4, op(1, w, h - 1, i), -1.0);
          }
          {  // storage limits
            const int rlb = new_row(RowKind::Bound, "stor_soc_lb" + sn, op(2, w, h, i));
            a(t, rlb, op(2, w, h, i), 1.0);
            const int rub = new_row(RowKind::Inequality, "stor_soc_ub" + sn);
            for (int tau = 0; tau <= t; ++tau) a(tau, rub, inv(1, i), 1.0);
            a(t, rub, op(2, w, h, i), -1.0);
            for (int fam : {3, 4}) {
              const char* nm = fam == 3 ? "chg" : "dis";
              const int flb = new_row(RowKind::Bound, std::string("stor_") + nm + "_lb" + sn,
                                      op(fam, w, h, i));
              a(t, flb, op(fam, w, h, i), 1.0);
              const int fub =
                  new_row(RowKind::Inequality, std::string("stor_") + nm + "_ub" + sn);
              for (int tau = 0; tau <= t; ++tau) a(tau, fub, inv(2, i), 1.0);
              a(t, fub, op(fam, w, h, i), -1.0);
            }
            const int rb = new_row(RowKind::Inequality, "stor_chgdis_ub" + sn);
            for (int tau = 0; tau <= t; ++tau) a(tau, rb, inv(2, i), 1.0);
            a(t, rb, op(3, w, h, i), -1.0);
            a(t, rb, op(4, w, h, i), -1.0);
          }
        }
      }
    {  // emission cap
      const int r = new_row(RowKind::Inequality, "emission" + st);
      for (int w = 0; w < s.W; ++w)
        for (int h = 0; h < s.H; ++h)
          for (int i = 0; i < s.N; ++i) {
            a(t, r, op(0, w, h, i), -s.horizon_weight[w] * s.emis_exist[i]);
            a(t, r, op(1, w, h, i), -s.horizon_weight[w] * s.emis_cand[i]);
          }
      for (int j = 0; j < u.emis_cap[t].cols(); ++j) b(r, j, -u.emis_cap[t](j));
    }
    {  // investment boxes
      const char* fams[3] = {"ybar", "thetabar", "phibar"};
      for (int fam = 0; fam < 3; ++fam) {
        const Eigen::VectorXd& cap = fam == 0   ? s.max_gen[t]
                                     : fam == 1 ? s.max_storage_energy[t]
                                                : s.max_storage_power[t];
        for (int i = 0; i < s.N; ++i) {
          const std::string sn = std::string("inv_") + fams[fam] + st + "_n" + std::to_string(i + 1);
          if (cap[i] <= 0.0) {
            const int r = new_row(RowKind::Equality, sn + "_pin");
            a(t, r, inv(fam, i), 1.0);
            continue;
          }
          const int rlb = new_row(RowKind::Bound, sn + "_lb", inv(fam, i));
          a(t, rlb, inv(fam, i), 1.0);
          const int rub = new_row(RowKind::Inequality, sn + "_ub");
          a(t, rub, inv(fam, i), -1.0);
          b(rub, 0, -cap[i]);
        }
      }
    }
    {  // budget at nominal investment prices
      const int r = new_row(RowKind::Inequality, "budget" + st);
      for (int i = 0; i < s.N; ++i) {
        a(t, r, inv(0, i), -s.inv_cost_gen[t][i]);
        a(t, r, inv(1, i), -s.inv_cost_storage_energy[t][i]);
        a(t, r, inv(2, i), -s.inv_cost_storage_power[t][i]);
      }
      b(r, 0, -s.budget[t]);
    }
  }
};

}  // namespace

StagewiseStandardForm canonicalize(const SystemData& s, const UncertaintyModel& u, double eps_hat,
                                   RiskMode mode) {
  s.validate();
  u.validate();
  if (u.stages.stages() != s.T)
    throw std::invalid_argument("uncertainty stage count does not match system stages");
  CanonicalBuilder cb(s, u);
  auto& f = cb.f;
  f.stages = u.stages;
  f.eps_hat = eps_hat;
  f.mode = mode;
  f.vars_per_stage = 3 * s.N + 5 * s.N * s.W * s.H;
  f.objective_constant = 0.0;

  // Variable names (shared layout across stages).
  const char* inv_names[3] = {"ybar", "thetabar", "phibar"};
  const char* op_names[5] = {"p", "y", "soc", "chg", "dis"};
  for (int fam = 0; fam < 3; ++fam)
    for (int i = 0; i < s.N; ++i)
      f.var_names.push_back(std::string(inv_names[fam]) + "_n" + std::to_string(i + 1));
  for (int w = 0; w < s.W; ++w)
    for (int h = 0; h < s.H; ++h)
      for (int fam = 0; fam < 5; ++fam)
        for (int i = 0; i < s.N; ++i)
          f.var_names.push_back(std::string(op_names[fam]) + "_w" + std::to_string(w + 1) + "_h" +
                                std::to_string(h + 1) + "_n" + std::to_string(i + 1));

  f.A.resize(s.T);
  f.B.resize(s.T);
  f.C.resize(s.T);

  // Rows are structurally identical across stages only if capacity data keeps
  // hours alive in every stage; build per stage with stage-local row lists.
  // The row layout must match across stages for the dual coupling, so the
  // builder requires identical row structure and verifies it.
  int rows_per_stage = -1;
  for (int t = 0; t < s.T; ++t) {
    cb.atrip.assign(s.T, {});
    cb.btrip.clear();
    cb.row = 0;
    cb.stage_rows(t);
    if (rows_per_stage < 0)
      rows_per_stage = cb.row;
    else if (rows_per_stage != cb.row)
      throw std::invalid_argument(
          "canonicalize: stage row structure varies across stages (capacity or ramp data "
          "degenerates in some stages only)");
    f.A[t].resize(t + 1);
    for (int tau = 0; tau <= t; ++tau) {
      Eigen::SparseMatrix<double> m(rows_per_stage, f.vars_per_stage);
      m.setFromTriplets(cb.atrip[tau].begin(), cb.atrip[tau].end());
      f.A[t][tau] = std::move(m);
    }
    Eigen::MatrixXd bm = Eigen::MatrixXd::Zero(rows_per_stage, u.stages.revealed(t));
    for (const auto& tr : cb.btrip) bm(tr.row(), tr.col()) += tr.value();
    f.B[t] = std::move(bm);
  }
  f.rows_per_stage = rows_per_stage;

  // Cost factor matrices: investment costs with O&M on the deterministic
  // coordinate, fuel costs weighted per horizon.
  for (int t = 0; t < s.T; ++t) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(f.vars_per_stage, u.stages.revealed(t));
    for (int i = 0; i < s.N; ++i) {
      c.row(cb.inv(0, i)).head(u.inv_cost_gen[t].cols()) += u.inv_cost_gen[t].row(i);
      c.row(cb.inv(1, i)).head(u.inv_cost_storage_energy[t].cols()) +=
          u.inv_cost_storage_energy[t].row(i);
      c.row(cb.inv(2, i)).head(u.inv_cost_storage_power[t].cols()) +=
          u.inv_cost_storage_power[t].row(i);
      double om_g = 0.0, om_se = 0.0, om_sp = 0.0;
      for (int tt = t; tt < s.T; ++tt) {
        om_g += s.om_gen[tt][i];
        om_se += s.om_storage_energy[tt][i];
        om_sp += s.om_storage_power[tt][i];
      }
      c(cb.inv(0, i), 0) += om_g;
      c(cb.inv(1, i), 0) += om_se;
      c(cb.inv(2, i), 0) += om_sp;
    }
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h)
        for (int i = 0; i < s.N; ++i) {
          c.row(cb.op(0, w, h, i)).head(u.fuel_exist[t].cols()) +=
              s.horizon_weight[w] * u.fuel_exist[t].row(i);
          c.row(cb.op(1, w, h, i)).head(u.fuel_cand[t].cols()) +=
              s.horizon_weight[w] * u.fuel_cand[t].row(i);
        }
    f.C[t] = std::move(c);
    f.objective_constant += s.om_exist[t].dot(s.existing_cap[t]);
  }
  return f;
}

CompactPrimal build_primal_ldr_compact(const StagewiseStandardForm& f, const UncertaintyModel& u) {
  const int T = f.stages.stages();
  const int n = u.dim();
  CompactPrimal out;
  auto& prog = out.program;
  auto& lay = out.layout;
  lay.vars_per_stage = f.vars_per_stage;
  lay.nt.resize(T);
  lay.base.resize(T);
  for (int t = 0; t < T; ++t) {
    lay.nt[t] = f.stages.revealed(t);
    lay.base[t] = prog.num_variables();
    for (int i = 0; i < f.vars_per_stage; ++i)
      for (int j = 0; j < lay.nt[t]; ++j)
        prog.add_variable("X_t" + std::to_string(t + 1) + "_" + f.var_names[i] + "_c" +
                          std::to_string(j + 1));
  }
  // Trace objective.
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd coef = f.C[t] * u.second_moment_block(t);
    for (int i = 0; i < f.vars_per_stage; ++i)
      for (int j = 0; j < lay.nt[t]; ++j)
        if (coef(i, j) != 0.0) prog.add_objective_term(lay.var(t, i, j), coef(i, j));
  }
  prog.set_objective_constant(f.objective_constant);

  ChanceReformulator refo(prog, u, f.mode);
  for (int t = 0; t < T; ++t) {
    std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> arow;
    for (int tau = 0; tau <= t; ++tau) arow.emplace_back(f.A[t][tau]);
    for (int r = 0; r < f.rows_per_stage; ++r) {
      XiAffine row(n);
      for (int tau = 0; tau <= t; ++tau)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(arow[tau], r); it;
             ++it)
          for (int j = 0; j < lay.nt[tau]; ++j)
            row.add(j, lay.var(tau, static_cast<int>(it.col()), j), it.value());
      for (int j = 0; j < lay.nt[t]; ++j) row.add_const(j, -f.B[t](r, j));
      const std::string tag = f.row_info[r].name + "@t" + std::to_string(t + 1);
      if (f.row_info[r].kind == RowKind::Equality)
        refo.equality_all_xi(row, tag);
      else
        refo.single_sided(row, f.eps_hat, tag);
    }
  }
  return out;
}

CompactDual build_dual_ldr_compact(const StagewiseStandardForm& f, const UncertaintyModel& u) {
  const int T = f.stages.stages();
  const int n = u.dim();
  CompactDual out;
  auto& prog = out.program;
  auto& lay = out.layout;
  lay.nt.resize(T);
  lay.base.resize(T);
  lay.slot_of_row.assign(f.rows_per_stage, -1);
  for (int r = 0; r < f.rows_per_stage; ++r) {
    if (f.row_info[r].kind == RowKind::Bound) continue;
    lay.slot_of_row[r] = static_cast<int>(lay.dual_rows.size());
    lay.dual_rows.push_back(r);
  }
  lay.rows = static_cast<int>(lay.dual_rows.size());
  for (int t = 0; t < T; ++t) {
    lay.nt[t] = f.stages.revealed(t);
    lay.base[t] = prog.num_variables();
    for (int slot = 0; slot < lay.rows; ++slot)
      for (int j = 0; j < lay.nt[t]; ++j)
        prog.add_variable("L_t" + std::to_string(t + 1) + "_" +
                          f.row_info[lay.dual_rows[slot]].name + "_c" + std::to_string(j + 1));
  }
  // Maximize sum_t Tr[S Sig S' B' Lambda]: minimize the negation.
  for (int t = 0; t < T; ++t) {
    const Eigen::MatrixXd coef =
        f.B[t] * u.second_moment_block(t);  // rows_per_stage x nt
    for (int slot = 0; slot < lay.rows; ++slot) {
      const int r = lay.dual_rows[slot];
      for (int j = 0; j < lay.nt[t]; ++j)
        if (coef(r, j) != 0.0) prog.add_objective_term(lay.var(t, slot, j), -coef(r, j));
    }
  }

  ChanceReformulator refo(prog, u, f.mode);
  // Slack rows: C_tau[i] - sum_{t>=tau} (A[t][tau]' Lambda_t)[i] >= 0.
  for (int tau = 0; tau < T; ++tau) {
    for (int i = 0; i < f.vars_per_stage; ++i) {
      XiAffine row(n);
      for (int j = 0; j < lay.nt[tau]; ++j) row.add_const(j, f.C[tau](i, j));
      for (int t = tau; t < T; ++t) {
        const auto& m = f.A[t][tau];
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, i); it; ++it) {
          const int slot = lay.slot_of_row[static_cast<int>(it.row())];
          if (slot < 0) continue;  // bound row, eliminated
          for (int j = 0; j < lay.nt[t]; ++j)
            row.add(j, lay.var(t, slot, j), -it.value());
        }
      }
      refo.single_sided(row, f.eps_hat,
                        "dualslack_" + f.var_names[i] + "@t" + std::to_string(tau + 1));
    }
  }
  // Sign rows: inequality duals stay nonnegative (chance form).
  for (int t = 0; t < T; ++t)
    for (int slot = 0; slot < lay.rows; ++slot) {
      const int r = lay.dual_rows[slot];
      if (f.row_info[r].kind != RowKind::Inequality) continue;
      XiAffine row(n);
      for (int j = 0; j < lay.nt[t]; ++j) row.add(j, lay.var(t, slot, j), 1.0);
      refo.single_sided(row, f.eps_hat,
                        "dualsign_" + f.row_info[r].name + "@t" + std::to_string(t + 1));
    }
  return out;
}

GapResult suboptimality_bound(double primal, double dual) {
  GapResult g;
  g.primal = primal;
  g.dual = dual;
  g.absolute = primal - dual;
  g.percent = primal != 0.0 ? g.absolute / primal * 100.0 : 0.0;
  g.negative_gap = g.absolute < -1e-6 * (1.0 + std::abs(primal));
  return g;
}

GapSolveResult solve_gap(const StagewiseStandardForm& f, const UncertaintyModel& u,
                         const SolveOptions& opts) {
  GapSolveResult out;
  auto primal = build_primal_ldr_compact(f, u);
  Solution psol = solve(primal.program, opts);
  if (psol.status != SolveStatus::Optimal)
    throw std::runtime_error(std::string("compact primal solve failed: ") +
                             status_name(psol.status));
  out.primal_objective = psol.objective;
  const int T = f.stages.stages();
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd x(f.vars_per_stage, primal.layout.nt[t]);
    for (int i = 0; i < f.vars_per_stage; ++i)
      for (int j = 0; j < primal.layout.nt[t]; ++j)
        x(i, j) = psol.x[primal.layout.var(t, i, j)];
    out.primal_rules.push_back(std::move(x));
  }

  auto dual = build_dual_ldr_compact(f, u);
  Solution dsol = solve(dual.program, opts);
  if (dsol.status != SolveStatus::Optimal)
    throw std::runtime_error(std::string("compact dual solve failed: ") +
                             status_name(dsol.status));
  out.dual_objective = -dsol.objective + f.objective_constant;
  out.dual_policy.objective = out.dual_objective;
  out.dual_policy.row_of_slot = dual.layout.dual_rows;
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd l(dual.layout.rows, dual.layout.nt[t]);
    for (int slot = 0; slot < dual.layout.rows; ++slot)
      for (int j = 0; j < dual.layout.nt[t]; ++j)
        l(slot, j) = dsol.x[dual.layout.var(t, slot, j)];
    out.dual_policy.lambda.push_back(std::move(l));
  }
  out.gap = suboptimality_bound(out.primal_objective, out.dual_objective);
  return out;
}

double dual_feasibility_residual(const StagewiseStandardForm& f, const UncertaintyModel& u,
                                 const DualPolicy& dual) {
  const int T = f.stages.stages();
  const int n = u.dim();
  const double factor = safety_factor(f.eps_hat, f.mode);
  std::vector<int> slot_of_row(f.rows_per_stage, -1);
  for (size_t s = 0; s < dual.row_of_slot.size(); ++s) slot_of_row[dual.row_of_slot[s]] = static_cast<int>(s);
  double worst = 0.0;
  for (int tau = 0; tau < T; ++tau) {
    for (int i = 0; i < f.vars_per_stage; ++i) {
      Eigen::VectorXd coefrow = Eigen::VectorXd::Zero(n);
      coefrow.head(f.C[tau].cols()) = f.C[tau].row(i);
      for (int t = tau; t < T; ++t) {
        const auto& m = f.A[t][tau];
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, i); it; ++it) {
          const int slot = slot_of_row[static_cast<int>(it.row())];
          if (slot < 0) continue;
          coefrow.head(dual.lambda[t].cols()) -= it.value() * dual.lambda[t].row(slot);
        }
      }
      const double lhs = factor * u.row_std(coefrow);
      const double rhs = coefrow.sum();
      worst = std::max(worst, lhs - rhs);
    }
  }
  // Sign rows.
  for (int t = 0; t < T; ++t)
    for (size_t slot = 0; slot < dual.row_of_slot.size(); ++slot) {
      if (f.row_info[dual.row_of_slot[slot]].kind != RowKind::Inequality) continue;
      Eigen::VectorXd coefrow = Eigen::VectorXd::Zero(n);
      coefrow.head(dual.lambda[t].cols()) = dual.lambda[t].row(static_cast<int>(slot));
      worst = std::max(worst, factor * u.row_std(coefrow) - coefrow.sum());
    }
  return worst;
}

}  // namespace ldrx
