#include "ldrx/detplan.hpp"

#include <stdexcept>

namespace ldrx {

std::pair<ConicProgram, DetLayout> build_deterministic(const SystemData& s) {
  s.validate();
  ConicProgram p;
  DetLayout lay;
  lay.N = s.N;
  lay.T = s.T;
  lay.W = s.W;
  lay.H = s.H;

  const char* inv_names[3] = {"ybar", "thetabar", "phibar"};
  lay.base_invest = 0;
  for (int t = 0; t < s.T; ++t)
    for (int f = 0; f < 3; ++f)
      for (int i = 0; i < s.N; ++i) {
        const Eigen::VectorXd& cap = f == 0   ? s.max_gen[t]
                                     : f == 1 ? s.max_storage_energy[t]
                                              : s.max_storage_power[t];
        p.add_variable(std::string(inv_names[f]) + "_t" + std::to_string(t + 1) + "_n" +
                           std::to_string(i + 1),
                       0.0, cap[i]);
      }
  const char* op_names[5] = {"p", "y", "soc", "chg", "dis"};
  lay.base_ops = p.num_variables();
  for (int t = 0; t < s.T; ++t)
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h)
        for (int f = 0; f < 5; ++f)
          for (int i = 0; i < s.N; ++i) {
            double ub = kInf;
            if (f == DetLayout::kDispatchExist) ub = s.cf_exist[t][w](i, h) * s.existing_cap[t][i];
            p.add_variable(std::string(op_names[f]) + "_t" + std::to_string(t + 1) + "_w" +
                               std::to_string(w + 1) + "_h" + std::to_string(h + 1) + "_n" +
                               std::to_string(i + 1),
                           0.0, ub);
          }
  lay.total = p.num_variables();

  // Objective: investment + O&M on cumulative built capacity + fuel.
  double constant = 0.0;
  for (int t = 0; t < s.T; ++t) {
    constant += s.om_exist[t].dot(s.existing_cap[t]);
    for (int i = 0; i < s.N; ++i) {
      p.add_objective_term(lay.invest_gen(t, i), s.inv_cost_gen[t][i]);
      p.add_objective_term(lay.invest_se(t, i), s.inv_cost_storage_energy[t][i]);
      p.add_objective_term(lay.invest_sp(t, i), s.inv_cost_storage_power[t][i]);
      for (int tt = t; tt < s.T; ++tt) {
        p.add_objective_term(lay.invest_gen(t, i), s.om_gen[tt][i]);
        p.add_objective_term(lay.invest_se(t, i), s.om_storage_energy[tt][i]);
        p.add_objective_term(lay.invest_sp(t, i), s.om_storage_power[tt][i]);
      }
    }
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h)
        for (int i = 0; i < s.N; ++i) {
          p.add_objective_term(lay.op(DetLayout::kDispatchExist, t, w, h, i),
                               s.horizon_weight[w] * s.fuel_exist[t][i]);
          p.add_objective_term(lay.op(DetLayout::kDispatchCand, t, w, h, i),
                               s.horizon_weight[w] * s.fuel_cand[t][i]);
        }
  }
  p.set_objective_constant(constant);

  for (int t = 0; t < s.T; ++t) {
    const std::string st = "_t" + std::to_string(t + 1);
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h) {
        const std::string swh = st + "_w" + std::to_string(w + 1) + "_h" + std::to_string(h + 1);
        // System balance: 1'(p + y + dis - chg) = 1'(k_load o load)
        AffineExpr bal;
        double load = 0.0;
        for (int i = 0; i < s.N; ++i) {
          bal.add(lay.op(DetLayout::kDispatchExist, t, w, h, i), 1.0);
          bal.add(lay.op(DetLayout::kDispatchCand, t, w, h, i), 1.0);
          bal.add(lay.op(DetLayout::kDischarge, t, w, h, i), 1.0);
          bal.add(lay.op(DetLayout::kCharge, t, w, h, i), -1.0);
          load += s.cf_load[t][w](i, h) * s.peak_load[t][i];
        }
        p.add_equality(std::move(bal), load, "balance" + swh);

        // Flow limits via PTDF.
        for (int e = 0; e < s.E; ++e) {
          AffineExpr up, dn;
          double inj_load = 0.0;
          for (int i = 0; i < s.N; ++i) {
            const double f = s.ptdf(e, i);
            if (f == 0.0) continue;
            up.add(lay.op(DetLayout::kDispatchExist, t, w, h, i), f);
            up.add(lay.op(DetLayout::kDispatchCand, t, w, h, i), f);
            up.add(lay.op(DetLayout::kDischarge, t, w, h, i), f);
            up.add(lay.op(DetLayout::kCharge, t, w, h, i), -f);
            inj_load += f * s.cf_load[t][w](i, h) * s.peak_load[t][i];
          }
          dn = up;
          const std::string se = swh + "_e" + std::to_string(e + 1);
          p.add_inequality(std::move(up), RowSense::Le, s.line_limit[e] + inj_load, "flow_up" + se);
          p.add_inequality(std::move(dn), RowSense::Ge, -s.line_limit[e] + inj_load,
                           "flow_dn" + se);
        }

        for (int i = 0; i < s.N; ++i) {
          const std::string sn = swh + "_n" + std::to_string(i + 1);
          // Candidate dispatch below cumulative built capacity.
          AffineExpr ycap;
          ycap.add(lay.op(DetLayout::kDispatchCand, t, w, h, i), 1.0);
          for (int tau = 0; tau <= t; ++tau) ycap.add(lay.invest_gen(tau, i), -s.cf_cand[t][w](i, h));
          p.add_inequality(std::move(ycap), RowSense::Le, 0.0, "gen_cand_cap" + sn);

          // Ramping between consecutive hours.
          if (h >= 1) {
            AffineExpr re_up, re_dn;
            re_up.add(lay.op(DetLayout::kDispatchExist, t, w, h, i), 1.0);
            re_up.add(lay.op(DetLayout::kDispatchExist, t, w, h - 1, i), -1.0);
            re_dn = re_up;
            p.add_inequality(std::move(re_up), RowSense::Le,
                             s.ramp_up_exist[i] * s.existing_cap[t][i], "ramp_exist_up" + sn);
            p.add_inequality(std::move(re_dn), RowSense::Ge,
                             -s.ramp_dn_exist[i] * s.existing_cap[t][i], "ramp_exist_dn" + sn);

            AffineExpr rc_up, rc_dn;
            rc_up.add(lay.op(DetLayout::kDispatchCand, t, w, h, i), 1.0);
            rc_up.add(lay.op(DetLayout::kDispatchCand, t, w, h - 1, i), -1.0);
            rc_dn = rc_up;
            for (int tau = 0; tau <= t; ++tau) {
              rc_up.add(lay.invest_gen(tau, i), -s.ramp_up_cand[i]);
              rc_dn.add(lay.invest_gen(tau, i), s.ramp_dn_cand[i]);
            }
            p.add_inequality(std::move(rc_up), RowSense::Le, 0.0, "ramp_cand_up" + sn);
            p.add_inequality(std::move(rc_dn), RowSense::Ge, 0.0, "ramp_cand_dn" + sn);
          }

          // Storage recursion with zero initial state of charge.
          AffineExpr rec;
          rec.add(lay.op(DetLayout::kSoc, t, w, h, i), 1.0);
          if (h >= 1) rec.add(lay.op(DetLayout::kSoc, t, w, h - 1, i), -1.0);
          rec.add(lay.op(DetLayout::kCharge, t, w, h, i), -s.eta_charge);
          rec.add(lay.op(DetLayout::kDischarge, t, w, h, i), 1.0 / s.eta_discharge);
          p.add_equality(std::move(rec), 0.0, "soc_rec" + sn);

          // Storage limits against cumulative built capacity.
          AffineExpr soc_cap;
          soc_cap.add(lay.op(DetLayout::kSoc, t, w, h, i), 1.0);
          for (int tau = 0; tau <= t; ++tau) soc_cap.add(lay.invest_se(tau, i), -1.0);
          p.add_inequality(std::move(soc_cap), RowSense::Le, 0.0, "soc_cap" + sn);
          for (int fam : {DetLayout::kCharge, DetLayout::kDischarge}) {
            AffineExpr cap;
            cap.add(lay.op(fam, t, w, h, i), 1.0);
            for (int tau = 0; tau <= t; ++tau) cap.add(lay.invest_sp(tau, i), -1.0);
            p.add_inequality(std::move(cap), RowSense::Le, 0.0,
                             (fam == DetLayout::kCharge ? "chg_cap" : "dis_cap") + sn);
          }
          AffineExpr both;
          both.add(lay.op(DetLayout::kCharge, t, w, h, i), 1.0);
          both.add(lay.op(DetLayout::kDischarge, t, w, h, i), 1.0);
          for (int tau = 0; tau <= t; ++tau) both.add(lay.invest_sp(tau, i), -1.0);
          p.add_inequality(std::move(both), RowSense::Le, 0.0, "chgdis_cap" + sn);
        }
      }

    // Annual emission cap.
    AffineExpr emis;
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h)
        for (int i = 0; i < s.N; ++i) {
          emis.add(lay.op(DetLayout::kDispatchExist, t, w, h, i),
                   s.horizon_weight[w] * s.emis_exist[i]);
          emis.add(lay.op(DetLayout::kDispatchCand, t, w, h, i),
                   s.horizon_weight[w] * s.emis_cand[i]);
        }
    p.add_inequality(std::move(emis), RowSense::Le, s.emis_cap[t], "emission" + st);

    // Stage budget.
    AffineExpr bud;
    for (int i = 0; i < s.N; ++i) {
      bud.add(lay.invest_gen(t, i), s.inv_cost_gen[t][i]);
      bud.add(lay.invest_se(t, i), s.inv_cost_storage_energy[t][i]);
      bud.add(lay.invest_sp(t, i), s.inv_cost_storage_power[t][i]);
    }
    p.add_inequality(std::move(bud), RowSense::Le, s.budget[t], "budget" + st);
  }
  return {std::move(p), lay};
}

DeterministicPlan extract_deterministic(const SystemData& s, const DetLayout& lay,
                                        const Solution& sol) {
  DeterministicPlan plan;
  for (int t = 0; t < s.T; ++t) {
    Eigen::VectorXd g(s.N), se(s.N), sp(s.N);
    for (int i = 0; i < s.N; ++i) {
      g[i] = sol.x[lay.invest_gen(t, i)];
      se[i] = sol.x[lay.invest_se(t, i)];
      sp[i] = sol.x[lay.invest_sp(t, i)];
    }
    plan.build_gen.push_back(g);
    plan.build_storage_energy.push_back(se);
    plan.build_storage_power.push_back(sp);
    std::vector<Eigen::MatrixXd> pe, pc, th, ch, di;
    for (int w = 0; w < s.W; ++w) {
      Eigen::MatrixXd mpe(s.N, s.H), mpc(s.N, s.H), mth(s.N, s.H), mch(s.N, s.H), mdi(s.N, s.H);
      for (int h = 0; h < s.H; ++h)
        for (int i = 0; i < s.N; ++i) {
          mpe(i, h) = sol.x[lay.op(DetLayout::kDispatchExist, t, w, h, i)];
          mpc(i, h) = sol.x[lay.op(DetLayout::kDispatchCand, t, w, h, i)];
          mth(i, h) = sol.x[lay.op(DetLayout::kSoc, t, w, h, i)];
          mch(i, h) = sol.x[lay.op(DetLayout::kCharge, t, w, h, i)];
          mdi(i, h) = sol.x[lay.op(DetLayout::kDischarge, t, w, h, i)];
        }
      pe.push_back(mpe);
      pc.push_back(mpc);
      th.push_back(mth);
      ch.push_back(mch);
      di.push_back(mdi);
    }
    plan.dispatch_exist.push_back(pe);
    plan.dispatch_cand.push_back(pc);
    plan.soc.push_back(th);
    plan.charge.push_back(ch);
    plan.discharge.push_back(di);
  }

  for (int t = 0; t < s.T; ++t) {
    plan.cost_invest += s.inv_cost_gen[t].dot(plan.build_gen[t]) +
                        s.inv_cost_storage_energy[t].dot(plan.build_storage_energy[t]) +
                        s.inv_cost_storage_power[t].dot(plan.build_storage_power[t]);
    plan.cost_om += s.om_exist[t].dot(s.existing_cap[t]);
    for (int tau = 0; tau <= t; ++tau)
      plan.cost_om += s.om_gen[t].dot(plan.build_gen[tau]) +
                      s.om_storage_energy[t].dot(plan.build_storage_energy[tau]) +
                      s.om_storage_power[t].dot(plan.build_storage_power[tau]);
    for (int w = 0; w < s.W; ++w)
      for (int h = 0; h < s.H; ++h)
        plan.cost_fuel +=
            s.horizon_weight[w] * (s.fuel_exist[t].dot(plan.dispatch_exist[t][w].col(h)) +
                                   s.fuel_cand[t].dot(plan.dispatch_cand[t][w].col(h)));
  }
  plan.objective = sol.objective;
  return plan;
}

DeterministicPlan solve_deterministic(const SystemData& s, const SolveOptions& opts) {
  auto [prog, lay] = build_deterministic(s);
  Solution sol = solve(prog, opts);
  if (sol.status != SolveStatus::Optimal)
    throw std::runtime_error(std::string("deterministic solve failed: ") +
                             status_name(sol.status));
  return extract_deterministic(s, lay, sol);
}

}  // namespace ldrx
