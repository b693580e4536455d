#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/SparseExtra>
#include <cstdlib>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "ldrx/conic.hpp"

// Homogeneous self-dual interior-point method for
//     min c'x  s.t.  Ax = b,  Gx + s = h,  s in R+^l x SOC x ... x SOC
// with Nesterov-Todd scaling and Mehrotra predictor-corrector, after
// Domahidi/Chu/Boyd's ECOS. The SOC scaling blocks enter the KKT matrix in
// expanded form (diagonal plus rank-2, two extra rows per cone) so the
// factorization stays sparse.

namespace ldrx {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct RowOrigin {
  enum Kind { Ineq, LowerBound, UpperBound, SocV, SocU, Dummy } kind = Dummy;
  int index = -1;  // ineq index / variable / soc block
  int coord = -1;  // u-coordinate within the block (SocU)
};

struct StdForm {
  int nvar = 0;
  SpMat A, G;
  Eigen::VectorXd b, h, c;
  int n_lp = 0;
  std::vector<int> cone_dims;
  std::vector<RowOrigin> origin;          // per G row
  std::vector<int> soc_g_start;           // per program block; -1 if collapsed
  std::vector<int> soc_lp_row;            // collapsed blocks: LP row carrying v(x) >= 0
  std::vector<std::vector<int>> soc_kept; // kept u-coordinates per block
};

class RowAccum {
 public:
  explicit RowAccum(int nvar) : val_(nvar, 0.0) {}
  void add(const AffineExpr& e, double scale) {
    for (const auto& t : e.terms) {
      if (val_[t.var] == 0.0) touched_.push_back(t.var);
      val_[t.var] += scale * t.coef;
    }
  }
  template <typename F>
  void flush(F&& emit) {
    for (int v : touched_) {
      if (val_[v] != 0.0) emit(v, val_[v]);
      val_[v] = 0.0;
    }
    touched_.clear();
  }

 private:
  std::vector<double> val_;
  std::vector<int> touched_;
};

StdForm to_standard_form(const ConicProgram& p) {
  StdForm f;
  f.nvar = p.num_variables();
  f.c.resize(f.nvar);
  for (int v = 0; v < f.nvar; ++v) f.c[v] = p.objective()[v];

  const auto& eqs = p.equalities();
  std::vector<Triplet> atrip;
  f.b.resize(eqs.size());
  RowAccum acc(f.nvar);
  for (size_t i = 0; i < eqs.size(); ++i) {
    acc.add(eqs[i].expr, 1.0);
    acc.flush([&](int v, double c) { atrip.emplace_back(static_cast<int>(i), v, c); });
    f.b[i] = eqs[i].rhs - eqs[i].expr.constant;
  }
  f.A.resize(static_cast<int>(eqs.size()), f.nvar);
  f.A.setFromTriplets(atrip.begin(), atrip.end());

  // G rows: inequalities, finite bounds, collapsed cones (LP part), then cones.
  std::vector<Triplet> gtrip;
  std::vector<double> hvals;
  auto push_row = [&](const AffineExpr& e, double scale, double rhs, RowOrigin o) {
    const int r = static_cast<int>(hvals.size());
    acc.add(e, scale);
    acc.flush([&](int v, double c) { gtrip.emplace_back(r, v, c); });
    hvals.push_back(rhs);
    f.origin.push_back(o);
    return r;
  };

  const auto& ineqs = p.inequalities();
  for (size_t i = 0; i < ineqs.size(); ++i) {
    const auto& r = ineqs[i];
    const double s = (r.sense == RowSense::Le) ? 1.0 : -1.0;
    push_row(r.expr, s, s * (r.rhs - r.expr.constant) + 0.0,
             {RowOrigin::Ineq, static_cast<int>(i), -1});
  }
  for (int v = 0; v < f.nvar; ++v) {
    if (p.lower_bound(v) > -kInf) {
      AffineExpr e;
      e.add(v, -1.0);
      push_row(e, 1.0, -p.lower_bound(v), {RowOrigin::LowerBound, v, -1});
    }
    if (p.upper_bound(v) < kInf) {
      AffineExpr e;
      e.add(v, 1.0);
      push_row(e, 1.0, p.upper_bound(v), {RowOrigin::UpperBound, v, -1});
    }
  }

  const auto& blocks = p.soc_blocks();
  f.soc_g_start.assign(blocks.size(), -1);
  f.soc_lp_row.assign(blocks.size(), -1);
  f.soc_kept.resize(blocks.size());
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    auto& kept = f.soc_kept[bi];
    for (size_t k = 0; k < blocks[bi].u.size(); ++k) {
      const auto& u = blocks[bi].u[k];
      if (!u.terms.empty() || u.constant != 0.0) kept.push_back(static_cast<int>(k));
    }
    if (kept.empty()) {
      // ||0|| <= v(x): plain linear row v(x) >= 0.
      AffineExpr neg;
      for (const auto& t : blocks[bi].v.terms) neg.add(t.var, -t.coef);
      f.soc_lp_row[bi] =
          push_row(neg, 1.0, blocks[bi].v.constant, {RowOrigin::SocV, static_cast<int>(bi), -1});
    }
  }
  f.n_lp = static_cast<int>(hvals.size());
  if (f.n_lp == 0 && blocks.empty()) {
    // Keep the cone nonempty so the embedding is well-posed.
    AffineExpr zero;
    push_row(zero, 1.0, 1.0, {RowOrigin::Dummy, -1, -1});
    f.n_lp = 1;
  }
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& kept = f.soc_kept[bi];
    if (kept.empty()) continue;
    f.soc_g_start[bi] = static_cast<int>(hvals.size());
    f.cone_dims.push_back(static_cast<int>(kept.size()) + 1);
    const auto& blk = blocks[bi];
    AffineExpr negv;
    for (const auto& t : blk.v.terms) negv.add(t.var, -t.coef);
    push_row(negv, 1.0, blk.v.constant, {RowOrigin::SocV, static_cast<int>(bi), -1});
    for (int k : kept) {
      AffineExpr negu;
      for (const auto& t : blk.u[k].terms) negu.add(t.var, -t.coef);
      push_row(negu, 1.0, blk.u[k].constant, {RowOrigin::SocU, static_cast<int>(bi), k});
    }
  }
  f.G.resize(static_cast<int>(hvals.size()), f.nvar);
  f.G.setFromTriplets(gtrip.begin(), gtrip.end());
  f.h = Eigen::Map<Eigen::VectorXd>(hvals.data(), static_cast<int>(hvals.size()));
  return f;
}

struct Settings {
  double gamma = 0.99;
  double deltastat = 7e-8;
  int nitref = 9;
  double linsysacc = 1e-14;
  double irerrfact = 6.0;
  double stepmin = 1e-6;
  double stepmax = 0.999;
  double sigmamin = 1e-4;
  double sigmamax = 0.9999;
  double safeguard = 500.0;
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  double feastol_inacc = 1e-4;
  double abstol_inacc = 5e-5;
  double reltol_inacc = 5e-5;
  int max_iter = 200;
  bool verbose = false;
};

enum class IpmExit { Optimal, PrimalInfeasible, DualInfeasible, MaxIter, Numerics, Fatal };

struct SoCone {
  int dim = 0;
  Eigen::VectorXd q, skbar, zkbar;
  double eta = 0.0, eta_sq = 0.0, a = 0.0, d1 = 0.0, u0 = 0.0, u1 = 0.0, v1 = 0.0, w = 0.0;
};

class Ipm {
 public:
  Ipm(const StdForm& f, const Settings& st) : f_(f), st_(st) {
    nvar_ = f.nvar;
    neq_ = static_cast<int>(f.A.rows());
    nineq_ = static_cast<int>(f.G.rows());
    nlp_ = f.n_lp;
    cones_.resize(f.cone_dims.size());
    for (size_t i = 0; i < f.cone_dims.size(); ++i) {
      cones_[i].dim = f.cone_dims[i];
      cones_[i].q.resize(cones_[i].dim - 1);
      cones_[i].skbar.resize(cones_[i].dim);
      cones_[i].zkbar.resize(cones_[i].dim);
    }
    A_ = f.A;
    G_ = f.G;
    b_ = f.b;
    h_ = f.h;
    c_ = f.c;
    dimK_ = nvar_ + neq_ + nineq_ + 2 * static_cast<int>(cones_.size());
    equilibrate();
    // Cost normalization keeps the initial dual iterate of the embedding
    // near the central path on badly scaled data. The absolute-gap exit
    // threshold shrinks with it so the true gap tolerance is unchanged.
    cscale_ = std::max(1.0, c_.lpNorm<Eigen::Infinity>());
    c_ /= cscale_;
    st_.abstol = std::max(st_.abstol / cscale_, 1e-14);
    st_.abstol_inacc = std::max(st_.abstol_inacc / cscale_, 1e-10);
    At_ = A_.transpose();
    Gt_ = G_.transpose();
    setup_kkt();
  }

  IpmExit run();

  Eigen::VectorXd x, y, z, s;
  double tau = 1.0, kap = 1.0;
  int iterations = 0;
  double final_pres = 0.0, final_dres = 0.0, final_relgap = 0.0, final_gap = 0.0;
  double pcost = 0.0, dcost = 0.0;

 private:
  void equilibrate();
  void unequilibrate();
  void setup_kkt();
  void reset_kkt_scalings();
  void update_kkt_scalings();
  bool update_scalings(const Eigen::VectorXd& s_, const Eigen::VectorXd& z_);
  void scale(const Eigen::VectorXd& in, Eigen::VectorXd& out) const;     // out = W in
  void scale2add(const Eigen::VectorXd& in, Eigen::VectorXd& out) const; // out += W^2 in (expanded)
  void bring_to_cone(const Eigen::VectorXd& r, Eigen::VectorXd& out) const;
  double conic_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                       Eigen::VectorXd& w) const;
  void conic_division(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                      Eigen::VectorXd& v) const;
  double line_search(const Eigen::VectorXd& lambda, const Eigen::VectorXd& ds,
                     const Eigen::VectorXd& dz, double tau_, double dtau, double kap_,
                     double dkap) const;
  int solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                Eigen::VectorXd& dz, bool initialize);
  void compute_residuals();
  void update_statistics();
  int check_exit(bool reduced) const;  // -1: keep going, else IpmExit cast

  const StdForm& f_;
  Settings st_;
  int nvar_, neq_, nineq_, nlp_, dimK_;
  SpMat A_, G_, At_, Gt_;
  Eigen::VectorXd b_, h_, c_;
  Eigen::VectorXd xe_, ae_, ge_;  // equilibration scalings
  double cscale_ = 1.0;
  double tfac_ = 0.0, tsol_ = 0.0;
  std::vector<SoCone> cones_;
  Eigen::VectorXd lp_v_, lp_w_;

  SpMat K_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt_;
  std::vector<int> kkt_v_idx_;  // positions of scaling entries in K value array
  Eigen::VectorXd rhs1_, rhs2_;
  Eigen::VectorXd lambda_, Wdz_, dsbyW_, dsfin_;
  Eigen::VectorXd rx_, ry_, rz_;
  double hresx_ = 0, hresy_ = 0, hresz_ = 0, rt_ = 0;
  double resx0_ = 1, resy0_ = 1, resz0_ = 1;
  double nx_ = 0, ny_ = 0, nz_ = 0, ns_ = 0;
  double cx_ = 0, by_ = 0, hz_ = 0;
  double gap_ = 0, mu_ = 0, relgap_ = -1, pres_ = 0, dres_ = 0;
  double pinfres_ = -1, dinfres_ = -1, kapovert_ = 0;
  bool have_relgap_ = false;

 public:
  double pinfres() const { return pinfres_; }
  double dinfres() const { return dinfres_; }
};

void max_rows(Eigen::VectorXd& e, const SpMat& m) {
  for (int j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it)
      e(it.row()) = std::max(std::abs(it.value()), e(it.row()));
}
void max_cols(Eigen::VectorXd& e, const SpMat& m) {
  for (int j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it)
      e(j) = std::max(std::abs(it.value()), e(j));
}
void scale_rows(const Eigen::VectorXd& e, SpMat& m) {
  for (int j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it) it.valueRef() /= e(it.row());
}
void scale_cols(const Eigen::VectorXd& e, SpMat& m) {
  for (int j = 0; j < m.outerSize(); ++j)
    for (SpMat::InnerIterator it(m, j); it; ++it) it.valueRef() /= e(j);
}

void Ipm::equilibrate() {
  xe_ = Eigen::VectorXd::Ones(nvar_);
  ae_ = Eigen::VectorXd::Ones(neq_);
  ge_ = Eigen::VectorXd::Ones(nineq_);
  Eigen::VectorXd xt(nvar_), at(neq_), gt(nineq_);
  Eigen::VectorXd bcur = b_, hcur = h_;
  auto sqrt_or_one = [](double v) { return std::abs(v) < 1e-6 ? 1.0 : std::sqrt(v); };
  for (int iter = 0; iter < 3; ++iter) {
    xt.setZero();
    at.setZero();
    gt.setZero();
    max_cols(xt, A_);
    max_cols(xt, G_);
    max_rows(at, A_);
    max_rows(gt, G_);
    // Fold the right-hand sides into the row norms so rows with large
    // constants (budgets, caps) are damped along with their coefficients.
    for (int i = 0; i < neq_; ++i) at(i) = std::max(at(i), std::abs(bcur(i)));
    for (int i = 0; i < nineq_; ++i) gt(i) = std::max(gt(i), std::abs(hcur(i)));
    int idx = nlp_;
    for (const auto& sc : cones_) {
      const double total = gt.segment(idx, sc.dim).sum();
      gt.segment(idx, sc.dim).setConstant(total);
      idx += sc.dim;
    }
    xt = xt.unaryExpr(sqrt_or_one);
    at = at.unaryExpr(sqrt_or_one);
    gt = gt.unaryExpr(sqrt_or_one);
    scale_rows(at, A_);
    scale_rows(gt, G_);
    scale_cols(xt, A_);
    scale_cols(xt, G_);
    bcur = bcur.cwiseQuotient(at);
    hcur = hcur.cwiseQuotient(gt);
    xe_ = xe_.cwiseProduct(xt);
    ae_ = ae_.cwiseProduct(at);
    ge_ = ge_.cwiseProduct(gt);
  }
  c_ = c_.cwiseQuotient(xe_);
  b_ = b_.cwiseQuotient(ae_);
  h_ = h_.cwiseQuotient(ge_);
}

void Ipm::unequilibrate() {
  x = x.cwiseQuotient(xe_);
  y = cscale_ * y.cwiseQuotient(ae_);
  z = cscale_ * z.cwiseQuotient(ge_);
  s = s.cwiseProduct(ge_);
}

void Ipm::setup_kkt() {
  std::vector<Triplet> trips;
  for (int k = 0; k < nvar_; ++k) trips.emplace_back(k, k, st_.deltastat);
  for (int k = nvar_; k < nvar_ + neq_; ++k) trips.emplace_back(k, k, -st_.deltastat);
  // A' into (1,2)
  for (int col = 0; col < At_.outerSize(); ++col)
    for (SpMat::InnerIterator it(At_, col); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), nvar_ + col, it.value());
  // G' into (1,3) with expanded columns
  {
    int col_k = nvar_ + neq_;
    int col_g = 0;
    for (int col = 0; col < nlp_; ++col, ++col_g, ++col_k)
      for (SpMat::InnerIterator it(Gt_, col_g); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), col_k, it.value());
    for (const auto& sc : cones_) {
      for (int col = 0; col < sc.dim; ++col, ++col_g, ++col_k)
        for (SpMat::InnerIterator it(Gt_, col_g); it; ++it)
          trips.emplace_back(static_cast<int>(it.row()), col_k, it.value());
      col_k += 2;
    }
  }
  // -V block (upper triangle), values refreshed each iteration
  {
    int d = nvar_ + neq_;
    for (int k = 0; k < nlp_; ++k, ++d) trips.emplace_back(d, d, -1.0);
    for (const auto& sc : cones_) {
      for (int k = 0; k < sc.dim; ++k, ++d) trips.emplace_back(d, d, -1.0);
      trips.emplace_back(d, d, -1.0);
      for (int k = 1; k < sc.dim; ++k) trips.emplace_back(d - sc.dim + k, d, 0.0);
      ++d;
      trips.emplace_back(d, d, 1.0);
      for (int k = 0; k < sc.dim; ++k) trips.emplace_back(d - sc.dim - 1 + k, d, 0.0);
      ++d;
    }
  }
  K_.resize(dimK_, dimK_);
  K_.setFromTriplets(trips.begin(), trips.end());
  K_.makeCompressed();

  // Record value-array positions of the scaling entries for fast refresh.
  auto pos_of = [&](int row, int col) {
    const int* outer = K_.outerIndexPtr();
    const int* inner = K_.innerIndexPtr();
    for (int p = outer[col]; p < outer[col + 1]; ++p)
      if (inner[p] == row) return p;
    return -1;
  };
  kkt_v_idx_.clear();
  {
    int d = nvar_ + neq_;
    for (int k = 0; k < nlp_; ++k, ++d) kkt_v_idx_.push_back(pos_of(d, d));
    for (const auto& sc : cones_) {
      for (int k = 0; k < sc.dim; ++k, ++d) kkt_v_idx_.push_back(pos_of(d, d));
      kkt_v_idx_.push_back(pos_of(d, d));
      for (int k = 1; k < sc.dim; ++k) kkt_v_idx_.push_back(pos_of(d - sc.dim + k, d));
      ++d;
      kkt_v_idx_.push_back(pos_of(d, d));
      kkt_v_idx_.push_back(pos_of(d - sc.dim - 1, d));
      for (int k = 1; k < sc.dim; ++k) kkt_v_idx_.push_back(pos_of(d - sc.dim - 1 + k, d));
      ++d;
    }
  }
  ldlt_.analyzePattern(K_);
}

void Ipm::reset_kkt_scalings() {
  double* v = K_.valuePtr();
  size_t i = 0;
  for (int k = 0; k < nlp_; ++k) v[kkt_v_idx_[i++]] = -1.0;
  for (const auto& sc : cones_) {
    for (int k = 0; k < sc.dim; ++k) v[kkt_v_idx_[i++]] = -1.0;
    v[kkt_v_idx_[i++]] = -1.0;
    for (int k = 1; k < sc.dim; ++k) v[kkt_v_idx_[i++]] = 0.0;
    v[kkt_v_idx_[i++]] = 1.0;
    v[kkt_v_idx_[i++]] = 0.0;
    for (int k = 1; k < sc.dim; ++k) v[kkt_v_idx_[i++]] = 0.0;
  }
}

void Ipm::update_kkt_scalings() {
  double* v = K_.valuePtr();
  size_t i = 0;
  for (int k = 0; k < nlp_; ++k) v[kkt_v_idx_[i++]] = -lp_v_(k) - st_.deltastat;
  for (const auto& sc : cones_) {
    v[kkt_v_idx_[i++]] = -sc.eta_sq * sc.d1 - st_.deltastat;
    for (int k = 1; k < sc.dim; ++k) v[kkt_v_idx_[i++]] = -sc.eta_sq - st_.deltastat;
    v[kkt_v_idx_[i++]] = -sc.eta_sq;
    for (int k = 1; k < sc.dim; ++k) v[kkt_v_idx_[i++]] = -sc.eta_sq * sc.v1 * sc.q(k - 1);
    v[kkt_v_idx_[i++]] = sc.eta_sq + st_.deltastat;
    v[kkt_v_idx_[i++]] = -sc.eta_sq * sc.u0;
    for (int k = 1; k < sc.dim; ++k) v[kkt_v_idx_[i++]] = -sc.eta_sq * sc.u1 * sc.q(k - 1);
  }
}

bool Ipm::update_scalings(const Eigen::VectorXd& s_, const Eigen::VectorXd& z_) {
  lp_v_ = s_.head(nlp_).cwiseQuotient(z_.head(nlp_));
  lp_w_ = lp_v_.cwiseSqrt();
  int k = nlp_;
  for (auto& sc : cones_) {
    const double sres =
        s_(k) * s_(k) - s_.segment(k + 1, sc.dim - 1).squaredNorm();
    const double zres =
        z_(k) * z_(k) - z_.segment(k + 1, sc.dim - 1).squaredNorm();
    if (sres <= 0 || zres <= 0) return false;
    const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
    sc.skbar = s_.segment(k, sc.dim) / snorm;
    sc.zkbar = z_.segment(k, sc.dim) / znorm;
    sc.eta_sq = snorm / znorm;
    sc.eta = std::sqrt(sc.eta_sq);
    double gamma = std::sqrt(0.5 * (1.0 + sc.skbar.dot(sc.zkbar)));
    const double a = (0.5 / gamma) * (sc.skbar(0) + sc.zkbar(0));
    sc.q = (0.5 / gamma) * (sc.skbar.tail(sc.dim - 1) - sc.zkbar.tail(sc.dim - 1));
    const double w = sc.q.squaredNorm();
    const double cc = (1.0 + a) + w / (1.0 + a);
    const double dd = 1.0 + 2.0 / (1.0 + a) + w / ((1.0 + a) * (1.0 + a));
    const double d1 = std::max(0.0, 0.5 * (a * a + w * (1.0 - (cc * cc) / (1.0 + w * dd))));
    const double u0_sq = a * a + w - d1;
    const double c2byu02 = (cc * cc) / u0_sq;
    if (c2byu02 - dd <= 0) return false;
    sc.d1 = d1;
    sc.u0 = std::sqrt(u0_sq);
    sc.u1 = std::sqrt(c2byu02);
    sc.v1 = std::sqrt(c2byu02 - dd);
    sc.a = a;
    sc.w = w;
    k += sc.dim;
  }
  scale(z_, lambda_);
  return true;
}

void Ipm::scale(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
  out.head(nlp_) = lp_w_.cwiseProduct(in.head(nlp_));
  int k = nlp_;
  for (const auto& sc : cones_) {
    const double zeta = sc.q.dot(in.segment(k + 1, sc.dim - 1));
    const double factor = in(k) + zeta / (1.0 + sc.a);
    out(k) = sc.eta * (sc.a * in(k) + zeta);
    out.segment(k + 1, sc.dim - 1) = sc.eta * (in.segment(k + 1, sc.dim - 1) + factor * sc.q);
    k += sc.dim;
  }
}

void Ipm::scale2add(const Eigen::VectorXd& xin, Eigen::VectorXd& yout) const {
  yout.head(nlp_) += lp_v_.cwiseProduct(xin.head(nlp_));
  int base = nlp_;
  for (const auto& sc : cones_) {
    const int i1 = base, i2 = base + 1, i3 = base + sc.dim, i4 = base + sc.dim + 1;
    yout(i1) += sc.eta_sq * (sc.d1 * xin(i1) + sc.u0 * xin(i4));
    const double mix = sc.v1 * xin(i3) + sc.u1 * xin(i4);
    yout.segment(i2, sc.dim - 1) +=
        sc.eta_sq * (xin.segment(i2, sc.dim - 1) + mix * sc.q);
    const double qtx = sc.q.dot(xin.segment(i2, sc.dim - 1));
    yout(i3) += sc.eta_sq * (sc.v1 * qtx + xin(i3));
    yout(i4) = sc.eta_sq * (sc.u0 * xin(i1) + sc.u1 * qtx - xin(i4));
    base += sc.dim + 2;
  }
}

void Ipm::bring_to_cone(const Eigen::VectorXd& r, Eigen::VectorXd& out) const {
  double alpha = -st_.gamma;
  for (int i = 0; i < nlp_; ++i)
    if (r(i) <= 0 && -r(i) > alpha) alpha = -r(i);
  int k = nlp_;
  for (const auto& sc : cones_) {
    const double cres = r(k) - r.segment(k + 1, sc.dim - 1).norm();
    if (cres <= 0 && -cres > alpha) alpha = -cres;
    k += sc.dim;
  }
  alpha += 1.0;
  out = r;
  out.head(nlp_).array() += alpha;
  k = nlp_;
  for (const auto& sc : cones_) {
    out(k) += alpha;
    k += sc.dim;
  }
}

double Ipm::conic_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                          Eigen::VectorXd& w) const {
  w.head(nlp_) = u.head(nlp_).cwiseProduct(v.head(nlp_));
  double m = w.head(nlp_).lpNorm<1>();
  int k = nlp_;
  for (const auto& sc : cones_) {
    w(k) = u.segment(k, sc.dim).dot(v.segment(k, sc.dim));
    m += std::abs(w(k));
    w.segment(k + 1, sc.dim - 1) =
        u(k) * v.segment(k + 1, sc.dim - 1) + v(k) * u.segment(k + 1, sc.dim - 1);
    k += sc.dim;
  }
  return m;
}

void Ipm::conic_division(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                         Eigen::VectorXd& v) const {
  v.head(nlp_) = w.head(nlp_).cwiseQuotient(u.head(nlp_));
  int k = nlp_;
  for (const auto& sc : cones_) {
    const double u0 = u(k), w0 = w(k);
    const double rho = u0 * u0 - u.segment(k + 1, sc.dim - 1).squaredNorm();
    const double zeta = u.segment(k + 1, sc.dim - 1).dot(w.segment(k + 1, sc.dim - 1));
    const double factor = (zeta / u0 - w0) / rho;
    v(k) = (u0 * w0 - zeta) / rho;
    v.segment(k + 1, sc.dim - 1) =
        factor * u.segment(k + 1, sc.dim - 1) + w.segment(k + 1, sc.dim - 1) / u0;
    k += sc.dim;
  }
}

double Ipm::line_search(const Eigen::VectorXd& lambda, const Eigen::VectorXd& ds,
                        const Eigen::VectorXd& dz, double tau_, double dtau, double kap_,
                        double dkap) const {
  double alpha;
  if (nlp_ > 0) {
    const double rhomin = (ds.head(nlp_).cwiseQuotient(lambda.head(nlp_))).minCoeff();
    const double sigmamin = (dz.head(nlp_).cwiseQuotient(lambda.head(nlp_))).minCoeff();
    const double eps = 1e-13;
    if (-sigmamin > -rhomin)
      alpha = sigmamin < 0 ? 1.0 / (-sigmamin) : 1.0 / eps;
    else
      alpha = rhomin < 0 ? 1.0 / (-rhomin) : 1.0 / eps;
  } else {
    alpha = 10.0;
  }
  const double mt = -tau_ / dtau, mk = -kap_ / dkap;
  if (mt > 0 && mt < alpha) alpha = mt;
  if (mk > 0 && mk < alpha) alpha = mk;
  int base = nlp_;
  for (const auto& sc : cones_) {
    const double lk2 =
        lambda(base) * lambda(base) - lambda.segment(base + 1, sc.dim - 1).squaredNorm();
    if (lk2 <= 0) {
      base += sc.dim;
      continue;
    }
    const double lknorm = std::sqrt(lk2);
    Eigen::VectorXd lkbar = lambda.segment(base, sc.dim) / lknorm;
    const double inv = 1.0 / lknorm;
    const double lds = lkbar(0) * ds(base) -
                       lkbar.tail(sc.dim - 1).dot(ds.segment(base + 1, sc.dim - 1));
    const double ldz = lkbar(0) * dz(base) -
                       lkbar.tail(sc.dim - 1).dot(dz.segment(base + 1, sc.dim - 1));
    double f = (lds + ds(base)) / (lkbar(0) + 1.0);
    const double rho0 = inv * lds;
    const double rhonorm =
        (inv * (ds.segment(base + 1, sc.dim - 1) - f * lkbar.tail(sc.dim - 1))).norm() - rho0;
    f = (ldz + dz(base)) / (lkbar(0) + 1.0);
    const double sig0 = inv * ldz;
    const double signorm =
        (inv * (dz.segment(base + 1, sc.dim - 1) - f * lkbar.tail(sc.dim - 1))).norm() - sig0;
    const double step = std::max({0.0, rhonorm, signorm});
    if (step != 0.0) alpha = std::min(alpha, 1.0 / step);
    base += sc.dim;
  }
  return std::clamp(alpha, st_.stepmin, st_.stepmax);
}

int Ipm::solve_kkt(const Eigen::VectorXd& rhs, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                   Eigen::VectorXd& dz, bool initialize) {
  const auto ts = std::chrono::steady_clock::now();
  Eigen::VectorXd sol = ldlt_.solve(rhs);
  const double threshold = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * st_.linsysacc;
  const int mtilde = nineq_ + 2 * static_cast<int>(cones_.size());
  const Eigen::VectorXd bx = rhs.head(nvar_);
  const Eigen::VectorXd byv = rhs.segment(nvar_, neq_);
  const Eigen::VectorXd bz = rhs.tail(mtilde);
  double prev_err = std::numeric_limits<double>::max();
  Eigen::VectorXd corr(dimK_);
  int kref;
  dz.resize(nineq_);
  for (kref = 0; kref <= st_.nitref; ++kref) {
    const Eigen::VectorXd dxc = sol.head(nvar_);
    const Eigen::VectorXd dyc = sol.segment(nvar_, neq_);
    dz.head(nlp_) = sol.segment(nvar_ + neq_, nlp_);
    {
      int zi = nlp_, si = nvar_ + neq_ + nlp_;
      for (const auto& sc : cones_) {
        dz.segment(zi, sc.dim) = sol.segment(si, sc.dim);
        zi += sc.dim;
        si += sc.dim + 2;
      }
    }
    Eigen::VectorXd ex = bx - Gt_ * dz;
    if (neq_ > 0) ex -= At_ * dyc;
    ex -= st_.deltastat * dxc;
    Eigen::VectorXd ey = byv;
    if (neq_ > 0) ey -= A_ * dxc;
    ey += st_.deltastat * dyc;
    Eigen::VectorXd gdx = G_ * dxc;
    Eigen::VectorXd ez(mtilde);
    ez.head(nlp_) = bz.head(nlp_) - gdx.head(nlp_) + st_.deltastat * dz.head(nlp_);
    {
      int ei = nlp_, zi = nlp_;
      for (const auto& sc : cones_) {
        ez.segment(ei, sc.dim) = bz.segment(ei, sc.dim) - gdx.segment(zi, sc.dim);
        ez.segment(ei, sc.dim - 1) += st_.deltastat * dz.segment(zi, sc.dim - 1);
        zi += sc.dim;
        ei += sc.dim;
        ez(ei - 1) -= st_.deltastat * dz(zi - 1);
        ez(ei++) = 0.0;
        ez(ei++) = 0.0;
      }
    }
    const Eigen::VectorXd dz_exp = sol.tail(mtilde);
    if (initialize)
      ez += dz_exp;
    else
      scale2add(dz_exp, ez);
    double err = std::max(ex.lpNorm<Eigen::Infinity>(), ez.lpNorm<Eigen::Infinity>());
    if (neq_ > 0) err = std::max(err, ey.lpNorm<Eigen::Infinity>());
    if (kref > 0 && err > prev_err) {
      sol -= corr;
      --kref;
      break;
    }
    if (kref == st_.nitref || err < threshold || (kref > 0 && prev_err < st_.irerrfact * err))
      break;
    prev_err = err;
    Eigen::VectorXd e(dimK_);
    e << ex, ey, ez;
    corr = ldlt_.solve(e);
    sol += corr;
  }
  dx = sol.head(nvar_);
  dy = sol.segment(nvar_, neq_);
  dz.head(nlp_) = sol.segment(nvar_ + neq_, nlp_);
  {
    int zi = nlp_, si = nvar_ + neq_ + nlp_;
    for (const auto& sc : cones_) {
      dz.segment(zi, sc.dim) = sol.segment(si, sc.dim);
      zi += sc.dim;
      si += sc.dim + 2;
    }
  }
  tsol_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - ts).count();
  return kref;
}

void Ipm::compute_residuals() {
  rx_ = -(Gt_ * z);
  if (neq_ > 0) rx_ -= At_ * y;
  hresx_ = rx_.norm();
  rx_ -= tau * c_;
  if (neq_ > 0) {
    ry_ = A_ * x;
    hresy_ = ry_.norm();
    ry_ -= tau * b_;
  } else {
    ry_.resize(0);
    hresy_ = 0.0;
  }
  rz_ = s + G_ * x;
  hresz_ = rz_.norm();
  rz_ -= tau * h_;
  cx_ = c_.dot(x);
  by_ = neq_ > 0 ? b_.dot(y) : 0.0;
  hz_ = h_.dot(z);
  rt_ = kap + cx_ + by_ + hz_;
  nx_ = x.norm();
  ny_ = y.norm();
  nz_ = z.norm();
  ns_ = s.norm();
}

void Ipm::update_statistics() {
  gap_ = s.dot(z);
  mu_ = (gap_ + kap * tau) / (static_cast<double>(nlp_ + cones_.size()) + 1.0);
  kapovert_ = kap / tau;
  pcost = cx_ / tau;
  dcost = -(hz_ + by_) / tau;
  if (pcost < 0.0) {
    relgap_ = gap_ / (-pcost);
    have_relgap_ = true;
  } else if (dcost > 0.0) {
    relgap_ = gap_ / dcost;
    have_relgap_ = true;
  } else {
    have_relgap_ = false;
  }
  const double nry = neq_ > 0 ? ry_.norm() / std::max(resy0_ + nx_, 1.0) : 0.0;
  const double nrz = rz_.norm() / std::max(resz0_ + nx_ + ns_, 1.0);
  pres_ = std::max(nry, nrz) / tau;
  dres_ = rx_.norm() / std::max(resx0_ + ny_ + nz_, 1.0) / tau;
  pinfres_ = -1;
  dinfres_ = -1;
  if ((hz_ + by_) / std::max(ny_ + nz_, 1.0) < -st_.reltol)
    pinfres_ = hresx_ / std::max(ny_ + nz_, 1.0);
  if (cx_ / std::max(nx_, 1.0) < -st_.reltol)
    dinfres_ = std::max(hresy_ / std::max(nx_, 1.0), hresz_ / std::max(nx_ + ns_, 1.0));
  if (st_.verbose)
    std::printf(
        "it %2d  pcost %+.6e dcost %+.6e gap %.2e pres %.2e dres %.2e k/t %.2e fac %.2fs sol %.2fs\n",
        iterations, pcost, dcost, gap_, pres_, dres_, kapovert_, tfac_, tsol_);
}

int Ipm::check_exit(bool reduced) const {
  const double feastol = reduced ? st_.feastol_inacc : st_.feastol;
  const double abstol = reduced ? st_.abstol_inacc : st_.abstol;
  const double reltol = reduced ? st_.reltol_inacc : st_.reltol;
  if ((-cx_ > 0 || -by_ - hz_ >= -abstol) && pres_ < feastol && dres_ < feastol &&
      (gap_ < abstol || (have_relgap_ && relgap_ < reltol)))
    return static_cast<int>(IpmExit::Optimal);
  if (dinfres_ >= 0 && dinfres_ < feastol && tau < kap)
    return static_cast<int>(IpmExit::DualInfeasible);
  if ((pinfres_ >= 0 && pinfres_ < feastol && tau < kap) ||
      (tau < feastol && kap < feastol && pinfres_ >= 0 && pinfres_ < feastol))
    return static_cast<int>(IpmExit::PrimalInfeasible);
  return -1;
}

IpmExit Ipm::run() {
  x.resize(nvar_);
  y.resize(neq_);
  z.resize(nineq_);
  s.resize(nineq_);
  lambda_.resize(nineq_);
  Wdz_.resize(nineq_);
  dsbyW_.resize(nineq_);
  dsfin_.resize(nineq_);

  reset_kkt_scalings();
  rhs1_.setZero(dimK_);
  rhs1_.segment(nvar_, neq_) = b_;
  {
    rhs1_.segment(nvar_ + neq_, nlp_) = h_.head(nlp_);
    int hi = nlp_, ri = nvar_ + neq_ + nlp_;
    for (const auto& sc : cones_) {
      rhs1_.segment(ri, sc.dim) = h_.segment(hi, sc.dim);
      hi += sc.dim;
      ri += sc.dim + 2;
    }
  }
  rhs2_.setZero(dimK_);
  rhs2_.head(nvar_) = -c_;
  resx0_ = std::max(1.0, c_.norm());
  resy0_ = std::max(1.0, b_.norm());
  resz0_ = std::max(1.0, h_.norm());

  {
    const auto tf = std::chrono::steady_clock::now();
    ldlt_.factorize(K_);
    tfac_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - tf).count();
  }
  if (ldlt_.info() != Eigen::Success) return IpmExit::Fatal;
  if (st_.verbose)
    std::printf("kkt dim %d nnz %ld factor nnz %ld\n", dimK_, (long)K_.nonZeros(),
                (long)ldlt_.matrixL().nestedExpression().nonZeros());
  if (const char* dump = std::getenv("LDRX_DUMP_KKT")) {
    Eigen::saveMarket(K_, dump);
    std::printf("dumped kkt to %s\n", dump);
  }

  Eigen::VectorXd dx1(nvar_), dy1(neq_), dz1(nineq_);
  Eigen::VectorXd dx2(nvar_), dy2(neq_), dz2(nineq_);
  solve_kkt(rhs1_, dx1, dy1, dz1, true);
  x = dx1;
  bring_to_cone(-dz1, s);
  solve_kkt(rhs2_, dx2, dy2, dz2, true);
  y = dy2;
  bring_to_cone(dz2, z);
  rhs1_.head(nvar_) = -c_;
  tau = 1.0;
  kap = 1.0;

  double pres_prev = std::numeric_limits<double>::max();
  double best_score = std::numeric_limits<double>::max();
  Eigen::VectorXd bx = x, by2 = y, bz = z, bs = s;
  double btau = tau, bkapv = kap;
  double step = 0.0;
  IpmExit code = IpmExit::MaxIter;

  for (iterations = 0; iterations <= st_.max_iter; ++iterations) {
    compute_residuals();
    update_statistics();

    if (iterations > 0 && (pres_ > st_.safeguard * pres_prev || gap_ < 0)) {
      if (st_.verbose) std::printf("exit: safeguard (pres %.2e prev %.2e gap %.2e)\n", pres_, pres_prev, gap_);
      x = bx; y = by2; z = bz; s = bs; tau = btau; kap = bkapv;
      compute_residuals();
      update_statistics();
      const int e = check_exit(true);
      code = e >= 0 ? static_cast<IpmExit>(e) : IpmExit::Numerics;
      break;
    }
    pres_prev = pres_;

    const int e = check_exit(false);
    if (e >= 0) {
      code = static_cast<IpmExit>(e);
      break;
    }
    if (iterations > 0 && step == st_.stepmin * st_.gamma) {
      const int er = check_exit(true);
      if (st_.verbose) std::printf("exit: step stall, reduced check -> %d\n", er);
      code = er >= 0 ? static_cast<IpmExit>(er) : IpmExit::Numerics;
      break;
    }
    if (iterations == st_.max_iter) {
      const int er = check_exit(true);
      code = er >= 0 ? static_cast<IpmExit>(er) : IpmExit::MaxIter;
      break;
    }
    if (std::isnan(pcost)) {
      code = IpmExit::Numerics;
      break;
    }

    const double score = std::max({pres_, dres_}) + std::abs(gap_);
    if (iterations == 0 || score < best_score) {
      best_score = score;
      bx = x; by2 = y; bz = z; bs = s; btau = tau; bkapv = kap;
    }

    if (!update_scalings(s, z)) {
      // Slack or multiplier reached the cone boundary: complementarity is
      // exhausted, so settle for the reduced-accuracy verdict. The solve
      // boundary re-verifies residuals on the original rows either way.
      const int er = check_exit(true);
      if (st_.verbose) std::printf("exit: scaling left cone, reduced check -> %d\n", er);
      code = er >= 0 ? static_cast<IpmExit>(er) : IpmExit::Numerics;
      break;
    }
    update_kkt_scalings();
    {
      const auto tf = std::chrono::steady_clock::now();
      ldlt_.factorize(K_);
      tfac_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - tf).count();
    }
    if (ldlt_.info() != Eigen::Success) return IpmExit::Fatal;

    solve_kkt(rhs1_, dx1, dy1, dz1, false);

    // Affine (predictor) direction.
    rhs2_.head(nvar_) = rx_;
    rhs2_.segment(nvar_, neq_) = -ry_;
    {
      rhs2_.segment(nvar_ + neq_, nlp_) = s.head(nlp_) - rz_.head(nlp_);
      int zi = nlp_, ri = nvar_ + neq_ + nlp_;
      for (const auto& sc : cones_) {
        rhs2_.segment(ri, sc.dim) = s.segment(zi, sc.dim) - rz_.segment(zi, sc.dim);
        zi += sc.dim;
        ri += sc.dim;
        rhs2_(ri++) = 0.0;
        rhs2_(ri++) = 0.0;
      }
    }
    solve_kkt(rhs2_, dx2, dy2, dz2, false);

    const double dtau_denom =
        kap / tau - c_.dot(dx1) - (neq_ > 0 ? b_.dot(dy1) : 0.0) - h_.dot(dz1);
    const double dtauaff =
        (rt_ - kap + c_.dot(dx2) + (neq_ > 0 ? b_.dot(dy2) : 0.0) + h_.dot(dz2)) / dtau_denom;
    dz2 += dtauaff * dz1;
    scale(dz2, Wdz_);
    dsbyW_ = -Wdz_ - lambda_;
    const double dkapaff = -kap - kap / tau * dtauaff;
    const double step_aff = line_search(lambda_, dsbyW_, Wdz_, tau, dtauaff, kap, dkapaff);
    const double sigma =
        std::clamp(std::pow(1.0 - step_aff, 3.0), st_.sigmamin, st_.sigmamax);

    // Combined direction.
    Eigen::VectorXd ds1(nineq_), ds2(nineq_);
    conic_product(lambda_, lambda_, ds1);
    conic_product(dsbyW_, Wdz_, ds2);
    const double sigmamu = sigma * mu_;
    ds1.head(nlp_) += ds2.head(nlp_);
    ds1.head(nlp_).array() -= sigmamu;
    {
      int k = nlp_;
      for (const auto& sc : cones_) {
        ds1(k) -= sigmamu;
        ds1.segment(k, sc.dim) += ds2.segment(k, sc.dim);
        k += sc.dim;
      }
    }
    conic_division(lambda_, ds1, dsbyW_);
    scale(dsbyW_, ds1);
    const double oms = 1.0 - sigma;
    rhs2_.head(nvar_ + neq_) *= oms;
    {
      rhs2_.segment(nvar_ + neq_, nlp_) = -oms * rz_.head(nlp_) + ds1.head(nlp_);
      int ri = nvar_ + neq_ + nlp_, k = nlp_;
      for (const auto& sc : cones_) {
        rhs2_.segment(ri, sc.dim) = -oms * rz_.segment(k, sc.dim) + ds1.segment(k, sc.dim);
        k += sc.dim;
        ri += sc.dim;
        rhs2_(ri++) = 0.0;
        rhs2_(ri++) = 0.0;
      }
    }
    solve_kkt(rhs2_, dx2, dy2, dz2, false);
    const double bkap = kap * tau + dkapaff * dtauaff - sigmamu;
    const double dtau =
        (oms * rt_ - bkap / tau + c_.dot(dx2) + (neq_ > 0 ? b_.dot(dy2) : 0.0) + h_.dot(dz2)) /
        dtau_denom;
    dx2 += dtau * dx1;
    dy2 += dtau * dy1;
    dz2 += dtau * dz1;
    scale(dz2, Wdz_);
    dsbyW_ = -(dsbyW_ + Wdz_);
    const double dkap = -(bkap + kap * dtau) / tau;
    step = st_.gamma * line_search(lambda_, dsbyW_, Wdz_, tau, dtau, kap, dkap);
    scale(dsbyW_, dsfin_);
    x += step * dx2;
    y += step * dy2;
    z += step * dz2;
    s += step * dsfin_;
    kap += step * dkap;
    tau += step * dtau;
  }

  final_pres = pres_;
  final_dres = dres_;
  final_gap = gap_;
  final_relgap = have_relgap_ ? relgap_ : -1.0;
  x /= tau;
  y /= tau;
  z /= tau;
  s /= tau;
  unequilibrate();
  return code;
}

}  // namespace

Solution solve(const ConicProgram& p, const SolveOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  StdForm f = to_standard_form(p);
  Settings st;
  st.feastol = opts.feastol;
  st.abstol = opts.feastol;
  st.reltol = opts.reltol;
  st.max_iter = opts.max_iter;
  st.verbose = opts.verbose;

  Solution out;
  Ipm ipm(f, st);
  IpmExit code;
  try {
    code = ipm.run();
  } catch (const std::exception&) {
    code = IpmExit::Fatal;
  }
  out.iterations = ipm.iterations;
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  switch (code) {
    case IpmExit::Optimal: out.status = SolveStatus::Optimal; break;
    case IpmExit::PrimalInfeasible: out.status = SolveStatus::Infeasible; break;
    case IpmExit::DualInfeasible: out.status = SolveStatus::Unbounded; break;
    default: out.status = SolveStatus::NumericalFailure; break;
  }

  const int nineq = static_cast<int>(p.inequalities().size());
  const int nsoc = static_cast<int>(p.soc_blocks().size());
  out.eq_duals.assign(p.equalities().size(), 0.0);
  out.ineq_duals.assign(nineq, 0.0);
  out.soc_duals.assign(nsoc, Eigen::VectorXd());
  for (int bi = 0; bi < nsoc; ++bi)
    out.soc_duals[bi] =
        Eigen::VectorXd::Zero(static_cast<int>(p.soc_blocks()[bi].u.size()) + 1);

  auto fill_duals = [&](const Eigen::VectorXd& zvec, const Eigen::VectorXd& yvec) {
    for (size_t i = 0; i < out.eq_duals.size(); ++i) out.eq_duals[i] = yvec(static_cast<int>(i));
    for (int r = 0; r < zvec.size(); ++r) {
      const auto& o = f.origin[r];
      switch (o.kind) {
        case RowOrigin::Ineq: out.ineq_duals[o.index] = zvec(r); break;
        case RowOrigin::SocV: out.soc_duals[o.index](0) = zvec(r); break;
        case RowOrigin::SocU: {
          out.soc_duals[o.index](1 + o.coord) = zvec(r);
          break;
        }
        default: break;
      }
    }
  };

  if (out.status == SolveStatus::Optimal) {
    out.x = ipm.x;
    fill_duals(ipm.z, ipm.y);
    double obj = p.objective_constant();
    for (int v = 0; v < p.num_variables(); ++v) obj += p.objective()[v] * ipm.x(v);
    out.objective = obj;
    out.rel_gap = std::abs(ipm.pcost - ipm.dcost) /
                  std::max({1.0, std::abs(ipm.pcost), std::abs(ipm.dcost)});

    // Contract check on the original rows. Residuals are measured relative
    // to the row activity, 1 + |rhs| + sum |coef * x|.
    double maxres = 0.0;
    auto activity = [&](const AffineExpr& e) {
      double a = std::abs(e.constant);
      for (const auto& t : e.terms) a += std::abs(t.coef * ipm.x[t.var]);
      return a;
    };
    auto rel = [](double viol, double scale) { return viol / (1.0 + scale); };
    for (const auto& r : p.equalities())
      maxres = std::max(maxres, rel(std::abs(p.eval(r.expr, ipm.x) - r.rhs),
                                    std::abs(r.rhs) + activity(r.expr)));
    for (const auto& r : p.inequalities()) {
      const double lhs = p.eval(r.expr, ipm.x);
      const double viol = r.sense == RowSense::Le ? lhs - r.rhs : r.rhs - lhs;
      maxres = std::max(maxres, rel(std::max(0.0, viol), std::abs(r.rhs) + activity(r.expr)));
    }
    for (int v = 0; v < p.num_variables(); ++v) {
      if (p.lower_bound(v) > -kInf)
        maxres = std::max(maxres, rel(std::max(0.0, p.lower_bound(v) - ipm.x(v)),
                                      std::abs(p.lower_bound(v)) + std::abs(ipm.x(v))));
      if (p.upper_bound(v) < kInf)
        maxres = std::max(maxres, rel(std::max(0.0, ipm.x(v) - p.upper_bound(v)),
                                      std::abs(p.upper_bound(v)) + std::abs(ipm.x(v))));
    }
    for (const auto& blk : p.soc_blocks()) {
      double un = 0.0;
      double act = 0.0;
      for (const auto& u : blk.u) {
        const double uv = p.eval(u, ipm.x);
        un += uv * uv;
        act = std::max(act, activity(u));
      }
      const double vv = p.eval(blk.v, ipm.x);
      maxres = std::max(maxres, rel(std::max(0.0, std::sqrt(un) - vv), act + activity(blk.v)));
    }
    out.max_residual = maxres;
    if (maxres > 1e-6 || out.rel_gap > 1e-7) out.status = SolveStatus::NumericalFailure;
  } else if (out.status == SolveStatus::Infeasible) {
    // Certificate (y,z): report the family with the strongest dual-ray support.
    fill_duals(ipm.z, ipm.y);
    double best = 0.0;
    std::string tag;
    for (size_t i = 0; i < p.equalities().size(); ++i)
      if (std::abs(out.eq_duals[i]) > best) {
        best = std::abs(out.eq_duals[i]);
        tag = p.equalities()[i].tag;
      }
    for (size_t i = 0; i < p.inequalities().size(); ++i)
      if (std::abs(out.ineq_duals[i]) > best) {
        best = std::abs(out.ineq_duals[i]);
        tag = p.inequalities()[i].tag;
      }
    for (size_t i = 0; i < p.soc_blocks().size(); ++i)
      if (out.soc_duals[i].size() > 0 && out.soc_duals[i].cwiseAbs().maxCoeff() > best) {
        best = out.soc_duals[i].cwiseAbs().maxCoeff();
        tag = p.soc_blocks()[i].tag;
      }
    out.failure_family = tag;
    out.x.resize(0);
  } else {
    out.x.resize(0);
  }
  return out;
}

}  // namespace ldrx
