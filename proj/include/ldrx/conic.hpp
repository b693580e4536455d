#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace ldrx {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense { Le, Ge };

struct LinearTerm {
  int var;
  double coef;
};

/// Affine expression in the program's variables.
struct AffineExpr {
  std::vector<LinearTerm> terms;
  double constant = 0.0;

  AffineExpr& add(int var, double coef) {
    if (coef != 0.0) terms.push_back({var, coef});
    return *this;
  }
};

struct ParseError : std::runtime_error {
  int line, column;
  ParseError(int l, int c, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(l) + ":" + std::to_string(c) + ": " +
                           msg),
        line(l),
        column(c) {}
};

/// Solver-agnostic representation of a linear or second-order cone program.
/// Rows are stored in insertion order; construction is reproducible
/// bit-for-bit and serialization round-trips losslessly (hex floats).
class ConicProgram {
 public:
  struct Row {
    AffineExpr expr;  // constraint on expr vs rhs
    RowSense sense = RowSense::Le;
    double rhs = 0.0;
    std::string tag;
  };
  struct EqRow {
    AffineExpr expr;
    double rhs = 0.0;
    std::string tag;
  };
  /// ||u(x)|| <= v(x)
  struct SocBlock {
    std::vector<AffineExpr> u;
    AffineExpr v;
    std::string tag;
  };
  struct Dimensions {
    int variables = 0;
    int linear_rows = 0;  // equalities + inequalities + finite bounds
    int conic_blocks = 0;
  };

  int add_variable(std::string name, double lb = -kInf, double ub = kInf);
  int num_variables() const { return static_cast<int>(names_.size()); }
  const std::string& variable_name(int v) const { return names_[v]; }
  double lower_bound(int v) const { return lb_[v]; }
  double upper_bound(int v) const { return ub_[v]; }

  void set_objective_constant(double c) { obj_constant_ = c; }
  double objective_constant() const { return obj_constant_; }
  void add_objective_term(int var, double coef);
  const std::vector<double>& objective() const { return obj_; }

  int add_equality(AffineExpr expr, double rhs, std::string tag = "");
  int add_inequality(AffineExpr expr, RowSense sense, double rhs, std::string tag = "");
  int add_soc(std::vector<AffineExpr> u, AffineExpr v, std::string tag = "");

  const std::vector<EqRow>& equalities() const { return eq_; }
  const std::vector<Row>& inequalities() const { return ineq_; }
  const std::vector<SocBlock>& soc_blocks() const { return soc_; }

  Dimensions dimensions() const;

  double eval(const AffineExpr& e, const Eigen::VectorXd& x) const;

  std::string serialize() const;
  static ConicProgram deserialize(std::string_view text);

 private:
  void check_var(int v, const char* where) const;

  std::vector<std::string> names_;
  std::vector<double> lb_, ub_;
  std::vector<double> obj_;
  double obj_constant_ = 0.0;
  std::vector<EqRow> eq_;
  std::vector<Row> ineq_;
  std::vector<SocBlock> soc_;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* status_name(SolveStatus s);

/// Result of one solve. On Optimal the boundary guarantees row-relative
/// primal residuals <= 1e-6 and relative duality gap <= 1e-7; anything
/// looser is downgraded to NumericalFailure.
struct Solution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;  // includes the objective constant
  std::vector<double> eq_duals;
  std::vector<double> ineq_duals;              // >= 0, for the row as written
  std::vector<Eigen::VectorXd> soc_duals;      // per block, dim(u)+1, (v-part first)
  int iterations = 0;
  double solve_seconds = 0.0;
  double max_residual = 0.0;  // row-relative primal feasibility residual
  double rel_gap = 0.0;
  std::string failure_family;  // on Infeasible: tag with strongest dual-ray support
};

struct SolveOptions {
  double feastol = 1e-8;
  double reltol = 1e-8;
  int max_iter = 200;
  bool verbose = false;
};

/// Interior-point solve boundary. Thread-safe for distinct programs.
Solution solve(const ConicProgram& p, const SolveOptions& opts = {});

}  // namespace ldrx
