#include "ldrx/conic.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace ldrx {

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "OPTIMAL";
    case SolveStatus::Infeasible: return "INFEASIBLE";
    case SolveStatus::Unbounded: return "UNBOUNDED";
    case SolveStatus::NumericalFailure: return "NUMERICAL_FAILURE";
  }
  return "?";
}

void ConicProgram::check_var(int v, const char* where) const {
  if (v < 0 || v >= num_variables())
    throw std::out_of_range(std::string(where) + ": undeclared variable " + std::to_string(v));
}

int ConicProgram::add_variable(std::string name, double lb, double ub) {
  names_.push_back(std::move(name));
  lb_.push_back(lb);
  ub_.push_back(ub);
  obj_.push_back(0.0);
  return num_variables() - 1;
}

void ConicProgram::add_objective_term(int var, double coef) {
  check_var(var, "objective");
  obj_[var] += coef;
}

int ConicProgram::add_equality(AffineExpr expr, double rhs, std::string tag) {
  for (const auto& t : expr.terms) check_var(t.var, "equality");
  eq_.push_back({std::move(expr), rhs, std::move(tag)});
  return static_cast<int>(eq_.size()) - 1;
}

int ConicProgram::add_inequality(AffineExpr expr, RowSense sense, double rhs, std::string tag) {
  for (const auto& t : expr.terms) check_var(t.var, "inequality");
  ineq_.push_back({std::move(expr), sense, rhs, std::move(tag)});
  return static_cast<int>(ineq_.size()) - 1;
}

int ConicProgram::add_soc(std::vector<AffineExpr> u, AffineExpr v, std::string tag) {
  for (const auto& e : u)
    for (const auto& t : e.terms) check_var(t.var, "soc");
  for (const auto& t : v.terms) check_var(t.var, "soc");
  soc_.push_back({std::move(u), std::move(v), std::move(tag)});
  return static_cast<int>(soc_.size()) - 1;
}

ConicProgram::Dimensions ConicProgram::dimensions() const {
  Dimensions d;
  d.variables = num_variables();
  d.linear_rows = static_cast<int>(eq_.size() + ineq_.size());
  for (int v = 0; v < num_variables(); ++v) {
    if (lb_[v] > -kInf) ++d.linear_rows;
    if (ub_[v] < kInf) ++d.linear_rows;
  }
  d.conic_blocks = static_cast<int>(soc_.size());
  return d;
}

double ConicProgram::eval(const AffineExpr& e, const Eigen::VectorXd& x) const {
  double v = e.constant;
  for (const auto& t : e.terms) v += t.coef * x[t.var];
  return v;
}

namespace {

std::string hexd(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

void write_expr(std::ostringstream& os, const AffineExpr& e) {
  os << hexd(e.constant);
  for (const auto& t : e.terms) os << ' ' << t.var << ':' << hexd(t.coef);
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  bool next_line(std::string_view& line) {
    while (pos_ < text_.size()) {
      size_t end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
      ++lineno_;
      col_ = 1;
      if (!line.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(lineno_, col_, msg); }

  std::string_view token(std::string_view& line) {
    size_t i = 0;
    while (i < line.size() && line[i] == ' ') ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (i == j) fail("expected token");
    std::string_view tok = line.substr(i, j - i);
    col_ += static_cast<int>(j);
    line.remove_prefix(j);
    return tok;
  }

  bool at_end(std::string_view line) const {
    for (char c : line)
      if (c != ' ') return false;
    return true;
  }

  double number(std::string_view& line) {
    auto tok = token(line);
    std::string s(tok);
    char* endp = nullptr;
    double v = std::strtod(s.c_str(), &endp);
    if (endp != s.c_str() + s.size()) fail("bad number '" + s + "'");
    return v;
  }

  long integer(std::string_view& line) {
    auto tok = token(line);
    long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
      fail("bad integer '" + std::string(tok) + "'");
    return v;
  }

  AffineExpr expr(std::string_view& line, int nvars) {
    AffineExpr e;
    e.constant = number(line);
    while (!at_end(line)) {
      auto tok = token(line);
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) fail("expected var:coef");
      long var = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + colon, var);
      if (ec != std::errc() || p != tok.data() + colon || var < 0 || var >= nvars)
        fail("bad variable index in term");
      std::string s(tok.substr(colon + 1));
      char* endp = nullptr;
      double coef = std::strtod(s.c_str(), &endp);
      if (endp != s.c_str() + s.size()) fail("bad coefficient '" + s + "'");
      e.terms.push_back({static_cast<int>(var), coef});
    }
    return e;
  }

  int lineno() const { return lineno_; }

 private:
  std::string_view text_;
  size_t pos_ = 0;
  int lineno_ = 0;
  int col_ = 1;
};

}  // namespace

std::string ConicProgram::serialize() const {
  std::ostringstream os;
  os << "conicprogram v1\n";
  os << "vars " << num_variables() << '\n';
  for (int v = 0; v < num_variables(); ++v)
    os << "var " << names_[v] << ' ' << hexd(lb_[v]) << ' ' << hexd(ub_[v]) << '\n';
  os << "objconst " << hexd(obj_constant_) << '\n';
  for (int v = 0; v < num_variables(); ++v)
    if (obj_[v] != 0.0) os << "obj " << v << ' ' << hexd(obj_[v]) << '\n';
  for (const auto& r : eq_) {
    os << "eq " << hexd(r.rhs) << " tag=" << r.tag << " : ";
    write_expr(os, r.expr);
    os << '\n';
  }
  for (const auto& r : ineq_) {
    os << "ineq " << (r.sense == RowSense::Le ? "le" : "ge") << ' ' << hexd(r.rhs)
       << " tag=" << r.tag << " : ";
    write_expr(os, r.expr);
    os << '\n';
  }
  for (const auto& b : soc_) {
    os << "soc " << b.u.size() << " tag=" << b.tag << '\n';
    os << "  v : ";
    write_expr(os, b.v);
    os << '\n';
    for (const auto& u : b.u) {
      os << "  u : ";
      write_expr(os, u);
      os << '\n';
    }
  }
  return os.str();
}

ConicProgram ConicProgram::deserialize(std::string_view text) {
  Parser p(text);
  std::string_view line;
  if (!p.next_line(line)) throw ParseError(1, 1, "empty document");
  if (line != "conicprogram v1") p.fail("bad header");

  ConicProgram prog;
  if (!p.next_line(line)) p.fail("missing vars line");
  if (p.token(line) != "vars") p.fail("expected 'vars'");
  const long nvars = p.integer(line);

  auto take_tag = [&](std::string_view& l) {
    auto tok = p.token(l);
    if (tok.substr(0, 4) != "tag=") p.fail("expected tag=");
    return std::string(tok.substr(4));
  };
  auto expect = [&](std::string_view& l, std::string_view what) {
    if (p.token(l) != what) p.fail("expected '" + std::string(what) + "'");
  };

  for (long i = 0; i < nvars; ++i) {
    if (!p.next_line(line)) p.fail("missing var line");
    expect(line, "var");
    std::string name(p.token(line));
    const double lb = p.number(line);
    const double ub = p.number(line);
    prog.add_variable(std::move(name), lb, ub);
  }
  while (p.next_line(line)) {
    auto kind = p.token(line);
    if (kind == "objconst") {
      prog.set_objective_constant(p.number(line));
    } else if (kind == "obj") {
      const long v = p.integer(line);
      if (v < 0 || v >= nvars) p.fail("objective variable out of range");
      prog.add_objective_term(static_cast<int>(v), p.number(line));
    } else if (kind == "eq" || kind == "ineq") {
      RowSense sense = RowSense::Le;
      bool is_eq = (kind == "eq");
      if (!is_eq) {
        auto s = p.token(line);
        if (s == "le")
          sense = RowSense::Le;
        else if (s == "ge")
          sense = RowSense::Ge;
        else
          p.fail("bad sense");
      }
      const double rhs = p.number(line);
      auto tag = take_tag(line);
      expect(line, ":");
      auto e = p.expr(line, static_cast<int>(nvars));
      if (is_eq)
        prog.add_equality(std::move(e), rhs, std::move(tag));
      else
        prog.add_inequality(std::move(e), sense, rhs, std::move(tag));
    } else if (kind == "soc") {
      const long udim = p.integer(line);
      auto tag = take_tag(line);
      if (!p.next_line(line)) p.fail("missing soc v line");
      expect(line, "v");
      expect(line, ":");
      auto v = p.expr(line, static_cast<int>(nvars));
      std::vector<AffineExpr> u;
      for (long k = 0; k < udim; ++k) {
        if (!p.next_line(line)) p.fail("missing soc u line");
        expect(line, "u");
        expect(line, ":");
        u.push_back(p.expr(line, static_cast<int>(nvars)));
      }
      prog.add_soc(std::move(u), std::move(v), std::move(tag));
    } else {
      p.fail("unknown directive '" + std::string(kind) + "'");
    }
  }
  return prog;
}

}  // namespace ldrx
