#include "mpmdp/lp.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mpmdp {

std::size_t LinearSystem::add_variable(std::string name) {
  names_.push_back(std::move(name));
  return names_.size() - 1;
}

void LinearSystem::add(std::vector<Term> terms, Relation rel, Rational rhs, std::string label) {
  std::map<std::size_t, Rational> merged;
  for (auto& t : terms) {
    if (t.var >= names_.size())
      throw std::invalid_argument("constraint '" + label + "' references undeclared variable " + std::to_string(t.var));
    merged[t.var] += t.coef;
  }
  Constraint c;
  for (auto& [v, a] : merged)
    if (a != 0) c.terms.push_back({v, a});
  c.rel = rel;
  c.rhs = std::move(rhs);
  c.label = label.empty() ? "c" + std::to_string(rows_.size()) : std::move(label);
  rows_.push_back(std::move(c));
}

void LinearSystem::add_le(std::vector<Term> terms, Rational rhs, std::string label) {
  for (auto& t : terms) t.coef = -t.coef;
  add(std::move(terms), Relation::Ge, -rhs, std::move(label));
}

std::size_t LinearSystem::strict_rows() const {
  return static_cast<std::size_t>(
      std::count_if(rows_.begin(), rows_.end(), [](const Constraint& c) { return c.rel == Relation::Gt; }));
}

std::string LinearSystem::dump() const {
  std::ostringstream os;
  os << "\\ " << names_.size() << " variables, " << (nonneg ? "all >= 0" : "all free") << "\n";
  if (strict_rows()) os << "\\ strict rows are solved as l >= r + y, maximizing the shared slack y >= 0\n";
  os << "variables\n";
  for (const auto& n : names_) os << "  " << n << "\n";
  os << "subject to\n";
  for (const auto& c : rows_) {
    os << "  " << c.label << ":";
    if (c.terms.empty()) os << " 0";
    for (const auto& t : c.terms) {
      os << (t.coef < 0 ? " - " : " + ");
      Rational a = abs(t.coef);
      if (a != 1) os << to_string(a) << " ";
      os << names_[t.var];
    }
    os << (c.rel == Relation::Eq ? " = " : c.rel == Relation::Ge ? " >= " : " > ") << to_string(c.rhs) << "\n";
  }
  os << "end\n";
  return os.str();
}

bool LpOutcome::strictly_feasible() const {
  if (status == Status::SlackUnbounded) return true;
  if (status != Status::Feasible) return false;
  return !slack || *slack > 0;
}

std::vector<Rational> LpOutcome::witness() const {
  if (status != Status::SlackUnbounded) return assignment;
  Rational y0 = slack.value_or(Rational(0));
  Rational t = y0 >= 1 ? Rational(0) : Rational((1 - y0) / slack_ray);
  std::vector<Rational> x = assignment;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += t * ray[i];
  return x;
}

std::string to_string(LpOutcome::Status s) {
  switch (s) {
    case LpOutcome::Status::Feasible: return "feasible";
    case LpOutcome::Status::Infeasible: return "infeasible";
    case LpOutcome::Status::SlackUnbounded: return "slack-unbounded";
  }
  return "?";
}

namespace {

// Dense tableau over standard form A x = b, x >= 0, b >= 0.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : a_(rows, std::vector<Rational>(cols + 1)), basis_(rows), cols_(cols) {}

  Rational& at(std::size_t i, std::size_t j) { return a_[i][j]; }
  Rational& rhs(std::size_t i) { return a_[i][cols_]; }
  std::size_t rows() const { return a_.size(); }
  std::size_t cols() const { return cols_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c, std::vector<Rational>& obj) {
    Rational inv = 1 / a_[r][c];
    std::vector<std::size_t> nz;
    for (std::size_t j = 0; j <= cols_; ++j)
      if (sgn(a_[r][j]) != 0) {
        a_[r][j] *= inv;
        nz.push_back(j);
      }
    Rational f;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      if (i == r || sgn(a_[i][c]) == 0) continue;
      f = a_[i][c];
      for (auto j : nz) a_[i][j] -= f * a_[r][j];
    }
    if (sgn(obj[c]) != 0) {
      f = obj[c];
      for (auto j : nz) obj[j] -= f * a_[r][j];
    }
    basis_[r] = c;
  }

  // Bland's rule; returns false when unbounded (entering column kept in *unbounded_col).
  bool optimize(std::vector<Rational>& obj, std::size_t allowed_cols, std::size_t* unbounded_col) {
    while (true) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < allowed_cols; ++j)
        if (sgn(obj[j]) < 0) {
          enter = j;
          break;
        }
      if (enter == cols_) return true;
      std::size_t leave = a_.size();
      Rational best;
      for (std::size_t i = 0; i < a_.size(); ++i) {
        if (sgn(a_[i][enter]) <= 0) continue;
        Rational ratio = a_[i][cols_] / a_[i][enter];
        if (leave == a_.size() || ratio < best || (ratio == best && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave == a_.size()) {
        *unbounded_col = enter;
        return false;
      }
      pivot(leave, enter, obj);
    }
  }

  void drop_row(std::size_t r) {
    a_.erase(a_.begin() + static_cast<long>(r));
    basis_.erase(basis_.begin() + static_cast<long>(r));
  }

 private:
  std::vector<std::vector<Rational>> a_;
  std::vector<std::size_t> basis_;
  std::size_t cols_;
};

}  // namespace

LpOutcome solve(const LinearSystem& system) {
  const auto& rows = system.constraints();
  const std::size_t nvar = system.num_variables();
  const bool has_strict = system.strict_rows() > 0;

  // Column layout: declared variables (split when free), slack y, surplus, artificials.
  std::vector<std::size_t> pos_col(nvar), neg_col(nvar, SIZE_MAX);
  std::size_t ncol = 0;
  for (std::size_t v = 0; v < nvar; ++v) {
    pos_col[v] = ncol++;
    if (!system.nonneg) neg_col[v] = ncol++;
  }
  std::size_t y_col = SIZE_MAX;
  if (has_strict) y_col = ncol++;
  std::vector<std::size_t> surplus(rows.size(), SIZE_MAX);
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].rel != Relation::Eq) surplus[i] = ncol++;
  const std::size_t real_cols = ncol;
  const std::size_t art0 = ncol;
  ncol += rows.size();

  Tableau tab(rows.size(), ncol);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& c = rows[i];
    for (const auto& t : c.terms) {
      tab.at(i, pos_col[t.var]) += t.coef;
      if (neg_col[t.var] != SIZE_MAX) tab.at(i, neg_col[t.var]) -= t.coef;
    }
    if (c.rel == Relation::Gt) tab.at(i, y_col) = -1;
    if (surplus[i] != SIZE_MAX) tab.at(i, surplus[i]) = -1;
    tab.rhs(i) = c.rhs;
    if (c.rhs < 0) {
      for (std::size_t j = 0; j < real_cols; ++j)
        if (sgn(tab.at(i, j)) != 0) tab.at(i, j) = -tab.at(i, j);
      tab.rhs(i) = -tab.rhs(i);
    }
    tab.at(i, art0 + i) = 1;
    tab.basis()[i] = art0 + i;
  }

  // Phase 1: minimize the sum of artificials.
  std::vector<Rational> obj(ncol + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < real_cols; ++j)
      if (sgn(tab.at(i, j)) != 0) obj[j] -= tab.at(i, j);
    obj[ncol] -= tab.rhs(i);
  }
  std::size_t dummy = 0;
  tab.optimize(obj, ncol, &dummy);

  LpOutcome out;
  if (sgn(obj[ncol]) != 0) {
    out.status = LpOutcome::Status::Infeasible;
    return out;
  }
  for (std::size_t i = 0; i < tab.rows();) {
    if (tab.basis()[i] < art0) {
      ++i;
      continue;
    }
    std::size_t j = 0;
    while (j < real_cols && sgn(tab.at(i, j)) == 0) ++j;
    if (j == real_cols) {
      tab.drop_row(i);
      continue;
    }
    tab.pivot(i, j, obj);
    ++i;
  }

  auto extract = [&](auto value_of) {
    std::vector<Rational> x(nvar);
    for (std::size_t v = 0; v < nvar; ++v) {
      x[v] = value_of(pos_col[v]);
      if (neg_col[v] != SIZE_MAX) x[v] -= value_of(neg_col[v]);
    }
    return x;
  };
  auto basic_value = [&](std::size_t col) {
    for (std::size_t i = 0; i < tab.rows(); ++i)
      if (tab.basis()[i] == col) return tab.rhs(i);
    return Rational(0);
  };

  out.status = LpOutcome::Status::Feasible;
  if (!has_strict) {
    out.assignment = extract(basic_value);
    return out;
  }

  // Phase 2: minimize -y over the real columns.
  std::vector<Rational> obj2(ncol + 1);
  obj2[y_col] = -1;
  for (std::size_t i = 0; i < tab.rows(); ++i)
    if (tab.basis()[i] == y_col) {
      for (std::size_t j = 0; j <= ncol; ++j)
        if (sgn(tab.at(i, j)) != 0) obj2[j] += tab.at(i, j);
      obj2[y_col] = 0;
    }
  std::size_t enter = 0;
  bool bounded = tab.optimize(obj2, real_cols, &enter);
  out.assignment = extract(basic_value);
  out.slack = basic_value(y_col);
  if (bounded) return out;

  out.status = LpOutcome::Status::SlackUnbounded;
  auto direction = [&](std::size_t col) {
    if (col == enter) return Rational(1);
    for (std::size_t i = 0; i < tab.rows(); ++i)
      if (tab.basis()[i] == col) return Rational(-tab.at(i, enter));
    return Rational(0);
  };
  out.ray = extract(direction);
  out.slack_ray = direction(y_col);
  return out;
}

Residue check_assignment(const LinearSystem& system, const std::vector<Rational>& x) {
  Residue r;
  bool first_strict = true;
  if (x.size() != system.num_variables()) {
    r.ok = false;
    r.detail = "assignment has wrong length";
    return r;
  }
  if (system.nonneg)
    for (std::size_t v = 0; v < x.size(); ++v)
      if (x[v] < 0) {
        r.ok = false;
        r.detail = system.variables()[v] + " is negative";
        return r;
      }
  for (const auto& c : system.constraints()) {
    Rational lhs;
    for (const auto& t : c.terms) lhs += t.coef * x[t.var];
    Rational diff = lhs - c.rhs;
    bool holds = c.rel == Relation::Eq ? diff == 0 : c.rel == Relation::Ge ? diff >= 0 : diff > 0;
    if (c.rel == Relation::Gt && (first_strict || diff < r.min_strict_margin)) {
      r.min_strict_margin = diff;
      first_strict = false;
    }
    if (!holds && r.ok) {
      r.ok = false;
      r.detail = c.label + " violated by " + to_string(diff);
    }
  }
  return r;
}

}  // namespace mpmdp
