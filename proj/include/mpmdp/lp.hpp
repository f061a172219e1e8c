#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpmdp/rational.hpp"

namespace mpmdp {

enum class Relation { Eq, Ge, Gt };

struct Term {
  std::size_t var;
  Rational coef;
};

struct Constraint {
  std::vector<Term> terms;
  Relation rel = Relation::Eq;
  Rational rhs;
  std::string label;
};

class LinearSystem {
 public:
  bool nonneg = true;  // all variables >= 0; otherwise all are free

  std::size_t add_variable(std::string name);
  // Duplicate variables in terms are summed; zero coefficients dropped.
  void add(std::vector<Term> terms, Relation rel, Rational rhs, std::string label = {});
  void add_le(std::vector<Term> terms, Rational rhs, std::string label = {});  // stored as -terms >= -rhs

  std::size_t num_variables() const { return names_.size(); }
  const std::vector<std::string>& variables() const { return names_; }
  const std::vector<Constraint>& constraints() const { return rows_; }
  std::size_t strict_rows() const;

  std::string dump() const;  // LP text, one constraint per line

 private:
  std::vector<std::string> names_;
  std::vector<Constraint> rows_;
};

struct LpOutcome {
  enum class Status { Feasible, Infeasible, SlackUnbounded };
  Status status = Status::Infeasible;
  std::vector<Rational> assignment;
  std::optional<Rational> slack;  // y*, present for systems with strict rows (base point when unbounded)
  std::vector<Rational> ray;      // SlackUnbounded: assignment + t*ray stays feasible
  Rational slack_ray;             // growth of y along the ray

  // The original system, strict rows included, has a solution.
  bool strictly_feasible() const;
  // A point satisfying all strict rows with margin >= 1 when unbounded, else the optimum.
  std::vector<Rational> witness() const;
};

// Maximizes one shared slack y >= 0 over the relaxation l >= r + y of all
// strict rows (exact two-phase simplex, Bland's rule).
LpOutcome solve(const LinearSystem& system);

struct Residue {
  bool ok = true;
  Rational min_strict_margin;  // over strict rows; meaningless without any
  std::string detail;          // first violated row
};

Residue check_assignment(const LinearSystem& system, const std::vector<Rational>& x);

std::string to_string(LpOutcome::Status s);

}  // namespace mpmdp
