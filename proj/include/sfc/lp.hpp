#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sfc::lp {

enum class Sense { LessEq, Equal, GreaterEq };

struct Term {
  int var;
  double coef;
};

struct Constraint {
  std::vector<Term> terms;
  Sense sense = Sense::LessEq;
  double rhs = 0.0;
  std::string label;  // e.g. "conserve c0 i3"; used by dumps and diagnostics
};

// minimize objective . x  subject to constraints, x >= 0.
struct Problem {
  std::vector<double> objective;
  std::vector<std::string> names;
  std::vector<Constraint> constraints;

  int add_var(std::string name, double cost = 0.0) {
    objective.push_back(cost);
    names.push_back(std::move(name));
    return static_cast<int>(objective.size()) - 1;
  }
  int num_vars() const { return static_cast<int>(objective.size()); }
  void add(Constraint c) { constraints.push_back(std::move(c)); }
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(Status s);

struct Solution {
  Status status = Status::Infeasible;
  double objective = 0.0;
  std::vector<double> x;
  int iterations = 0;
};

struct Options {
  double tolerance = 1e-9;
  int max_iterations = 50000;
};

// Dense two-phase tableau simplex. Dantzig pricing, switching to Bland's rule
// after a run of degenerate pivots so it cannot cycle.
Solution solve(const Problem& problem, const Options& options = {});

// Largest violation of any constraint or bound at x (absolute, in constraint
// units).
double max_violation(const Problem& problem, const std::vector<double>& x);

// Human-readable listing, one constraint per line, grouped by label prefix.
std::string dump(const Problem& problem);

}  // namespace sfc::lp
