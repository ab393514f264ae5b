#include "sfc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace sfc::lp {

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

namespace {

class Tableau {
 public:
  Tableau(int rows, int cols)
      : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

  double& at(int r, int c) { return data_[r * (cols_ + 1) + c]; }
  double at(int r, int c) const { return data_[r * (cols_ + 1) + c]; }
  double& rhs(int r) { return at(r, cols_); }
  double& cost(int c) { return at(rows_, c); }
  double& value() { return at(rows_, cols_); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  void pivot(int pr, int pc) {
    const int width = cols_ + 1;
    double* prow = &data_[pr * width];
    const double inv = 1.0 / prow[pc];
    for (int c = 0; c < width; ++c) prow[c] *= inv;
    prow[pc] = 1.0;
    for (int r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      double* row = &data_[r * width];
      const double f = row[pc];
      if (f == 0.0) continue;
      for (int c = 0; c < width; ++c) {
        if (prow[c] != 0.0) row[c] -= f * prow[c];
      }
      row[pc] = 0.0;
    }
  }

  void remove_row(int r) {
    const int width = cols_ + 1;
    data_.erase(data_.begin() + r * width, data_.begin() + (r + 1) * width);
    --rows_;
  }

 private:
  int rows_;
  int cols_;
  std::vector<double> data_;
};

// Runs simplex iterations on the current cost row. Columns flagged in
// `barred` never enter. Returns Optimal, Unbounded or IterationLimit.
Status iterate(Tableau& t, std::vector<int>& basis,
               const std::vector<char>& barred, const Options& opt,
               int& iterations) {
  int degenerate_run = 0;
  while (true) {
    if (iterations >= opt.max_iterations) return Status::IterationLimit;
    const bool bland = degenerate_run > 50;
    int enter = -1;
    double best = -opt.tolerance;
    for (int c = 0; c < t.cols(); ++c) {
      if (barred[c]) continue;
      const double d = t.cost(c);
      if (d < best) {
        enter = c;
        best = d;
        if (bland) break;
      }
    }
    if (enter < 0) return Status::Optimal;

    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a <= opt.tolerance) continue;
      const double q = t.rhs(r) / a;
      if (q < ratio - 1e-12 ||
          (q <= ratio + 1e-12 && leave >= 0 && basis[r] < basis[leave])) {
        ratio = q;
        leave = r;
      }
    }
    if (leave < 0) return Status::Unbounded;
    degenerate_run = ratio <= opt.tolerance ? degenerate_run + 1 : 0;
    t.pivot(leave, enter);
    basis[leave] = enter;
    ++iterations;
  }
}

}  // namespace

Solution solve(const Problem& problem, const Options& opt) {
  const int n = problem.num_vars();
  const int m = static_cast<int>(problem.constraints.size());

  // Normalise to non-negative right-hand sides.
  struct Row {
    std::vector<double> coef;
    Sense sense;
    double rhs;
  };
  std::vector<Row> rows;
  rows.reserve(m);
  int slack_count = 0;
  int artificial_count = 0;
  for (const auto& c : problem.constraints) {
    Row row{std::vector<double>(n, 0.0), c.sense, c.rhs};
    for (const Term& term : c.terms) row.coef[term.var] += term.coef;
    if (row.rhs < 0.0) {
      for (double& v : row.coef) v = -v;
      row.rhs = -row.rhs;
      if (row.sense == Sense::LessEq) {
        row.sense = Sense::GreaterEq;
      } else if (row.sense == Sense::GreaterEq) {
        row.sense = Sense::LessEq;
      }
    }
    if (row.sense != Sense::Equal) ++slack_count;
    if (row.sense != Sense::LessEq) ++artificial_count;
    rows.push_back(std::move(row));
  }

  const int cols = n + slack_count + artificial_count;
  Tableau t(m, cols);
  std::vector<int> basis(m, -1);
  std::vector<char> is_artificial(cols, 0);
  int next_slack = n;
  int next_art = n + slack_count;
  for (int r = 0; r < m; ++r) {
    const Row& row = rows[r];
    for (int c = 0; c < n; ++c) t.at(r, c) = row.coef[c];
    t.rhs(r) = row.rhs;
    if (row.sense == Sense::LessEq) {
      t.at(r, next_slack) = 1.0;
      basis[r] = next_slack++;
    } else {
      if (row.sense == Sense::GreaterEq) t.at(r, next_slack++) = -1.0;
      t.at(r, next_art) = 1.0;
      is_artificial[next_art] = 1;
      basis[r] = next_art++;
    }
  }

  Solution sol;
  int iterations = 0;
  double rhs_scale = 1.0;
  for (const Row& row : rows) rhs_scale = std::max(rhs_scale, row.rhs);

  // Phase 1: minimise the sum of artificials.
  if (artificial_count > 0) {
    for (int r = 0; r < m; ++r) {
      if (!is_artificial[basis[r]]) continue;
      for (int c = 0; c <= cols; ++c) {
        if (c < cols && is_artificial[c]) continue;
        t.at(m, c) -= t.at(r, c);
      }
    }
    std::vector<char> none(cols, 0);
    const Status s = iterate(t, basis, none, opt, iterations);
    if (s == Status::IterationLimit) {
      sol.status = s;
      return sol;
    }
    if (-t.value() > 1e-9 * rhs_scale + opt.tolerance) {
      sol.status = Status::Infeasible;
      sol.iterations = iterations;
      return sol;
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    for (int r = t.rows() - 1; r >= 0; --r) {
      if (!is_artificial[basis[r]]) continue;
      int pc = -1;
      for (int c = 0; c < cols; ++c) {
        if (!is_artificial[c] && std::abs(t.at(r, c)) > 1e-9) {
          pc = c;
          break;
        }
      }
      if (pc >= 0) {
        t.pivot(r, pc);
        basis[r] = pc;
      } else {
        t.remove_row(r);
        basis.erase(basis.begin() + r);
      }
    }
  }

  // Phase 2 cost row: reduced costs of the original objective.
  for (int c = 0; c <= cols; ++c) t.at(t.rows(), c) = 0.0;
  for (int c = 0; c < n; ++c) t.cost(c) = problem.objective[c];
  for (int r = 0; r < t.rows(); ++r) {
    const int b = basis[r];
    const double cb = b < n ? problem.objective[b] : 0.0;
    if (cb == 0.0) continue;
    for (int c = 0; c <= cols; ++c) t.at(t.rows(), c) -= cb * t.at(r, c);
  }
  const Status s = iterate(t, basis, is_artificial, opt, iterations);
  sol.iterations = iterations;
  if (s != Status::Optimal) {
    sol.status = s;
    return sol;
  }
  sol.status = Status::Optimal;
  sol.x.assign(n, 0.0);
  for (int r = 0; r < t.rows(); ++r) {
    if (basis[r] < n) sol.x[basis[r]] = std::max(0.0, t.rhs(r));
  }
  double obj = 0.0;
  for (int c = 0; c < n; ++c) obj += problem.objective[c] * sol.x[c];
  sol.objective = obj;
  return sol;
}

double max_violation(const Problem& problem, const std::vector<double>& x) {
  double worst = 0.0;
  for (double v : x) worst = std::max(worst, -v);
  for (const auto& c : problem.constraints) {
    double lhs = 0.0;
    for (const Term& t : c.terms) lhs += t.coef * x.at(t.var);
    double v = 0.0;
    switch (c.sense) {
      case Sense::LessEq: v = lhs - c.rhs; break;
      case Sense::GreaterEq: v = c.rhs - lhs; break;
      case Sense::Equal: v = std::abs(lhs - c.rhs); break;
    }
    worst = std::max(worst, v);
  }
  return worst;
}

std::string dump(const Problem& problem) {
  std::ostringstream os;
  os << "minimize";
  bool any = false;
  for (int v = 0; v < problem.num_vars(); ++v) {
    if (problem.objective[v] == 0.0) continue;
    os << (any ? " + " : " ") << problem.objective[v] << "*"
       << problem.names[v];
    any = true;
  }
  if (!any) os << " 0";
  os << "\n";
  std::map<std::string, std::vector<const Constraint*>> groups;
  for (const auto& c : problem.constraints) {
    const auto cut = c.label.find(' ');
    groups[c.label.substr(0, cut)].push_back(&c);
  }
  for (const auto& [group, list] : groups) {
    os << "[" << (group.empty() ? "unlabelled" : group) << "]\n";
    for (const Constraint* c : list) {
      os << "  " << c->label << ":";
      for (const Term& t : c->terms) {
        os << (t.coef < 0 ? " - " : " + ") << std::abs(t.coef) << "*"
           << problem.names[t.var];
      }
      os << (c->sense == Sense::LessEq    ? " <= "
             : c->sense == Sense::Equal ? " = "
                                        : " >= ")
         << c->rhs << "\n";
    }
  }
  return os.str();
}

}  // namespace sfc::lp
