#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sfc/lp.hpp"

namespace {

using sfc::lp::Constraint;
using sfc::lp::Problem;
using sfc::lp::Sense;
using sfc::lp::Status;

// Dense row of a constraint, for the vertex-enumeration oracle.
std::vector<double> dense(const Constraint& c, int n) {
  std::vector<double> row(n, 0.0);
  for (const auto& t : c.terms) row[t.var] += t.coef;
  return row;
}

// Solves A x = b for square A by Gaussian elimination; false when singular.
bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& x) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    if (std::fabs(a[piv][col]) < 1e-10) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int k = col; k < n; ++k) a[r][k] -= f * a[col][k];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (int i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return true;
}

bool feasible(const Problem& p, const std::vector<double>& x) {
  for (double v : x) {
    if (v < -1e-7) return false;
  }
  for (const auto& c : p.constraints) {
    double lhs = 0.0;
    for (const auto& t : c.terms) lhs += t.coef * x[t.var];
    if (c.sense == Sense::LessEq && lhs > c.rhs + 1e-7) return false;
    if (c.sense == Sense::GreaterEq && lhs < c.rhs - 1e-7) return false;
    if (c.sense == Sense::Equal && std::fabs(lhs - c.rhs) > 1e-7) return false;
  }
  return true;
}

// Minimum over all basic points: every choice of n tight rows among the
// constraints and the non-negativity bounds.
std::optional<double> brute_force_min(const Problem& p) {
  const int n = p.num_vars();
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (const auto& c : p.constraints) {
    rows.push_back(dense(c, n));
    rhs.push_back(c.rhs);
  }
  for (int i = 0; i < n; ++i) {
    std::vector<double> r(n, 0.0);
    r[i] = 1.0;
    rows.push_back(r);
    rhs.push_back(0.0);
  }
  const int m = static_cast<int>(rows.size());
  std::optional<double> best;
  std::vector<int> pick(n);
  for (int i = 0; i < n; ++i) pick[i] = i;
  while (true) {
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (int k : pick) {
      a.push_back(rows[k]);
      b.push_back(rhs[k]);
    }
    std::vector<double> x;
    if (solve_square(a, b, x) && feasible(p, x)) {
      double obj = 0.0;
      for (int i = 0; i < n; ++i) obj += p.objective[i] * x[i];
      if (!best || obj < *best) best = obj;
    }
    int i = n - 1;
    while (i >= 0 && pick[i] == m - n + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < n; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

TEST(Simplex, TextbookMaximisation) {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
  Problem p;
  const int x = p.add_var("x", -3.0);
  const int y = p.add_var("y", -5.0);
  p.add({{{x, 1.0}}, Sense::LessEq, 4.0, "a"});
  p.add({{{y, 2.0}}, Sense::LessEq, 12.0, "b"});
  p.add({{{x, 3.0}, {y, 2.0}}, Sense::LessEq, 18.0, "c"});
  const auto s = sfc::lp::solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, -36.0, 1e-9);
  EXPECT_NEAR(s.x[x], 2.0, 1e-9);
  EXPECT_NEAR(s.x[y], 6.0, 1e-9);
}

TEST(Simplex, EqualityAndGreaterRowsNeedPhaseOne) {
  Problem p;
  const int x = p.add_var("x", 1.0);
  const int y = p.add_var("y", 2.0);
  p.add({{{x, 1.0}, {y, 1.0}}, Sense::Equal, 10.0, "sum"});
  p.add({{{y, 1.0}}, Sense::GreaterEq, 3.0, "floor"});
  const auto s = sfc::lp::solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, 13.0, 1e-9);
  EXPECT_LT(sfc::lp::max_violation(p, s.x), 1e-9);
}

TEST(Simplex, ReportsInfeasible) {
  Problem p;
  const int x = p.add_var("x", 1.0);
  p.add({{{x, 1.0}}, Sense::LessEq, 1.0, "hi"});
  p.add({{{x, 1.0}}, Sense::GreaterEq, 2.0, "lo"});
  EXPECT_EQ(sfc::lp::solve(p).status, Status::Infeasible);
}

TEST(Simplex, ReportsUnbounded) {
  Problem p;
  const int x = p.add_var("x", -1.0);
  p.add({{{x, 1.0}}, Sense::GreaterEq, 1.0, "lo"});
  EXPECT_EQ(sfc::lp::solve(p).status, Status::Unbounded);
}

TEST(Simplex, NegativeRightHandSide) {
  Problem p;
  const int x = p.add_var("x", 1.0);
  const int y = p.add_var("y", 1.0);
  p.add({{{x, -1.0}, {y, -1.0}}, Sense::LessEq, -4.0, "neg"});
  const auto s = sfc::lp::solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, 4.0, 1e-9);
}

TEST(Simplex, DegenerateProblemTerminates) {
  // Classic cycling example under plain Dantzig pricing (Beale).
  Problem p;
  const int x1 = p.add_var("x1", -0.75);
  const int x2 = p.add_var("x2", 150.0);
  const int x3 = p.add_var("x3", -0.02);
  const int x4 = p.add_var("x4", 6.0);
  p.add({{{x1, 0.25}, {x2, -60.0}, {x3, -0.04}, {x4, 9.0}}, Sense::LessEq, 0.0, "r1"});
  p.add({{{x1, 0.5}, {x2, -90.0}, {x3, -0.02}, {x4, 3.0}}, Sense::LessEq, 0.0, "r2"});
  p.add({{{x3, 1.0}}, Sense::LessEq, 1.0, "r3"});
  const auto s = sfc::lp::solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, -0.05, 1e-9);
}

TEST(Simplex, MatchesVertexEnumerationOnRandomProblems) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_real_distribution<double> pos(0.5, 4.0);
  std::uniform_int_distribution<int> sense(0, 2);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Problem p;
    const int n = 2 + trial % 2;
    for (int i = 0; i < n; ++i) p.add_var("x" + std::to_string(i), coef(rng));
    for (int i = 0; i < n; ++i) p.add({{{i, 1.0}}, Sense::LessEq, pos(rng) * 2.0, "box"});
    const int m = 1 + trial % 3;
    for (int k = 0; k < m; ++k) {
      Constraint c;
      for (int i = 0; i < n; ++i) c.terms.push_back({i, coef(rng)});
      const int s = sense(rng);
      c.sense = s == 0 ? Sense::LessEq : s == 1 ? Sense::GreaterEq : Sense::Equal;
      c.rhs = coef(rng);
      c.label = "r";
      p.add(c);
    }
    const auto oracle = brute_force_min(p);
    const auto got = sfc::lp::solve(p);
    if (!oracle) {
      EXPECT_EQ(got.status, Status::Infeasible) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(got.status, Status::Optimal) << "trial " << trial;
    EXPECT_NEAR(got.objective, *oracle, 1e-6 * (1.0 + std::fabs(*oracle))) << "trial " << trial;
    EXPECT_LT(sfc::lp::max_violation(p, got.x), 1e-7);
    ++compared;
  }
  EXPECT_GT(compared, 50);
}

TEST(Simplex, DumpGroupsRowsByLabel) {
  Problem p;
  const int x = p.add_var("x", 1.0);
  p.add({{{x, 1.0}}, Sense::LessEq, 2.0, "bandwidth r0-r1"});
  const std::string text = sfc::lp::dump(p);
  EXPECT_NE(text.find("bandwidth r0-r1"), std::string::npos);
  EXPECT_NE(text.find("x"), std::string::npos);
}

}  // namespace
