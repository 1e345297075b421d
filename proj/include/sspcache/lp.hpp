#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sspcache/errors.hpp"

namespace sspcache {

// Dense two-phase tableau simplex for small equality-form programs:
//     maximize c'x   s.t.  A x = rhs,  x >= 0.
// Bland's rule keeps pivoting deterministic and cycle-free; duals come from
// solving B' y = c_B on the optimal basis. Problem sizes here are at most a
// few hundred columns, so O(m^3) cleanup steps are immaterial.
struct LpSolution {
  std::vector<double> x;
  std::vector<double> duals; // one per equality row
  double objective = 0.0;
};

namespace detail {

inline void lp_pivot(std::vector<std::vector<double>>& t, std::vector<int>& basis, int row,
                     int col) {
  const std::size_t ncols = t[0].size();
  const double piv = t[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
  for (std::size_t k = 0; k < ncols; ++k) t[static_cast<std::size_t>(row)][k] /= piv;
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (static_cast<int>(r) == row) continue;
    const double f = t[r][static_cast<std::size_t>(col)];
    if (f == 0.0) continue;
    for (std::size_t k = 0; k < ncols; ++k) t[r][k] -= f * t[static_cast<std::size_t>(row)][k];
  }
  basis[static_cast<std::size_t>(row)] = col;
}

// Simplex iterations on tableau rows 0..m-1 with objective row m (stored as
// reduced costs to be *minimized*: pick a column with negative entry).
inline void lp_iterate(std::vector<std::vector<double>>& t, std::vector<int>& basis, int ncols) {
  const int m = static_cast<int>(t.size()) - 1;
  const double eps = 1e-11;
  for (int guard = 0; guard < 100000; ++guard) {
    int col = -1;
    for (int j = 0; j < ncols; ++j)
      if (t[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] < -eps) {
        col = j; // Bland: lowest index
        break;
      }
    if (col < 0) return;
    int row = -1;
    double best = 0.0;
    for (int r = 0; r < m; ++r) {
      const double a = t[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
      if (a > eps) {
        const double ratio = t[static_cast<std::size_t>(r)].back() / a;
        if (row < 0 || ratio < best - 1e-12 ||
            (ratio < best + 1e-12 && basis[static_cast<std::size_t>(r)] <
                                         basis[static_cast<std::size_t>(row)])) {
          row = r;
          best = ratio;
        }
      }
    }
    if (row < 0) throw numeric_error("linear program is unbounded");
    lp_pivot(t, basis, row, col);
  }
  throw numeric_error("simplex iteration limit exceeded");
}

}  // namespace detail

inline LpSolution solve_lp_equality(const std::vector<std::vector<double>>& a,
                                    std::vector<double> rhs, const std::vector<double>& c) {
  const int m = static_cast<int>(a.size());
  const int n = m > 0 ? static_cast<int>(a[0].size()) : static_cast<int>(c.size());
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    rows[static_cast<std::size_t>(r)] = a[static_cast<std::size_t>(r)];
    if (rhs[static_cast<std::size_t>(r)] < 0.0) {
      for (auto& v : rows[static_cast<std::size_t>(r)]) v = -v;
      rhs[static_cast<std::size_t>(r)] = -rhs[static_cast<std::size_t>(r)];
    }
  }

  // Phase 1: artificials n..n+m-1, minimize their sum.
  const int ncols = n + m;
  std::vector<std::vector<double>> t(static_cast<std::size_t>(m + 1),
                                     std::vector<double>(static_cast<std::size_t>(ncols + 1), 0.0));
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j)
      t[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] =
          rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
    t[static_cast<std::size_t>(r)][static_cast<std::size_t>(n + r)] = 1.0;
    t[static_cast<std::size_t>(r)].back() = rhs[static_cast<std::size_t>(r)];
    basis[static_cast<std::size_t>(r)] = n + r;
  }
  for (int j = 0; j <= ncols; ++j) {
    double s = 0.0;
    for (int r = 0; r < m; ++r) s += t[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
    t[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] = -s;
  }
  t[static_cast<std::size_t>(m)][static_cast<std::size_t>(ncols)] = 0.0;
  for (int r = 0; r < m; ++r)
    t[static_cast<std::size_t>(m)].back() -= t[static_cast<std::size_t>(r)].back();
  detail::lp_iterate(t, basis, ncols);
  double infeas = -t[static_cast<std::size_t>(m)].back();
  if (infeas > 1e-8) throw infeasibility_error("linear program infeasible");

  // Drive any residual artificial out of the basis.
  for (int r = 0; r < m; ++r) {
    if (basis[static_cast<std::size_t>(r)] < n) continue;
    int col = -1;
    for (int j = 0; j < n; ++j)
      if (std::abs(t[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]) > 1e-9) {
        col = j;
        break;
      }
    if (col >= 0) detail::lp_pivot(t, basis, r, col);
    // else: redundant row, the artificial stays at value zero
  }

  // Phase 2 objective row: reduced costs of -c (we minimize -c'x).
  for (int j = 0; j < ncols; ++j)
    t[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] =
        j < n ? -c[static_cast<std::size_t>(j)] : 0.0;
  t[static_cast<std::size_t>(m)].back() = 0.0;
  for (int r = 0; r < m; ++r) {
    const int bv = basis[static_cast<std::size_t>(r)];
    const double cb = bv < n ? -c[static_cast<std::size_t>(bv)] : 0.0;
    if (cb == 0.0) continue;
    for (int j = 0; j <= ncols; ++j)
      t[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] -=
          cb * t[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
  }
  // Phase 2 scans only the original columns, so artificials cannot re-enter.
  detail::lp_iterate(t, basis, n);

  LpSolution sol;
  sol.x.assign(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < m; ++r)
    if (basis[static_cast<std::size_t>(r)] < n)
      sol.x[static_cast<std::size_t>(basis[static_cast<std::size_t>(r)])] =
          t[static_cast<std::size_t>(r)].back();
  sol.objective = 0.0;
  for (int j = 0; j < n; ++j)
    sol.objective += c[static_cast<std::size_t>(j)] * sol.x[static_cast<std::size_t>(j)];

  // Duals: solve B' y = c_B on the original columns of the optimal basis.
  std::vector<std::vector<double>> bt(static_cast<std::size_t>(m),
                                      std::vector<double>(static_cast<std::size_t>(m + 1), 0.0));
  for (int r = 0; r < m; ++r) {
    const int bv = basis[static_cast<std::size_t>(r)];
    for (int i = 0; i < m; ++i)
      bt[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
          bv < n ? a[static_cast<std::size_t>(i)][static_cast<std::size_t>(bv)]
                 : (i == bv - n ? 1.0 : 0.0);
    bt[static_cast<std::size_t>(r)].back() = bv < n ? c[static_cast<std::size_t>(bv)] : 0.0;
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r)
      if (std::abs(bt[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
          std::abs(bt[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)]))
        piv = r;
    std::swap(bt[static_cast<std::size_t>(col)], bt[static_cast<std::size_t>(piv)]);
    const double diag = bt[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
    if (std::abs(diag) < 1e-13) continue; // degenerate direction: dual component free, keep 0
    for (int r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f =
          bt[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] / diag;
      if (f == 0.0) continue;
      for (int j = col; j <= m; ++j)
        bt[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] -=
            f * bt[static_cast<std::size_t>(col)][static_cast<std::size_t>(j)];
    }
  }
  sol.duals.assign(static_cast<std::size_t>(m), 0.0);
  for (int r = 0; r < m; ++r) {
    const double diag = bt[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)];
    if (std::abs(diag) > 1e-13)
      sol.duals[static_cast<std::size_t>(r)] = bt[static_cast<std::size_t>(r)].back() / diag;
  }
  return sol;
}

}  // namespace sspcache
