#include "mapfuse/hungarian.hpp"

#include <stdexcept>

namespace mapfuse {

namespace {

// Jonker-Volgenant style shortest augmenting path with potentials on a
// square matrix. Returns col -> row matching (1-based internally).
std::vector<int> solve_square(const std::vector<double>& a, int n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur =
            a[static_cast<std::size_t>(i0 - 1) * static_cast<std::size_t>(n) +
              static_cast<std::size_t>(j - 1)] -
            u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      if (j1 < 0) throw std::runtime_error("assignment: no augmenting path");
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  return p;
}

}  // namespace

AssignmentSolution solve_assignment(const std::vector<double>& cost, int n_rows, int n_cols,
                                    double unmatch_penalty) {
  if (cost.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols)) {
    throw std::invalid_argument("cost matrix size mismatch");
  }
  AssignmentSolution out;
  out.row_to_col.assign(static_cast<std::size_t>(n_rows), -1);
  out.col_to_row.assign(static_cast<std::size_t>(n_cols), -1);
  if (n_rows == 0 && n_cols == 0) return out;

  // Pad to a square (n_rows + n_cols) matrix: each real row/col gets a
  // private dummy partner priced at the unmatch penalty; dummy-dummy pairs
  // are free so leftovers always have a home.
  const int n = n_rows + n_cols;
  std::vector<double> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                        kForbiddenCost);
  for (int i = 0; i < n_rows; ++i) {
    for (int j = 0; j < n_cols; ++j) {
      a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] =
          cost[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_cols) +
               static_cast<std::size_t>(j)];
    }
  }
  for (int i = 0; i < n_rows; ++i) {
    a[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
      static_cast<std::size_t>(n_cols + i)] = unmatch_penalty;
  }
  for (int j = 0; j < n_cols; ++j) {
    a[static_cast<std::size_t>(n_rows + j) * static_cast<std::size_t>(n) +
      static_cast<std::size_t>(j)] = unmatch_penalty;
  }
  for (int i = 0; i < n_cols; ++i) {
    for (int j = 0; j < n_rows; ++j) {
      a[static_cast<std::size_t>(n_rows + i) * static_cast<std::size_t>(n) +
        static_cast<std::size_t>(n_cols + j)] = 0.0;
    }
  }

  const auto p = solve_square(a, n);
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<std::size_t>(j)];
    const int row = i - 1;
    const int col = j - 1;
    if (row < n_rows && col < n_cols) {
      const double c = cost[static_cast<std::size_t>(row) * static_cast<std::size_t>(n_cols) +
                            static_cast<std::size_t>(col)];
      if (c >= kForbiddenCost) continue;  // numerically impossible; guard anyway
      out.row_to_col[static_cast<std::size_t>(row)] = col;
      out.col_to_row[static_cast<std::size_t>(col)] = row;
      out.matched_cost += c;
      ++out.matched_count;
    }
  }
  const int unmatched = (n_rows - out.matched_count) + (n_cols - out.matched_count);
  out.total_cost = out.matched_cost + unmatch_penalty * static_cast<double>(unmatched);
  return out;
}

}  // namespace mapfuse
