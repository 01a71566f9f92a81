#pragma once

#include <limits>
#include <vector>

namespace mapfuse {

/// Marker for a forbidden row/col pairing.
inline constexpr double kForbiddenCost = 1e30;

struct AssignmentSolution {
  /// row_to_col[i] = matched column of row i, or -1 when row i is unmatched.
  std::vector<int> row_to_col;
  std::vector<int> col_to_row;
  double matched_cost = 0.0;  // sum over matched real pairs
  double total_cost = 0.0;    // matched_cost + unmatch_penalty per unmatched row/col
  int matched_count = 0;
};

/// Minimum-cost one-to-one assignment on a dense n_rows x n_cols matrix
/// (row-major). Entries >= kForbiddenCost are non-edges. Leaving a row or a
/// column unmatched costs `unmatch_penalty`, so a penalty larger than half
/// the largest useful edge cost forces maximum cardinality while ties in
/// cardinality resolve by total cost. Rows are processed in index order,
/// which fixes the result deterministically among equal-cost optima.
AssignmentSolution solve_assignment(const std::vector<double>& cost, int n_rows, int n_cols,
                                    double unmatch_penalty);

}  // namespace mapfuse
