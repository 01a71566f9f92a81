#include "mapfuse/kernels.hpp"

namespace mapfuse::kernels {

ExecPolicy default_policy() {
#ifdef _OPENMP
  return ExecPolicy::parallel;
#else
  return ExecPolicy::serial;
#endif
}

namespace detail {

std::vector<double> chamfer_cost_matrix_serial(std::span<const MapElement> rows,
                                               std::span<const MapElement> cols) {
  std::vector<double> cost(rows.size() * cols.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      cost[i * cols.size() + j] = chamfer_distance(rows[i], cols[j]);
    }
  }
  return cost;
}

std::vector<double> chamfer_cost_matrix_omp(std::span<const MapElement> rows,
                                            std::span<const MapElement> cols) {
  std::vector<double> cost(rows.size() * cols.size(), 0.0);
  const auto n = static_cast<std::int64_t>(rows.size());
  const auto m = static_cast<std::int64_t>(cols.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::int64_t idx = 0; idx < n * m; ++idx) {
    const auto i = static_cast<std::size_t>(idx / m);
    const auto j = static_cast<std::size_t>(idx % m);
    cost[static_cast<std::size_t>(idx)] = chamfer_distance(rows[i], cols[j]);
  }
  return cost;
}

}  // namespace detail

std::vector<double> chamfer_cost_matrix(std::span<const MapElement> rows,
                                        std::span<const MapElement> cols, ExecPolicy policy) {
  if (rows.empty() || cols.empty()) return {};
  return policy == ExecPolicy::parallel ? detail::chamfer_cost_matrix_omp(rows, cols)
                                        : detail::chamfer_cost_matrix_serial(rows, cols);
}

}  // namespace mapfuse::kernels
