#pragma once

#include <span>
#include <vector>

#include "mapfuse/map_model.hpp"

namespace mapfuse::kernels {

/// Execution policy for the data-parallel kernels. `parallel` uses OpenMP
/// when compiled in and falls back to the serial path otherwise. The serial
/// path is the reference implementation; tests assert both produce identical
/// results.
enum class ExecPolicy { serial, parallel };

ExecPolicy default_policy();

/// Dense pairwise symmetric Chamfer costs, row-major rows.size() x cols.size().
std::vector<double> chamfer_cost_matrix(std::span<const MapElement> rows,
                                        std::span<const MapElement> cols,
                                        ExecPolicy policy = default_policy());

namespace detail {
std::vector<double> chamfer_cost_matrix_serial(std::span<const MapElement> rows,
                                               std::span<const MapElement> cols);
std::vector<double> chamfer_cost_matrix_omp(std::span<const MapElement> rows,
                                            std::span<const MapElement> cols);
}  // namespace detail

}  // namespace mapfuse::kernels
