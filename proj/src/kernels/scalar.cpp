#include "otbp/kernels/kernels.hpp"

#include <limits>

namespace otbp::kernels {
namespace {

void project_scalar(const double* soa, std::size_t n, std::size_t dim, const double* origin,
                    const double* dir, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) acc = acc + dir[k] * (soa[k * n + i] - origin[k]);
    out[i] = acc;
  }
}

void squared_distances_scalar(const double* soa, std::size_t n, std::size_t dim,
                              const double* point, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = soa[k * n + i] - point[k];
      acc = acc + diff * diff;
    }
    out[i] = acc;
  }
}

RelaxResult relax_scalar(const double* cost_row, double row_potential, const double* col_potential,
                         const std::int64_t* used, double* minv, std::int64_t* way,
                         std::int64_t from, std::size_t n) {
  RelaxResult best{std::numeric_limits<double>::infinity(), -1};
  for (std::size_t j = 0; j < n; ++j) {
    if (used[j]) continue;
    const double reduced = (cost_row[j] - row_potential) - col_potential[j];
    if (reduced < minv[j]) {
      minv[j] = reduced;
      way[j] = from;
    }
    if (minv[j] < best.delta || best.column < 0) {
      best.delta = minv[j];
      best.column = static_cast<std::int64_t>(j);
    }
  }
  return best;
}

void shift_scalar(const std::int64_t* used, double delta, double* col_potential, double* minv,
                  std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    if (used[j])
      col_potential[j] = col_potential[j] - delta;
    else
      minv[j] = minv[j] - delta;
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::scalar, project_scalar, squared_distances_scalar,
                                 relax_scalar, shift_scalar};
  return table;
}

}  // namespace otbp::kernels
