#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// where the CPU allows it, a SIMD version that must produce bit-identical
// results (same operation order, no FMA contraction).
namespace otbp::kernels {

enum class Backend { scalar, avx2 };

struct RelaxResult {
  double delta;
  std::int64_t column;  // -1 when every column is already used
};

struct KernelTable {
  Backend backend;

  // out[i] = sum_k dir[k] * (soa[k*n + i] - origin[k]), summed in k order.
  void (*project)(const double* soa, std::size_t n, std::size_t dim, const double* origin,
                  const double* dir, double* out);

  // out[i] = sum_k (soa[k*n + i] - point[k])^2, summed in k order.
  void (*squared_distances)(const double* soa, std::size_t n, std::size_t dim,
                            const double* point, double* out);

  // One Dijkstra relaxation of the shortest augmenting path solver. For every
  // column j with used[j] == 0: reduced = (cost_row[j] - row_potential) -
  // col_potential[j]; if reduced < minv[j] then minv[j] = reduced and
  // way[j] = from. Returns the smallest minv over unused columns, lowest index
  // on ties.
  RelaxResult (*relax)(const double* cost_row, double row_potential, const double* col_potential,
                       const std::int64_t* used, double* minv, std::int64_t* way,
                       std::int64_t from, std::size_t n);

  // For used columns col_potential[j] -= delta, otherwise minv[j] -= delta.
  void (*shift)(const std::int64_t* used, double delta, double* col_potential, double* minv,
                std::size_t n);
};

const KernelTable& scalar_table();
bool backend_supported(Backend backend);
const KernelTable& table(Backend backend);

// The table used by the library. Chosen on first use from CPU features; the
// environment variable OTBP_SIMD=scalar|avx2 overrides the choice.
const KernelTable& active();
void select_backend(Backend backend);

std::string_view backend_name(Backend backend);

}  // namespace otbp::kernels
