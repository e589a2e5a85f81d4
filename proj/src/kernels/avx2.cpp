// Compiled with -mavx2 -mno-fma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <limits>

#include "otbp/kernels/kernels.hpp"

namespace otbp::kernels {
namespace {

void project_avx2(const double* soa, std::size_t n, std::size_t dim, const double* origin,
                  const double* dir, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < dim; ++k) {
      const __m256d x = _mm256_loadu_pd(soa + k * n + i);
      const __m256d diff = _mm256_sub_pd(x, _mm256_set1_pd(origin[k]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(dir[k]), diff));
    }
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) acc = acc + dir[k] * (soa[k * n + i] - origin[k]);
    out[i] = acc;
  }
}

void squared_distances_avx2(const double* soa, std::size_t n, std::size_t dim,
                            const double* point, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < dim; ++k) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_loadu_pd(soa + k * n + i), _mm256_set1_pd(point[k]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = soa[k * n + i] - point[k];
      acc = acc + diff * diff;
    }
    out[i] = acc;
  }
}

RelaxResult relax_avx2(const double* cost_row, double row_potential, const double* col_potential,
                       const std::int64_t* used, double* minv, std::int64_t* way,
                       std::int64_t from, std::size_t n) {
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  const __m256d rp = _mm256_set1_pd(row_potential);
  const __m256i from_v = _mm256_set1_epi64x(from);
  const __m256i zero = _mm256_setzero_si256();
  const __m256i step = _mm256_set1_epi64x(4);

  __m256d best_val = inf;
  __m256i best_idx = _mm256_set1_epi64x(-1);
  __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);

  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256i used_v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(used + j));
    const __m256d unused = _mm256_castsi256_pd(_mm256_cmpeq_epi64(used_v, zero));

    const __m256d reduced = _mm256_sub_pd(_mm256_sub_pd(_mm256_loadu_pd(cost_row + j), rp),
                                          _mm256_loadu_pd(col_potential + j));
    __m256d mv = _mm256_loadu_pd(minv + j);
    const __m256d improve = _mm256_and_pd(_mm256_cmp_pd(reduced, mv, _CMP_LT_OQ), unused);
    mv = _mm256_blendv_pd(mv, reduced, improve);
    _mm256_storeu_pd(minv + j, mv);

    const __m256d way_old = _mm256_loadu_pd(reinterpret_cast<const double*>(way + j));
    const __m256d way_new = _mm256_blendv_pd(way_old, _mm256_castsi256_pd(from_v), improve);
    _mm256_storeu_pd(reinterpret_cast<double*>(way + j), way_new);

    const __m256d unset = _mm256_castsi256_pd(_mm256_cmpgt_epi64(zero, best_idx));
    const __m256d better =
        _mm256_and_pd(_mm256_or_pd(_mm256_cmp_pd(mv, best_val, _CMP_LT_OQ), unset), unused);
    best_val = _mm256_blendv_pd(best_val, mv, better);
    best_idx = _mm256_castpd_si256(
        _mm256_blendv_pd(_mm256_castsi256_pd(best_idx), _mm256_castsi256_pd(idx), better));
    idx = _mm256_add_epi64(idx, step);
  }

  alignas(32) double lane_val[4];
  alignas(32) std::int64_t lane_idx[4];
  _mm256_store_pd(lane_val, best_val);
  _mm256_store_si256(reinterpret_cast<__m256i*>(lane_idx), best_idx);

  RelaxResult best{std::numeric_limits<double>::infinity(), -1};
  for (int lane = 0; lane < 4; ++lane) {
    if (lane_idx[lane] < 0) continue;
    if (best.column < 0 || lane_val[lane] < best.delta ||
        (lane_val[lane] == best.delta && lane_idx[lane] < best.column)) {
      best.delta = lane_val[lane];
      best.column = lane_idx[lane];
    }
  }

  for (; j < n; ++j) {
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

void shift_avx2(const std::int64_t* used, double delta, double* col_potential, double* minv,
                std::size_t n) {
  const __m256d d = _mm256_set1_pd(delta);
  const __m256i zero = _mm256_setzero_si256();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256i used_v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(used + j));
    const __m256d is_used =
        _mm256_xor_pd(_mm256_castsi256_pd(_mm256_cmpeq_epi64(used_v, zero)),
                      _mm256_castsi256_pd(_mm256_set1_epi64x(-1)));
    const __m256d pot = _mm256_loadu_pd(col_potential + j);
    const __m256d mv = _mm256_loadu_pd(minv + j);
    _mm256_storeu_pd(col_potential + j, _mm256_blendv_pd(pot, _mm256_sub_pd(pot, d), is_used));
    _mm256_storeu_pd(minv + j, _mm256_blendv_pd(_mm256_sub_pd(mv, d), mv, is_used));
  }
  for (; j < n; ++j) {
    if (used[j])
      col_potential[j] = col_potential[j] - delta;
    else
      minv[j] = minv[j] - delta;
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Backend::avx2, project_avx2, squared_distances_avx2, relax_avx2,
                                 shift_avx2};
  return table;
}

}  // namespace otbp::kernels
