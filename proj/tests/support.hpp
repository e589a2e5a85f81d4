#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "otbp/errors.hpp"
#include "otbp/pointset.hpp"

namespace testing_support {

// Message of the otbp::Error thrown by f, or "" if nothing was thrown.
template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const otbp::Error& e) {
    return e.what();
  }
  return {};
}

inline bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

inline otbp::PointCloud cloud(const std::vector<otbp::Vector>& rows, std::string label = "test") {
  return otbp::PointCloud::from_rows(rows, std::move(label));
}

inline otbp::PointCloud line(const std::vector<double>& xs) {
  std::vector<otbp::Vector> rows;
  for (double x : xs) rows.push_back({x});
  return cloud(rows);
}

inline otbp::PointCloud square_corners() { return cloud({{0, 0}, {1, 0}, {0, 1}, {1, 1}}); }

inline otbp::PointCloud square_with_center() {
  return cloud({{1, 1}, {1, -1}, {-1, 1}, {-1, -1}, {0, 0}});
}

// Exact determinant of a square matrix of doubles by rational Gaussian
// elimination.
inline int exact_det_sign(std::vector<std::vector<mpq_class>> m) {
  const std::size_t n = m.size();
  int sign = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    while (piv < n && m[piv][c] == 0) ++piv;
    if (piv == n) return 0;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      sign = -sign;
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      if (m[r][c] == 0) continue;
      const mpq_class f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
    if (m[c][c] < 0) sign = -sign;
  }
  return sign;
}

// Whether the d + 1 given rows of the cloud lie on one affine hyperplane.
inline bool exactly_coplanar(const otbp::PointCloud& c, const std::vector<std::size_t>& idx) {
  const std::size_t d = c.dim();
  std::vector<std::vector<mpq_class>> m(d, std::vector<mpq_class>(d));
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t k = 0; k < d; ++k)
      m[r][k] = mpq_class(c.coord(idx[r + 1], k)) - mpq_class(c.coord(idx[0], k));
  return exact_det_sign(m) == 0;
}

// Sign of <v, x - u> in exact arithmetic.
inline int exact_side(const otbp::Vector& v, const otbp::Vector& x, const otbp::Vector& u) {
  mpq_class acc = 0;
  for (std::size_t k = 0; k < v.size(); ++k) acc += mpq_class(v[k]) * (mpq_class(x[k]) - mpq_class(u[k]));
  return sgn(acc);
}

}  // namespace testing_support
