#include "otbp/predicates.hpp"

#include <vector>

#include "otbp/errors.hpp"

namespace otbp::exact {

int orient2(const double* u, const double* a, const double* b) {
  return sign([&](auto lift) {
    using T = decltype(lift(0.0));
    const T ax = lift(a[0]) - lift(u[0]);
    const T ay = lift(a[1]) - lift(u[1]);
    const T bx = lift(b[0]) - lift(u[0]);
    const T by = lift(b[1]) - lift(u[1]);
    const T lhs = ax * by;
    const T rhs = ay * bx;
    return T(lhs - rhs);
  });
}

int orient3(const double* u, const double* a, const double* b, const double* c) {
  return sign([&](auto lift) {
    using T = decltype(lift(0.0));
    const T ax = lift(a[0]) - lift(u[0]), ay = lift(a[1]) - lift(u[1]),
            az = lift(a[2]) - lift(u[2]);
    const T bx = lift(b[0]) - lift(u[0]), by = lift(b[1]) - lift(u[1]),
            bz = lift(b[2]) - lift(u[2]);
    const T cx = lift(c[0]) - lift(u[0]), cy = lift(c[1]) - lift(u[1]),
            cz = lift(c[2]) - lift(u[2]);
    const T m0 = by * cz - bz * cy;
    const T m1 = bx * cz - bz * cx;
    const T m2 = bx * cy - by * cx;
    const T t0 = ax * m0;
    const T t1 = ay * m1;
    const T t2 = az * m2;
    return T(t0 - t1 + t2);
  });
}

int dot(const double* u, const double* a, const double* b, std::size_t dim) {
  return sign([&](auto lift) {
    using T = decltype(lift(0.0));
    T acc = lift(0.0);
    for (std::size_t k = 0; k < dim; ++k) {
      const T da = lift(a[k]) - lift(u[k]);
      const T db = lift(b[k]) - lift(u[k]);
      const T prod = da * db;
      acc = acc + prod;
    }
    return acc;
  });
}

int plane_orient(const double* u, const double* a, const double* b, const double* c,
                 const double* e) {
  // <a x b, c x e> = (a.c)(b.e) - (a.e)(b.c) with every vector taken relative to u.
  return sign([&](auto lift) {
    using T = decltype(lift(0.0));
    auto diff = [&](const double* p, int k) { return T(lift(p[k]) - lift(u[k])); };
    auto inner = [&](const double* p, const double* q) {
      T acc = lift(0.0);
      for (int k = 0; k < 3; ++k) {
        const T prod = diff(p, k) * diff(q, k);
        acc = acc + prod;
      }
      return acc;
    };
    const T ac = inner(a, c), be = inner(b, e), ae = inner(a, e), bc = inner(b, c);
    const T lhs = ac * be;
    const T rhs = ae * bc;
    return T(lhs - rhs);
  });
}

bool collinear3(const double* u, const double* a, const double* b) {
  // Each component of (a-u) x (b-u) is a planar orientation on two axes.
  for (int k = 0; k < 3; ++k) {
    const int p = (k + 1) % 3, q = (k + 2) % 3;
    const double up[2] = {u[p], u[q]}, ap[2] = {a[p], a[q]}, bp[2] = {b[p], b[q]};
    if (orient2(up, ap, bp) != 0) return false;
  }
  return true;
}

int simplex_orientation(std::span<const double* const> points, std::size_t dim) {
  if (points.size() != dim + 1)
    throw InternalError("simplex_orientation expects dim + 1 points");
  if (dim == 1) return compare(points[1][0], points[0][0]);
  if (dim == 2) return orient2(points[0], points[1], points[2]);
  if (dim == 3) return orient3(points[0], points[1], points[2], points[3]);

  // Gaussian elimination over the rationals.
  std::vector<std::vector<mpq_class>> m(dim, std::vector<mpq_class>(dim));
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      m[r][c] = mpq_class(points[r + 1][c]) - mpq_class(points[0][c]);
  int s = 1;
  for (std::size_t c = 0; c < dim; ++c) {
    std::size_t pivot = c;
    while (pivot < dim && sgn(m[pivot][c]) == 0) ++pivot;
    if (pivot == dim) return 0;
    if (pivot != c) {
      std::swap(m[pivot], m[c]);
      s = -s;
    }
    if (sgn(m[c][c]) < 0) s = -s;
    for (std::size_t r = c + 1; r < dim; ++r) {
      if (sgn(m[r][c]) == 0) continue;
      const mpq_class f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < dim; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return s;
}

}  // namespace otbp::exact
