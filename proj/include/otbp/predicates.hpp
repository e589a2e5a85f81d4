#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

#include <gmpxx.h>

// Exact sign predicates on double-precision inputs. Each predicate is a
// polynomial in the input coordinates; it is evaluated in double precision
// with a forward error bound and re-evaluated in exact rational arithmetic
// only when the bound cannot certify the sign.
namespace otbp::exact {

// Magnitude arithmetic: evaluates the same expression on absolute values, with
// subtraction turned into addition. Bounds the rounding error of the double
// evaluation.
struct Magnitude {
  double v;
};
inline Magnitude operator+(Magnitude a, Magnitude b) { return {a.v + b.v}; }
inline Magnitude operator-(Magnitude a, Magnitude b) { return {a.v + b.v}; }
inline Magnitude operator*(Magnitude a, Magnitude b) { return {a.v * b.v}; }

template <class T>
struct Lift;
template <>
struct Lift<double> {
  double operator()(double x) const { return x; }
};
template <>
struct Lift<Magnitude> {
  Magnitude operator()(double x) const { return {std::fabs(x)}; }
};
template <>
struct Lift<mpq_class> {
  mpq_class operator()(double x) const { return mpq_class(x); }
};

// gamma_48 with headroom for the magnitude evaluation's own rounding.
inline constexpr double kRelativeErrorBound = 48.0 * 1.2e-16;

// `expr` is a generic callable taking a Lift<T> and returning T. It must
// store intermediates as T (not auto) so gmpxx expression templates never
// outlive their operands.
template <class Expr>
int sign(const Expr& expr) {
  const double approx = expr(Lift<double>{});
  const double mag = expr(Lift<Magnitude>{}).v;
  if (std::isfinite(mag) && std::isfinite(approx) && mag > 1e-250) {
    const double bound = kRelativeErrorBound * mag;
    if (approx > bound) return 1;
    if (approx < -bound) return -1;
  }
  const mpq_class value = expr(Lift<mpq_class>{});
  return sgn(value);
}

// sign(x - y) for scalars.
inline int compare(double x, double y) { return (x > y) - (x < y); }

// sign det[a - u, b - u] in the plane.
int orient2(const double* u, const double* a, const double* b);

// sign det[a - u, b - u, c - u] in space.
int orient3(const double* u, const double* a, const double* b, const double* c);

// sign <a - u, b - u> in dimension dim.
int dot(const double* u, const double* a, const double* b, std::size_t dim);

// sign <(a-u) x (b-u), (c-u) x (e-u)> in space: orientation of (c, e) inside the
// plane spanned by (a, b), measured against the normal (a-u) x (b-u).
int plane_orient(const double* u, const double* a, const double* b, const double* c,
                 const double* e);

// Whether a - u and b - u are parallel (or one is zero), in dimension 3.
bool collinear3(const double* u, const double* a, const double* b);

// sign det[p_1 - p_0, ..., p_d - p_0] for d + 1 points in R^d, rows given as
// pointers to d coordinates. Uses the filtered path for d <= 3.
int simplex_orientation(std::span<const double* const> points, std::size_t dim);

}  // namespace otbp::exact
