#include "otbp/depth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "otbp/errors.hpp"
#include "otbp/predicates.hpp"

namespace otbp {
namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Setup {
  std::size_t n = 0, d = 0;
  Vector u;
  std::vector<Vector> rows;
  std::vector<std::size_t> w;     // indices of points different from u
  std::vector<std::size_t> self;  // indices equal to u (at most one)
  const double* p(std::size_t i) const { return rows[i].data(); }
};

Setup make_setup(const PointCloud& cloud, std::span<const double> u) {
  if (u.size() != cloud.dim())
    throw ValidationError("depth: query point has dimension " + std::to_string(u.size()) +
                          ", cloud has " + std::to_string(cloud.dim()));
  for (double c : u)
    if (!std::isfinite(c)) throw ValidationError("depth: query point is not finite");
  Setup s;
  s.n = cloud.size();
  s.d = cloud.dim();
  s.u.assign(u.begin(), u.end());
  s.rows = cloud.rows();
  for (std::size_t i = 0; i < s.n; ++i) {
    bool equal = true;
    for (std::size_t k = 0; k < s.d; ++k) equal = equal && s.rows[i][k] == s.u[k];
    (equal ? s.self : s.w).push_back(i);
  }
  return s;
}

Vector sub(const Vector& a, const Vector& b) {
  Vector r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] - b[k];
  return r;
}

Vector axpy(const Vector& a, double t, const Vector& b) {
  Vector r(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k] + t * b[k];
  return r;
}

Vector scaled(const Vector& a, double t) {
  Vector r(a);
  for (double& c : r) c *= t;
  return r;
}

Vector cross(const Vector& a, const Vector& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vector unit_axis(std::size_t d, std::size_t k, double sign = 1.0) {
  Vector e(d, 0.0);
  e[k] = sign;
  return e;
}

// Some unit vector orthogonal to a (d = 3).
Vector perpendicular(const Vector& a) {
  std::size_t k = 0;
  for (std::size_t t = 1; t < 3; ++t)
    if (std::fabs(a[t]) < std::fabs(a[k])) k = t;
  return normalized(cross(a, unit_axis(3, k)));
}

// One pass over the planar arrangement around u. `orient(c, e)` is the sign
// of the in-plane cross product of c - u and e - u; `dotsign` the sign of
// their inner product. Direction choices: sigma = +1 takes the rotated anchor
// rot(c) (open side = orient < 0), sigma = -1 its negative; tau = +1 tilts
// toward c (points behind u join the closed side), tau = -1 away from c.
struct PlanarChoice {
  std::size_t anchor = kNone;
  int sigma = 1;
  int tau = 1;
};

struct PlanarResult {
  std::size_t best_open = kNone;
  PlanarChoice open_choice;
  std::size_t best_closed = kNone;  // excluding points equal to u
  PlanarChoice closed_choice;
};

struct PlanarCounts {
  std::size_t left = 0, right = 0, same = 0, opp = 0;
};

void planar_update(PlanarResult& r, std::size_t anchor, const PlanarCounts& c) {
  const std::size_t opens[2] = {c.right, c.left};
  const int sigmas[2] = {1, -1};
  for (int s = 0; s < 2; ++s) {
    if (opens[s] < r.best_open) {
      r.best_open = opens[s];
      r.open_choice = {anchor, sigmas[s], 1};
    }
    const std::size_t closed_t[2] = {opens[s] + c.opp, opens[s] + c.same};
    const int taus[2] = {1, -1};
    for (int t = 0; t < 2; ++t) {
      if (closed_t[t] < r.best_closed) {
        r.best_closed = closed_t[t];
        r.closed_choice = {anchor, sigmas[s], taus[t]};
      }
    }
  }
}

PlanarResult planar_scan(const std::vector<std::size_t>& pts,
                         const std::function<int(std::size_t, std::size_t)>& orient,
                         const std::function<int(std::size_t, std::size_t)>& dotsign) {
  PlanarResult r;
  for (std::size_t c : pts) {
    PlanarCounts k;
    for (std::size_t e : pts) {
      if (e == c) {
        ++k.same;
        continue;
      }
      const int o = orient(c, e);
      if (o > 0)
        ++k.left;
      else if (o < 0)
        ++k.right;
      else if (dotsign(c, e) > 0)
        ++k.same;
      else
        ++k.opp;
    }
    planar_update(r, c, k);
  }
  return r;
}

// Search tilt sizes until halfspace_count reproduces the target count.
struct Realized {
  Vector v;
  bool verified = false;
};

std::vector<double> tilt_ladder() {
  std::vector<double> eps;
  for (double e = 0.25; e > 1e-12; e *= 0.25) eps.push_back(e);
  return eps;
}

// Closed halfspace count with every side decided exactly for the given v.
std::size_t exact_closed_count(const PointCloud& cloud, const Vector& u, const Vector& v) {
  std::size_t count = 0;
  const std::size_t d = cloud.dim();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vector x = cloud.point(i);
    const int side = exact::sign([&](auto lift) {
      using T = decltype(lift(0.0));
      T acc = lift(0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const T diff = lift(x[k]) - lift(u[k]);
        const T term = lift(v[k]) * diff;
        acc = acc + term;
      }
      return acc;
    });
    count += side <= 0;
  }
  return count;
}

Realized realize_closed(const PointCloud& cloud, const Vector& u, std::size_t target,
                        const std::function<Vector(double, double)>& make, bool nested) {
  static const std::vector<double> ladder = tilt_ladder();
  const std::vector<double> inner = nested ? ladder : std::vector<double>{0.0};
  Realized out;
  for (double e1 : ladder) {
    for (double e2 : inner) {
      Vector v = make(e1, e2);
      if (exact_closed_count(cloud, u, v) == target) return {v, true};
      out.v = v;
    }
  }
  return out;
}

bool verify_open(const PointCloud& cloud, const Vector& u, const Vector& v, std::size_t target,
                 const std::vector<std::size_t>& boundary) {
  const HalfspaceCount hc = halfspace_count(cloud, u, v);
  return hc.open_count == target && hc.boundary_indices == boundary;
}

Fraction frac(std::size_t num, std::size_t n) {
  return {static_cast<std::int64_t>(num), static_cast<std::int64_t>(n)};
}

// Realizes a planar (d = 2) result into a certificate.
DepthCertificate planar_certificate(const PointCloud& cloud, const Setup& s, const PlanarResult& r,
                                    DepthMethod method) {
  DepthCertificate cert;
  cert.method = method;
  const std::size_t z = s.self.size();
  if (s.w.empty()) {
    cert.td = frac(z, s.n);
    cert.td_minus = frac(0, s.n);
    cert.v_td = cert.v_tdminus = unit_axis(2, 0, -1.0);
    cert.boundary_at_min = s.self;
    cert.directions_verified = true;
    return cert;
  }
  cert.td_minus = frac(r.best_open, s.n);
  cert.td = frac(z + r.best_closed, s.n);

  auto rot = [](const Vector& a) { return Vector{-a[1], a[0]}; };
  {
    const Vector a = normalized(sub(s.rows[r.open_choice.anchor], s.u));
    cert.v_tdminus = scaled(rot(a), r.open_choice.sigma);
    for (std::size_t i = 0; i < s.n; ++i) {
      if (std::find(s.self.begin(), s.self.end(), i) != s.self.end() ||
          exact::orient2(s.u.data(), s.p(r.open_choice.anchor), s.p(i)) == 0)
        cert.boundary_at_min.push_back(i);
    }
  }
  const PlanarChoice& ch = r.closed_choice;
  const Vector a = normalized(sub(s.rows[ch.anchor], s.u));
  const Vector base = scaled(rot(a), ch.sigma);
  const Realized td = realize_closed(
      cloud, s.u, z + r.best_closed,
      [&](double e, double) { return normalized(axpy(base, e * ch.tau, a)); }, false);
  cert.v_td = td.v;
  cert.directions_verified =
      td.verified && verify_open(cloud, s.u, cert.v_tdminus, r.best_open, cert.boundary_at_min);
  return cert;
}

DepthCertificate depth_1d(const PointCloud& cloud, const Setup& s) {
  std::size_t neg = 0, pos = 0;
  for (std::size_t i : s.w) (s.rows[i][0] < s.u[0] ? neg : pos)++;
  const std::size_t z = s.self.size();
  DepthCertificate cert;
  cert.method = DepthMethod::combinatorial_exact;
  // Candidates in order v = -1, v = +1; the first minimum wins.
  const double v = pos <= neg ? -1.0 : 1.0;
  const std::size_t m = std::min(neg, pos);
  cert.td_minus = frac(m, s.n);
  cert.td = frac(z + m, s.n);
  cert.v_td = cert.v_tdminus = Vector{v};
  cert.boundary_at_min = s.self;
  const HalfspaceCount hc = halfspace_count(cloud, s.u, cert.v_td);
  cert.directions_verified = hc.open_count == m && hc.closed_count == z + m;
  return cert;
}

DepthCertificate depth_2d(const PointCloud& cloud, const Setup& s) {
  const double* u = s.u.data();
  const PlanarResult r = planar_scan(
      s.w, [&](std::size_t c, std::size_t e) { return exact::orient2(u, s.p(c), s.p(e)); },
      [&](std::size_t c, std::size_t e) { return exact::dot(u, s.p(c), s.p(e), 2); });
  return planar_certificate(cloud, s, r, DepthMethod::combinatorial_exact);
}

DepthCertificate depth_3d(const PointCloud& cloud, const Setup& s) {
  const double* u = s.u.data();
  const std::size_t z = s.self.size();
  DepthCertificate cert;
  cert.method = DepthMethod::combinatorial_exact;

  // Rank of {w - u}.
  std::size_t a = kNone, b = kNone, c = kNone;
  for (std::size_t i : s.w) {
    if (a == kNone) {
      a = i;
    } else if (b == kNone) {
      if (!exact::collinear3(u, s.p(a), s.p(i))) b = i;
    } else if (exact::orient3(u, s.p(a), s.p(b), s.p(i)) != 0) {
      c = i;
      break;
    }
  }

  auto in_plane = [&](std::size_t pa, std::size_t pb) {
    return std::pair{
        std::function<int(std::size_t, std::size_t)>([&, pa, pb](std::size_t x, std::size_t y) {
          return exact::plane_orient(u, s.p(pa), s.p(pb), s.p(x), s.p(y));
        }),
        std::function<int(std::size_t, std::size_t)>(
            [&](std::size_t x, std::size_t y) { return exact::dot(u, s.p(x), s.p(y), 3); })};
  };
  auto with_self = [&](std::vector<std::size_t> idx) {
    idx.insert(idx.end(), s.self.begin(), s.self.end());
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  if (a == kNone) {
    cert.td = frac(z, s.n);
    cert.td_minus = frac(0, s.n);
    cert.v_td = cert.v_tdminus = unit_axis(3, 0, -1.0);
    cert.boundary_at_min = s.self;
    cert.directions_verified = true;
    return cert;
  }

  if (b == kNone) {
    // Every point lies on one line through u.
    std::size_t same = 0, opp = 0;
    for (std::size_t i : s.w) (exact::dot(u, s.p(a), s.p(i), 3) > 0 ? same : opp)++;
    const Vector ah = normalized(sub(s.rows[a], s.u));
    const Vector p = perpendicular(ah);
    cert.td_minus = frac(0, s.n);
    cert.td = frac(z + std::min(same, opp), s.n);
    cert.v_tdminus = p;
    cert.boundary_at_min = with_self(s.w);
    const double tau = opp <= same ? 1.0 : -1.0;
    const Realized td = realize_closed(
        cloud, s.u, z + std::min(same, opp),
        [&](double e, double) { return normalized(axpy(p, e * tau, ah)); }, false);
    cert.v_td = td.v;
    cert.directions_verified = td.verified && verify_open(cloud, s.u, p, 0, cert.boundary_at_min);
    return cert;
  }

  const Vector ah = normalized(sub(s.rows[a], s.u));
  auto in_plane_direction = [&](const Vector& nh, std::size_t anchor, const PlanarChoice& ch,
                                double e) {
    const Vector ch_hat = normalized(sub(s.rows[anchor], s.u));
    const Vector m = normalized(cross(nh, ch_hat));
    return normalized(axpy(scaled(m, ch.sigma), e * ch.tau, ch_hat));
  };

  if (c == kNone) {
    // Every point lies on one plane through u.
    const Vector nh = normalized(cross(ah, normalized(sub(s.rows[b], s.u))));
    const auto [orient, dotsign] = in_plane(a, b);
    const PlanarResult r = planar_scan(s.w, orient, dotsign);
    cert.td_minus = frac(0, s.n);
    cert.td = frac(z + r.best_closed, s.n);
    cert.v_tdminus = nh;
    cert.boundary_at_min = with_self(s.w);
    const PlanarChoice ch = r.closed_choice;
    const Realized td = realize_closed(
        cloud, s.u, z + r.best_closed,
        [&](double e, double) { return in_plane_direction(nh, ch.anchor, ch, e); }, false);
    cert.v_td = td.v;
    cert.directions_verified = td.verified && verify_open(cloud, s.u, nh, 0, cert.boundary_at_min);
    return cert;
  }

  // Full rank: vertices are the normals of planes through u and two points.
  std::size_t best_open = kNone, best_closed = kNone;
  std::size_t open_a = kNone, open_b = kNone;
  int open_sign = 1;
  std::vector<std::size_t> open_boundary;
  std::size_t closed_a = kNone, closed_b = kNone;
  int closed_sign = 1;
  PlanarChoice closed_choice;
  std::vector<std::size_t> boundary;
  for (std::size_t ia = 0; ia < s.w.size(); ++ia) {
    for (std::size_t ib = ia + 1; ib < s.w.size(); ++ib) {
      const std::size_t pa = s.w[ia], pb = s.w[ib];
      if (exact::collinear3(u, s.p(pa), s.p(pb))) continue;
      std::size_t neg = 0, pos = 0;
      boundary.clear();
      for (std::size_t i : s.w) {
        const int o = exact::orient3(u, s.p(pa), s.p(pb), s.p(i));
        if (o < 0)
          ++neg;
        else if (o > 0)
          ++pos;
        else
          boundary.push_back(i);
      }
      const std::size_t opens[2] = {neg, pos};
      const int signs[2] = {1, -1};
      bool planar_done = false;
      PlanarResult pr;
      for (int t = 0; t < 2; ++t) {
        if (opens[t] < best_open) {
          best_open = opens[t];
          open_a = pa;
          open_b = pb;
          open_sign = signs[t];
          open_boundary = boundary;
        }
        if (opens[t] >= best_closed) continue;
        if (!planar_done) {
          const auto [orient, dotsign] = in_plane(pa, pb);
          pr = planar_scan(boundary, orient, dotsign);
          planar_done = true;
        }
        if (opens[t] + pr.best_closed < best_closed) {
          best_closed = opens[t] + pr.best_closed;
          closed_a = pa;
          closed_b = pb;
          closed_sign = signs[t];
          closed_choice = pr.closed_choice;
        }
      }
    }
  }

  cert.td_minus = frac(best_open, s.n);
  cert.td = frac(z + best_closed, s.n);
  {
    const Vector nh = normalized(cross(normalized(sub(s.rows[open_a], s.u)),
                                       normalized(sub(s.rows[open_b], s.u))));
    cert.v_tdminus = scaled(nh, open_sign);
    cert.boundary_at_min = with_self(open_boundary);
  }
  const Vector nh = normalized(cross(normalized(sub(s.rows[closed_a], s.u)),
                                     normalized(sub(s.rows[closed_b], s.u))));
  const Vector base = scaled(nh, closed_sign);
  const PlanarChoice ch = closed_choice;
  const Realized td = realize_closed(
      cloud, s.u, z + best_closed,
      [&](double e1, double e2) {
        return normalized(axpy(base, e1, in_plane_direction(nh, ch.anchor, ch, e2)));
      },
      true);
  cert.v_td = td.v;
  cert.directions_verified =
      td.verified && verify_open(cloud, s.u, cert.v_tdminus, best_open, cert.boundary_at_min);
  return cert;
}

}  // namespace

std::string to_string(DepthMethod method) {
  switch (method) {
    case DepthMethod::combinatorial_exact:
      return "combinatorial_exact";
    case DepthMethod::sweep2d:
      return "sweep2d";
    case DepthMethod::sampled:
      return "sampled";
  }
  return "?";
}

DepthCertificate tukey_depth_exact(const PointCloud& cloud, std::span<const double> u) {
  const Setup s = make_setup(cloud, u);
  switch (s.d) {
    case 1:
      return depth_1d(cloud, s);
    case 2:
      return depth_2d(cloud, s);
    case 3:
      return depth_3d(cloud, s);
    default:
      throw ValidationError("exact Tukey depth supports d <= 3 (got d = " + std::to_string(s.d) +
                            "); use the sampled method");
  }
}

DepthCertificate tukey_depth_sweep2d(const PointCloud& cloud, std::span<const double> u) {
  const Setup s = make_setup(cloud, u);
  if (s.d != 2) throw ValidationError("sweep2d requires d = 2");
  const double* up = s.u.data();
  // Upper half-plane [0, pi) first, then the lower half.
  auto half = [&](std::size_t i) {
    const int sy = exact::compare(s.rows[i][1], up[1]);
    const int sx = exact::compare(s.rows[i][0], up[0]);
    return (sy > 0 || (sy == 0 && sx > 0)) ? 0 : 1;
  };
  std::vector<std::size_t> order(s.w);
  std::vector<int> hv(s.n);
  for (std::size_t i : order) hv[i] = half(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (hv[a] != hv[b]) return hv[a] < hv[b];
    return exact::orient2(up, s.p(a), s.p(b)) > 0;
  });

  // Groups of identical direction, represented by their smallest index.
  std::vector<std::size_t> rep, count;
  for (std::size_t i : order) {
    if (!rep.empty() && hv[rep.back()] == hv[i] && exact::orient2(up, s.p(rep.back()), s.p(i)) == 0) {
      ++count.back();
      rep.back() = std::min(rep.back(), i);
    } else {
      rep.push_back(i);
      count.push_back(1);
    }
  }
  const std::size_t g = rep.size(), total = s.w.size();
  std::vector<std::size_t> prefix(2 * g + 1, 0);
  for (std::size_t t = 0; t < 2 * g; ++t) prefix[t + 1] = prefix[t] + count[t % g];

  PlanarResult r;
  std::vector<std::pair<std::size_t, PlanarCounts>> per_group;
  std::size_t e = 1;
  for (std::size_t t = 0; t < g; ++t) {
    if (e < t + 1) e = t + 1;
    while (e < t + g && exact::orient2(up, s.p(rep[t]), s.p(rep[e % g])) > 0) ++e;
    PlanarCounts k;
    k.same = count[t];
    k.left = prefix[e] - prefix[t + 1];
    if (e < t + g && exact::orient2(up, s.p(rep[t]), s.p(rep[e % g])) == 0) k.opp = count[e % g];
    k.right = total - k.same - k.left - k.opp;
    per_group.push_back({rep[t], k});
  }
  // Evaluate anchors in index order so ties resolve as in the combinatorial pass.
  std::sort(per_group.begin(), per_group.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  for (const auto& [anchor, k] : per_group) planar_update(r, anchor, k);
  return planar_certificate(cloud, s, r, DepthMethod::sweep2d);
}

DepthCertificate tukey_depth_sampled(const PointCloud& cloud, std::span<const double> u,
                                     std::size_t n_dirs, std::uint64_t seed) {
  if (n_dirs == 0) throw ValidationError("tukey_depth_sampled needs n_dirs >= 1");
  const Setup s = make_setup(cloud, u);
  const PointCloud dirs = sample_cloud(Distribution::gaussian, n_dirs, s.d, seed);
  DepthCertificate cert;
  cert.method = DepthMethod::sampled;
  std::size_t best_closed = kNone, best_open = kNone;
  for (std::size_t t = 0; t < n_dirs; ++t) {
    const Vector v = normalized(dirs.point(t));
    const HalfspaceCount hc = halfspace_count(cloud, s.u, v);
    if (hc.closed_count < best_closed) {
      best_closed = hc.closed_count;
      cert.v_td = v;
    }
    if (hc.open_count < best_open) {
      best_open = hc.open_count;
      cert.v_tdminus = v;
      cert.boundary_at_min = hc.boundary_indices;
    }
  }
  cert.td = frac(best_closed, s.n);
  cert.td_minus = frac(best_open, s.n);
  cert.directions_verified = true;
  return cert;
}

// Any direction with the same strict split is equally valid; pick the one
// whose hyperplane through u stays farthest from the other points (hard
// margin SVM without bias, dual coordinate ascent).
static Vector widen_margin(const PointCloud& cloud, std::size_t j, const Vector& v, std::size_t target) {
  const std::size_t n = cloud.size(), d = cloud.dim();
  const Vector u = cloud.point(j);
  std::vector<Vector> y;
  std::vector<double> sign, sq;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == j) continue;
    Vector w = sub(cloud.point(i), u);
    sign.push_back(dot(v, w) < 0.0 ? -1.0 : 1.0);
    sq.push_back(dot(w, w));
    y.push_back(std::move(w));
  }
  auto margin = [&](const Vector& dir) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < y.size(); ++i) lo = std::min(lo, sign[i] * dot(dir, y[i]));
    return lo;
  };
  std::vector<double> alpha(y.size(), 0.0);
  Vector w(d, 0.0);
  for (int sweep = 0; sweep < 500; ++sweep) {
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double g = sign[i] * dot(w, y[i]) - 1.0;
      const double next = std::max(0.0, alpha[i] - g / sq[i]);
      const double step = next - alpha[i];
      if (step == 0.0) continue;
      worst = std::max(worst, std::fabs(g));
      alpha[i] = next;
      w = axpy(w, step * sign[i], y[i]);
    }
    if (worst < 1e-10) break;
  }
  if (!(norm(w) > 0.0)) return v;
  const Vector cand = normalized(w);
  if (margin(cand) > margin(v) && verify_open(cloud, u, cand, target, std::vector<std::size_t>{j})) return cand;
  return v;
}

IsolatedDirection isolate_direction(const PointCloud& cloud, std::size_t j,
                                    const DepthCertificate& cert) {
  const std::size_t n = cloud.size(), d = cloud.dim();
  const Vector u = cloud.point(j);
  const std::size_t target = static_cast<std::size_t>(cert.td_minus.num);
  const std::vector<std::size_t> only_j{j};

  IsolatedDirection out;
  out.open_count = target;
  out.boundary = only_j;
  if (n == 1) {
    out.v = unit_axis(d, 0, -1.0);
    return out;
  }
  const Vector vstar = normalized(cert.v_tdminus);
  std::vector<std::size_t> others;
  for (std::size_t i : cert.boundary_at_min)
    if (i != j) others.push_back(i);
  if (others.empty()) {
    if (verify_open(cloud, u, vstar, target, only_j)) {
      out.v = widen_margin(cloud, j, vstar, target);
      return out;
    }
    throw InternalError("isolate_direction: minimizing direction does not reproduce the exact count");
  }
  if (others.size() >= d)
    throw ValidationError("isolate_direction: " + std::to_string(others.size() + 1) +
                          " points on one hyperplane; cloud is not in general position");

  // Tilt toward the other boundary points so they all move to the closed side.
  Vector v0(d, 0.0);
  for (std::size_t i : others) v0 = axpy(v0, 1.0, normalized(sub(cloud.point(i), u)));
  double along = 0.0;
  for (std::size_t k = 0; k < d; ++k) along += v0[k] * vstar[k];
  v0 = normalized(axpy(v0, -along, vstar));

  double slack = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == j || std::find(others.begin(), others.end(), i) != others.end()) continue;
    const Vector wi = sub(cloud.point(i), u);
    double proj = 0.0;
    for (std::size_t k = 0; k < d; ++k) proj += vstar[k] * wi[k];
    slack = std::min(slack, std::fabs(proj) / norm(wi));
  }
  double beta = 0.5 * slack;
  for (int iter = 0; iter < 200; ++iter, beta *= 0.5) {
    const Vector v = normalized(axpy(vstar, beta, v0));
    if (verify_open(cloud, u, v, target, only_j)) {
      out.v = widen_margin(cloud, j, v, target);
      return out;
    }
  }
  throw InternalError("isolate_direction: no tilt isolates point " + std::to_string(j + 1));
}

IsolatedDirection isolate_direction(const PointCloud& cloud, std::size_t j) {
  if (j >= cloud.size())
    throw ValidationError("isolate_direction: index " + std::to_string(j + 1) + " out of range 1.." +
                          std::to_string(cloud.size()));
  if (cloud.dim() > 3) throw ValidationError("isolate_direction supports d <= 3");
  const GeneralPositionResult gp = general_position_check(cloud);
  if (!gp.general) {
    std::string w;
    for (std::size_t i : gp.witness) w += " " + std::to_string(i + 1);
    throw ValidationError("isolate_direction requires general position; points" + w +
                          " lie on a common hyperplane");
  }
  return isolate_direction(cloud, j, tukey_depth_exact(cloud, cloud.point(j)));
}

nlohmann::json to_json(const Fraction& f) { return {{"num", f.num}, {"den", f.den}}; }

nlohmann::json to_json(const DepthCertificate& cert) {
  nlohmann::json j;
  j["td"] = to_json(cert.td);
  j["td_minus"] = to_json(cert.td_minus);
  j["v_td"] = cert.v_td;
  j["v_tdminus"] = cert.v_tdminus;
  std::vector<std::size_t> b(cert.boundary_at_min);
  for (auto& i : b) ++i;
  j["boundary_at_min"] = b;
  j["method"] = to_string(cert.method);
  j["directions_verified"] = cert.directions_verified;
  return j;
}

nlohmann::json to_json(const IsolatedDirection& dir) {
  nlohmann::json j;
  j["v"] = dir.v;
  j["open_count"] = dir.open_count;
  std::vector<std::size_t> b(dir.boundary);
  for (auto& i : b) ++i;
  j["boundary"] = b;
  return j;
}

}  // namespace otbp
