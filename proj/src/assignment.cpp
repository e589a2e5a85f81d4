#include "otbp/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "otbp/errors.hpp"
#include "otbp/kernels/kernels.hpp"
#include "otbp/util.hpp"

namespace otbp {
namespace {

void require_same_shape(const PointCloud& ref, const PointCloud& tgt) {
  if (ref.size() != tgt.size())
    throw ValidationError("reference and target sizes differ (" + std::to_string(ref.size()) +
                          " vs " + std::to_string(tgt.size()) + ")");
  if (ref.dim() != tgt.dim())
    throw ValidationError("reference and target dimensions differ (" + std::to_string(ref.dim()) +
                          " vs " + std::to_string(tgt.dim()) + ")");
}

std::uint64_t matrix_digest(const CostMatrix& c) {
  return fnv1a64(c.data.data(), c.data.size() * sizeof(double));
}

// Strongly connected components of a directed graph (iterative Tarjan).
std::vector<std::size_t> strong_components(const std::vector<std::vector<std::uint32_t>>& adj) {
  const std::size_t n = adj.size();
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, kUnset), low(n, 0), comp(n, kUnset);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // (node, next edge)
  std::size_t counter = 0, ncomp = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, 0});
    while (!call.empty()) {
      auto& [node, edge] = call.back();
      if (edge == 0 && index[node] == kUnset) {
        index[node] = low[node] = counter++;
        stack.push_back(node);
        on_stack[node] = true;
      }
      if (edge < adj[node].size()) {
        const std::size_t next = adj[node][edge++];
        if (index[next] == kUnset) {
          call.push_back({next, 0});
        } else if (on_stack[next]) {
          low[node] = std::min(low[node], index[next]);
        }
        continue;
      }
      const std::size_t done = node;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
      if (low[done] == index[done]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = ncomp;
        } while (w != done);
        ++ncomp;
      }
    }
  }
  return comp;
}

}  // namespace

CostMatrix conditioned_cost_matrix(const PointCloud& ref, const PointCloud& tgt,
                                   const CostSpec& spec) {
  require_same_shape(ref, tgt);
  require_admissible(spec);
  const std::size_t n = ref.size(), d = ref.dim();
  const auto& kern = kernels::active();
  CostMatrix c;
  c.n = n;
  c.data.assign(n * n, 0.0);
  std::vector<double> s(n);
  Vector x(d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < d; ++k) x[k] = tgt.coord(j, k);
    kern.squared_distances(ref.soa(), n, d, x.data(), s.data());
    const std::size_t r = static_cast<std::size_t>(std::min_element(s.begin(), s.end()) - s.begin());
    for (std::size_t i = 0; i < n; ++i) {
      // s_i - s_r = <u_i - u_r, (u_i - x) + (u_r - x)>, free of cancellation.
      double delta = 0.0;
      if (i != r) {
        for (std::size_t k = 0; k < d; ++k) {
          const double ui = ref.coord(i, k), ur = ref.coord(r, k);
          delta += (ui - ur) * ((ui - x[k]) + (ur - x[k]));
        }
      }
      const double value = h_difference(spec, s[i], s[r], delta);
      if (!std::isfinite(value))
        throw ValidationError("cost entry (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) +
                              ") is not finite; contamination scale exceeds the overflow guard");
      c.data[i * n + j] = value;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double* row = c.data.data() + i * n;
    const double lo = *std::min_element(row, row + n);
    for (std::size_t j = 0; j < n; ++j) row[j] -= lo;
  }
  return c;
}

std::vector<std::size_t> solve_matrix(const CostMatrix& c, std::vector<double>* row_potential,
                                      std::vector<double>* col_potential) {
  const std::size_t n = c.n;
  const auto& kern = kernels::active();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Column n is the virtual start column of each augmentation.
  std::vector<double> u(n, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::int64_t> p(n + 1, -1), way(n + 1, 0), used(n + 1);
  std::vector<std::size_t> used_cols;
  used_cols.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    p[n] = static_cast<std::int64_t>(i);
    std::int64_t j0 = static_cast<std::int64_t>(n);
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    used_cols.clear();
    do {
      used[j0] = 1;
      if (j0 < static_cast<std::int64_t>(n)) used_cols.push_back(static_cast<std::size_t>(j0));
      const std::size_t i0 = static_cast<std::size_t>(p[j0]);
      const kernels::RelaxResult step =
          kern.relax(c.data.data() + i0 * n, u[i0], v.data(), used.data(), minv.data(), way.data(), j0, n);
      if (step.column < 0 || !std::isfinite(step.delta))
        throw InternalError("assignment solver found no augmenting path");
      u[i] += step.delta;
      for (std::size_t col : used_cols) u[static_cast<std::size_t>(p[col])] += step.delta;
      kern.shift(used.data(), step.delta, v.data(), minv.data(), n);
      j0 = step.column;
    } while (p[j0] != -1);
    do {
      const std::int64_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != static_cast<std::int64_t>(n));
  }

  std::vector<std::size_t> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[static_cast<std::size_t>(p[j])] = j;
  if (row_potential) *row_potential = u;
  if (col_potential) *col_potential = std::vector<double>(v.begin(), v.begin() + n);
  return sigma;
}

bool has_near_tie(const CostMatrix& c, std::span<const std::size_t> sigma,
                  std::span<const double> row_potential, std::span<const double> col_potential,
                  std::span<const std::size_t> column_groups, double tolerance,
                  bool pooled_only) {
  const std::size_t n = c.n;
  auto group = [&](std::size_t col) { return column_groups.empty() ? col : column_groups[col]; };
  std::vector<std::size_t> group_size(n + 1, 0);
  for (std::size_t col = 0; col < n; ++col) ++group_size[std::min(group(col), n)];
  auto pooled = [&](std::size_t col) { return group_size[std::min(group(col), n)] > 1; };
  constexpr double kRound = 8.0 * std::numeric_limits<double>::epsilon();
  // Edge i -> i2: row i could take the column currently matched to row i2 at
  // (near) zero reduced cost. Alternative optima are cycles of such edges.
  std::vector<std::vector<std::uint32_t>> adj(n);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> moving;
  for (std::size_t i = 0; i < n; ++i) {
    const double own = c(i, sigma[i]);
    for (std::size_t i2 = 0; i2 < n; ++i2) {
      if (i2 == i) continue;
      const std::size_t col = sigma[i2];
      const double entry = c(i, col);
      const double reduced = std::max(0.0, (entry - row_potential[i]) - col_potential[col]);
      const double noise =
          kRound * (std::fabs(entry) + std::fabs(row_potential[i]) + std::fabs(col_potential[col]));
      if (reduced <= tolerance * (own + entry) + noise) {
        adj[i].push_back(static_cast<std::uint32_t>(i2));
        if (group(col) != group(sigma[i]) && (!pooled_only || pooled(col) || pooled(sigma[i])))
          moving.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i2)});
      }
    }
  }
  if (moving.empty()) return false;
  const auto comp = strong_components(adj);
  for (const auto& [a, b] : moving)
    if (comp[a] == comp[b]) return true;
  return false;
}

double assignment_cost(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                       std::span<const std::size_t> sigma) {
  double total = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) total += cost(spec, ref.point(i), tgt.point(sigma[i]));
  return total;
}

Assignment solve_assignment(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                            const SolveOptions& options) {
  const CostMatrix c = conditioned_cost_matrix(ref, tgt, spec);
  if (!options.column_groups.empty() && options.column_groups.size() != c.n)
    throw ValidationError("column_groups must have one entry per target point");
  std::vector<double> u, v;
  Assignment out;
  out.sigma = solve_matrix(c, &u, &v);
  out.cost_matrix_digest = matrix_digest(c);

  const std::size_t n = c.n;
  std::vector<std::size_t> group_size(n + 1, 0);
  for (std::size_t g : options.column_groups) ++group_size[std::min(g, n)];
  const bool any_pooled =
      std::any_of(group_size.begin(), group_size.end(), [](std::size_t s) { return s > 1; });
  if (!any_pooled) {
    out.degenerate = has_near_tie(c, out.sigma, u, v, options.column_groups, options.tie_tolerance);
  } else {
    out.degenerate =
        has_near_tie(c, out.sigma, u, v, options.column_groups, options.tie_tolerance, true);
    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
      if (group_size[std::min(options.column_groups[out.sigma[i]], n)] > 1) continue;
      rows.push_back(i);
      cols.push_back(out.sigma[i]);
    }
    if (rows.size() > 1) {
      std::vector<Vector> rp, cp;
      for (std::size_t i : rows) rp.push_back(ref.point(i));
      for (std::size_t col : cols) cp.push_back(tgt.point(col));
      const PointCloud sub_ref = PointCloud::from_rows(rp, ref.label());
      const PointCloud sub_tgt = PointCloud::from_rows(cp, tgt.label());
      const CostMatrix sc = conditioned_cost_matrix(sub_ref, sub_tgt, spec);
      std::vector<double> su, sv;
      const std::vector<std::size_t> ss = solve_matrix(sc, &su, &sv);
      for (std::size_t a = 0; a < rows.size(); ++a) out.sigma[rows[a]] = cols[ss[a]];
      if (has_near_tie(sc, ss, su, sv, {}, options.tie_tolerance)) out.degenerate = true;
    }
  }
  out.total_cost = assignment_cost(ref, tgt, spec, out.sigma);
  return out;
}

Assignment brute_force_assignment(const PointCloud& ref, const PointCloud& tgt,
                                  const CostSpec& spec, double tie_tolerance) {
  require_same_shape(ref, tgt);
  require_admissible(spec);
  const std::size_t n = ref.size();
  if (n > kBruteForceCap)
    throw ValidationError("brute_force_assignment supports n <= " + std::to_string(kBruteForceCap) +
                          ", got " + std::to_string(n));
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i * n + j] = cost(spec, ref.point(i), tgt.point(j));

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  double second = best;
  std::vector<std::size_t> best_perm = perm;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += m[i * n + perm[i]];
    if (total < best) {
      second = best;
      best = total;
      best_perm = perm;
    } else if (total < second) {
      second = total;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  Assignment out;
  out.sigma = best_perm;
  out.total_cost = best;
  out.cost_matrix_digest = fnv1a64(m.data(), m.size() * sizeof(double));
  out.degenerate = std::isfinite(second) && second - best <= tie_tolerance * (1.0 + std::fabs(best));
  return out;
}

std::vector<MonotonicityViolation> check_c_monotonicity(const PointCloud& ref, const PointCloud& tgt,
                                                        const Assignment& assignment,
                                                        const CostSpec& spec,
                                                        const MonotonicityOptions& options) {
  require_same_shape(ref, tgt);
  const std::size_t n = ref.size();
  if (assignment.sigma.size() != n) throw ValidationError("assignment size does not match the clouds");
  std::vector<MonotonicityViolation> out;
  const std::size_t kmax = std::min(options.max_subset, n);
  if (kmax < 2) return out;
  const double tol_abs = options.tol * (1.0 + std::fabs(assignment.total_cost));
  const auto& sigma = assignment.sigma;

  std::vector<Vector> u = ref.rows(), x = tgt.rows();
  auto c = [&](std::size_t i, std::size_t j) { return cost(spec, u[i], x[j]); };

  std::vector<std::size_t> perm;
  auto test_subset = [&](const std::vector<std::size_t>& subset, std::size_t max_perms) {
    const std::size_t k = subset.size();
    double matched = 0.0;
    for (std::size_t t = 0; t < k; ++t) matched += c(subset[t], sigma[subset[t]]);
    perm.resize(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t tried = 0;
    while (std::next_permutation(perm.begin(), perm.end()) && tried++ < max_perms) {
      double permuted = 0.0;
      for (std::size_t t = 0; t < k; ++t) permuted += c(subset[t], sigma[subset[perm[t]]]);
      const double slack = permuted - matched;
      if (slack < -tol_abs) out.push_back({subset, perm, slack});
    }
  };

  long double subsets = 0;
  for (std::size_t k = 2; k <= kmax; ++k) {
    long double b = 1;
    for (std::size_t t = 1; t <= k; ++t) b = b * static_cast<long double>(n - k + t) / t;
    subsets += b;
  }
  const bool exhaustive = options.max_subset <= 5 && subsets <= options.exhaustive_budget;

  if (exhaustive) {
    for (std::size_t k = 2; k <= kmax; ++k) {
      std::vector<std::size_t> idx(k);
      std::iota(idx.begin(), idx.end(), 0);
      while (true) {
        test_subset(idx, std::numeric_limits<std::size_t>::max());
        std::size_t t = k;
        while (t > 0 && idx[t - 1] == n - k + (t - 1)) --t;
        if (t == 0) break;
        ++idx[t - 1];
        for (std::size_t s = t; s < k; ++s) idx[s] = idx[s - 1] + 1;
      }
    }
    return out;
  }

  std::mt19937_64 gen(options.seed);
  std::vector<std::size_t> pool(n);
  for (std::size_t draw = 0; draw < options.samples; ++draw) {
    const std::size_t k = 2 + static_cast<std::size_t>(gen() % (kmax - 1));
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t t = 0; t < k; ++t) std::swap(pool[t], pool[t + gen() % (n - t)]);
    std::vector<std::size_t> subset(pool.begin(), pool.begin() + k);
    std::sort(subset.begin(), subset.end());
    test_subset(subset, k <= 6 ? std::numeric_limits<std::size_t>::max() : 720);
  }
  return out;
}

nlohmann::json to_json(const Assignment& assignment) {
  nlohmann::json j;
  std::vector<std::size_t> one_based(assignment.sigma);
  for (auto& s : one_based) ++s;
  j["sigma"] = one_based;
  j["total_cost"] = assignment.total_cost;
  j["degenerate"] = assignment.degenerate;
  j["cost_matrix_digest"] = hex_digest(assignment.cost_matrix_digest);
  return j;
}

nlohmann::json to_json(const MonotonicityViolation& violation) {
  nlohmann::json j;
  std::vector<std::size_t> subset(violation.subset);
  for (auto& s : subset) ++s;
  j["subset"] = subset;
  j["permutation"] = violation.permutation;
  j["slack"] = violation.slack;
  return j;
}

}  // namespace otbp
