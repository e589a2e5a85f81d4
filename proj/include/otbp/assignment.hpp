#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "otbp/costs.hpp"
#include "otbp/pointset.hpp"

namespace otbp {

// sigma[i] is the target index matched to reference point i (0-based here;
// 1-based in every serialized form).
struct Assignment {
  std::vector<std::size_t> sigma;
  double total_cost = 0.0;
  std::uint64_t cost_matrix_digest = 0;
  bool degenerate = false;
};

// Conditioned n x n matrix, row-major: entry (i, j) equals
// c(u_i, x_j) - h(u_r - x_j) - rowmin_i, where r is the reference point
// nearest x_j. The offsets do not change the set of optimal permutations.
struct CostMatrix {
  std::size_t n = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

CostMatrix conditioned_cost_matrix(const PointCloud& ref, const PointCloud& tgt,
                                   const CostSpec& spec);

struct SolveOptions {
  // Target columns sharing a group id are treated as one atom when deciding
  // whether a near-tie changes the map. Empty: every column is its own group.
  // When some group pools several columns, the rows matched to single
  // columns are re-solved on their own matrix, so huge pooled entries do not
  // wash out their cost gaps.
  std::vector<std::size_t> column_groups;
  double tie_tolerance = 1e-9;
};

// Shortest augmenting path with dual potentials; exact up to floating-point
// rounding in the conditioned matrix.
Assignment solve_assignment(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                            const SolveOptions& options = {});

// Same, on an already conditioned matrix. Returns sigma; fills the dual
// potentials if requested.
std::vector<std::size_t> solve_matrix(const CostMatrix& c, std::vector<double>* row_potential = nullptr,
                                      std::vector<double>* col_potential = nullptr);

// True if an alternative optimum within tolerance moves some reference point
// to a different column group. With pooled_only, only moves into or out of a
// group with more than one column count.
bool has_near_tie(const CostMatrix& c, std::span<const std::size_t> sigma,
                  std::span<const double> row_potential, std::span<const double> col_potential,
                  std::span<const std::size_t> column_groups, double tolerance,
                  bool pooled_only = false);

inline constexpr std::size_t kBruteForceCap = 9;

// Exhaustive search; ties resolve to the lexicographically smallest sigma.
// degenerate is set when another permutation is within
// tie_tolerance * (1 + |best|).
Assignment brute_force_assignment(const PointCloud& ref, const PointCloud& tgt,
                                  const CostSpec& spec, double tie_tolerance = 1e-9);

double assignment_cost(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                       std::span<const std::size_t> sigma);

struct MonotonicityViolation {
  std::vector<std::size_t> subset;       // reference indices S
  std::vector<std::size_t> permutation;  // subset[t] receives the target of subset[permutation[t]]
  double slack = 0.0;                    // permuted cost minus matched cost; negative is a violation
};

struct MonotonicityOptions {
  std::size_t max_subset = 4;
  double tol = 1e-9;  // absolute slack tolerance is tol * (1 + |total_cost|)
  // Subsets are enumerated exhaustively when max_subset <= 5 and their number
  // stays under this budget; otherwise `samples` seeded random subsets are drawn.
  std::uint64_t exhaustive_budget = 2000000;
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
};

std::vector<MonotonicityViolation> check_c_monotonicity(const PointCloud& ref, const PointCloud& tgt,
                                                        const Assignment& assignment,
                                                        const CostSpec& spec,
                                                        const MonotonicityOptions& options = {});

nlohmann::json to_json(const Assignment& assignment);
nlohmann::json to_json(const MonotonicityViolation& violation);

}  // namespace otbp
