#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "otbp/fraction.hpp"
#include "otbp/pointset.hpp"

namespace otbp {

enum class DepthMethod { combinatorial_exact, sweep2d, sampled };
std::string to_string(DepthMethod method);

// td counts closed halfspaces {<v, x - u> <= 0}, td_minus open ones.
struct DepthCertificate {
  Fraction td;
  Fraction td_minus;
  Vector v_td;
  Vector v_tdminus;
  // Sample indices on the hyperplane through u with normal v_tdminus, as
  // decided by exact predicates.
  std::vector<std::size_t> boundary_at_min;
  DepthMethod method = DepthMethod::combinatorial_exact;
  // The double-precision directions reproduce the exact counts under
  // halfspace_count with the default tolerance.
  bool directions_verified = false;
};

// Exact depth for d <= 3 by enumerating the vertex directions of the
// arrangement of great spheres {v : <v, u_i - u> = 0}. Throws ValidationError
// for d > 3.
DepthCertificate tukey_depth_exact(const PointCloud& cloud, std::span<const double> u);

// d = 2 only: angular sort around u, O(n log n) exact comparisons.
DepthCertificate tukey_depth_sweep2d(const PointCloud& cloud, std::span<const double> u);

// Minimum over n_dirs seeded uniform directions. An upper bound on the exact
// values.
DepthCertificate tukey_depth_sampled(const PointCloud& cloud, std::span<const double> u,
                                     std::size_t n_dirs, std::uint64_t seed);

struct IsolatedDirection {
  Vector v;
  std::size_t open_count = 0;
  std::vector<std::size_t> boundary;  // always {j}
};

// For a cloud in general position and d <= 3: a direction whose open
// halfspace at u_j holds n * TD^-(u_j) points and whose hyperplane holds u_j
// alone. `j` is 0-based.
IsolatedDirection isolate_direction(const PointCloud& cloud, std::size_t j);
// Same, for a caller that has already established general position and holds
// the exact certificate of u_j.
IsolatedDirection isolate_direction(const PointCloud& cloud, std::size_t j,
                                    const DepthCertificate& cert);

nlohmann::json to_json(const DepthCertificate& cert);
nlohmann::json to_json(const IsolatedDirection& dir);
nlohmann::json to_json(const Fraction& f);

}  // namespace otbp
