#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace otbp {

using Vector = std::vector<double>;

// An ordered list of distinct points in R^d. Coordinates are stored
// column-major (one contiguous array per axis) so the SIMD kernels can stream
// them.
class PointCloud {
 public:
  // `row_major` holds n * dim coordinates, point by point. Throws
  // ValidationError on empty input, non-finite coordinates or duplicates.
  PointCloud(std::size_t dim, std::span<const double> row_major, std::string label);

  static PointCloud from_rows(const std::vector<Vector>& rows, std::string label);

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  const std::string& label() const { return label_; }

  double coord(std::size_t i, std::size_t k) const { return soa_[k * n_ + i]; }
  Vector point(std::size_t i) const;
  std::vector<Vector> rows() const;
  std::vector<double> row_major() const;

  // Column-major storage: soa()[k * size() + i] is coordinate k of point i.
  const double* soa() const { return soa_.data(); }

  // Largest pairwise Euclidean distance; 0 for a single point.
  double diameter() const;

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> soa_;
  std::string label_;
};

enum class CloudFormat { csv, json };
enum class Distribution { uniform_ball, gaussian, uniform_cube };

CloudFormat format_from_path(const std::filesystem::path& path);
Distribution parse_distribution(const std::string& name);
std::string to_string(Distribution dist);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);
PointCloud parse_cloud_csv(const std::string& text, const std::string& label);
PointCloud parse_cloud_json(const std::string& text, const std::string& label);

// Shortest round-trip decimal formatting; parsing the output reproduces the
// cloud bit for bit.
std::string format_cloud_csv(const PointCloud& cloud);
std::string format_cloud_json(const PointCloud& cloud);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

// uniform_cube samples [-1, 1]^d; uniform_ball the closed unit ball; gaussian
// the standard normal. Bit-identical for identical arguments.
PointCloud sample_cloud(Distribution dist, std::size_t n, std::size_t d, std::uint64_t seed);

struct HalfspaceCount {
  Vector direction;
  std::size_t closed_count = 0;  // #{i : <v, u_i - u> <= 0}
  std::size_t open_count = 0;    // #{i : <v, u_i - u> < 0}
  std::vector<std::size_t> boundary_indices;
  std::vector<int> side;         // -1, 0, +1 per point
};

inline constexpr double kBoundaryTolerance = 1e-9;

// A point is on the boundary iff |<v, u_i - u>| <= tol * (1 + |u_i - u|).
// `v` must be a unit vector to within 1e-12.
HalfspaceCount halfspace_count(const PointCloud& cloud, std::span<const double> u,
                               std::span<const double> v, double tol = kBoundaryTolerance);

struct GeneralPositionResult {
  bool general = true;
  std::vector<std::size_t> witness;  // d + 1 indices on a common hyperplane
};

// No d + 1 points on a common affine hyperplane, decided exactly.
GeneralPositionResult general_position_check(const PointCloud& cloud);

double norm(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
Vector normalized(std::span<const double> x);

}  // namespace otbp
