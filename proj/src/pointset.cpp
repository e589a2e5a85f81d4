#include "otbp/pointset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "otbp/errors.hpp"
#include "otbp/kernels/kernels.hpp"
#include "otbp/predicates.hpp"
#include "otbp/util.hpp"

namespace otbp {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open point cloud file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

class NormalSource {
 public:
  explicit NormalSource(std::mt19937_64& gen) : gen_(gen) {}
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01(gen_);  // (0, 1]
    const double u2 = uniform01(gen_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64& gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  long double r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / i;
  return static_cast<std::uint64_t>(r + 0.5L);
}

GeneralPositionResult exhaustive_general_position(const PointCloud& cloud) {
  const std::size_t n = cloud.size(), d = cloud.dim();
  const auto rows = cloud.rows();
  std::vector<std::size_t> idx(d + 1);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<const double*> pts(d + 1);
  while (true) {
    for (std::size_t t = 0; t <= d; ++t) pts[t] = rows[idx[t]].data();
    if (exact::simplex_orientation(pts, d) == 0) return {false, idx};
    // Next combination in lexicographic order.
    std::size_t t = d + 1;
    while (t > 0 && idx[t - 1] == n - (d + 1) + (t - 1)) --t;
    if (t == 0) break;
    ++idx[t - 1];
    for (std::size_t s = t; s <= d; ++s) idx[s] = idx[s - 1] + 1;
  }
  return {};
}

// For each point, sort the lines through it to every other point; equal
// neighbours in that order are collinear triples.
GeneralPositionResult planar_general_position(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  const auto rows = cloud.rows();
  std::vector<std::size_t> order;
  std::vector<int> flip(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* c = rows[i].data();
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const int sy = exact::compare(rows[j][1], c[1]);
      const int sx = exact::compare(rows[j][0], c[0]);
      flip[j] = (sy > 0 || (sy == 0 && sx > 0)) ? 1 : -1;
      order.push_back(j);
    }
    auto line_cmp = [&](std::size_t a, std::size_t b) {
      return exact::orient2(c, rows[a].data(), rows[b].data()) * flip[a] * flip[b] > 0;
    };
    std::sort(order.begin(), order.end(), line_cmp);
    for (std::size_t t = 1; t < order.size(); ++t) {
      if (exact::orient2(c, rows[order[t - 1]].data(), rows[order[t]].data()) == 0) {
        std::vector<std::size_t> w{i, order[t - 1], order[t]};
        std::sort(w.begin(), w.end());
        return {false, w};
      }
    }
  }
  return {};
}

}  // namespace

PointCloud::PointCloud(std::size_t dim, std::span<const double> row_major, std::string label)
    : dim_(dim), label_(std::move(label)) {
  if (dim == 0) throw ValidationError("point cloud dimension must be at least 1");
  if (row_major.empty() || row_major.size() % dim != 0)
    throw ValidationError("point cloud needs a positive multiple of " + std::to_string(dim) +
                          " coordinates, got " + std::to_string(row_major.size()));
  n_ = row_major.size() / dim;
  soa_.resize(row_major.size());
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double x = row_major[i * dim + k];
      if (!std::isfinite(x))
        throw ValidationError("non-finite coordinate at row " + std::to_string(i + 1) +
                              ", column " + std::to_string(k + 1));
      soa_[k * n_ + i] = x;
    }
  }

  std::vector<std::size_t> order(n_);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    for (std::size_t k = 0; k < dim_; ++k) {
      if (coord(a, k) != coord(b, k)) return coord(a, k) < coord(b, k);
    }
    return a < b;
  };
  auto same = [&](std::size_t a, std::size_t b) {
    for (std::size_t k = 0; k < dim_; ++k)
      if (coord(a, k) != coord(b, k)) return false;
    return true;
  };
  std::sort(order.begin(), order.end(), less);
  std::string dupes;
  for (std::size_t t = 1; t < n_;) {
    if (!same(order[t - 1], order[t])) {
      ++t;
      continue;
    }
    std::vector<std::size_t> group{order[t - 1]};
    while (t < n_ && same(order[t - 1], order[t])) group.push_back(order[t++]);
    std::sort(group.begin(), group.end());
    if (!dupes.empty()) dupes += "; ";
    dupes += "rows";
    for (std::size_t g : group) dupes += " " + std::to_string(g + 1);
  }
  if (!dupes.empty()) throw ValidationError("duplicate points: " + dupes);
}

PointCloud PointCloud::from_rows(const std::vector<Vector>& rows, std::string label) {
  if (rows.empty()) throw ValidationError("point cloud must contain at least one point");
  const std::size_t dim = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim)
      throw ValidationError("dimension mismatch at row " + std::to_string(i + 1) + ": expected " +
                            std::to_string(dim) + " fields, got " +
                            std::to_string(rows[i].size()));
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  return PointCloud(dim, flat, std::move(label));
}

Vector PointCloud::point(std::size_t i) const {
  Vector p(dim_);
  for (std::size_t k = 0; k < dim_; ++k) p[k] = coord(i, k);
  return p;
}

std::vector<Vector> PointCloud::rows() const {
  std::vector<Vector> out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = point(i);
  return out;
}

std::vector<double> PointCloud::row_major() const {
  std::vector<double> out(n_ * dim_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = 0; k < dim_; ++k) out[i * dim_ + k] = coord(i, k);
  return out;
}

double PointCloud::diameter() const {
  const auto& kern = kernels::active();
  std::vector<double> sq(n_);
  double best = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const Vector p = point(i);
    kern.squared_distances(soa_.data(), n_, dim_, p.data(), sq.data());
    for (std::size_t j = i + 1; j < n_; ++j) best = std::max(best, sq[j]);
  }
  return std::sqrt(best);
}

CloudFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".json") return CloudFormat::json;
  return CloudFormat::csv;
}

Distribution parse_distribution(const std::string& name) {
  if (name == "uniform_ball") return Distribution::uniform_ball;
  if (name == "gaussian") return Distribution::gaussian;
  if (name == "uniform_cube") return Distribution::uniform_cube;
  throw ValidationError("unknown distribution '" + name +
                        "' (expected uniform_ball, gaussian or uniform_cube)");
}

std::string to_string(Distribution dist) {
  switch (dist) {
    case Distribution::uniform_ball:
      return "uniform_ball";
    case Distribution::gaussian:
      return "gaussian";
    case Distribution::uniform_cube:
      return "uniform_cube";
  }
  return "?";
}

PointCloud parse_cloud_csv(const std::string& text, const std::string& label) {
  std::vector<Vector> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = trim(std::string_view(text).substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    Vector row;
    std::size_t col = 0, pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      const std::string_view field =
          trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
      ++col;
      double value = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw ValidationError("parse error at row " + std::to_string(line_no) + ", column " +
                              std::to_string(col) + ": '" + std::string(field) + "'");
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError("dimension mismatch at row " + std::to_string(line_no) +
                            ": expected " + std::to_string(rows.front().size()) +
                            " fields, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
    if (end == text.size()) break;
  }
  if (rows.empty()) throw ValidationError("point cloud file is empty: " + label);
  return PointCloud::from_rows(rows, label);
}

PointCloud parse_cloud_json(const std::string& text, const std::string& label) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("JSON parse error in " + label + ": " + e.what());
  }
  if (!doc.is_array() || doc.empty())
    throw ValidationError("point cloud JSON must be a non-empty array of arrays: " + label);
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& r = doc[i];
    if (!r.is_array())
      throw ValidationError("parse error at row " + std::to_string(i + 1) + ": not an array");
    Vector row;
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (!r[k].is_number())
        throw ValidationError("parse error at row " + std::to_string(i + 1) + ", column " +
                              std::to_string(k + 1) + ": not a number");
      row.push_back(r[k].get<double>());
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError("dimension mismatch at row " + std::to_string(i + 1) +
                            ": expected " + std::to_string(rows.front().size()) +
                            " fields, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return PointCloud::from_rows(rows, label);
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  const std::string text = read_file(path);
  return format == CloudFormat::json ? parse_cloud_json(text, path.string())
                                     : parse_cloud_csv(text, path.string());
}

PointCloud load_cloud(const std::filesystem::path& path) {
  return load_cloud(path, format_from_path(path));
}

std::string format_cloud_csv(const PointCloud& cloud) {
  std::string out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t k = 0; k < cloud.dim(); ++k) {
      if (k) out += ',';
      out += format_double(cloud.coord(i, k));
    }
    out += '\n';
  }
  return out;
}

std::string format_cloud_json(const PointCloud& cloud) {
  std::string out = "[";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out += i ? ",[" : "[";
    for (std::size_t k = 0; k < cloud.dim(); ++k) {
      if (k) out += ',';
      out += format_double(cloud.coord(i, k));
    }
    out += ']';
  }
  out += "]\n";
  return out;
}

void save_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write point cloud file: " + path.string());
  out << (format == CloudFormat::json ? format_cloud_json(cloud) : format_cloud_csv(cloud));
}

PointCloud sample_cloud(Distribution dist, std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample size n must be at least 1");
  if (d == 0) throw ValidationError("dimension d must be at least 1");
  std::mt19937_64 gen(seed);
  NormalSource normal(gen);
  std::vector<double> flat(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double* p = flat.data() + i * d;
    switch (dist) {
      case Distribution::uniform_cube:
        for (std::size_t k = 0; k < d; ++k) p[k] = 2.0 * uniform01(gen) - 1.0;
        break;
      case Distribution::gaussian:
        for (std::size_t k = 0; k < d; ++k) p[k] = normal.next();
        break;
      case Distribution::uniform_ball: {
        double len = 0.0;
        do {
          len = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            p[k] = normal.next();
            len += p[k] * p[k];
          }
        } while (len == 0.0);
        len = std::sqrt(len);
        const double radius = std::pow(1.0 - uniform01(gen), 1.0 / static_cast<double>(d));
        for (std::size_t k = 0; k < d; ++k) p[k] = p[k] / len * radius;
        break;
      }
    }
  }
  std::string label = to_string(dist) + "(n=" + std::to_string(n) + ",d=" + std::to_string(d) +
                      ",seed=" + std::to_string(seed) + ")";
  return PointCloud(d, flat, std::move(label));
}

HalfspaceCount halfspace_count(const PointCloud& cloud, std::span<const double> u,
                               std::span<const double> v, double tol) {
  const std::size_t n = cloud.size(), d = cloud.dim();
  if (u.size() != d || v.size() != d)
    throw ValidationError("halfspace_count: point and direction must have dimension " +
                          std::to_string(d));
  if (std::fabs(norm(v) - 1.0) > 1e-12)
    throw ValidationError("halfspace_count: direction is not a unit vector");

  const auto& kern = kernels::active();
  std::vector<double> proj(n), sq(n);
  kern.project(cloud.soa(), n, d, u.data(), v.data(), proj.data());
  kern.squared_distances(cloud.soa(), n, d, u.data(), sq.data());

  HalfspaceCount out;
  out.direction.assign(v.begin(), v.end());
  out.side.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = 1.0 + std::sqrt(sq[i]);
    if (std::fabs(proj[i]) <= tol * scale) {
      out.side[i] = 0;
      out.boundary_indices.push_back(i);
      ++out.closed_count;
    } else if (proj[i] < 0.0) {
      out.side[i] = -1;
      ++out.closed_count;
      ++out.open_count;
    } else {
      out.side[i] = 1;
    }
  }
  return out;
}

GeneralPositionResult general_position_check(const PointCloud& cloud) {
  const std::size_t n = cloud.size(), d = cloud.dim();
  if (n <= d || d == 1) return {};
  if (d == 2 && binomial(n, 3) > 200000) return planar_general_position(cloud);
  if (binomial(n, d + 1) > 50000000)
    throw ValidationError("general_position_check: " + std::to_string(n) + " points in dimension " +
                          std::to_string(d) + " exceed the exhaustive check budget");
  return exhaustive_general_position(cloud);
}

double norm(std::span<const double> x) {
  double acc = 0.0;
  for (double c : x) acc += c * c;
  return std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

Vector normalized(std::span<const double> x) {
  const double len = norm(x);
  if (!(len > 0.0) || !std::isfinite(len)) throw InternalError("cannot normalize a zero vector");
  Vector out(x.begin(), x.end());
  for (double& c : out) c /= len;
  return out;
}

}  // namespace otbp
