#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "otbp/assignment.hpp"
#include "otbp/depth.hpp"
#include "otbp/experiment.hpp"
#include "support.hpp"

using namespace otbp;

namespace {

std::vector<std::size_t> random_permutation(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

PointCloud permuted(const PointCloud& c, const std::vector<std::size_t>& perm) {
  std::vector<Vector> rows(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) rows[i] = c.point(perm[i]);
  return testing_support::cloud(rows);
}

// Integer grid points keep shifts and power-of-two scalings exact.
PointCloud integer_cloud(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::uniform_int_distribution<int> c(-40, 40);
  std::vector<Vector> rows;
  while (rows.size() < n) {
    Vector p(d);
    for (double& x : p) x = c(rng);
    if (std::find(rows.begin(), rows.end(), p) == rows.end()) rows.push_back(p);
  }
  return testing_support::cloud(rows);
}

PointCloud mapped(const PointCloud& c, double scale, const Vector& shift) {
  std::vector<Vector> rows = c.rows();
  for (auto& r : rows)
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = scale * r[k] + shift[k];
  return testing_support::cloud(rows);
}

}  // namespace

TEST_CASE("opposite halfspaces complement each other") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const PointCloud c = sample_cloud(Distribution::gaussian, 30, d, trial);
    const Vector u = c.point(trial % 30);
    Vector v(d);
    for (double& x : v) x = g(rng);
    v = normalized(v);
    Vector w = v;
    for (double& x : w) x = -x;
    const HalfspaceCount a = halfspace_count(c, u, v), b = halfspace_count(c, u, w);
    CHECK(a.closed_count + b.open_count == c.size());
    CHECK(a.open_count + b.closed_count == c.size());
    CHECK(a.closed_count - a.open_count == a.boundary_indices.size());
  }
}

TEST_CASE("depth is invariant under relabeling, shifts and scalings") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + trial % 3, n = 6 + trial % 9;
    const PointCloud c = integer_cloud(rng, n, d);
    const std::vector<std::size_t> perm = random_permutation(rng, n);
    const PointCloud p = permuted(c, perm);
    Vector shift(d);
    for (double& x : shift) x = static_cast<double>(static_cast<int>(rng() % 100) - 50);
    const PointCloud m = mapped(c, 0.25, shift);
    for (std::size_t i = 0; i < n; ++i) {
      const DepthCertificate base = tukey_depth_exact(c, c.point(perm[i]));
      const DepthCertificate rel = tukey_depth_exact(p, p.point(i));
      const DepthCertificate aff = tukey_depth_exact(m, m.point(perm[i]));
      CHECK(base.td == rel.td);
      CHECK(base.td_minus == rel.td_minus);
      CHECK(base.td == aff.td);
      CHECK(base.td_minus == aff.td_minus);
      CHECK(base.td_minus <= base.td);
    }
    CHECK(general_position_check(c).general == general_position_check(p).general);
  }
}

TEST_CASE("closed and open depth differ by one point in general position") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t d = 1 + seed % 3;
    const PointCloud c = sample_cloud(Distribution::uniform_ball, 12, d, seed);
    REQUIRE(general_position_check(c).general);
    for (std::size_t j = 0; j < c.size(); ++j) {
      const DepthCertificate cert = tukey_depth_exact(c, c.point(j));
      CHECK(cert.td.num == cert.td_minus.num + 1);
    }
  }
}

TEST_CASE("sampled depth never undercuts the exact depth") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t d = 2 + seed % 2;
    const PointCloud c = sample_cloud(Distribution::gaussian, 25, d, 300 + seed);
    for (std::size_t j = 0; j < c.size(); j += 3) {
      const DepthCertificate ex = tukey_depth_exact(c, c.point(j));
      const DepthCertificate sm = tukey_depth_sampled(c, c.point(j), 500, seed);
      CHECK(ex.td <= sm.td);
    }
  }
}

TEST_CASE("optimal assignments follow relabeled targets") {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 5 + seed % 20, d = 1 + seed % 3;
    const PointCloud ref = sample_cloud(Distribution::gaussian, n, d, 600 + seed);
    const PointCloud tgt = sample_cloud(Distribution::gaussian, n, d, 700 + seed);
    const std::vector<std::size_t> perm = random_permutation(rng, n);
    const PointCloud tp = permuted(tgt, perm);
    for (double p : {1.5, 2.0, 3.0}) {
      const Assignment a = solve_assignment(ref, tgt, CostSpec::power(p));
      const Assignment b = solve_assignment(ref, tp, CostSpec::power(p));
      REQUIRE(!a.degenerate);
      for (std::size_t i = 0; i < n; ++i) CHECK(perm[b.sigma[i]] == a.sigma[i]);
      CHECK(b.total_cost == doctest::Approx(a.total_cost).epsilon(1e-12));
    }
  }
}

TEST_CASE("a common translation does not change the optimal map") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 10, d = 2;
    const PointCloud ref = sample_cloud(Distribution::uniform_cube, n, d, 800 + seed);
    const PointCloud tgt = sample_cloud(Distribution::uniform_cube, n, d, 900 + seed);
    const Vector shift{3.0, -7.0};
    for (const CostSpec& s : {CostSpec::power(1.5), CostSpec::power(3.0), CostSpec::scaled_quadratic(2.0)}) {
      const Assignment a = solve_assignment(ref, tgt, s);
      const Assignment b = solve_assignment(mapped(ref, 1.0, shift), mapped(tgt, 1.0, shift), s);
      CHECK(a.sigma == b.sigma);
    }
  }
}

TEST_CASE("optimal maps are c-cyclically monotone") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const PointCloud ref = sample_cloud(Distribution::uniform_ball, 9, 1 + seed % 3, 40 + seed);
    const PointCloud tgt = sample_cloud(Distribution::gaussian, 9, 1 + seed % 3, 50 + seed);
    for (const CostSpec& s : {CostSpec::power(1.5), CostSpec::power(2.0), CostSpec::power(3.0)}) {
      const Assignment a = solve_assignment(ref, tgt, s);
      MonotonicityOptions mo;
      mo.max_subset = 4;
      CHECK(check_c_monotonicity(ref, tgt, a, s, mo).empty());
    }
  }
}

TEST_CASE("campaign output does not depend on the thread count") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "otbp_test_properties";
  fs::remove_all(dir);
  const nlohmann::json j = {
      {"mode", "certify"},
      {"reference", {{"sample", {{"dist", "uniform_cube"}, {"n", 8}, {"d", 3}, {"seed", 5}}}}},
      {"target", {{"sample", {{"dist", "gaussian"}, {"n", 8}, {"d", 3}, {"seed", 6}}}}},
      {"costs", nlohmann::json::array({{{"family", "power"}, {"p", 1.5}}, {{"family", "scaled_quadratic"}, {"a", 1}}})},
      {"output_dir", (dir / "one").string()}};
  ExperimentConfig one = parse_config(j, dir);
  ExperimentConfig three = one;
  three.threads = 3;
  three.output_dir = dir / "three";
  const RunResult a = run(one), b = run(three);
  CHECK(a.summary_csv == b.summary_csv);
  CHECK(a.digest == b.digest);
}
