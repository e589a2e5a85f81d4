#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "otbp/kernels/kernels.hpp"

using namespace otbp::kernels;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Sizes around the vector width and its remainders.
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 63, 100, 257};

}  // namespace

TEST_CASE("scalar kernels compute their definitions") {
  const KernelTable& s = scalar_table();
  const std::vector<double> soa{0, 1, 2, 10, 20, 30};  // three points in the plane
  const double origin[] = {1, 10}, dir[] = {0.5, -1};
  std::vector<double> out(3);
  s.project(soa.data(), 3, 2, origin, dir, out.data());
  CHECK(out == std::vector<double>{-0.5, -10, -19.5});
  s.squared_distances(soa.data(), 3, 2, origin, out.data());
  CHECK(out == std::vector<double>{1, 100, 401});

  const double cost[] = {5, 1, 4};
  const double col[] = {0, 0, 1};
  const std::int64_t used[] = {0, 0, 0};
  std::vector<double> minv{INFINITY, 0.5, INFINITY};
  std::vector<std::int64_t> way{-1, -1, -1};
  const RelaxResult r = s.relax(cost, 1.0, col, used, minv.data(), way.data(), 7, 3);
  CHECK(minv == std::vector<double>{4, 0, 2});
  CHECK(way == std::vector<std::int64_t>{7, 7, 7});
  CHECK(r.delta == 0.0);
  CHECK(r.column == 1);

  const std::int64_t all[] = {1, 1, 1};
  CHECK(s.relax(cost, 1.0, col, all, minv.data(), way.data(), 0, 3).column == -1);

  std::vector<double> pot{1, 2, 3}, mv{4, 5, 6};
  const std::int64_t some[] = {1, 0, 1};
  s.shift(some, 0.5, pot.data(), mv.data(), 3);
  CHECK(pot == std::vector<double>{0.5, 2, 2.5});
  CHECK(mv == std::vector<double>{4, 4.5, 6});
}

TEST_CASE("relax breaks ties on the lowest column") {
  const KernelTable& s = scalar_table();
  const double cost[] = {3, 2, 2, 2};
  const double col[] = {0, 0, 0, 0};
  const std::int64_t used[] = {0, 1, 0, 0};
  std::vector<double> minv(4, INFINITY);
  std::vector<std::int64_t> way(4, -1);
  const RelaxResult r = s.relax(cost, 0.0, col, used, minv.data(), way.data(), 0, 4);
  CHECK(r.column == 2);
  CHECK(r.delta == 2.0);
  CHECK(minv[1] == INFINITY);
}

TEST_CASE("dispatch honours explicit selection") {
  const Backend before = active().backend;
  select_backend(Backend::scalar);
  CHECK(active().backend == Backend::scalar);
  CHECK(backend_name(Backend::scalar) == "scalar");
  CHECK(backend_name(Backend::avx2) == "avx2");
  CHECK(backend_supported(Backend::scalar));
  select_backend(before);
}

TEST_CASE("avx2 kernels are bit identical to the scalar ones") {
  if (!backend_supported(Backend::avx2)) {
    MESSAGE("avx2 not available on this machine; equivalence not exercised");
    return;
  }
  const KernelTable& s = scalar_table();
  const KernelTable& v = table(Backend::avx2);
  std::mt19937_64 rng(2024);
  for (std::size_t n : kSizes) {
    for (std::size_t d = 1; d <= 4; ++d) {
      const std::vector<double> soa = random_values(rng, n * d, 1e3);
      const std::vector<double> origin = random_values(rng, d, 10.0), dir = random_values(rng, d, 1.0);
      std::vector<double> a(n), b(n);
      s.project(soa.data(), n, d, origin.data(), dir.data(), a.data());
      v.project(soa.data(), n, d, origin.data(), dir.data(), b.data());
      CHECK(same_bits(a, b));
      s.squared_distances(soa.data(), n, d, origin.data(), a.data());
      v.squared_distances(soa.data(), n, d, origin.data(), b.data());
      CHECK(same_bits(a, b));
    }
    for (int trial = 0; trial < 20; ++trial) {
      const std::vector<double> cost = random_values(rng, n, 1e6), col = random_values(rng, n, 1e5);
      std::vector<std::int64_t> used(n);
      std::bernoulli_distribution coin(trial % 4 == 0 ? 0.95 : 0.3);
      for (auto& u : used) u = coin(rng) ? 1 : 0;
      std::vector<double> minv = random_values(rng, n, 1e6);
      if (trial % 3 == 0)
        for (std::size_t j = 0; j < n; j += 2) minv[j] = INFINITY;
      // Force exact ties among reduced costs every few trials.
      std::vector<double> c2 = cost;
      if (trial % 2 == 0)
        for (std::size_t j = 0; j < n; ++j) c2[j] = col[j] + 5.0;
      std::vector<double> minv_a = minv, minv_b = minv;
      std::vector<std::int64_t> way_a(n, -1), way_b(n, -1);
      const RelaxResult ra = s.relax(c2.data(), 0.25, col.data(), used.data(), minv_a.data(), way_a.data(), 3, n);
      const RelaxResult rb = v.relax(c2.data(), 0.25, col.data(), used.data(), minv_b.data(), way_b.data(), 3, n);
      CHECK(same_bits(minv_a, minv_b));
      CHECK(way_a == way_b);
      CHECK(ra.column == rb.column);
      CHECK(std::memcmp(&ra.delta, &rb.delta, sizeof(double)) == 0);

      std::vector<double> pa = col, pb = col;
      s.shift(used.data(), ra.delta, pa.data(), minv_a.data(), n);
      v.shift(used.data(), ra.delta, pb.data(), minv_b.data(), n);
      CHECK(same_bits(pa, pb));
      CHECK(same_bits(minv_a, minv_b));
    }
  }
}
