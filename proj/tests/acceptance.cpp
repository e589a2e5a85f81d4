// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 when all
// pass, 2 when a breakdown bracket is violated, 1 otherwise.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "otbp/assignment.hpp"
#include "otbp/breakdown.hpp"
#include "otbp/depth.hpp"
#include "otbp/experiment.hpp"
#include "support.hpp"

using namespace otbp;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  bool falsified = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const CostSpec kFourCosts[] = {CostSpec::power(1.5), CostSpec::power(2.0), CostSpec::power(3.0),
                               CostSpec::scaled_quadratic(1.0)};

// ---- criteria 1 and 2 ----

struct SolvedInstance {
  PointCloud ref, tgt;
  CostSpec spec;
  Assignment a;
};

std::vector<SolvedInstance> g_solved;

Outcome oracle_equivalence() {
  Outcome o;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng() % 6, d = 1 + rng() % 3;
    const double p = std::array<double, 3>{1.5, 2.0, 3.0}[i % 3];
    const PointCloud ref = sample_cloud(Distribution::gaussian, n, d, 1000 + i);
    const PointCloud tgt = sample_cloud(i % 2 ? Distribution::uniform_ball : Distribution::uniform_cube, n, d, 2000 + i);
    const CostSpec s = CostSpec::power(p);
    const Assignment fast = solve_assignment(ref, tgt, s);
    const Assignment brute = brute_force_assignment(ref, tgt, s);
    const double rel = std::fabs(fast.total_cost - brute.total_cost) / std::max(std::fabs(brute.total_cost), 1e-300);
    worst = std::max(worst, rel);
    if (rel > 1e-9) o.pass = false;
    g_solved.push_back({ref, tgt, s, fast});
  }
  o.detail = "200 instances, worst relative gap " + fmt("%.2e", worst);
  return o;
}

// Every subset of size 2..4, every rearrangement of its targets, evaluated
// directly from the cost function.
Outcome cyclical_monotonicity() {
  Outcome o;
  std::size_t subsets = 0, violations = 0, library = 0;
  for (const SolvedInstance& inst : g_solved) {
    const std::size_t n = inst.ref.size();
    const auto& sigma = inst.a.sigma;
    for (std::size_t k = 2; k <= std::min<std::size_t>(4, n); ++k) {
      std::vector<bool> pick(n, false);
      std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
      do {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
          if (pick[i]) idx.push_back(i);
        ++subsets;
        double base = 0.0;
        for (std::size_t i : idx) base += cost(inst.spec, inst.ref.point(i), inst.tgt.point(sigma[i]));
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        while (std::next_permutation(perm.begin(), perm.end())) {
          double alt = 0.0;
          for (std::size_t t = 0; t < k; ++t)
            alt += cost(inst.spec, inst.ref.point(idx[t]), inst.tgt.point(sigma[idx[perm[t]]]));
          if (alt < base - 1e-9 * (1.0 + base)) {
            ++violations;
            break;
          }
        }
      } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    MonotonicityOptions mo;
    mo.max_subset = 4;
    library += check_c_monotonicity(inst.ref, inst.tgt, inst.a, inst.spec, mo).size();
  }
  o.pass = violations == 0 && library == 0;
  o.detail = std::to_string(subsets) + " subsets, " + std::to_string(violations) + " direct and " +
             std::to_string(library) + " audited violations";
  return o;
}

// ---- criteria 3, 4 and 5 ----

struct CampaignTally {
  std::size_t instances = 0, cells = 0;
  std::size_t equality_failures = 0;
  std::size_t bracket_violations = 0;
  std::size_t errors = 0;
  std::size_t cost_mismatches = 0;
  std::size_t gp_reseeds = 0;
  std::vector<std::string> notes;
};

CampaignTally g_campaign;

void run_campaign() {
  CampaignTally& t = g_campaign;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 5 + i % 16, d = 1 + i % 3;
    const Distribution dist = i % 2 ? Distribution::gaussian : Distribution::uniform_ball;
    std::uint64_t seed = 5000 + 100 * i;
    PointCloud ref = sample_cloud(dist, n, d, seed);
    while (!general_position_check(ref).general) {
      ++t.gp_reseeds;
      ref = sample_cloud(dist, n, d, ++seed);
    }
    const PointCloud tgt = sample_cloud(Distribution::uniform_cube, n, d, 9000 + i);
    ++t.instances;
    std::vector<std::vector<std::optional<Fraction>>> bp(n);
    for (const CostSpec& s : kFourCosts) {
      try {
        BreakdownCertifier cert(ref, tgt, s);
        for (std::size_t j = 0; j < n; ++j) {
          ++t.cells;
          const std::string cell = "instance " + std::to_string(i) + " j=" + std::to_string(j + 1) + " " + s.label();
          try {
            const BreakdownReport r = certify_breakdown(cert, j);
            const std::int64_t below = r.td_minus.num;
            if (!(r.found && r.bp_certified == Fraction{below + 1, static_cast<std::int64_t>(n)})) {
              ++t.equality_failures;
              t.notes.push_back(cell + ": bp " + r.bp_certified.str() + " status " + r.status);
            }
            // The bracket, read off the attacks actually performed.
            std::optional<std::size_t> first;
            for (const AttackResult& a : r.attacks) {
              if (a.m <= static_cast<std::size_t>(below) && a.diverged) {
                ++t.bracket_violations;
                t.notes.push_back(cell + ": diverged with m = " + std::to_string(a.m));
              }
              if (a.diverged && (!first || a.m < *first)) first = a.m;
            }
            if (!first || *first > static_cast<std::size_t>(r.td.num)) {
              ++t.bracket_violations;
              t.notes.push_back(cell + ": no divergence by m = n TD");
            }
            if (r.falsification) ++t.bracket_violations;
            // The closed-depth direction as a second attack at m = n TD^-.
            if (below > 0 && cert.attack(j, static_cast<std::size_t>(below), AttackMode::td_direction).diverged) {
              ++t.bracket_violations;
              t.notes.push_back(cell + ": td_direction attack diverged at m = n TD^-");
            }
            bp[j].push_back(r.bp_certified);
          } catch (const Error& e) {
            ++t.errors;
            bp[j].push_back(std::nullopt);
            t.notes.push_back(cell + ": " + e.what());
          }
        }
      } catch (const Error& e) {
        t.errors += n;
        for (auto& b : bp) b.push_back(std::nullopt);
        t.notes.push_back("instance " + std::to_string(i) + " " + s.label() + ": " + e.what());
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto& row = bp[j];
      const bool same = std::all_of(row.begin(), row.end(), [&](const std::optional<Fraction>& f) {
        return f && row[0] && f->num == row[0]->num && f->den == row[0]->den;
      });
      if (!same) ++t.cost_mismatches;
    }
  }
}

Outcome equality() {
  Outcome o;
  o.pass = g_campaign.equality_failures == 0 && g_campaign.errors == 0;
  o.detail = std::to_string(g_campaign.instances) + " instances, " + std::to_string(g_campaign.cells) + " cells, " +
             std::to_string(g_campaign.equality_failures) + " mismatches, " + std::to_string(g_campaign.errors) +
             " errors";
  return o;
}

Outcome bracket() {
  Outcome o;
  o.pass = g_campaign.bracket_violations == 0 && g_campaign.errors == 0;
  o.falsified = g_campaign.bracket_violations > 0;
  o.detail = std::to_string(g_campaign.bracket_violations) + " bracket violations";
  return o;
}

Outcome cost_invariance() {
  Outcome o;
  o.pass = g_campaign.cost_mismatches == 0 && g_campaign.errors == 0;
  o.detail = std::to_string(g_campaign.cost_mismatches) + " points whose bp differs across the four costs";
  return o;
}

// ---- criterion 6 ----

Outcome conjugate_identity() {
  Outcome o;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> logr(-3.0, 6.0);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (const CostSpec& s : kFourCosts) {
    for (int t = 0; t < 1000; ++t) {
      const std::size_t d = 1 + t % 3;
      Vector y(d);
      for (double& x : y) x = g(rng);
      const double scale = std::pow(10.0, logr(rng)) / norm(y);
      for (double& x : y) x *= scale;
      const Vector back = grad_h(s, conj_grad(s, y));
      double err = 0.0;
      for (std::size_t k = 0; k < d; ++k) err += (back[k] - y[k]) * (back[k] - y[k]);
      const double ratio = std::sqrt(err) / (1.0 + norm(y));
      worst = std::max(worst, ratio);
      if (ratio > 1e-8) o.pass = false;
    }
  }
  o.detail = "4000 points, worst scaled error " + fmt("%.2e", worst);
  return o;
}

// ---- criterion 7 ----

// Sign of <v, x - u>, exact when the floating estimate is inconclusive.
int side(const Vector& v, const Vector& x, const Vector& u) {
  double acc = 0.0, mag = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    acc += v[k] * (x[k] - u[k]);
    mag += std::fabs(v[k]) * (std::fabs(x[k]) + std::fabs(u[k]));
  }
  if (std::fabs(acc) > 1e-14 * mag) return acc > 0 ? 1 : -1;
  return testing_support::exact_side(v, x, u);
}

std::pair<std::size_t, std::size_t> counts(const PointCloud& c, const Vector& u, const Vector& v) {
  std::size_t closed = 0, open = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int s = side(v, c.point(i), u);
    closed += s <= 0;
    open += s < 0;
  }
  return {closed, open};
}

Outcome depth_exactness() {
  Outcome o;
  std::size_t sweep_queries = 0, sweep_bad = 0, brute_queries = 0, brute_bad = 0, attain_bad = 0;
  std::mt19937_64 rng(707);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 3 + rng() % 48;
    PointCloud c = sample_cloud(Distribution::gaussian, n, 2, 7000 + i);
    if (i % 3 == 0) {
      // Small integer grids produce collinear triples and shared lines.
      std::uniform_int_distribution<int> g(-3, 3);
      std::vector<Vector> rows;
      while (rows.size() < std::min<std::size_t>(n, 40)) {
        Vector p{double(g(rng)), double(g(rng))};
        if (std::find(rows.begin(), rows.end(), p) == rows.end()) rows.push_back(p);
      }
      c = testing_support::cloud(rows);
    }
    std::vector<Vector> queries = c.rows();
    queries.push_back({0.125, -0.25});
    for (const Vector& u : queries) {
      ++sweep_queries;
      const DepthCertificate a = tukey_depth_exact(c, u), b = tukey_depth_sweep2d(c, u);
      if (!(a.td == b.td && a.td_minus == b.td_minus)) ++sweep_bad;
    }
  }
  std::normal_distribution<double> g;
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = 2 + i % 7, d = 1 + i % 3;
    const PointCloud c = sample_cloud(i % 2 ? Distribution::uniform_ball : Distribution::gaussian, n, d, 7500 + i);
    std::vector<Vector> dirs;
    for (int t = 0; t < 100000; ++t) {
      Vector v(d);
      for (double& x : v) x = g(rng);
      dirs.push_back(v);
    }
    std::vector<Vector> pts = c.rows();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        Vector diff(d);
        for (std::size_t k = 0; k < d; ++k) diff[k] = pts[a][k] - pts[b][k];
        if (d == 1) dirs.push_back(diff);
        if (d == 2) dirs.push_back({-diff[1], diff[0]});
        if (d == 3) {
          for (std::size_t e = 0; e < n; ++e) {
            if (e == a || e == b) continue;
            Vector w(3);
            for (std::size_t k = 0; k < 3; ++k) w[k] = pts[e][k] - pts[b][k];
            dirs.push_back({diff[1] * w[2] - diff[2] * w[1], diff[2] * w[0] - diff[0] * w[2],
                            diff[0] * w[1] - diff[1] * w[0]});
          }
        }
      }
    }
    const std::size_t base = dirs.size();
    for (std::size_t t = 0; t < base; ++t) {
      Vector neg = dirs[t];
      for (double& x : neg) x = -x;
      dirs.push_back(neg);
    }
    std::vector<Vector> queries = pts;
    queries.push_back(Vector(d, 0.0625));
    for (const Vector& u : queries) {
      ++brute_queries;
      const DepthCertificate ex = tukey_depth_exact(c, u);
      std::size_t best_closed = n, best_open = n;
      for (const Vector& v : dirs) {
        if (norm(v) == 0.0) continue;
        const auto [cl, op] = counts(c, u, v);
        best_closed = std::min(best_closed, cl);
        best_open = std::min(best_open, op);
      }
      if (best_closed < static_cast<std::size_t>(ex.td.num) || best_open < static_cast<std::size_t>(ex.td_minus.num))
        ++brute_bad;
      // The closed witness attains td exactly. The open minimum sits on a
      // hyperplane through boundary_at_min, which a double direction only
      // reaches up to rounding: count the other points exactly and require
      // the boundary points to lie within rounding of the hyperplane.
      std::size_t open = 0;
      bool near = true;
      for (std::size_t i = 0; i < n; ++i) {
        const Vector x = c.point(i);
        if (std::find(ex.boundary_at_min.begin(), ex.boundary_at_min.end(), i) != ex.boundary_at_min.end()) {
          double acc = 0.0, mag = 0.0;
          for (std::size_t k = 0; k < d; ++k) {
            acc += ex.v_tdminus[k] * (x[k] - u[k]);
            mag += std::fabs(ex.v_tdminus[k]) * (std::fabs(x[k]) + std::fabs(u[k]));
          }
          near = near && std::fabs(acc) <= 1e-9 * (1.0 + mag);
        } else {
          open += side(ex.v_tdminus, x, u) < 0;
        }
      }
      if (counts(c, u, ex.v_td).first != static_cast<std::size_t>(ex.td.num) ||
          open != static_cast<std::size_t>(ex.td_minus.num) || !near)
        ++attain_bad;
    }
  }
  o.pass = sweep_bad == 0 && brute_bad == 0 && attain_bad == 0;
  o.detail = std::to_string(sweep_queries) + " sweep queries (" + std::to_string(sweep_bad) + " disagree), " +
             std::to_string(brute_queries) + " brute-force queries (" + std::to_string(brute_bad) +
             " undercut, " + std::to_string(attain_bad) + " unattained)";
  return o;
}

// ---- criterion 8 ----

// Halfspace probability P(x >= t) for the uniform unit disk, by polar draws.
double disk_monte_carlo(double t, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double r = std::sqrt(unit(rng)), theta = 2.0 * M_PI * unit(rng);
    hits += r * std::cos(theta) >= t;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

Outcome continuous_limit() {
  Outcome o;
  const double t = 0.5;
  const double closed = (std::acos(t) - t * std::sqrt(1.0 - t * t)) / M_PI;
  const double mc = disk_monte_carlo(t, 1000000, 808);
  if (std::fabs(mc - closed) > 0.002) {
    o.pass = false;
    o.detail = "closed form " + fmt("%.6f", closed) + " disagrees with Monte Carlo " + fmt("%.6f", mc);
    return o;
  }
  if (std::fabs(disk_depth(t) - closed) > 1e-15) {
    o.pass = false;
    o.detail = "library disk depth differs from the closed form";
    return o;
  }
  const ConvergenceRow row = convergence_point(2000, t, 7, CostSpec::power(2));
  const double err = std::fabs(row.bp.value() - closed);
  o.pass = row.status == "certified" && err <= 0.05;
  o.detail = "D(0.5) = " + fmt("%.6f", closed) + " (Monte Carlo " + fmt("%.6f", mc) + "), bp = " + row.bp.str() +
             ", |bp - D| = " + fmt("%.4f", err) + ", status " + row.status;
  return o;
}

// ---- criterion 9 ----

Outcome determinism(const fs::path& work) {
  Outcome o;
  std::vector<nlohmann::json> configs = {
      {{"mode", "certify"},
       {"reference", {{"sample", {{"dist", "gaussian"}, {"n", 12}, {"d", 2}, {"seed", 91}}}}},
       {"target", {{"sample", {{"dist", "uniform_ball"}, {"n", 12}, {"d", 2}, {"seed", 92}}}}},
       {"costs", nlohmann::json::array({{{"family", "power"}, {"p", 1.5}}, {{"family", "scaled_quadratic"}, {"a", 1}}})},
       {"threads", 2},
       {"output_dir", "certify"}},
      {{"mode", "depth_only"},
       {"reference", {{"sample", {{"dist", "uniform_cube"}, {"n", 30}, {"d", 3}, {"seed", 93}}}}},
       {"depth", {{"method", "sampled"}, {"n_dirs", 2000}, {"seed", 94}}},
       {"output_dir", "depth"}},
      {{"mode", "convergence"},
       {"costs", nlohmann::json::array({{{"family", "power"}, {"p", 3}}})},
       {"convergence", {{"n_grid", {50, 100}}, {"t", 0.4}, {"seed", 95}, {"mc_draws", 100000}}},
       {"output_dir", "convergence"}}};
  std::size_t identical = 0;
  for (const auto& j : configs) {
    const std::string name = j["output_dir"];
    try {
      const RunResult first = run(parse_config(j, work));
      replay(first.manifest_path, work / (name + "_replay"));
      if (slurp(work / name / "summary.csv") == slurp(work / (name + "_replay") / "summary.csv"))
        ++identical;
      else
        o.detail += name + " differs; ";
    } catch (const Error& e) {
      o.detail += name + ": " + e.what() + "; ";
    }
  }
  o.pass = identical == configs.size();
  o.detail += std::to_string(identical) + "/" + std::to_string(configs.size()) + " campaigns replay byte-identically";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work_dir = (fs::temp_directory_path() / "otbp_acceptance").string();
  app.add_option("--work-dir", work_dir, "Scratch directory for campaign output");
  CLI11_PARSE(app, argc, argv);
  const fs::path work = fs::absolute(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);

  bool all = true, falsified = false;
  auto report = [&](int id, double limit, const std::function<Outcome()>& f) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double secs = seconds_since(t0);
    if (limit > 0 && secs > limit) {
      o.pass = false;
      o.detail += ", over the " + fmt("%.0f", limit) + " s budget";
    }
    all = all && o.pass;
    falsified = falsified || o.falsified;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " ["
              << fmt("%.1f", secs) << " s]" << std::endl;
  };

  report(1, 10, oracle_equivalence);
  report(2, 30, cyclical_monotonicity);
  const auto t0 = Clock::now();
  run_campaign();
  const double campaign_secs = seconds_since(t0);
  std::cout << "campaign: " << g_campaign.cells << " cells in " << fmt("%.1f", campaign_secs) << " s, "
            << g_campaign.gp_reseeds << " reseeds for general position" << std::endl;
  for (std::size_t k = 0; k < std::min<std::size_t>(g_campaign.notes.size(), 20); ++k)
    std::cout << "  " << g_campaign.notes[k] << "\n";
  report(3, 0, [&] {
    Outcome o = equality();
    if (campaign_secs > 300) {
      o.pass = false;
      o.detail += ", over the 300 s budget";
    }
    return o;
  });
  report(4, 0, bracket);
  report(5, 0, cost_invariance);
  report(6, 0, conjugate_identity);
  report(7, 120, depth_exactness);
  report(8, 600, continuous_limit);
  report(9, 0, [&] { return determinism(work); });

  if (falsified) return 2;
  return all ? 0 : 1;
}
