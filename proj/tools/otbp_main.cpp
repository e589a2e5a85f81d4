#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "otbp/assignment.hpp"
#include "otbp/costs.hpp"
#include "otbp/depth.hpp"
#include "otbp/errors.hpp"
#include "otbp/experiment.hpp"
#include "otbp/kernels/kernels.hpp"
#include "otbp/version.hpp"

namespace {

int code(otbp::ExitCode c) { return static_cast<int>(c); }

int cmd_run(const std::string& config_path) {
  const otbp::ExperimentConfig cfg = otbp::load_config(config_path);
  const otbp::RunResult res = otbp::run(cfg);
  std::cout << "summary: " << (cfg.output_dir / "summary.csv").string() << "\n"
            << "digest: " << res.digest << "\n"
            << "manifest: " << res.manifest_path.string() << "\n"
            << "failed cells: " << res.failures.size() << ", falsification events: " << res.falsifications
            << "\n";
  for (const auto& f : res.failures) std::cerr << "cell " << f.cell << ": " << f.error << "\n";
  return code(res.code);
}

int cmd_replay(const std::string& manifest, const std::string& out) {
  std::optional<std::filesystem::path> dir;
  if (!out.empty()) dir = out;
  const otbp::RunResult res = otbp::replay(manifest, dir);
  std::cout << "replay matches: " << res.digest << "\n";
  return code(res.code);
}

int cmd_depth(const std::string& cloud_path, std::size_t index, const std::string& method,
              std::size_t dirs, std::uint64_t seed, bool isolate) {
  const otbp::PointCloud cloud = otbp::load_cloud(cloud_path);
  if (index < 1 || index > cloud.size())
    throw otbp::ValidationError("point-index " + std::to_string(index) + " out of range 1.." +
                                std::to_string(cloud.size()));
  const std::size_t j = index - 1;
  const otbp::Vector u = cloud.point(j);
  otbp::DepthCertificate cert;
  if (method == "sampled" || cloud.dim() > 3) {
    if (method != "sampled")
      std::cerr << "note: exact depth needs d <= 3; using " << dirs << " sampled directions\n";
    cert = otbp::tukey_depth_sampled(cloud, u, dirs, seed);
  } else if (method == "sweep2d") {
    cert = otbp::tukey_depth_sweep2d(cloud, u);
  } else {
    cert = otbp::tukey_depth_exact(cloud, u);
  }
  nlohmann::json out = otbp::to_json(cert);
  out["j"] = index;
  if (isolate) out["isolated"] = otbp::to_json(otbp::isolate_direction(cloud, j));
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_solve(const std::string& ref_path, const std::string& tgt_path, const std::string& cost_text,
              bool brute, std::size_t audit) {
  const otbp::PointCloud ref = otbp::load_cloud(ref_path);
  const otbp::PointCloud tgt = otbp::load_cloud(tgt_path);
  const otbp::CostSpec spec = otbp::parse_cost(cost_text);
  const otbp::Assignment a =
      brute ? otbp::brute_force_assignment(ref, tgt, spec) : otbp::solve_assignment(ref, tgt, spec);
  nlohmann::json out = otbp::to_json(a);
  out["cost"] = otbp::to_json(spec);
  if (audit >= 2) {
    otbp::MonotonicityOptions mo;
    mo.max_subset = audit;
    nlohmann::json v = nlohmann::json::array();
    for (const auto& viol : otbp::check_c_monotonicity(ref, tgt, a, spec, mo)) v.push_back(otbp::to_json(viol));
    out["monotonicity_violations"] = v;
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete optimal transport maps, Tukey depth and breakdown certification"};
  app.set_version_flag("--version", OTBP_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  std::string simd;
  app.add_option("--simd", simd, "Kernel backend (scalar or avx2); default picks from the CPU")
      ->check(CLI::IsMember({"scalar", "avx2"}));

  std::string config, manifest, replay_out;
  auto* run = app.add_subcommand("run", "Run an experiment campaign from a JSON config");
  run->add_option("config", config, "Config file")->required();

  auto* rep = app.add_subcommand("replay", "Re-run a manifest and compare the summary digest");
  rep->add_option("manifest", manifest, "manifest.json written by run")->required();
  rep->add_option("--out", replay_out, "Output directory (default: replay/ next to the manifest)");

  std::string cloud, method = "exact";
  std::size_t index = 0, dirs = 10000;
  std::uint64_t seed = 0;
  bool isolate = false;
  auto* depth = app.add_subcommand("depth", "Tukey depth of one sample point");
  depth->add_option("cloud", cloud, "Point cloud (.csv or .json)")->required();
  depth->add_option("point-index", index, "1-based index of the query point")->required();
  depth->add_option("--method", method, "exact, sweep2d or sampled")
      ->check(CLI::IsMember({"exact", "sweep2d", "sampled"}));
  depth->add_option("--dirs", dirs, "Directions for the sampled method");
  depth->add_option("--seed", seed, "Seed for the sampled method");
  depth->add_flag("--isolate", isolate, "Also report the isolating direction (general position only)");

  std::string ref, tgt, cost_text;
  bool brute = false;
  std::size_t audit = 0;
  auto* solve = app.add_subcommand("solve", "Optimal assignment between two clouds");
  solve->add_option("ref", ref, "Reference cloud")->required();
  solve->add_option("tgt", tgt, "Target cloud")->required();
  solve->add_option("--cost", cost_text, "power:<p> or scaled_quadratic:<a>")->required();
  solve->add_flag("--brute-force", brute, "Exhaustive search (n <= 9)");
  solve->add_option("--audit", audit, "Check c-cyclical monotonicity on subsets up to this size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(otbp::ExitCode::validation);
  }

  try {
    if (!simd.empty())
      otbp::kernels::select_backend(simd == "avx2" ? otbp::kernels::Backend::avx2
                                                   : otbp::kernels::Backend::scalar);
    if (*run) return cmd_run(config);
    if (*rep) return cmd_replay(manifest, replay_out);
    if (*depth) return cmd_depth(cloud, index, method, dirs, seed, isolate);
    if (*solve) return cmd_solve(ref, tgt, cost_text, brute, audit);
  } catch (const otbp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return code(otbp::ExitCode::internal);
  }
  return code(otbp::ExitCode::internal);
}
