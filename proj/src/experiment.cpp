#include "otbp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "otbp/kernels/kernels.hpp"
#include "otbp/util.hpp"
#include "otbp/version.hpp"

namespace otbp {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) fail(path.empty() ? key : path + "." + key, "missing field");
  return obj[key];
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::uint64_t as_unsigned(const json& j, const std::string& path) {
  // Values built in code arrive as signed integers.
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    fail(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      fail(join(path, key), "unknown field");
  }
}

CloudSource parse_source(const json& j, const std::string& path, const fs::path& base) {
  if (!j.is_object()) fail(path, "expected an object with 'file' or 'sample'");
  reject_unknown(j, {"file", "sample"}, path);
  if (j.contains("file") == j.contains("sample")) fail(path, "give exactly one of 'file' or 'sample'");
  CloudSource src;
  if (j.contains("file")) {
    fs::path p = as_string(j["file"], join(path, "file"));
    if (p.is_relative()) p = base / p;
    src.file = fs::absolute(p).lexically_normal();
    return src;
  }
  const std::string sp = join(path, "sample");
  const json& s = j["sample"];
  if (!s.is_object()) fail(sp, "expected an object");
  reject_unknown(s, {"dist", "n", "d", "seed"}, sp);
  try {
    src.dist = parse_distribution(as_string(require(s, "dist", sp), join(sp, "dist")));
  } catch (const ValidationError& e) {
    if (std::string(e.what()).rfind(sp, 0) == 0) throw;
    fail(join(sp, "dist"), e.what());
  }
  src.n = as_unsigned(require(s, "n", sp), join(sp, "n"));
  src.d = as_unsigned(require(s, "d", sp), join(sp, "d"));
  src.seed = as_unsigned(require(s, "seed", sp), join(sp, "seed"));
  if (src.n < 1) fail(join(sp, "n"), "must be at least 1");
  if (src.d < 1) fail(join(sp, "d"), "must be at least 1");
  return src;
}

json source_json(const CloudSource& src) {
  if (src.file) return {{"file", src.file->string()}};
  return {{"sample", {{"dist", to_string(src.dist)}, {"n", src.n}, {"d", src.d}, {"seed", src.seed}}}};
}

RunMode parse_mode(const std::string& s) {
  if (s == "certify") return RunMode::certify;
  if (s == "attack") return RunMode::attack;
  if (s == "depth_only") return RunMode::depth_only;
  if (s == "convergence") return RunMode::convergence;
  fail("mode", "expected certify, attack, depth_only or convergence, got '" + s + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("output_dir: cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("output_dir: failed writing " + path.string());
}

// Runs body(i) for i in [0, count) on up to `threads` workers. body must not
// throw.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

struct CellOutcome {
  bool ok = false;
  std::string error;
  ExitCode code = ExitCode::internal;
};

template <class F>
CellOutcome guarded(F&& f) {
  CellOutcome o;
  try {
    f();
    o.ok = true;
  } catch (const Error& e) {
    o.error = e.what();
    o.code = e.code();
  } catch (const std::exception& e) {
    o.error = e.what();
    o.code = ExitCode::internal;
  }
  return o;
}

std::string status_for(const CellOutcome& o) {
  return o.code == ExitCode::validation ? "refused" : "error";
}

std::string file_label(const CostSpec& c) {
  std::string s = c.label();
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

std::vector<std::size_t> resolve_targets(const ExperimentConfig& cfg, std::size_t n) {
  std::vector<std::size_t> out;
  if (!cfg.targets) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  for (std::size_t t = 0; t < cfg.targets->size(); ++t) {
    if ((*cfg.targets)[t] >= n)
      fail("targets[" + std::to_string(t) + "]",
           "index " + std::to_string((*cfg.targets)[t] + 1) + " out of range 1.." + std::to_string(n));
    out.push_back((*cfg.targets)[t]);
  }
  return out;
}

json seeds_json(const ExperimentConfig& cfg) {
  json s = json::object();
  auto src = [&](const char* key, const std::optional<CloudSource>& c) {
    if (c && !c->file) s[key] = c->seed;
  };
  src("reference", cfg.reference);
  src("target", cfg.target);
  if (cfg.mode == RunMode::depth_only && cfg.depth_method == "sampled") s["depth"] = cfg.depth_seed;
  if (cfg.mode == RunMode::convergence) s["convergence"] = cfg.convergence_seed;
  return s;
}

struct Campaign {
  std::string csv;
  json reports = json::object();
  std::vector<CellFailure> failures;
  std::size_t falsifications = 0;
};

void certify_or_attack(const ExperimentConfig& cfg, Campaign& out) {
  const PointCloud ref = cfg.reference->load();
  const PointCloud tgt = cfg.target->load();
  if (ref.size() != tgt.size()) fail("target", "size differs from reference");
  if (ref.dim() != tgt.dim()) fail("target", "dimension differs from reference");
  const std::vector<std::size_t> js = resolve_targets(cfg, ref.size());
  const std::size_t nc = cfg.costs.size(), nj = js.size();

  std::vector<std::unique_ptr<BreakdownCertifier>> certifiers(nc);
  std::vector<CellOutcome> setup(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    setup[c] = guarded([&] {
      certifiers[c] = std::make_unique<BreakdownCertifier>(ref, tgt, cfg.costs[c], cfg.schedule);
      for (std::size_t j : js) {
        certifiers[c]->depth(j);
        if (certifiers[c]->general_position()) {
          try {
            certifiers[c]->isolated(j);
          } catch (const Error&) {
            // Re-raised inside the cell that needs it.
          }
        }
      }
    });
  }

  std::vector<CellOutcome> outcome(nc * nj);
  std::vector<BreakdownReport> reports(nc * nj);
  std::vector<AttackResult> attacks(nc * nj);
  parallel_for(nc * nj, cfg.threads, [&](std::size_t cell) {
    const std::size_t c = cell / nj, j = js[cell % nj];
    if (!setup[c].ok) {
      outcome[cell] = setup[c];
      return;
    }
    outcome[cell] = guarded([&] {
      if (cfg.mode == RunMode::certify)
        reports[cell] = certify_breakdown(*certifiers[c], j);
      else
        attacks[cell] = certifiers[c]->attack(j, cfg.attack_m, cfg.attack_mode);
    });
  });

  std::ostringstream csv;
  csv << summary_header(cfg.mode) << '\n';
  for (std::size_t t = 0; t < nj; ++t) {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t cell = c * nj + t;
      const std::size_t j = js[t];
      const std::string label = cfg.costs[c].label();
      const CellOutcome& o = outcome[cell];
      if (!o.ok) {
        out.failures.push_back({"j=" + std::to_string(j + 1) + " cost=" + label, o.error, o.code});
        if (cfg.mode == RunMode::certify)
          csv << j + 1 << ',' << label << ",,,,,,,," << status_for(o) << '\n';
        else
          csv << j + 1 << ',' << label << ',' << cfg.attack_m << ',' << to_string(cfg.attack_mode)
              << ",,,," << status_for(o) << '\n';
        continue;
      }
      if (cfg.mode == RunMode::certify) {
        const BreakdownReport& r = reports[cell];
        if (r.falsification) ++out.falsifications;
        csv << j + 1 << ',' << label << ',';
        if (r.found)
          csv << r.bp_certified.num << ',' << r.bp_certified.den;
        else
          csv << ',';
        csv << ',' << r.lower_bound.num << ',' << r.lower_bound.den << ',' << r.upper_bound.num << ','
            << r.upper_bound.den << ',' << (r.equality_case ? "true" : "false") << ',' << r.status << '\n';
      } else {
        const AttackResult& a = attacks[cell];
        csv << j + 1 << ',' << label << ',' << a.m << ',' << to_string(a.mode) << ',' << a.rank << ','
            << (a.diverged ? "true" : "false") << ',' << a.trace.size() << ",ok\n";
      }
    }
  }
  out.csv = csv.str();

  for (std::size_t c = 0; c < nc; ++c) {
    json list = json::array();
    for (std::size_t t = 0; t < nj; ++t) {
      const std::size_t cell = c * nj + t;
      if (!outcome[cell].ok) {
        list.push_back({{"j", js[t] + 1}, {"error", outcome[cell].error}});
        continue;
      }
      if (cfg.mode == RunMode::certify) {
        list.push_back(to_json(reports[cell]));
      } else {
        json a = to_json(attacks[cell]);
        a["j"] = js[t] + 1;
        list.push_back(a);
      }
    }
    json doc;
    doc["cost"] = to_json(cfg.costs[c]);
    doc[cfg.mode == RunMode::certify ? "reports" : "attacks"] = list;
    if (setup[c].ok) {
      doc["general_position"] = certifiers[c]->general_position();
      doc["baseline"] = to_json(certifiers[c]->baseline());
    }
    out.reports[file_label(cfg.costs[c])] = doc;
  }
}

void depth_only(const ExperimentConfig& cfg, Campaign& out) {
  const PointCloud ref = cfg.reference->load();
  const std::vector<std::size_t> js = resolve_targets(cfg, ref.size());
  std::vector<DepthCertificate> certs(js.size());
  std::vector<CellOutcome> outcome(js.size());
  parallel_for(js.size(), cfg.threads, [&](std::size_t t) {
    outcome[t] = guarded([&] {
      const Vector u = ref.point(js[t]);
      if (cfg.depth_method == "sweep2d")
        certs[t] = tukey_depth_sweep2d(ref, u);
      else if (cfg.depth_method == "sampled")
        certs[t] = tukey_depth_sampled(ref, u, cfg.depth_dirs, cfg.depth_seed);
      else
        certs[t] = tukey_depth_exact(ref, u);
    });
  });
  std::ostringstream csv;
  csv << summary_header(cfg.mode) << '\n';
  json list = json::array();
  for (std::size_t t = 0; t < js.size(); ++t) {
    const std::size_t j = js[t];
    if (!outcome[t].ok) {
      out.failures.push_back({"j=" + std::to_string(j + 1), outcome[t].error, outcome[t].code});
      csv << j + 1 << ",,,,,," << cfg.depth_method << ',' << status_for(outcome[t]) << '\n';
      list.push_back({{"j", j + 1}, {"error", outcome[t].error}});
      continue;
    }
    const DepthCertificate& d = certs[t];
    csv << j + 1 << ',' << d.td.num << ',' << d.td.den << ',' << d.td_minus.num << ',' << d.td_minus.den
        << ',' << (d.directions_verified ? "true" : "false") << ',' << to_string(d.method) << ",ok\n";
    json e = to_json(d);
    e["j"] = j + 1;
    list.push_back(e);
  }
  out.csv = csv.str();
  out.reports["depth"] = {{"certificates", list}};
}

void convergence(const ExperimentConfig& cfg, Campaign& out) {
  const double exact = disk_depth(cfg.radius);
  const double mc = disk_depth_monte_carlo(cfg.radius, cfg.mc_draws, cfg.convergence_seed);
  json check = {{"t", cfg.radius}, {"closed_form", exact}, {"monte_carlo", mc},
                {"draws", cfg.mc_draws}, {"tolerance", cfg.mc_tolerance},
                {"agree", std::fabs(mc - exact) <= cfg.mc_tolerance}};
  if (std::fabs(mc - exact) > cfg.mc_tolerance)
    throw InternalError("closed-form disk depth " + format_double(exact) +
                        " disagrees with Monte Carlo " + format_double(mc));
  const std::size_t nc = cfg.costs.size(), ng = cfg.n_grid.size();
  std::vector<ConvergenceRow> rows(nc * ng);
  std::vector<CellOutcome> outcome(nc * ng);
  parallel_for(nc * ng, cfg.threads, [&](std::size_t cell) {
    outcome[cell] = guarded([&] {
      rows[cell] = convergence_point(cfg.n_grid[cell % ng], cfg.radius, cfg.convergence_seed,
                                     cfg.costs[cell / ng], cfg.schedule);
    });
  });
  std::ostringstream csv;
  csv << summary_header(cfg.mode) << '\n';
  json list = json::array();
  for (std::size_t cell = 0; cell < nc * ng; ++cell) {
    const std::string label = cfg.costs[cell / ng].label();
    const std::size_t n = cfg.n_grid[cell % ng];
    if (!outcome[cell].ok) {
      out.failures.push_back({"n=" + std::to_string(n) + " cost=" + label, outcome[cell].error,
                              outcome[cell].code});
      csv << label << ',' << n << ',' << format_double(cfg.radius) << ",,,,,,,,," << status_for(outcome[cell])
          << '\n';
      list.push_back({{"n", n}, {"cost", label}, {"error", outcome[cell].error}});
      continue;
    }
    const ConvergenceRow& r = rows[cell];
    if (r.status == "falsified") ++out.falsifications;
    csv << label << ',' << r.n << ',' << format_double(r.t) << ',' << r.j + 1 << ','
        << format_double(r.radius) << ',' << r.bp.num << ',' << r.bp.den << ',' << r.td_minus.num << ','
        << r.td_minus.den << ',' << format_double(r.disk_depth) << ',' << format_double(r.abs_error)
        << ',' << r.status << '\n';
    json e = to_json(r);
    e["cost"] = label;
    list.push_back(e);
  }
  out.csv = csv.str();
  out.reports["convergence"] = {{"disk_depth_check", check}, {"rows", list}};
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::certify:
      return "certify";
    case RunMode::attack:
      return "attack";
    case RunMode::depth_only:
      return "depth_only";
    case RunMode::convergence:
      return "convergence";
  }
  return "?";
}

PointCloud CloudSource::load() const {
  if (file) return load_cloud(*file);
  return sample_cloud(dist, n, d, seed);
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) fail("config", "expected a JSON object");
  reject_unknown(j,
                 {"mode", "reference", "target", "costs", "targets", "output_dir", "schedule", "threads",
                  "attack", "depth", "convergence"},
                 "");
  ExperimentConfig cfg;
  cfg.mode = parse_mode(as_string(require(j, "mode", ""), "mode"));

  fs::path out = as_string(require(j, "output_dir", ""), "output_dir");
  if (out.empty()) fail("output_dir", "must not be empty");
  if (out.is_relative()) out = base_dir / out;
  cfg.output_dir = fs::absolute(out).lexically_normal();

  if (cfg.mode != RunMode::convergence)
    cfg.reference = parse_source(require(j, "reference", ""), "reference", base_dir);
  if (cfg.mode == RunMode::certify || cfg.mode == RunMode::attack)
    cfg.target = parse_source(require(j, "target", ""), "target", base_dir);

  if (j.contains("costs")) {
    const json& cs = j["costs"];
    if (!cs.is_array()) fail("costs", "expected an array");
    for (std::size_t t = 0; t < cs.size(); ++t) {
      const std::string path = "costs[" + std::to_string(t) + "]";
      try {
        cfg.costs.push_back(cost_from_json(cs[t]));
      } catch (const ValidationError& e) {
        fail(path, e.what());
      }
    }
    if (cfg.costs.empty()) fail("costs", "at least one cost is required");
  } else if (cfg.mode != RunMode::depth_only) {
    fail("costs", "missing field");
  }

  if (j.contains("targets")) {
    const json& t = j["targets"];
    if (t.is_string()) {
      if (t.get<std::string>() != "all") fail("targets", "expected \"all\" or a list of 1-based indices");
    } else if (t.is_array()) {
      std::vector<std::size_t> list;
      for (std::size_t k = 0; k < t.size(); ++k) {
        const std::uint64_t idx = as_unsigned(t[k], "targets[" + std::to_string(k) + "]");
        if (idx < 1) fail("targets[" + std::to_string(k) + "]", "indices are 1-based");
        list.push_back(static_cast<std::size_t>(idx - 1));
      }
      if (list.empty()) fail("targets", "list must not be empty");
      cfg.targets = list;
    } else {
      fail("targets", "expected \"all\" or a list of 1-based indices");
    }
  }

  if (j.contains("schedule")) cfg.schedule = attack_options_from_json(j["schedule"]);
  if (j.contains("threads")) {
    cfg.threads = as_unsigned(j["threads"], "threads");
    if (cfg.threads < 1) fail("threads", "must be at least 1");
  }

  if (j.contains("attack")) {
    const json& a = j["attack"];
    if (!a.is_object()) fail("attack", "expected an object");
    reject_unknown(a, {"m", "mode"}, "attack");
    if (a.contains("m")) cfg.attack_m = as_unsigned(a["m"], "attack.m");
    if (a.contains("mode")) {
      const std::string m = as_string(a["mode"], "attack.mode");
      if (m == "isolated")
        cfg.attack_mode = AttackMode::isolated;
      else if (m == "td_direction")
        cfg.attack_mode = AttackMode::td_direction;
      else
        fail("attack.mode", "expected isolated or td_direction");
    }
  } else if (cfg.mode == RunMode::attack) {
    fail("attack", "missing field");
  }

  if (j.contains("depth")) {
    const json& d = j["depth"];
    if (!d.is_object()) fail("depth", "expected an object");
    reject_unknown(d, {"method", "n_dirs", "seed"}, "depth");
    if (d.contains("method")) {
      cfg.depth_method = as_string(d["method"], "depth.method");
      if (cfg.depth_method != "exact" && cfg.depth_method != "sweep2d" && cfg.depth_method != "sampled")
        fail("depth.method", "expected exact, sweep2d or sampled");
    }
    if (d.contains("n_dirs")) cfg.depth_dirs = as_unsigned(d["n_dirs"], "depth.n_dirs");
    if (d.contains("seed")) cfg.depth_seed = as_unsigned(d["seed"], "depth.seed");
    if (cfg.depth_dirs < 1) fail("depth.n_dirs", "must be at least 1");
  }

  if (cfg.mode == RunMode::convergence) {
    const json& c = require(j, "convergence", "");
    if (!c.is_object()) fail("convergence", "expected an object");
    reject_unknown(c, {"n_grid", "t", "seed", "mc_draws", "mc_tolerance"}, "convergence");
    const json& g = require(c, "n_grid", "convergence");
    if (!g.is_array() || g.empty()) fail("convergence.n_grid", "expected a non-empty array");
    for (std::size_t k = 0; k < g.size(); ++k) {
      const std::uint64_t n = as_unsigned(g[k], "convergence.n_grid[" + std::to_string(k) + "]");
      if (n < 3) fail("convergence.n_grid[" + std::to_string(k) + "]", "must be at least 3");
      cfg.n_grid.push_back(n);
    }
    cfg.radius = as_number(require(c, "t", "convergence"), "convergence.t");
    if (!(cfg.radius >= 0.0 && cfg.radius <= 1.0)) fail("convergence.t", "must lie in [0, 1]");
    cfg.convergence_seed = as_unsigned(require(c, "seed", "convergence"), "convergence.seed");
    if (c.contains("mc_draws")) cfg.mc_draws = as_unsigned(c["mc_draws"], "convergence.mc_draws");
    if (c.contains("mc_tolerance"))
      cfg.mc_tolerance = as_number(c["mc_tolerance"], "convergence.mc_tolerance");
    if (cfg.mc_draws < 1) fail("convergence.mc_draws", "must be at least 1");
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["output_dir"] = cfg.output_dir.string();
  if (cfg.reference) j["reference"] = source_json(*cfg.reference);
  if (cfg.target) j["target"] = source_json(*cfg.target);
  if (!cfg.costs.empty()) {
    json cs = json::array();
    for (const auto& c : cfg.costs) cs.push_back(to_json(c));
    j["costs"] = cs;
  }
  if (cfg.targets) {
    std::vector<std::size_t> one(*cfg.targets);
    for (auto& t : one) ++t;
    j["targets"] = one;
  } else {
    j["targets"] = "all";
  }
  j["schedule"] = to_json(cfg.schedule);
  j["threads"] = cfg.threads;
  if (cfg.mode == RunMode::attack)
    j["attack"] = {{"m", cfg.attack_m}, {"mode", to_string(cfg.attack_mode)}};
  if (cfg.mode == RunMode::depth_only)
    j["depth"] = {{"method", cfg.depth_method}, {"n_dirs", cfg.depth_dirs}, {"seed", cfg.depth_seed}};
  if (cfg.mode == RunMode::convergence)
    j["convergence"] = {{"n_grid", cfg.n_grid},
                        {"t", cfg.radius},
                        {"seed", cfg.convergence_seed},
                        {"mc_draws", cfg.mc_draws},
                        {"mc_tolerance", cfg.mc_tolerance}};
  return j;
}

std::string summary_header(RunMode mode) {
  switch (mode) {
    case RunMode::certify:
      return "j,cost,bp_num,bp_den,lower_num,lower_den,upper_num,upper_den,equality_case,status";
    case RunMode::attack:
      return "j,cost,m,mode,rank,diverged,scales,status";
    case RunMode::depth_only:
      return "j,td_num,td_den,td_minus_num,td_minus_den,directions_verified,method,status";
    case RunMode::convergence:
      return "cost,n,t,j,radius,bp_num,bp_den,td_minus_num,td_minus_den,disk_depth,abs_error,status";
  }
  return "";
}

RunResult run(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir / "reports", ec);
  if (ec) fail("output_dir", "cannot create " + cfg.output_dir.string() + ": " + ec.message());

  Campaign camp;
  switch (cfg.mode) {
    case RunMode::certify:
    case RunMode::attack:
      certify_or_attack(cfg, camp);
      break;
    case RunMode::depth_only:
      depth_only(cfg, camp);
      break;
    case RunMode::convergence:
      convergence(cfg, camp);
      break;
  }

  RunResult res;
  res.summary_csv = camp.csv;
  res.digest = "fnv1a64:" + hex_digest(fnv1a64(camp.csv));
  res.failures = camp.failures;
  res.falsifications = camp.falsifications;
  if (camp.falsifications > 0)
    res.code = ExitCode::falsification;
  else if (std::any_of(camp.failures.begin(), camp.failures.end(),
                       [](const CellFailure& f) { return f.code != ExitCode::validation; }))
    res.code = ExitCode::internal;

  write_text(cfg.output_dir / "summary.csv", camp.csv);
  for (const auto& [name, doc] : camp.reports.items())
    write_text(cfg.output_dir / "reports" / (name + ".json"), doc.dump(2) + "\n");

  json manifest;
  manifest["tool"] = "otbp";
  manifest["version"] = OTBP_VERSION;
  manifest["config"] = to_json(cfg);
  manifest["seeds"] = seeds_json(cfg);
  manifest["summary_file"] = "summary.csv";
  manifest["summary_digest"] = res.digest;
  manifest["kernel_backend"] = std::string(kernels::backend_name(kernels::active().backend));
  json inputs = json::object();
  auto input = [&](const char* key, const std::optional<CloudSource>& src) {
    if (src && src->file)
      inputs[key] = {{"path", src->file->string()},
                     {"digest", "fnv1a64:" + hex_digest(fnv1a64(read_text(*src->file)))}};
  };
  input("reference", cfg.reference);
  input("target", cfg.target);
  manifest["inputs"] = inputs;
  json failures = json::array();
  for (const auto& f : camp.failures)
    failures.push_back({{"cell", f.cell}, {"error", f.error}, {"exit_code", static_cast<int>(f.code)}});
  manifest["failures"] = failures;
  manifest["falsifications"] = camp.falsifications;
  manifest["exit_code"] = static_cast<int>(res.code);
  res.manifest_path = cfg.output_dir / "manifest.json";
  write_text(res.manifest_path, manifest.dump(2) + "\n");
  return res;
}

RunResult replay(const fs::path& manifest_path, const std::optional<fs::path>& output_dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw ValidationError("manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("config") || !manifest.contains("summary_digest"))
    throw ValidationError("manifest " + manifest_path.string() + ": missing config or summary_digest");
  if (manifest.value("version", std::string()) != OTBP_VERSION)
    std::cerr << "warning: manifest was written by version " << manifest.value("version", std::string("?"))
              << ", replaying with " << OTBP_VERSION << "\n";

  const fs::path dir = fs::absolute(manifest_path).parent_path();
  ExperimentConfig cfg = parse_config(manifest["config"], dir);
  if (manifest.contains("seeds") && manifest["seeds"] != seeds_json(cfg))
    throw InternalError("replay: manifest seeds do not match its config");
  if (manifest.contains("inputs")) {
    for (const auto& [key, entry] : manifest["inputs"].items()) {
      const fs::path p = entry.value("path", std::string());
      const std::string want = entry.value("digest", std::string());
      if ("fnv1a64:" + hex_digest(fnv1a64(read_text(p))) != want)
        throw InternalError("replay: input file " + p.string() + " changed since the run");
    }
  }
  cfg.output_dir = output_dir ? fs::absolute(*output_dir) : dir / "replay";
  RunResult res = run(cfg);
  const std::string want = manifest["summary_digest"].get<std::string>();
  if (res.digest != want)
    throw InternalError("replay produced divergent output: summary digest " + res.digest +
                        ", manifest records " + want);
  return res;
}

}  // namespace otbp
