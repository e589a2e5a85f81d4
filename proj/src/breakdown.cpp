#include "otbp/breakdown.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "otbp/errors.hpp"
#include "otbp/kernels/kernels.hpp"
#include "otbp/util.hpp"

namespace otbp {
namespace {

Fraction frac(std::size_t num, std::size_t n) {
  return {static_cast<std::int64_t>(num), static_cast<std::int64_t>(n)};
}

double max_norm(const PointCloud& cloud) {
  double r = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) r = std::max(r, norm(cloud.point(i)));
  return r;
}

Vector zero_or(const std::optional<Vector>& z0, std::size_t d) {
  if (!z0) return Vector(d, 0.0);
  if (z0->size() != d)
    throw ValidationError("z0 has dimension " + std::to_string(z0->size()) + ", expected " +
                          std::to_string(d));
  return *z0;
}

}  // namespace

nlohmann::json to_json(const AttackOptions& o) {
  nlohmann::json j;
  j["ratio"] = o.ratio;
  j["min_length"] = o.min_length;
  j["max_length"] = o.max_length;
  j["capture_factor"] = o.capture_factor;
  j["growth_factor"] = o.growth_factor;
  j["divergence_factor"] = o.divergence_factor;
  j["overflow_limit"] = o.overflow_limit;
  j["jitter"] = o.jitter;
  j["tie_tolerance"] = o.tie_tolerance;
  j["audit_subset"] = o.audit_subset;
  j["z0"] = o.z0 ? nlohmann::json(*o.z0) : nlohmann::json(nullptr);
  return j;
}

AttackOptions attack_options_from_json(const nlohmann::json& j) {
  AttackOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw ValidationError("schedule: expected an object");
  auto number = [&](const char* key, double& field, double lo) {
    if (!j.contains(key)) return;
    if (!j[key].is_number())
      throw ValidationError(std::string("schedule.") + key + ": expected a number");
    field = j[key].get<double>();
    if (!(field > lo) || !std::isfinite(field))
      throw ValidationError(std::string("schedule.") + key + ": must be finite and > " + format_double(lo));
  };
  auto count = [&](const char* key, std::size_t& field) {
    if (!j.contains(key)) return;
    const nlohmann::json& v = j[key];
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ValidationError(std::string("schedule.") + key + ": expected a non-negative integer");
    field = j[key].get<std::size_t>();
  };
  static const char* known[] = {"ratio",          "min_length",    "max_length",
                                "capture_factor", "growth_factor", "divergence_factor",
                                "overflow_limit", "jitter",        "tie_tolerance",
                                "audit_subset",   "z0"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
        std::end(known))
      throw ValidationError("schedule." + key + ": unknown field");
  number("ratio", o.ratio, 1.0);
  count("min_length", o.min_length);
  count("max_length", o.max_length);
  number("capture_factor", o.capture_factor, 0.0);
  number("growth_factor", o.growth_factor, 0.0);
  number("divergence_factor", o.divergence_factor, 0.0);
  number("overflow_limit", o.overflow_limit, 0.0);
  number("jitter", o.jitter, 0.0);
  number("tie_tolerance", o.tie_tolerance, 0.0);
  count("audit_subset", o.audit_subset);
  if (o.min_length < 4) throw ValidationError("schedule.min_length: must be at least 4");
  if (o.max_length < o.min_length)
    throw ValidationError("schedule.max_length: must be at least min_length");
  if (j.contains("z0") && !j["z0"].is_null()) {
    if (!j["z0"].is_array()) throw ValidationError("schedule.z0: expected an array of numbers");
    Vector z;
    for (const auto& c : j["z0"]) {
      if (!c.is_number()) throw ValidationError("schedule.z0: expected an array of numbers");
      z.push_back(c.get<double>());
    }
    o.z0 = z;
  }
  return o;
}

Vector contaminant(const CostSpec& spec, std::span<const double> u_j, std::span<const double> z0,
                   std::span<const double> v, double k) {
  Vector y(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) y[t] = z0[t] + k * v[t];
  const Vector g = conj_grad(spec, y);
  Vector z(u_j.size());
  for (std::size_t t = 0; t < z.size(); ++t) z[t] = u_j[t] - g[t];
  return z;
}

double overflow_norm_limit(const CostSpec& spec, double radius, std::size_t n, double limit) {
  const double p = spec.exponent();
  const double by_total = std::pow(limit / static_cast<double>(std::max<std::size_t>(n, 1)), 1.0 / p);
  return std::min(by_total, std::sqrt(limit)) - radius;
}

ContaminationPlan make_plan(const PointCloud& ref, std::size_t j, std::span<const double> v,
                            std::size_t m, const CostSpec& spec, const ScheduleContext& ctx,
                            const AttackOptions& options) {
  const std::size_t n = ref.size(), d = ref.dim();
  if (j >= n) throw ValidationError("attack target index out of range");
  if (m > n) throw ValidationError("m = " + std::to_string(m) + " exceeds n = " + std::to_string(n));
  if (v.size() != d) throw ValidationError("attack direction has the wrong dimension");

  ContaminationPlan plan;
  plan.j = j;
  plan.v.assign(v.begin(), v.end());
  plan.m = m;
  plan.z0 = zero_or(options.z0, d);
  const Vector u = ref.point(j);
  const HalfspaceCount hc = halfspace_count(ref, u, plan.v);
  std::vector<double> proj(n);
  kernels::active().project(ref.soa(), n, d, u.data(), plan.v.data(), proj.data());

  std::vector<std::size_t> neg, bnd, pos;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == j) continue;
    (hc.side[i] < 0 ? neg : hc.side[i] == 0 ? bnd : pos).push_back(i);
  }
  auto by_proj = [&](std::size_t a, std::size_t b) {
    return proj[a] != proj[b] ? proj[a] < proj[b] : a < b;
  };
  std::sort(neg.begin(), neg.end(), by_proj);
  std::sort(pos.begin(), pos.end(), by_proj);
  plan.order = neg;
  plan.order.insert(plan.order.end(), bnd.begin(), bnd.end());
  plan.order.push_back(j);
  plan.rank = plan.order.size();
  plan.order.insert(plan.order.end(), pos.begin(), pos.end());
  plan.replaced_indices.assign(plan.order.begin(), plan.order.begin() + static_cast<std::ptrdiff_t>(m));

  // Capture of exactly the first m points is decided by the projection gap
  // between ranks m and m + 1 of the relabeled order.
  double gap = 1.0;
  if (m >= 1 && m < n) gap = proj[plan.order[m]] - proj[plan.order[m - 1]];
  if (!(gap > 1e-12 * (1.0 + ctx.ref_diameter))) gap = 1e-12 * (1.0 + ctx.ref_diameter);

  const double z0n = norm(plan.z0);
  const double capture_k =
      options.capture_factor * (1.0 + ctx.max_baseline_cost + z0n * ctx.ref_diameter) / gap;
  const double threshold = options.divergence_factor * (1.0 + ctx.ref_diameter + ctx.tgt_diameter);
  const double growth = options.growth_factor * threshold + norm(u);
  const double guard = overflow_norm_limit(spec, max_norm(ref), n, options.overflow_limit);

  auto reach = [&](double k) { return norm(contaminant(spec, Vector(d, 0.0), plan.z0, plan.v, k)); };
  const double k0 = 1.0 + ctx.ref_diameter;
  for (std::size_t t = 0; t < options.max_length; ++t) {
    const double k = k0 * std::pow(options.ratio, static_cast<double>(t));
    if (!std::isfinite(k) || reach(k) + norm(u) > guard) break;
    plan.schedule.push_back(k);
    const std::size_t len = plan.schedule.size();
    if (len >= options.min_length) {
      const double k3 = plan.schedule[len - 3];
      if (k3 >= capture_k && reach(k3) >= growth) break;
    }
  }
  if (plan.schedule.size() < 4)
    throw ValidationError("overflow guard leaves fewer than 4 contamination scales");
  return plan;
}

Contamination build_contamination(const PointCloud& ref, const PointCloud& tgt,
                                  const Assignment& baseline, const ContaminationPlan& plan, double k,
                                  const CostSpec& spec, const AttackOptions& options) {
  const std::size_t n = tgt.size(), d = tgt.dim();
  if (ref.size() != n || baseline.sigma.size() != n)
    throw ValidationError("contamination plan does not match the clouds");
  if (plan.replaced_indices.size() != plan.m || plan.m > n)
    throw ValidationError("contamination plan is inconsistent");
  const Vector u = ref.point(plan.j);
  Vector z0 = plan.z0.empty() ? Vector(d, 0.0) : plan.z0;
  Contamination out{tgt, {}, contaminant(spec, u, z0, plan.v, k)};
  const double zn = norm(out.z);
  const double guard = overflow_norm_limit(spec, max_norm(ref), n, options.overflow_limit);
  if (!std::isfinite(zn) || zn > guard)
    throw ValidationError("contamination scale k = " + format_double(k) +
                          " exceeds the overflow guard");
  out.column_groups.resize(n);
  std::iota(out.column_groups.begin(), out.column_groups.end(), 0);
  if (plan.m == 0) return out;

  std::vector<double> flat = tgt.row_major();
  const double spread = options.jitter * (1.0 + zn);
  for (std::size_t c = 0; c < plan.m; ++c) {
    const std::size_t col = baseline.sigma[plan.replaced_indices[c]];
    for (std::size_t t = 0; t < d; ++t) flat[col * d + t] = out.z[t];
    // Half-step offsets keep every copy off z itself, which may coincide
    // with a kept target atom.
    flat[col * d] += spread * ((static_cast<double>(c) + 0.5) / static_cast<double>(plan.m));
    out.column_groups[col] = n;
  }
  out.cloud = PointCloud(d, flat, tgt.label() + "+contaminant");
  return out;
}

bool detect_divergence(std::span<const TracePoint> trace, double ref_diameter, double tgt_diameter,
                       double factor) {
  if (trace.size() < 4)
    throw ValidationError("divergence test needs at least 4 schedule points, got " +
                          std::to_string(trace.size()));
  const double threshold = factor * (1.0 + ref_diameter + tgt_diameter);
  const std::size_t s = trace.size() - 3;
  for (std::size_t t = s; t < trace.size(); ++t) {
    if (!trace[t].captured || !(trace[t].image_norm >= threshold)) return false;
    if (t > s && !(trace[t].image_norm > trace[t - 1].image_norm)) return false;
  }
  return true;
}

std::string to_string(AttackMode mode) {
  return mode == AttackMode::isolated ? "isolated" : "td_direction";
}

BreakdownCertifier::BreakdownCertifier(PointCloud ref, PointCloud tgt, CostSpec spec,
                                       AttackOptions options)
    : ref_(std::move(ref)), tgt_(std::move(tgt)), spec_(spec), options_(std::move(options)) {
  require_admissible(spec_);
  if (ref_.size() != tgt_.size() || ref_.dim() != tgt_.dim())
    throw ValidationError("reference and target must have equal size and dimension");
  if (ref_.dim() > 3)
    throw ValidationError("breakdown certification needs exact depth, available for d <= 3");
  zero_or(options_.z0, ref_.dim());
  baseline_ = solve_assignment(ref_, tgt_, spec_, {{}, options_.tie_tolerance});
  if (baseline_.degenerate)
    throw DegenerateAssignmentError("baseline assignment has a near-tie; refusing to certify", 0.0);
  gp_ = general_position_check(ref_);
  ctx_.ref_diameter = ref_.diameter();
  ctx_.tgt_diameter = tgt_.diameter();
  const std::size_t n = ref_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vector ui = ref_.point(i);
    for (std::size_t t = 0; t < n; ++t)
      ctx_.max_baseline_cost = std::max(ctx_.max_baseline_cost, cost(spec_, ui, tgt_.point(t)));
  }
  depth_.resize(n);
  isolated_.resize(n);
}

const DepthCertificate& BreakdownCertifier::depth(std::size_t j) {
  if (j >= ref_.size()) throw ValidationError("point index out of range");
  if (!depth_[j]) depth_[j] = tukey_depth_exact(ref_, ref_.point(j));
  return *depth_[j];
}

const IsolatedDirection& BreakdownCertifier::isolated(std::size_t j) {
  if (!gp_.general)
    throw ValidationError("isolated attacks need a reference cloud in general position");
  if (!isolated_[j]) isolated_[j] = isolate_direction(ref_, j, depth(j));
  return *isolated_[j];
}

AttackResult BreakdownCertifier::attack(std::size_t j, std::size_t m, AttackMode mode) {
  const Vector v = mode == AttackMode::isolated ? isolated(j).v : depth(j).v_td;
  return attack_along(j, m, v, mode);
}

AttackResult BreakdownCertifier::attack_along(std::size_t j, std::size_t m, std::span<const double> v,
                                              AttackMode mode) {
  const ContaminationPlan plan = make_plan(ref_, j, v, m, spec_, ctx_, options_);
  AttackResult res;
  res.m = m;
  res.mode = mode;
  res.v = plan.v;
  res.rank = plan.rank;
  if (m == 0) return res;  // the target is unchanged; T(u_j) stays put

  const std::size_t n = ref_.size();
  for (double k : plan.schedule) {
    const Contamination cont = build_contamination(ref_, tgt_, baseline_, plan, k, spec_, options_);
    const Assignment a =
        solve_assignment(ref_, cont.cloud, spec_, {cont.column_groups, options_.tie_tolerance});
    if (a.degenerate)
      throw DegenerateAssignmentError("near-tie in the contaminated assignment at k = " +
                                          format_double(k) + " (m = " + std::to_string(m) + ")",
                                      k);
    if (options_.audit_subset >= 2) {
      MonotonicityOptions mo;
      mo.max_subset = options_.audit_subset;
      mo.exhaustive_budget = 50000;
      mo.samples = 2000;
      res.audit_violations += check_c_monotonicity(ref_, cont.cloud, a, spec_, mo).size();
    }
    TracePoint tp;
    tp.k = k;
    tp.image = cont.cloud.point(a.sigma[j]);
    tp.image_norm = norm(tp.image);
    tp.captured = cont.column_groups[a.sigma[j]] == n;
    res.trace.push_back(std::move(tp));
    if (res.trace.size() >= 4 &&
        detect_divergence(res.trace, ctx_.ref_diameter, ctx_.tgt_diameter, options_.divergence_factor)) {
      res.diverged = true;
      break;
    }
  }
  return res;
}

AttackResult attack_at_level(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                             std::size_t j, std::size_t m, AttackMode mode,
                             const AttackOptions& options) {
  BreakdownCertifier certifier(ref, tgt, spec, options);
  return certifier.attack(j, m, mode);
}

BreakdownReport certify_breakdown(BreakdownCertifier& c, std::size_t j) {
  const std::size_t n = c.ref().size(), d = c.ref().dim();
  const DepthCertificate& cert = c.depth(j);
  const std::size_t low = static_cast<std::size_t>(cert.td_minus.num);
  const std::size_t high = static_cast<std::size_t>(cert.td.num);

  BreakdownReport rep;
  rep.j = j;
  rep.cost = c.spec();
  rep.td = cert.td;
  rep.td_minus = cert.td_minus;
  rep.lower_bound = frac(low + 1, n);
  rep.upper_bound = frac(high, n);
  rep.general_position = c.general_position();
  rep.z0 = zero_or(c.options().z0, d);

  const bool equality_setting = c.general_position() && n >= d;
  const AttackMode primary = equality_setting ? AttackMode::isolated : AttackMode::td_direction;

  auto succeed = [&](std::size_t m) {
    rep.found = true;
    rep.bp_certified = frac(m, n);
  };

  AttackResult below = c.attack(j, low, primary);
  rep.attacks.push_back(below);
  if (below.diverged) {
    rep.falsification = true;
    rep.anomalies.push_back("attack with m = n*TD^- = " + std::to_string(low) +
                            " diverged, below the lower bound");
    succeed(low);
  }

  std::size_t start = low + 1;
  if (!rep.found && equality_setting) {
    AttackResult at = c.attack(j, low + 1, AttackMode::isolated);
    rep.attacks.push_back(at);
    if (at.diverged) {
      succeed(low + 1);
      rep.equality_case = true;
    } else {
      rep.anomalies.push_back("isolated attack with m = n*TD^- + 1 = " + std::to_string(low + 1) +
                              " did not diverge");
      start = low + 1;
      // The isolated level is settled; the scan re-checks it along v_td.
    }
  }

  if (!rep.found) {
    for (std::size_t m = start; m <= n && !rep.found; ++m) {
      if (!(equality_setting && m == low + 1)) {
        AttackResult r = c.attack(j, m, primary);
        rep.attacks.push_back(r);
        if (r.diverged) {
          succeed(m);
          break;
        }
      }
      if (primary == AttackMode::isolated && m >= high) {
        AttackResult r = c.attack(j, m, AttackMode::td_direction);
        rep.attacks.push_back(r);
        if (r.diverged) succeed(m);
      }
    }
  }

  if (!rep.found) {
    rep.falsification = true;
    rep.anomalies.push_back("no attack diverged up to m = n");
    rep.status = "falsified";
  } else if (rep.bp_certified < rep.lower_bound || rep.upper_bound < rep.bp_certified) {
    rep.falsification = true;
    rep.anomalies.push_back("breakdown level " + rep.bp_certified.str() + " outside [" +
                            rep.lower_bound.str() + ", " + rep.upper_bound.str() + "]");
    rep.status = "falsified";
  } else if (rep.equality_case) {
    rep.status = "certified";
  } else if (equality_setting) {
    rep.status = "anomaly";
  } else {
    rep.status = "bracketed";
  }
  for (const AttackResult& a : rep.attacks)
    if (a.audit_violations > 0)
      rep.anomalies.push_back("c-monotonicity audit found " + std::to_string(a.audit_violations) +
                              " violations at m = " + std::to_string(a.m));
  return rep;
}

BreakdownReport certify_breakdown(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                                  std::size_t j, const AttackOptions& options) {
  if (j >= ref.size()) throw ValidationError("point index out of range");
  BreakdownCertifier certifier(ref, tgt, spec, options);
  return certify_breakdown(certifier, j);
}

nlohmann::json to_json(const TracePoint& p) {
  return {{"k", p.k}, {"image", p.image}, {"image_norm", p.image_norm}, {"captured", p.captured}};
}

nlohmann::json to_json(const AttackResult& a) {
  nlohmann::json j;
  j["m"] = a.m;
  j["mode"] = to_string(a.mode);
  j["v"] = a.v;
  j["rank"] = a.rank;
  j["diverged"] = a.diverged;
  j["audit_violations"] = a.audit_violations;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : a.trace) trace.push_back(to_json(p));
  j["trace"] = trace;
  return j;
}

nlohmann::json to_json(const BreakdownReport& r) {
  nlohmann::json j;
  j["j"] = r.j + 1;
  j["cost"] = to_json(r.cost);
  j["bp_certified"] = r.found ? to_json(r.bp_certified) : nlohmann::json(nullptr);
  j["lower_bound"] = to_json(r.lower_bound);
  j["upper_bound"] = to_json(r.upper_bound);
  j["td"] = to_json(r.td);
  j["td_minus"] = to_json(r.td_minus);
  j["general_position"] = r.general_position;
  j["equality_case"] = r.equality_case;
  j["falsification"] = r.falsification;
  j["status"] = r.status;
  j["anomalies"] = r.anomalies;
  j["z0"] = r.z0;
  nlohmann::json attacks = nlohmann::json::array();
  for (const auto& a : r.attacks) attacks.push_back(to_json(a));
  j["attack_trace"] = attacks;
  return j;
}

double disk_depth(double t) {
  t = std::clamp(std::fabs(t), 0.0, 1.0);
  return (std::acos(t) - t * std::sqrt(1.0 - t * t)) / M_PI;
}

double disk_depth_monte_carlo(double t, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::size_t hit = 0, kept = 0;
  while (kept < draws) {
    const double x = unif(gen), y = unif(gen);
    if (x * x + y * y > 1.0) continue;
    ++kept;
    if (x >= t) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(draws);
}

ConvergenceRow convergence_point(std::size_t n, double t, std::uint64_t seed, const CostSpec& spec,
                                 const AttackOptions& options) {
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("convergence radius t must lie in [0, 1]");
  PointCloud ref = sample_cloud(Distribution::uniform_ball, n, 2, seed);
  PointCloud tgt = sample_cloud(Distribution::uniform_ball, n, 2, seed + 1);
  ConvergenceRow row;
  row.n = n;
  row.t = t;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = norm(ref.point(i));
    if (std::fabs(r - t) < best) {
      best = std::fabs(r - t);
      row.j = i;
      row.radius = r;
    }
  }
  BreakdownCertifier certifier(std::move(ref), std::move(tgt), spec, options);
  const BreakdownReport rep = certify_breakdown(certifier, row.j);
  row.bp = rep.bp_certified;
  row.td = rep.td;
  row.td_minus = rep.td_minus;
  row.disk_depth = disk_depth(t);
  row.abs_error = std::fabs(rep.bp_certified.value() - row.disk_depth);
  row.status = rep.status;
  return row;
}

std::vector<ConvergenceRow> convergence_experiment(const std::vector<std::size_t>& n_grid, double t,
                                                   std::uint64_t seed, const CostSpec& spec,
                                                   const AttackOptions& options) {
  std::vector<ConvergenceRow> rows;
  for (std::size_t n : n_grid) rows.push_back(convergence_point(n, t, seed, spec, options));
  return rows;
}

nlohmann::json to_json(const ConvergenceRow& row) {
  nlohmann::json j;
  j["n"] = row.n;
  j["t"] = row.t;
  j["j"] = row.j + 1;
  j["radius"] = row.radius;
  j["bp"] = to_json(row.bp);
  j["td_minus"] = to_json(row.td_minus);
  j["td"] = to_json(row.td);
  j["disk_depth"] = row.disk_depth;
  j["abs_error"] = row.abs_error;
  j["status"] = row.status;
  return j;
}

}  // namespace otbp
