#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "otbp/assignment.hpp"
#include "otbp/costs.hpp"
#include "otbp/depth.hpp"
#include "otbp/fraction.hpp"
#include "otbp/pointset.hpp"

namespace otbp {

struct AttackOptions {
  double ratio = 4.0;           // geometric schedule ratio
  std::size_t min_length = 6;   // scales before the adaptive extension
  std::size_t max_length = 400;
  double capture_factor = 8.0;  // k must exceed this many times the capture bound
  double growth_factor = 2.0;   // contaminant norm over the divergence threshold
  double divergence_factor = 1e3;
  double overflow_limit = 1e300;
  double jitter = 1e-9;         // relative spread of the contaminant copies
  double tie_tolerance = 1e-9;
  std::size_t audit_subset = 3;  // c-monotonicity spot audit per solve (0 disables)
  std::optional<Vector> z0;      // anchor; zero when unset
};

nlohmann::json to_json(const AttackOptions& options);
AttackOptions attack_options_from_json(const nlohmann::json& j);

// The contaminant location u_j - grad h*(z0 + k v).
Vector contaminant(const CostSpec& spec, std::span<const double> u_j, std::span<const double> z0,
                   std::span<const double> v, double k);

struct ContaminationPlan {
  std::size_t j = 0;  // 0-based
  Vector v;
  std::size_t m = 0;
  Vector z0;
  std::vector<double> schedule;
  // Reference indices sorted by <v, u_i - u_j>, ties by index, with u_j last
  // among the closed halfspace. `rank` is u_j's 1-based position.
  std::vector<std::size_t> order;
  std::size_t rank = 0;
  std::vector<std::size_t> replaced_indices;  // the first m entries of `order`
};

struct ScheduleContext {
  double ref_diameter = 0.0;
  double tgt_diameter = 0.0;
  double max_baseline_cost = 0.0;
};

ContaminationPlan make_plan(const PointCloud& ref, std::size_t j, std::span<const double> v,
                            std::size_t m, const CostSpec& spec, const ScheduleContext& ctx,
                            const AttackOptions& options);

struct Contamination {
  PointCloud cloud;
  std::vector<std::size_t> column_groups;  // contaminant columns share group id n
  Vector z;
};

// Replaces the images T(u_i), i in plan.replaced_indices, by m jittered
// copies of the contaminant. Throws ValidationError when the scale trips the
// overflow guard.
Contamination build_contamination(const PointCloud& ref, const PointCloud& tgt,
                                  const Assignment& baseline, const ContaminationPlan& plan, double k,
                                  const CostSpec& spec, const AttackOptions& options = {});

// Largest norm the overflow guard admits for a contaminant, given the
// reference radius and sample size.
double overflow_norm_limit(const CostSpec& spec, double radius, std::size_t n, double limit);

struct TracePoint {
  double k = 0.0;
  Vector image;             // T_k(u_j)
  double image_norm = 0.0;
  bool captured = false;    // u_j is matched to a contaminant copy
};

// Needs at least 4 trace points (ValidationError otherwise).
bool detect_divergence(std::span<const TracePoint> trace, double ref_diameter, double tgt_diameter,
                       double factor = 1e3);

enum class AttackMode { isolated, td_direction };
std::string to_string(AttackMode mode);

struct AttackResult {
  std::size_t m = 0;
  AttackMode mode = AttackMode::isolated;
  Vector v;
  std::size_t rank = 0;
  bool diverged = false;
  std::vector<TracePoint> trace;
  std::size_t audit_violations = 0;
};

// Caches everything that does not depend on the attack level.
class BreakdownCertifier {
 public:
  BreakdownCertifier(PointCloud ref, PointCloud tgt, CostSpec spec, AttackOptions options = {});

  const PointCloud& ref() const { return ref_; }
  const PointCloud& tgt() const { return tgt_; }
  const CostSpec& spec() const { return spec_; }
  const AttackOptions& options() const { return options_; }
  const Assignment& baseline() const { return baseline_; }
  bool general_position() const { return gp_.general; }
  const GeneralPositionResult& general_position_result() const { return gp_; }
  const ScheduleContext& context() const { return ctx_; }

  const DepthCertificate& depth(std::size_t j);
  const IsolatedDirection& isolated(std::size_t j);

  AttackResult attack(std::size_t j, std::size_t m, AttackMode mode);
  AttackResult attack_along(std::size_t j, std::size_t m, std::span<const double> v, AttackMode mode);

 private:
  PointCloud ref_, tgt_;
  CostSpec spec_;
  AttackOptions options_;
  Assignment baseline_;
  GeneralPositionResult gp_;
  ScheduleContext ctx_;
  std::vector<std::optional<DepthCertificate>> depth_;
  std::vector<std::optional<IsolatedDirection>> isolated_;
};

AttackResult attack_at_level(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                             std::size_t j, std::size_t m, AttackMode mode,
                             const AttackOptions& options = {});

struct BreakdownReport {
  std::size_t j = 0;  // 0-based
  CostSpec cost;
  Fraction bp_certified;
  Fraction lower_bound;  // TD^- + 1/n
  Fraction upper_bound;  // TD
  Fraction td;
  Fraction td_minus;
  bool general_position = false;
  bool equality_case = false;
  bool found = false;          // some attack diverged
  bool falsification = false;  // a bracket violation was observed
  std::string status;          // certified, bracketed, anomaly, falsified
  std::vector<std::string> anomalies;
  std::vector<AttackResult> attacks;
  Vector z0;
};

BreakdownReport certify_breakdown(BreakdownCertifier& certifier, std::size_t j);
BreakdownReport certify_breakdown(const PointCloud& ref, const PointCloud& tgt, const CostSpec& spec,
                                  std::size_t j, const AttackOptions& options = {});

nlohmann::json to_json(const TracePoint& point);
nlohmann::json to_json(const AttackResult& attack);
nlohmann::json to_json(const BreakdownReport& report);

// Tukey depth of a point at radius t in the uniform unit disk.
double disk_depth(double t);
// Monte Carlo estimate of the same halfspace probability.
double disk_depth_monte_carlo(double t, std::size_t draws, std::uint64_t seed);

struct ConvergenceRow {
  std::size_t n = 0;
  double t = 0.0;
  std::size_t j = 0;  // 0-based
  double radius = 0.0;
  Fraction bp;
  Fraction td_minus;
  Fraction td;
  double disk_depth = 0.0;
  double abs_error = 0.0;
  std::string status;
};

ConvergenceRow convergence_point(std::size_t n, double t, std::uint64_t seed, const CostSpec& spec,
                                 const AttackOptions& options = {});
std::vector<ConvergenceRow> convergence_experiment(const std::vector<std::size_t>& n_grid, double t,
                                                   std::uint64_t seed, const CostSpec& spec,
                                                   const AttackOptions& options = {});
nlohmann::json to_json(const ConvergenceRow& row);

}  // namespace otbp
