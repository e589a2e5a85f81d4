#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "otbp/pointset.hpp"

namespace otbp {

enum class CostFamily { power, scaled_quadratic };

// c(x, y) = h(x - y) with h(z) = |z|^p (power) or a |z|^2 (scaled_quadratic).
// A CostSpec may hold any parameter; require_admissible() rejects values
// outside the whitelist (p > 1, a > 0).
struct CostSpec {
  CostFamily family = CostFamily::power;
  double param = 2.0;  // p for power, a for scaled_quadratic

  static CostSpec power(double p) { return {CostFamily::power, p}; }
  static CostSpec scaled_quadratic(double a) { return {CostFamily::scaled_quadratic, a}; }

  // Growth exponent: p for power, 2 for scaled_quadratic.
  double exponent() const { return family == CostFamily::power ? param : 2.0; }
  // "power:1.5", "scaled_quadratic:1".
  std::string label() const;

  friend bool operator==(const CostSpec&, const CostSpec&) = default;
};

// Parses the label form ("power:3", "scaled_quadratic:0.5").
CostSpec parse_cost(const std::string& text);
bool admissible(const CostSpec& spec);
void require_admissible(const CostSpec& spec);

nlohmann::json to_json(const CostSpec& spec);
CostSpec cost_from_json(const nlohmann::json& j);

// h as a function of the squared norm s = |z|^2.
double h_of_squared_norm(const CostSpec& spec, double s);
double h(const CostSpec& spec, std::span<const double> z);
double cost(const CostSpec& spec, std::span<const double> x, std::span<const double> y);

// h(z_i) - h(z_r) given s_i = |z_i|^2, s_r = |z_r|^2 and delta = s_i - s_r
// computed without cancellation by the caller.
double h_difference(const CostSpec& spec, double s_i, double s_r, double delta);

Vector grad_h(const CostSpec& spec, std::span<const double> z);
Vector conj_grad(const CostSpec& spec, std::span<const double> y);

struct AssumptionReport {
  CostSpec spec;
  bool whitelisted = false;
  bool strict_convexity = false;    // midpoint test, random and collinear pairs
  bool superlinear_growth = false;  // h(Rv)/R increasing over R = 1e2, 1e4, 1e6
  bool cone_condition = false;      // whitelist only
  std::vector<std::string> notes;

  bool passed() const { return whitelisted && strict_convexity && superlinear_growth && cone_condition; }
};

AssumptionReport validate_assumptions(const CostSpec& spec, std::uint64_t seed = 0,
                                      std::size_t pairs = 1000, std::size_t dim = 2);
nlohmann::json to_json(const AssumptionReport& report);

}  // namespace otbp
