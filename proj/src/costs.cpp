#include "otbp/costs.hpp"

#include <charconv>
#include <cmath>

#include "otbp/errors.hpp"
#include "otbp/util.hpp"

namespace otbp {
namespace {

// |y| without overflow for coordinates near the double range.
double stable_norm(std::span<const double> y) {
  double scale = 0.0;
  for (double c : y) scale = std::max(scale, std::fabs(c));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double acc = 0.0;
  for (double c : y) {
    const double t = c / scale;
    acc += t * t;
  }
  return scale * std::sqrt(acc);
}

double squared_norm(std::span<const double> z) {
  double acc = 0.0;
  for (double c : z) acc += c * c;
  return acc;
}

}  // namespace

std::string CostSpec::label() const {
  return (family == CostFamily::power ? "power:" : "scaled_quadratic:") + format_double(param);
}

CostSpec parse_cost(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ValidationError("cost must look like power:<p> or scaled_quadratic:<a>, got '" + text + "'");
  const std::string name = text.substr(0, colon);
  const std::string value = text.substr(colon + 1);
  double param = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), param);
  if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ValidationError("cost parameter is not a number: '" + value + "'");
  CostSpec spec;
  if (name == "power")
    spec = CostSpec::power(param);
  else if (name == "scaled_quadratic")
    spec = CostSpec::scaled_quadratic(param);
  else
    throw ValidationError("unknown cost family '" + name + "'");
  require_admissible(spec);
  return spec;
}

bool admissible(const CostSpec& spec) {
  if (!std::isfinite(spec.param)) return false;
  return spec.family == CostFamily::power ? spec.param > 1.0 : spec.param > 0.0;
}

void require_admissible(const CostSpec& spec) {
  if (admissible(spec)) return;
  if (spec.family == CostFamily::power)
    throw ValidationError("power cost needs p > 1, got " + format_double(spec.param));
  throw ValidationError("scaled_quadratic cost needs a > 0, got " + format_double(spec.param));
}

nlohmann::json to_json(const CostSpec& spec) {
  nlohmann::json j;
  if (spec.family == CostFamily::power) {
    j["family"] = "power";
    j["p"] = spec.param;
  } else {
    j["family"] = "scaled_quadratic";
    j["a"] = spec.param;
  }
  return j;
}

CostSpec cost_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_cost(j.get<std::string>());
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw ValidationError("cost entry needs a string field 'family'");
  const std::string family = j["family"].get<std::string>();
  CostSpec spec;
  if (family == "power") {
    if (!j.contains("p") || !j["p"].is_number())
      throw ValidationError("power cost needs a numeric field 'p'");
    spec = CostSpec::power(j["p"].get<double>());
  } else if (family == "scaled_quadratic") {
    const double a = j.contains("a") ? (j["a"].is_number() ? j["a"].get<double>() : NAN) : 1.0;
    spec = CostSpec::scaled_quadratic(a);
  } else {
    throw ValidationError("unknown cost family '" + family + "'");
  }
  require_admissible(spec);
  return spec;
}

double h_of_squared_norm(const CostSpec& spec, double s) {
  if (spec.family == CostFamily::scaled_quadratic) return spec.param * s;
  if (spec.param == 2.0) return s;
  return std::pow(s, 0.5 * spec.param);
}

double h(const CostSpec& spec, std::span<const double> z) {
  if (spec.family == CostFamily::scaled_quadratic) return spec.param * squared_norm(z);
  if (spec.param == 2.0) return squared_norm(z);
  return std::pow(stable_norm(z), spec.param);
}

double cost(const CostSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ValidationError("cost: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  Vector z(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) z[k] = x[k] - y[k];
  return h(spec, z);
}

double h_difference(const CostSpec& spec, double s_i, double s_r, double delta) {
  if (spec.family == CostFamily::scaled_quadratic) return spec.param * delta;
  if (spec.param == 2.0) return delta;
  const double e = 0.5 * spec.param;
  if (s_r > 0.0 && std::fabs(delta) <= s_r)
    return std::pow(s_r, e) * std::expm1(e * std::log1p(delta / s_r));
  return std::pow(s_i, e) - std::pow(s_r, e);
}

Vector grad_h(const CostSpec& spec, std::span<const double> z) {
  Vector g(z.begin(), z.end());
  if (spec.family == CostFamily::scaled_quadratic) {
    for (double& c : g) c *= 2.0 * spec.param;
    return g;
  }
  const double p = spec.param;
  const double r = stable_norm(z);
  if (r == 0.0) {
    if (p < 2.0) throw ValidationError("grad_h: power cost with p < 2 has no gradient at the origin");
    return g;  // zero
  }
  const double factor = p * std::pow(r, p - 2.0);
  for (double& c : g) c *= factor;
  return g;
}

Vector conj_grad(const CostSpec& spec, std::span<const double> y) {
  Vector z(y.begin(), y.end());
  if (spec.family == CostFamily::scaled_quadratic) {
    for (double& c : z) c /= 2.0 * spec.param;
    return z;
  }
  const double p = spec.param;
  const double r = stable_norm(y);
  if (r == 0.0) return z;
  const double len = std::pow(r / p, 1.0 / (p - 1.0));
  for (double& c : z) c = (c / r) * len;
  return z;
}

AssumptionReport validate_assumptions(const CostSpec& spec, std::uint64_t seed, std::size_t pairs,
                                      std::size_t dim) {
  AssumptionReport rep;
  rep.spec = spec;
  rep.whitelisted = admissible(spec);
  if (!rep.whitelisted)
    rep.notes.push_back(spec.family == CostFamily::power ? "outside whitelist: power cost needs p > 1"
                                                         : "outside whitelist: scaled_quadratic needs a > 0");
  rep.cone_condition = rep.whitelisted;
  rep.notes.push_back(rep.whitelisted ? "cone condition holds for this family (analytic whitelist)"
                                      : "cone condition not certified");

  const PointCloud draws = sample_cloud(Distribution::gaussian, 2 * pairs, dim, seed);
  auto midpoint_gap_ok = [&](const Vector& x, const Vector& y) {
    Vector mid(dim);
    for (std::size_t k = 0; k < dim; ++k) mid[k] = 0.5 * (x[k] + y[k]);
    const double hx = h(spec, x), hy = h(spec, y);
    return 0.5 * (hx + hy) - h(spec, mid) > 1e-12 * (hx + hy);
  };
  rep.strict_convexity = true;
  for (std::size_t t = 0; t < pairs && rep.strict_convexity; ++t) {
    const Vector x = draws.point(2 * t), y = draws.point(2 * t + 1);
    Vector x2(dim), x3(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      x2[k] = 2.0 * x[k];
      x3[k] = 3.0 * x[k];
    }
    if (!midpoint_gap_ok(x, y)) {
      rep.strict_convexity = false;
      rep.notes.push_back("midpoint strict convexity fails on a random pair");
    } else if (!midpoint_gap_ok(x, x2) || !midpoint_gap_ok(x, x3)) {
      rep.strict_convexity = false;
      rep.notes.push_back("midpoint strict convexity fails on a collinear pair (x, 2x) or (x, 3x)");
    }
  }

  rep.superlinear_growth = true;
  const double radii[] = {1e2, 1e4, 1e6};
  for (std::size_t t = 0; t < pairs && rep.superlinear_growth; ++t) {
    const Vector v = normalized(draws.point(t));
    double prev = -1.0;
    for (double R : radii) {
      Vector rv(v);
      for (double& c : rv) c *= R;
      const double ratio = h(spec, rv) / R;
      if (!(ratio > prev)) {
        rep.superlinear_growth = false;
        rep.notes.push_back("h(Rv)/R does not increase along a random ray at R = " + format_double(R));
        break;
      }
      prev = ratio;
    }
  }
  return rep;
}

nlohmann::json to_json(const AssumptionReport& report) {
  nlohmann::json j;
  j["cost"] = to_json(report.spec);
  j["whitelisted"] = report.whitelisted;
  j["strict_convexity"] = report.strict_convexity;
  j["superlinear_growth"] = report.superlinear_growth;
  j["cone_condition"] = report.cone_condition;
  j["passed"] = report.passed();
  j["notes"] = report.notes;
  return j;
}

}  // namespace otbp
