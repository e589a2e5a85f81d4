#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace otbp {

// A count over the sample size, kept unreduced (den is always n).
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

  friend bool operator==(const Fraction& a, const Fraction& b) {
    return a.num * b.den == b.num * a.den;
  }
  friend std::strong_ordering operator<=>(const Fraction& a, const Fraction& b) {
    return a.num * b.den <=> b.num * a.den;
  }
};

}  // namespace otbp
