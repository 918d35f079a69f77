#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <string>

#include "conind/error.hpp"

namespace conind {

/// Non-negative exact fraction kept in lowest terms.
class Ratio {
 public:
  constexpr Ratio() = default;

  Ratio(std::uint64_t numerator, std::uint64_t denominator) : num_(numerator), den_(denominator) {
    if (den_ == 0) throw Error("ratio with zero denominator");
    const auto g = std::gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::uint64_t numerator() const noexcept { return num_; }
  std::uint64_t denominator() const noexcept { return den_; }

  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Fixed-point rendering, e.g. decimal(3) of 2/3 is "0.667".
  std::string decimal(int digits = 3) const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, to_double());
    return buf;
  }

  friend bool operator==(const Ratio& a, const Ratio& b) noexcept {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }

  // Counts are image counts, far below 2^32, so cross products cannot overflow.
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) noexcept {
    return a.num_ * b.den_ <=> b.num_ * a.den_;
  }

 private:
  std::uint64_t num_ = 0;
  std::uint64_t den_ = 1;
};

}  // namespace conind
