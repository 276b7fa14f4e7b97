#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace perpetua {

// Neumaier's variant of Kahan summation; also correct when the addend is
// larger than the running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

template <class Range>
double compensated_sum(const Range& r) {
  CompensatedSum acc;
  for (double x : r) acc.add(x);
  return acc.value();
}

// floor(x) as int64 with an explicit range check instead of UB on overflow.
inline bool checked_floor(double x, std::int64_t& out) noexcept {
  const double f = std::floor(x);
  if (!(f >= -9.0e18 && f <= 9.0e18)) return false;
  out = static_cast<std::int64_t>(f);
  return true;
}

inline bool checked_mul(std::int64_t a, std::int64_t b, std::int64_t& out) noexcept {
  return !__builtin_mul_overflow(a, b, &out);
}

}  // namespace perpetua
