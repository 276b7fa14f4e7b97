/** @file lattice.hpp
 *  @brief Probability mass functions on the lattice {k/s}, their CDFs,
 *  Kolmogorov distances and the windowed density estimate.
 */
#pragma once

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "perpetua/error.hpp"
#include "perpetua/model.hpp"
#include "perpetua/numeric.hpp"

namespace perpetua {

inline constexpr double kMassTolerance = 1e-12;

class LatticePMF {
 public:
  LatticePMF(std::int64_t s, std::int64_t k_min, std::vector<double> mass)
      : s_(s), k_min_(k_min), mass_(std::move(mass)) {
    if (s_ < 1) throw NumericError("lattice resolution must be positive");
    if (mass_.empty()) throw NumericError("lattice pmf needs at least one atom");
    prefix_.resize(mass_.size());
    CompensatedSum acc;
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      const double m = mass_[i];
      if (!(m >= 0.0) || !std::isfinite(m))
        throw NumericError("lattice pmf has a negative or non-finite mass");
      acc += m;
      prefix_[i] = acc.value();
    }
    total_ = acc.value();
    if (std::fabs(total_ - 1.0) > kMassTolerance)
      throw NumericError("lattice pmf mass sums to " + std::to_string(total_));
  }

  static LatticePMF point_mass(std::int64_t s, std::int64_t k) { return {s, k, {1.0}}; }

  std::int64_t s() const noexcept { return s_; }
  std::int64_t k_min() const noexcept { return k_min_; }
  std::int64_t k_max() const noexcept { return k_min_ + static_cast<std::int64_t>(mass_.size()) - 1; }
  std::size_t size() const noexcept { return mass_.size(); }
  std::span<const double> masses() const noexcept { return mass_; }
  double total() const noexcept { return total_; }

  double x(std::int64_t k) const noexcept {
    return static_cast<double>(k) / static_cast<double>(s_);
  }
  double mass(std::int64_t k) const noexcept {
    if (k < k_min_ || k > k_max()) return 0.0;
    return mass_[static_cast<std::size_t>(k - k_min_)];
  }
  // P(X <= k/s), clamped to [0,1].
  double cdf_index(std::int64_t k) const noexcept {
    if (k < k_min_) return 0.0;
    if (k >= k_max()) return 1.0;
    return std::min(1.0, prefix_[static_cast<std::size_t>(k - k_min_)]);
  }
  // P(X < k/s)
  double cdf_index_left(std::int64_t k) const noexcept { return cdf_index(k - 1); }

  // Largest k with k/s <= x.
  std::int64_t index_floor(double x) const noexcept {
    const double sd = static_cast<double>(s_);
    double kf = std::floor(x * sd);
    if (kf > 9.0e18) return INT64_MAX / 2;
    if (kf < -9.0e18) return INT64_MIN / 2;
    auto k = static_cast<std::int64_t>(kf);
    if (static_cast<double>(k + 1) / sd <= x) ++k;
    if (static_cast<double>(k) / sd > x) --k;
    return k;
  }

 private:
  std::int64_t s_;
  std::int64_t k_min_;
  std::vector<double> mass_;
  std::vector<double> prefix_;
  double total_ = 0.0;
};

// Right-continuous distribution function of the lattice pmf.
inline double cdf(const LatticePMF& pmf, double x) { return pmf.cdf_index(pmf.index_floor(x)); }

// ---------------------------------------------------------------------------
// Support bounds

struct SupportBound {
  std::int64_t q = 1;
  std::optional<Interval> clipped;
};

inline SupportBound support_q(const PerpetuitySpec& spec, std::int64_t n) {
  SupportBound sb;
  std::int64_t q = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::fabs(spec.mean_x))));
  const double a = spec.a_sup(), b = spec.b_sup();
  for (std::int64_t i = 1; i <= n; ++i) {
    const double next = std::ceil(a * static_cast<double>(q) + b);
    if (!(next < 9.0e15)) throw NumericError("support recursion overflows");
    q = std::max<std::int64_t>(1, static_cast<std::int64_t>(next));
  }
  sb.q = q;
  sb.clipped = spec.support_hint;
  return sb;
}

// Index range [lo, hi] the iterate at resolution s may occupy.
struct IndexRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::int64_t count() const noexcept { return hi - lo + 1; }
};

inline IndexRange target_range(const SupportBound& sb, std::int64_t s) {
  const double sd = static_cast<double>(s);
  if (sb.clipped) {
    return {static_cast<std::int64_t>(std::floor(sd * sb.clipped->lo)),
            static_cast<std::int64_t>(std::floor(sd * sb.clipped->hi))};
  }
  std::int64_t w = 0;
  if (!checked_mul(s, sb.q, w)) throw NumericError("support range overflows");
  return {-w, w};
}

// ---------------------------------------------------------------------------
// Kolmogorov distances

// sup_x |F_pmf(x) - ref(x)| for a continuous reference CDF. Between atoms the
// step function is flat and ref is monotone, so checking both one-sided
// limits at every atom is exact.
template <class Cdf>
double kolmogorov_vs(const LatticePMF& pmf, const Cdf& ref) {
  double worst = 0.0;
  double left = 0.0;
  for (std::int64_t k = pmf.k_min(); k <= pmf.k_max(); ++k) {
    const double g = ref(pmf.x(k));
    const double right = pmf.cdf_index(k);
    worst = std::max({worst, std::fabs(right - g), std::fabs(left - g)});
    left = right;
  }
  return worst;
}

// sup_x |F_a(x) - F_b(x)| between two lattice pmfs, possibly of different
// resolution. Both are right-continuous step functions, so the sup is attained
// at a jump point of one of them; atoms are merged by exact integer comparison.
inline double kolmogorov_between(const LatticePMF& a, const LatticePMF& b) {
  // Compare ka/a.s() with kb/b.s() exactly.
  auto cmp = [&](std::int64_t ka, std::int64_t kb) {
    const auto l = static_cast<__int128>(ka) * b.s(), r = static_cast<__int128>(kb) * a.s();
    return (l > r) - (l < r);
  };
  std::int64_t i = a.k_min(), j = b.k_min();
  double worst = 0.0;
  while (i <= a.k_max() || j <= b.k_max()) {
    bool take_a, take_b;
    if (i > a.k_max()) {
      take_a = false, take_b = true;
    } else if (j > b.k_max()) {
      take_a = true, take_b = false;
    } else if (const int c = cmp(i, j); c != 0) {
      take_a = c < 0, take_b = c > 0;
    } else {
      take_a = take_b = true;
    }
    // Evaluate both CDFs at the current jump point.
    const double fa = take_a ? a.cdf_index(i) : a.cdf_index(i - 1);
    const double fb = take_b ? b.cdf_index(j) : b.cdf_index(j - 1);
    worst = std::max(worst, std::fabs(fa - fb));
    if (take_a) ++i;
    if (take_b) ++j;
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Density estimate D[k] = s/(2d) * sum_{j=k-d+1}^{k+d} mass[j]

struct DensityEstimate {
  std::int64_t s = 1;
  std::int64_t d = 1;
  std::int64_t k_first = 0;
  std::vector<double> values;
  Interval domain;

  std::int64_t k_last() const noexcept { return k_first + static_cast<std::int64_t>(values.size()) - 1; }
  double delta() const noexcept { return static_cast<double>(d) / static_cast<double>(s); }
  double x(std::int64_t k) const noexcept { return static_cast<double>(k) / static_cast<double>(s); }
  double value(std::int64_t k) const noexcept {
    if (k < k_first || k > k_last()) return 0.0;
    return values[static_cast<std::size_t>(k - k_first)];
  }
  // Step density evaluated at x (constant on [k/s, (k+1)/s)).
  double at(double xv) const noexcept {
    return value(static_cast<std::int64_t>(std::floor(xv * static_cast<double>(s))));
  }
  double max_value() const noexcept {
    double m = 0.0;
    for (double v : values) m = std::max(m, v);
    return m;
  }
};

inline DensityEstimate extract_density(const LatticePMF& pmf, std::int64_t d) {
  if (d < 1) throw ConfigError("density window half-width d must be >= 1");
  if (d > static_cast<std::int64_t>(pmf.size()))
    throw ConfigError("averaging window exceeds support");
  DensityEstimate est;
  est.s = pmf.s();
  est.d = d;
  est.k_first = pmf.k_min() - d;
  const std::int64_t k_last = pmf.k_max() + d - 1;
  est.values.resize(static_cast<std::size_t>(k_last - est.k_first + 1));
  const double scale = static_cast<double>(pmf.s()) / (2.0 * static_cast<double>(d));
  for (std::int64_t k = est.k_first; k <= k_last; ++k) {
    const double w = pmf.cdf_index(k + d) - pmf.cdf_index(k - d);
    est.values[static_cast<std::size_t>(k - est.k_first)] = std::max(0.0, w) * scale;
  }
  est.domain = {pmf.x(est.k_first), pmf.x(k_last + 1)};
  return est;
}

// ---------------------------------------------------------------------------
// CSV emission, 17 significant digits

namespace detail {
inline void put_row(std::ostream& os, std::int64_t k, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%" PRId64 ",%.17g,%.17g", k, a, b);
  os << buf;
}
}  // namespace detail

inline void write_pmf_csv(std::ostream& os, const LatticePMF& pmf) {
  os << "k,x,mass,cdf\n";
  char buf[40];
  for (std::int64_t k = pmf.k_min(); k <= pmf.k_max(); ++k) {
    detail::put_row(os, k, pmf.x(k), pmf.mass(k));
    std::snprintf(buf, sizeof buf, ",%.17g\n", pmf.cdf_index(k));
    os << buf;
  }
}

inline void write_density_csv(std::ostream& os, const DensityEstimate& est) {
  os << "k,x,density\n";
  for (std::int64_t k = est.k_first; k <= est.k_last(); ++k) {
    detail::put_row(os, k, est.x(k), est.value(k));
    os << '\n';
  }
}

}  // namespace perpetua
