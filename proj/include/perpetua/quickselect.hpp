/** @file quickselect.hpp
 *  @brief Analytic facts about the Quickselect limit X = UX + U(1-U):
 *  exact moments, tail bound, f(0), the integral-equation kernel, the
 *  a-priori density bound 18 and the Hoelder-1/2 modulus.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "perpetua/bounds.hpp"
#include "perpetua/error.hpp"
#include "perpetua/lattice.hpp"
#include "perpetua/numeric.hpp"

namespace perpetua::quickselect {

using Rational = boost::multiprecision::cpp_rational;

// Highest moment kept as an exact rational; beyond this the recursion runs in
// long double (the terms are tiny and all positive).
inline constexpr int kExactMoments = 30;

struct MomentTable {
  std::vector<Rational> exact;  // E X^k, k = 0..min(K, kExactMoments)
  std::vector<double> values;   // E X^k, k = 0..K
};

// E X^k = (k+1)! (k-1)! sum_{j<k} E X^j / (j! (2k-j+1)!)
inline MomentTable moments(int K) {
  if (K < 0) throw ConfigError("moments: K must be >= 0");
  using boost::multiprecision::cpp_int;
  MomentTable t;
  const int ke = std::min(K, kExactMoments);
  std::vector<cpp_int> fact(2 * ke + 2);
  fact[0] = 1;
  for (std::size_t i = 1; i < fact.size(); ++i) fact[i] = fact[i - 1] * static_cast<unsigned>(i);
  t.exact.push_back(Rational(1));
  for (int k = 1; k <= ke; ++k) {
    Rational sum(0);
    for (int j = 0; j < k; ++j) sum += t.exact[j] / Rational(fact[j] * fact[2 * k - j + 1]);
    t.exact.push_back(sum * Rational(fact[k + 1] * fact[k - 1]));
  }
  for (const auto& r : t.exact) t.values.push_back(static_cast<double>(r));
  for (int k = ke + 1; k <= K; ++k) {
    long double sum = 0.0L, comp = 0.0L;
    const long double lk = std::lgamma(static_cast<long double>(k) + 2) +
                           std::lgamma(static_cast<long double>(k));
    for (int j = 0; j < k; ++j) {
      const long double c = std::exp(lk - std::lgamma(static_cast<long double>(j) + 1) -
                                     std::lgamma(static_cast<long double>(2 * k - j) + 2));
      const long double term = c * t.values[static_cast<std::size_t>(j)] - comp;
      const long double next = sum + term;
      comp = (next - sum) - term;
      sum = next;
    }
    t.values.push_back(static_cast<double>(sum));
  }
  return t;
}

// ||X||_p for integer p in [1, 64] from a cached table.
inline double x_norm(int p) {
  static const MomentTable table = moments(64);
  if (p < 1 || p > 64) throw ConfigError("quickselect x_norm: p must be in [1, 64]");
  return std::pow(table.values[static_cast<std::size_t>(p)], 1.0 / p);
}

// P(X >= 1 - eps) <= min_{k <= kappa} 2^{(k^2-k)/4} eps^{k/2}
inline double tail_bound(double eps, int kappa) {
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("tail_bound: eps must lie in (0,1)");
  if (kappa < 1) throw ConfigError("tail_bound: kappa must be >= 1");
  double best = 1.0;
  for (int k = 1; k <= kappa; ++k) {
    const double kd = k;
    best = std::min(best, std::pow(2.0, (kd * kd - kd) / 4.0) * std::pow(eps, kd / 2.0));
  }
  return best;
}

struct SeriesValue {
  double value = 0.0;
  double error = 0.0;  // first omitted term, bounds the remainder
  int terms = 0;
};

// f(0) = E[1/(1+X)] = sum_k (-1)^k E X^k, truncated once the next term is <= tol.
inline SeriesValue f_zero_series(double tol) {
  if (!(tol > 0.0)) throw ConfigError("f_zero: tol must be positive");
  static const MomentTable table = moments(400);
  CompensatedSum acc;
  for (int k = 0; k < static_cast<int>(table.values.size()); ++k) {
    const double term = table.values[static_cast<std::size_t>(k)];
    if (term <= tol) return {acc.value(), term, k};
    acc += (k % 2 == 0 ? term : -term);
  }
  throw NumericError("f_zero: tolerance below the reach of the moment table");
}

inline double f_zero(double tol) { return f_zero_series(tol).value; }

// Kernel of the integral equation and its lower integration limit.
inline double g_kernel(double x, double t) {
  const double q = (1.0 + x) * (1.0 + x) - 4.0 * t;
  if (!(q > 0.0)) throw ConfigError("g_kernel: requires (1+x)^2 > 4t");
  return 1.0 / std::sqrt(q);
}

inline double p_t(double t) { return 2.0 * std::sqrt(t) - 1.0; }

// Antiderivative of g(., t) in x.
inline double g_antiderivative(double x, double t) {
  const double q = std::max(0.0, (1.0 + x) * (1.0 + x) - 4.0 * t);
  return std::log(1.0 + x + std::sqrt(q));
}

inline double h_function(double t) {
  const double r = std::sqrt(t), w = 1.0 - r;
  return std::log(1.0 + (w * w + w * std::sqrt(1.0 + 6.0 * r + t)) / (4.0 * r));
}

struct DensityBoundLedger {
  std::vector<double> b;      // b_0 = 0, b_i = ((1 + b_{i-1})/2)^2
  std::vector<double> alpha;  // left endpoint of I_n
  std::vector<double> h;      // h(alpha_n)
  std::vector<int> m;         // M_0, M_1, ...
  double global_sup = 0.0;
  bool tail_certified = false;  // every later M_n stays <= global_sup
};

inline DensityBoundLedger density_bound_ledger() {
  DensityBoundLedger L;
  L.b.push_back(0.0);
  for (int i = 1; i <= 8; ++i) L.b.push_back(std::pow((1.0 + L.b.back()) / 2.0, 2.0));
  const double r2 = 4.0 * std::sqrt(2.0), r17 = std::sqrt(17.0);
  L.m.push_back(static_cast<int>(std::ceil(r2 * std::log(1.0 + (1.0 + r17) / 8.0) + 16.0 / r17)));
  L.alpha.push_back(0.0);
  L.h.push_back(0.0);
  // I_1 = (b_1, (b_1+b_2)/2], I_2 = ((b_1+b_2)/2, b_2], I_3 = (b_2, (b_2+b_3)/2], ...
  for (int n = 1; n / 2 + 1 < static_cast<int>(L.b.size()); ++n) {
    const auto i = static_cast<std::size_t>(n / 2);
    const double a = (n % 2 == 1) ? L.b[i + 1] : 0.5 * (L.b[i] + L.b[i + 1]);
    const int prev = std::max(L.m[n - 1], n >= 2 ? L.m[n - 2] : 0);
    const double hv = h_function(a);
    L.alpha.push_back(a);
    L.h.push_back(hv);
    L.m.push_back(static_cast<int>(std::ceil(2.0 * hv * prev + r2)));
    if (L.m[n] < L.m[n - 1]) break;
  }
  L.global_sup = *std::max_element(L.m.begin(), L.m.end());
  // h is decreasing, so beyond the computed intervals 2 h(alpha_n) <= 2 h(last
  // alpha); if that keeps the recursion at or below the max, induction closes.
  const double h_tail = L.h.back();
  L.tail_certified = std::ceil(2.0 * h_tail * L.global_sup + r2) <= L.global_sup;
  return L;
}

inline ModulusSpec holder_modulus(double density_sup) {
  if (!(density_sup > 0.0)) throw ConfigError("holder_modulus: density sup must be positive");
  return ModulusSpec::holder(9.0 * density_sup, 0.5);
}

// Density estimate with the known shape imposed: f(0) on [0, delta) and zero
// outside [0, 1]. Both changes keep the certified error valid.
inline DensityEstimate corrected_density(const DensityEstimate& est, double f0) {
  DensityEstimate out = est;
  for (std::int64_t k = est.k_first; k <= est.k_last(); ++k) {
    double& v = out.values[static_cast<std::size_t>(k - est.k_first)];
    if (k < 0 || k >= est.s)
      v = 0.0;
    else if (k < est.d)
      v = f0;
  }
  return out;
}

struct ResidualOptions {
  int grid_points = 101;  // t-grid on (0, 1), plus the row t = 0
  double t_margin = 0.01;
};

// sup_t |f(t) - (2 int_{p_t}^t g f + int_t^1 g f)| for a step density on
// [0,1], integrating g exactly cell by cell through its antiderivative. The
// t = 0 row compares against the series value of f(0).
inline double integral_residual(const DensityEstimate& est, ResidualOptions opt = {}) {
  const double sd = static_cast<double>(est.s);
  auto rhs = [&](double t) {
    const double lo = std::max(0.0, p_t(t));
    CompensatedSum acc;
    const auto k_lo = std::max<std::int64_t>(est.k_first, static_cast<std::int64_t>(std::floor(lo * sd)));
    const auto k_hi = std::min<std::int64_t>(est.k_last(), est.s - 1);
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      const double f = est.value(k);
      if (f == 0.0) continue;
      const double x0 = std::max(lo, static_cast<double>(k) / sd);
      const double x1 = std::min(1.0, static_cast<double>(k + 1) / sd);
      if (!(x1 > x0)) continue;
      // weight 2 on [p_t, t], 1 on [t, 1]
      if (x1 <= t) {
        acc += 2.0 * f * (g_antiderivative(x1, t) - g_antiderivative(x0, t));
      } else if (x0 >= t) {
        acc += f * (g_antiderivative(x1, t) - g_antiderivative(x0, t));
      } else {
        acc += 2.0 * f * (g_antiderivative(t, t) - g_antiderivative(x0, t));
        acc += f * (g_antiderivative(x1, t) - g_antiderivative(t, t));
      }
    }
    return acc.value();
  };
  double worst = std::fabs(f_zero(1e-12) - rhs(0.0));
  for (int i = 0; i < opt.grid_points; ++i) {
    const double t = opt.t_margin + (1.0 - 2.0 * opt.t_margin) * i / std::max(1, opt.grid_points - 1);
    worst = std::max(worst, std::fabs(est.at(t) - rhs(t)));
  }
  return worst;
}

}  // namespace perpetua::quickselect
