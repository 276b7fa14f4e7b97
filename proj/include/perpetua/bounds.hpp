/** @file bounds.hpp
 *  @brief Certified error arithmetic: L_p bounds for the lattice iteration,
 *  their conversion to Kolmogorov and density sup-norm bounds, and the
 *  density-sup bootstrap.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "perpetua/error.hpp"
#include "perpetua/model.hpp"
#include "perpetua/numeric.hpp"

namespace perpetua {

struct LpBound {
  enum class Mode { DirectSum, ClosedFormPoly, ClosedFormExp };
  int p = 1;
  std::int64_t n = 0;
  double value = 0.0;
  Mode mode = Mode::DirectSum;
  double xi = 0.0;
};

struct KolmogorovCertificate {
  std::int64_t n = 0;
  double bound = 1.0;
  int p_used = 1;
  double density_sup_used = 0.0;
  LpBound lp;
};

// ||X - X0||_p <= ||X||_p + |X0| with X0 = floor(E X).
inline double x_minus_x0_norm(const PerpetuitySpec& spec, int p) {
  return spec.moments.x_norm(p) + std::fabs(std::floor(spec.mean_x));
}

namespace detail {

inline std::vector<double> inverse_resolutions(const DiscretisationSchedule& sched, std::int64_t n) {
  std::vector<double> inv(static_cast<std::size_t>(n + 1));
  for (std::int64_t k = 0; k <= n; ++k)
    inv[static_cast<std::size_t>(k)] = 1.0 / static_cast<double>(schedule_s(sched, k));
  return inv;
}

inline LpBound direct_sum(const PerpetuitySpec& spec, std::int64_t n, int p, double xi,
                          const ErrorConstants& ec, const std::vector<double>& inv_s) {
  const double xn = spec.moments.x_norm(p);
  const double coeff = ec.c_x + ec.c_a * xn + ec.c_b;
  CompensatedSum acc;
  double pw = 1.0;
  for (std::int64_t i = 0; i < n; ++i) {
    acc += pw * inv_s[static_cast<std::size_t>(n - i)];
    pw *= xi;
  }
  LpBound b;
  b.p = p;
  b.n = n;
  b.xi = xi;
  b.mode = LpBound::Mode::DirectSum;
  b.value = std::pow(xi, static_cast<double>(n)) * x_minus_x0_norm(spec, p) + coeff * acc.value();
  return b;
}

}  // namespace detail

// xi^n ||X - X0||_p + (C_X + C_A ||X||_p + C_b) sum_{i<n} xi^i / s(n-i)
inline LpBound lp_bound_direct(const PerpetuitySpec& spec, const DiscretisationSchedule& sched,
                               std::int64_t n, int p, const ErrorConstants& ec) {
  if (n < 0) throw ConfigError("lp_bound_direct: negative n");
  const double xi = xi_bound(spec, sched, p);
  return detail::direct_sum(spec, n, p, xi, ec, detail::inverse_resolutions(sched, n));
}

inline LpBound lp_bound_direct(const PerpetuitySpec& spec, const DiscretisationSchedule& sched,
                               std::int64_t n, int p) {
  return lp_bound_direct(spec, sched, n, p, error_constants(spec, sched));
}

// C_r with l_p(X_n, X) <= C_r / n^r.
inline double rate_constant_poly(const PerpetuitySpec& spec, const DiscretisationSchedule& sched,
                                 int r, int p) {
  if (r < 1) throw ConfigError("rate_constant_poly: r must be >= 1");
  const double xi = xi_bound(spec, sched, p);
  const auto ec = error_constants(spec, sched);
  const double k = ec.c_x + ec.c_b + ec.c_a * spec.moments.x_norm(p);
  const double rd = r;
  const double first = std::pow(rd, rd) * x_minus_x0_norm(spec, p) /
                       std::pow(std::exp(1.0) * std::log(1.0 / xi), rd);
  return first + std::tgamma(rd + 1.0) * k / std::pow(1.0 - xi, rd + 1.0);
}

// C_gamma with l_p(X_n, X) <= C_gamma / gamma^n. Since s(1) = 1 < gamma the
// last summand can exceed its gamma^-n share; max(gamma, 1/(1-xi gamma))
// covers that and equals 1/(1-xi gamma) in the usual regime.
inline double rate_constant_exp(const PerpetuitySpec& spec, const DiscretisationSchedule& sched,
                                double gamma, int p) {
  const double xi = xi_bound(spec, sched, p);
  if (!(gamma > 1.0)) throw ConfigError("rate_constant_exp: gamma must exceed 1");
  if (!(xi * gamma < 1.0))
    throw NumericError("schedule too aggressive for contraction factor (xi*gamma >= 1)");
  const auto ec = error_constants(spec, sched);
  const double k = ec.c_x + ec.c_b + ec.c_a * spec.moments.x_norm(p);
  return x_minus_x0_norm(spec, p) + k * std::max(gamma, 1.0 / (1.0 - xi * gamma));
}

inline LpBound lp_bound_closed_form(const PerpetuitySpec& spec, const DiscretisationSchedule& sched,
                                    std::int64_t n, int p) {
  LpBound b;
  b.p = p;
  b.n = n;
  b.xi = xi_bound(spec, sched, p);
  if (sched.kind == DiscretisationSchedule::Kind::Polynomial) {
    b.mode = LpBound::Mode::ClosedFormPoly;
    b.value = rate_constant_poly(spec, sched, sched.r, p) /
              std::pow(static_cast<double>(n), static_cast<double>(sched.r));
  } else {
    b.mode = LpBound::Mode::ClosedFormExp;
    b.value = rate_constant_exp(spec, sched, sched.gamma, p) /
              std::pow(sched.gamma, static_cast<double>(n));
  }
  return b;
}

// Fill-Janson: rho <= ((p+1)^{1/p} ||f||_inf l_p)^{p/(p+1)}, clamped to 1.
inline KolmogorovCertificate kolmogorov_from_lp(const LpBound& lp, double density_sup) {
  if (!(density_sup > 0.0)) throw ConfigError("kolmogorov_from_lp: density sup must be positive");
  if (!(lp.value >= 0.0)) throw NumericError("kolmogorov_from_lp: negative L_p bound");
  const double p = lp.p;
  KolmogorovCertificate k;
  k.n = lp.n;
  k.p_used = lp.p;
  k.density_sup_used = density_sup;
  k.lp = lp;
  k.bound = std::min(1.0, std::pow(std::pow(p + 1.0, 1.0 / p) * density_sup * lp.value, p / (p + 1.0)));
  return k;
}

struct PRange {
  int lo = 1;
  int hi = 64;
};

inline KolmogorovCertificate optimize_p(const PerpetuitySpec& spec,
                                        const DiscretisationSchedule& sched, std::int64_t n,
                                        double density_sup, PRange range,
                                        const ErrorConstants& ec) {
  if (range.lo < 1 || range.hi < range.lo) throw ConfigError("optimize_p: bad p range");
  const auto inv_s = detail::inverse_resolutions(sched, n);
  std::optional<KolmogorovCertificate> best;
  for (int p = range.lo; p <= range.hi; ++p) {
    const auto xi = try_xi_bound(spec, sched, p);
    if (!xi) continue;
    const auto lp = detail::direct_sum(spec, n, p, *xi, ec, inv_s);
    const auto k = kolmogorov_from_lp(lp, density_sup);
    if (!best || k.bound < best->bound) best = k;
  }
  if (!best) throw NumericError("no p in range gives a contraction");
  return *best;
}

inline KolmogorovCertificate optimize_p(const PerpetuitySpec& spec,
                                        const DiscretisationSchedule& sched, std::int64_t n,
                                        double density_sup, PRange range = {}) {
  return optimize_p(spec, sched, n, density_sup, range, error_constants(spec, sched));
}

// ---------------------------------------------------------------------------
// Moduli of continuity

// Delta(delta) = sum_i c_i delta^alpha_i + tabulated(delta); the table is
// linearly interpolated through (0,0) and is +inf beyond its last point.
class ModulusSpec {
 public:
  enum class Kind { Zero, Holder, Linear, Tabulated, Composite };

  static ModulusSpec zero() { return {}; }
  static ModulusSpec holder(double c, double alpha) {
    if (!(c >= 0.0) || !(alpha > 0.0 && alpha <= 1.0))
      throw ConfigError("Holder modulus needs c >= 0 and alpha in (0,1]");
    ModulusSpec m;
    if (c > 0.0) m.terms_.push_back({c, alpha});
    return m;
  }
  static ModulusSpec linear(double c) { return holder(c, 1.0); }
  static ModulusSpec tabulated(std::vector<std::pair<double, double>> points) {
    ModulusSpec m;
    double pd = 0.0, pv = 0.0;
    for (auto [d, v] : points) {
      if (!(d > pd) || !(v >= pv) || !std::isfinite(v))
        throw ConfigError("tabulated modulus must be increasing in delta and nondecreasing");
      pd = d, pv = v;
    }
    if (points.empty()) throw ConfigError("tabulated modulus needs at least one point");
    m.table_ = std::move(points);
    return m;
  }

  ModulusSpec operator+(const ModulusSpec& o) const {
    ModulusSpec m = *this;
    for (auto t : o.terms_) m.add_term(t.first, t.second);
    if (!o.table_.empty()) {
      if (!m.table_.empty()) throw ConfigError("cannot add two tabulated moduli");
      m.table_ = o.table_;
    }
    return m;
  }

  double operator()(double delta) const {
    if (!(delta > 0.0)) return 0.0;
    double v = 0.0;
    for (auto [c, a] : terms_) v += c * std::pow(delta, a);
    if (!table_.empty()) v += table_value(delta);
    return v;
  }

  Kind kind() const {
    if (!table_.empty()) return terms_.empty() ? Kind::Tabulated : Kind::Composite;
    if (terms_.empty()) return Kind::Zero;
    if (terms_.size() > 1) return Kind::Composite;
    return terms_[0].second == 1.0 ? Kind::Linear : Kind::Holder;
  }
  const std::vector<std::pair<double, double>>& terms() const { return terms_; }
  bool has_table() const { return !table_.empty(); }

  std::string describe() const {
    std::ostringstream os;
    bool first = true;
    for (auto [c, a] : terms_) {
      if (!first) os << " + ";
      os << c << (a == 1.0 ? "*d" : "*d^" + std::to_string(a));
      first = false;
    }
    if (!table_.empty()) os << (first ? "" : " + ") << "table[" << table_.size() << "]";
    if (first && table_.empty()) os << "0";
    return os.str();
  }

 private:
  void add_term(double c, double a) {
    for (auto& t : terms_)
      if (t.second == a) {
        t.first += c;
        return;
      }
    if (c > 0.0) terms_.push_back({c, a});
  }

  double table_value(double delta) const {
    double pd = 0.0, pv = 0.0;
    for (auto [d, v] : table_) {
      if (delta <= d) return pv + (v - pv) * (delta - pd) / (d - pd);
      pd = d, pv = v;
    }
    return std::numeric_limits<double>::infinity();
  }

  std::vector<std::pair<double, double>> terms_;  // (c, alpha)
  std::vector<std::pair<double, double>> table_;  // (delta, value)
};

struct DensityCertificate {
  std::int64_t n = 0;
  std::int64_t s = 1;
  double delta = 0.0;
  std::int64_t d = 1;
  double bound = 0.0;
  ModulusSpec modulus;
};

struct DChoice {
  std::optional<std::int64_t> fixed;  // empty = choose d automatically
  std::int64_t d_max = 0;             // automatic scan limit, 0 = s
  static DChoice automatic(std::int64_t d_max = 0) { return {std::nullopt, d_max}; }
  static DChoice at(std::int64_t d) { return {d, 0}; }
};

// sup |f_n - f| <= rho / delta + Delta(delta) with delta = d/s.
inline DensityCertificate density_certificate(const KolmogorovCertificate& kol,
                                              const ModulusSpec& modulus, std::int64_t s,
                                              DChoice choice = DChoice::automatic()) {
  if (s < 1) throw ConfigError("density_certificate: s must be positive");
  const double sd = static_cast<double>(s);
  auto value = [&](std::int64_t d) {
    const double delta = static_cast<double>(d) / sd;
    return kol.bound / delta + modulus(delta);
  };
  DensityCertificate out;
  out.n = kol.n;
  out.s = s;
  out.modulus = modulus;
  std::int64_t d = 1;
  if (choice.fixed) {
    d = *choice.fixed;
    if (d < 1) throw ConfigError("density_certificate: d must be >= 1");
  } else {
    const std::int64_t d_max = choice.d_max > 0 ? choice.d_max : s;
    if (kol.bound <= 0.0) {
      d = 1;
    } else if (!modulus.has_table()) {
      // d/d(delta) of rho/delta + sum c delta^a has the sign of
      // -rho + sum a c delta^(a+1), which is increasing: bisect its root.
      auto slope = [&](double delta) {
        double v = -kol.bound;
        for (auto [c, a] : modulus.terms()) v += a * c * std::pow(delta, a + 1.0);
        return v;
      };
      double lo = 0.0, hi = 1.0;
      while (slope(hi) < 0.0 && hi < 1e12) hi *= 2.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) < 0.0 ? lo : hi) = mid;
      }
      const double d_star = hi * sd;
      if (d_star < 0.5) throw CoarseLatticeError("lattice too coarse for density extraction");
      const double clamped = std::min(d_star, static_cast<double>(d_max));
      const auto d_lo = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(clamped)));
      const auto d_hi = std::min<std::int64_t>(d_max, d_lo + 1);
      d = value(d_hi) < value(d_lo) ? d_hi : d_lo;
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (std::int64_t c = 1; c <= d_max; ++c) {
        const double v = value(c);
        if (v < best) best = v, d = c;
      }
    }
  }
  out.d = d;
  out.delta = static_cast<double>(d) / sd;
  out.bound = value(d);
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap of the density sup-norm

struct BootstrapStep {
  double sup_in = 0.0;
  KolmogorovCertificate kolmogorov;
  DensityCertificate density;
  double observed_max = 0.0;
  double sup_out = 0.0;
};

struct BootstrapResult {
  KolmogorovCertificate kolmogorov;
  DensityCertificate density;
  double final_sup = 0.0;
  std::vector<BootstrapStep> chain;
};

struct BootstrapOptions {
  double tol = 1e-4;
  int max_iterations = 100;
  PRange p_range{};
  std::optional<ErrorConstants> constants;  // default: error_constants(spec, sched)
  std::int64_t d_max = 0;
};

// B -> best Kolmogorov bound at ||f|| <= B -> density bound -> B' = observed + bound.
// observed(d) is the maximum of the computed density with window d.
inline BootstrapResult bootstrap_density_bound(
    const PerpetuitySpec& spec, const DiscretisationSchedule& sched, std::int64_t n,
    const std::function<ModulusSpec(double)>& modulus_family, double initial_sup,
    const std::function<double(std::int64_t)>& observed, BootstrapOptions opt = {}) {
  const auto ec = opt.constants ? *opt.constants : error_constants(spec, sched);
  const std::int64_t s = schedule_s(sched, n);
  BootstrapResult res;
  double b = initial_sup;
  for (int it = 0; it < opt.max_iterations; ++it) {
    BootstrapStep st;
    st.sup_in = b;
    st.kolmogorov = optimize_p(spec, sched, n, b, opt.p_range, ec);
    st.density = density_certificate(st.kolmogorov, modulus_family(b), s, DChoice::automatic(opt.d_max));
    st.observed_max = observed(st.density.d);
    if (st.observed_max > b)
      throw NumericError("bootstrap: observed density maximum exceeds the current sup bound");
    st.sup_out = st.observed_max + st.density.bound;
    res.chain.push_back(st);
    res.kolmogorov = st.kolmogorov;
    res.density = st.density;
    if (!(st.sup_out < b)) {
      // No improvement possible; the incoming bound stands.
      res.final_sup = b;
      return res;
    }
    res.final_sup = st.sup_out;
    if (b - st.sup_out < opt.tol) return res;
    b = st.sup_out;
  }
  throw NumericError("bootstrap did not converge within " + std::to_string(opt.max_iterations) +
                     " iterations");
}

inline BootstrapResult bootstrap_density_bound(
    const PerpetuitySpec& spec, const DiscretisationSchedule& sched, std::int64_t n,
    const std::function<ModulusSpec(double)>& modulus_family, double initial_sup,
    double observed_max, BootstrapOptions opt = {}) {
  if (!(initial_sup >= observed_max))
    throw ConfigError("bootstrap: initial sup must be at least the observed maximum");
  return bootstrap_density_bound(spec, sched, n, modulus_family, initial_sup,
                                 [observed_max](std::int64_t) { return observed_max; }, opt);
}

}  // namespace perpetua
