/** @file model.hpp
 *  @brief Problem description for perpetuities X = AX + b: coefficient
 *  branches, lattice schedules and moment metadata.
 *
 *  (A, b) is written as a finite mixture of branches (phi(U), psi(U)) with
 *  U uniform on [0,1]. Coefficients come from a closed set of piecewise
 *  polynomials so their Lipschitz and sup metadata can be trusted.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "perpetua/error.hpp"
#include "perpetua/numeric.hpp"

namespace perpetua {

// Piecewise polynomial on [0,1]. Piece i covers [breaks[i], breaks[i+1]) and
// holds coefficients c0 + c1 u + c2 u^2 + ... in the global variable u.
class Coefficient {
 public:
  static Coefficient constant(double c) {
    Coefficient f({0.0, 1.0}, {{c}}, 0.0, std::fabs(c));
    f.name_ = "const(" + fmt(c) + ")";
    f.abs_monotone_convex_ = true;
    return f;
  }

  static Coefficient affine(double slope, double intercept) {
    Coefficient f({0.0, 1.0}, {{intercept, slope}}, std::fabs(slope),
                  std::max(std::fabs(intercept), std::fabs(intercept + slope)));
    f.name_ = "affine(" + fmt(slope) + "," + fmt(intercept) + ")";
    // |phi| is affine (hence convex) and nondecreasing iff phi keeps one sign
    // and moves away from zero.
    const double a = intercept, b = intercept + slope;
    f.abs_monotone_convex_ = (a >= 0.0 && b >= a) || (a <= 0.0 && b <= a);
    return f;
  }

  static Coefficient identity() {
    Coefficient f = affine(1.0, 0.0);
    f.name_ = "identity";
    return f;
  }

  // (1+u)/2
  static Coefficient half_one_plus_u() {
    Coefficient f = affine(0.5, 0.5);
    f.name_ = "half_one_plus_u";
    return f;
  }

  // scale * u (1-u)
  static Coefficient u_one_minus_u(double scale = 1.0) {
    Coefficient f({0.0, 1.0}, {{0.0, scale, -scale}}, std::fabs(scale), std::fabs(scale) / 4.0);
    f.name_ = scale == 1.0 ? "u_one_minus_u" : "u_one_minus_u(" + fmt(scale) + ")";
    return f;
  }

  // User-defined piecewise polynomial. The declared constants are spot-checked
  // on a dense grid and rejected when the function visibly violates them.
  static Coefficient piecewise(std::vector<double> breaks, std::vector<std::vector<double>> pieces,
                               double lipschitz, double sup) {
    Coefficient f(std::move(breaks), std::move(pieces), lipschitz, sup);
    f.name_ = "piecewise";
    f.check_declared_constants();
    return f;
  }

  double operator()(double u) const noexcept {
    std::size_t i = 0;
    if (pieces_.size() > 1) {
      auto it = std::upper_bound(breaks_.begin() + 1, breaks_.end() - 1, u);
      i = static_cast<std::size_t>(it - (breaks_.begin() + 1));
    }
    const auto& c = pieces_[i];
    double v = 0.0;
    for (auto k = c.size(); k-- > 0;) v = v * u + c[k];
    return v;
  }

  double lipschitz() const noexcept { return lip_; }
  double sup() const noexcept { return sup_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& breaks() const noexcept { return breaks_; }
  // True when |f| is nondecreasing and convex on [0,1]; then both lattice
  // discretisations of U can only shrink ||f(U)||_p.
  bool abs_monotone_convex() const noexcept { return abs_monotone_convex_; }

 private:
  Coefficient(std::vector<double> breaks, std::vector<std::vector<double>> pieces, double lip,
              double sup)
      : breaks_(std::move(breaks)), pieces_(std::move(pieces)), lip_(lip), sup_(sup) {
    if (breaks_.size() < 2 || pieces_.size() + 1 != breaks_.size())
      throw ConfigError("piecewise coefficient: need breaks.size() == pieces.size() + 1");
    if (breaks_.front() != 0.0 || breaks_.back() != 1.0)
      throw ConfigError("piecewise coefficient: breaks must start at 0 and end at 1");
    for (std::size_t i = 1; i < breaks_.size(); ++i)
      if (!(breaks_[i] > breaks_[i - 1]))
        throw ConfigError("piecewise coefficient: breaks must be strictly increasing");
    for (const auto& c : pieces_) {
      if (c.empty()) throw ConfigError("piecewise coefficient: empty piece");
      for (double x : c)
        if (!std::isfinite(x)) throw ConfigError("piecewise coefficient: non-finite coefficient");
    }
    if (!(lip_ >= 0.0) || !(sup_ >= 0.0) || !std::isfinite(lip_) || !std::isfinite(sup_))
      throw ConfigError("coefficient constants must be finite and nonnegative");
  }

  void check_declared_constants() const {
    constexpr int kGrid = 20000;
    const double slack = 1e-9 * (1.0 + sup_);
    double prev = (*this)(0.0);
    for (int i = 0; i <= kGrid; ++i) {
      const double u = static_cast<double>(i) / kGrid;
      const double v = (*this)(u);
      if (!std::isfinite(v)) throw ConfigError("piecewise coefficient evaluates to non-finite");
      if (std::fabs(v) > sup_ + slack)
        throw ConfigError("piecewise coefficient exceeds its declared sup at u=" + fmt(u));
      if (i > 0 && std::fabs(v - prev) > lip_ / kGrid + slack)
        throw ConfigError("piecewise coefficient exceeds its declared Lipschitz constant near u=" +
                          fmt(u));
      prev = v;
    }
  }

  static std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  }

  std::vector<double> breaks_;
  std::vector<std::vector<double>> pieces_;
  double lip_ = 0.0;
  double sup_ = 0.0;
  bool abs_monotone_convex_ = false;
  std::string name_;
};

struct CoefficientBranch {
  Coefficient phi;
  Coefficient psi;
  double lip_phi = 0.0;
  double lip_psi = 0.0;
  double sup_phi = 0.0;
  double sup_psi = 0.0;
  // ||phi([U]_n)||_p <= ||phi(U)||_p under both u-discretisations.
  bool monotone_dominated = false;
};

inline CoefficientBranch make_branch(Coefficient phi, Coefficient psi) {
  CoefficientBranch b{phi, psi, phi.lipschitz(), psi.lipschitz(), phi.sup(), psi.sup(),
                      phi.abs_monotone_convex()};
  return b;
}

struct WeightedBranch {
  double weight = 1.0;
  CoefficientBranch branch;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct MomentProvider {
  enum class Kind { ExactRecursion, ClosedForm, SupportBound, ContractionBound };
  Kind kind = Kind::SupportBound;
  std::function<double(int)> x_norm;  // p -> ||X||_p
};

inline const char* to_string(MomentProvider::Kind k) {
  switch (k) {
    case MomentProvider::Kind::ExactRecursion: return "exact-recursion";
    case MomentProvider::Kind::ClosedForm: return "closed-form";
    case MomentProvider::Kind::SupportBound: return "support-bound";
    case MomentProvider::Kind::ContractionBound: return "contraction-bound";
  }
  return "?";
}

struct PerpetuitySpec {
  std::string name;
  std::vector<WeightedBranch> branches;
  std::function<double(int)> a_norm;  // p -> ||A||_p
  std::optional<Interval> support_hint;
  double mean_x = 0.0;
  MomentProvider moments;

  double a_sup() const {
    double m = 0.0;
    for (const auto& wb : branches) m = std::max(m, wb.branch.sup_phi);
    return m;
  }
  double b_sup() const {
    double m = 0.0;
    for (const auto& wb : branches) m = std::max(m, wb.branch.sup_psi);
    return m;
  }
  bool all_dominated() const {
    return std::all_of(branches.begin(), branches.end(),
                       [](const WeightedBranch& wb) { return wb.branch.monotone_dominated; });
  }
};

namespace detail {

// 10-point Gauss-Legendre on [-1,1].
inline constexpr std::array<double, 5> kGLx = {0.1488743389816312, 0.4333953941292472,
                                               0.6794095682990244, 0.8650633666889845,
                                               0.9739065285171717};
inline constexpr std::array<double, 5> kGLw = {0.2955242247147529, 0.2692667193099963,
                                               0.2190863625159820, 0.1494513491505806,
                                               0.0666713443086881};

// Integral over [0,1] of g, split at the given breakpoints, 64 panels each.
template <class G>
double integrate01(const G& g, const std::vector<double>& breaks) {
  constexpr int kPanels = 64;
  CompensatedSum acc;
  for (std::size_t piece = 0; piece + 1 < breaks.size(); ++piece) {
    const double a = breaks[piece], b = breaks[piece + 1];
    const double h = (b - a) / kPanels;
    for (int k = 0; k < kPanels; ++k) {
      const double mid = a + (k + 0.5) * h, half = 0.5 * h;
      for (std::size_t i = 0; i < kGLx.size(); ++i) {
        acc += kGLw[i] * half * g(mid - half * kGLx[i]);
        acc += kGLw[i] * half * g(mid + half * kGLx[i]);
      }
    }
  }
  return acc.value();
}

inline std::vector<double> merged_breaks(const Coefficient& f, const Coefficient& g) {
  std::vector<double> b = f.breaks();
  b.insert(b.end(), g.breaks().begin(), g.breaks().end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

}  // namespace detail

// E|f(U)|^p by quadrature.
inline double abs_moment(const Coefficient& f, double p) {
  return detail::integrate01([&](double u) { return std::pow(std::fabs(f(u)), p); }, f.breaks());
}

inline double mean_of(const Coefficient& f) {
  return detail::integrate01([&](double u) { return f(u); }, f.breaks());
}

inline void validate(const PerpetuitySpec& spec) {
  if (spec.branches.empty()) throw ConfigError("spec '" + spec.name + "': no branches");
  double total = 0.0;
  for (const auto& wb : spec.branches) {
    if (!(wb.weight > 0.0 && wb.weight <= 1.0))
      throw ConfigError("spec '" + spec.name + "': branch weight outside (0,1]");
    total += wb.weight;
    if (wb.branch.sup_phi > 1.0)
      throw ConfigError("spec '" + spec.name + "': sup|phi| must not exceed 1");
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw ConfigError("spec '" + spec.name + "': branch weights do not sum to 1");
  if (!spec.a_norm || !spec.moments.x_norm)
    throw ConfigError("spec '" + spec.name + "': missing norm providers");
  if (!(spec.a_norm(1) < 1.0 - 1e-12))
    throw ConfigError("spec '" + spec.name + "': ||A||_1 >= 1, no contraction");
  if (spec.support_hint) {
    const auto& h = *spec.support_hint;
    if (!(h.lo <= h.hi)) throw ConfigError("spec '" + spec.name + "': empty support hint");
    if (spec.mean_x < h.lo - 1e-12 || spec.mean_x > h.hi + 1e-12)
      throw ConfigError("spec '" + spec.name + "': E X outside the support hint");
  }
}

// Builds a spec for user-supplied branches. ||A||_p, E X and ||X||_p come from
// quadrature; ||X||_p is the smaller of the support bound (when a hint is
// given) and the Minkowski bound ||b||_p / (1 - ||A||_p).
inline PerpetuitySpec make_spec(std::string name, std::vector<WeightedBranch> branches,
                                std::optional<Interval> hint) {
  PerpetuitySpec spec;
  spec.name = std::move(name);
  spec.branches = std::move(branches);
  spec.support_hint = hint;

  auto bs = spec.branches;
  spec.a_norm = [bs](int p) {
    double m = 0.0;
    for (const auto& wb : bs) m += wb.weight * abs_moment(wb.branch.phi, p);
    return std::pow(m, 1.0 / p);
  };
  auto b_norm = [bs](int p) {
    double m = 0.0;
    for (const auto& wb : bs) m += wb.weight * abs_moment(wb.branch.psi, p);
    return std::pow(m, 1.0 / p);
  };

  double ea = 0.0, eb = 0.0;
  for (const auto& wb : spec.branches) {
    ea += wb.weight * mean_of(wb.branch.phi);
    eb += wb.weight * mean_of(wb.branch.psi);
  }
  if (!(ea < 1.0)) throw ConfigError("spec '" + spec.name + "': E A >= 1");
  spec.mean_x = eb / (1.0 - ea);

  auto a_norm = spec.a_norm;
  auto contraction = [a_norm, b_norm](int p) {
    const double a = a_norm(p);
    if (!(a < 1.0)) return std::numeric_limits<double>::infinity();
    return b_norm(p) / (1.0 - a);
  };
  if (hint) {
    const double r = std::max(std::fabs(hint->lo), std::fabs(hint->hi));
    spec.moments = {MomentProvider::Kind::SupportBound,
                    [r, contraction](int p) { return std::min(r, contraction(p)); }};
  } else {
    spec.moments = {MomentProvider::Kind::ContractionBound, contraction};
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// Discretisation schedules

enum class UMode { Floor, Symmetric };

struct DiscretisationSchedule {
  enum class Kind { Polynomial, Exponential };
  Kind kind = Kind::Polynomial;
  int r = 3;
  double gamma = 2.0;
  UMode u_mode = UMode::Floor;

  static DiscretisationSchedule polynomial(int r, UMode mode = UMode::Floor) {
    if (r < 1) throw ConfigError("polynomial schedule needs r >= 1");
    DiscretisationSchedule s;
    s.kind = Kind::Polynomial;
    s.r = r;
    s.u_mode = mode;
    return s;
  }
  static DiscretisationSchedule exponential(double gamma, UMode mode = UMode::Floor) {
    if (!(gamma > 1.0) || !std::isfinite(gamma))
      throw ConfigError("exponential schedule needs gamma > 1");
    DiscretisationSchedule s;
    s.kind = Kind::Exponential;
    s.gamma = gamma;
    s.u_mode = mode;
    return s;
  }

  std::string describe() const {
    std::ostringstream os;
    if (kind == Kind::Polynomial)
      os << "n^" << r;
    else
      os << gamma << "^n";
    if (u_mode == UMode::Symmetric) os << " (symmetric)";
    return os.str();
  }
};

// Largest resolution we accept: k/s must stay exact in a double.
inline constexpr std::int64_t kMaxResolution = std::int64_t{1} << 53;

// s(0) = s(1) = 1; n^r, or ceil(gamma^n) for n >= 2.
inline std::int64_t schedule_s(const DiscretisationSchedule& sched, std::int64_t n) {
  if (n < 0) throw ConfigError("schedule_s: negative step");
  if (n <= 1) return 1;
  if (sched.kind == DiscretisationSchedule::Kind::Polynomial) {
    std::int64_t s = 1;
    for (int i = 0; i < sched.r; ++i)
      if (!checked_mul(s, n, s) || s > kMaxResolution)
        throw NumericError("schedule_s: n^r overflows the lattice index range");
    return s;
  }
  const long double v = std::ceil(std::pow(static_cast<long double>(sched.gamma),
                                           static_cast<long double>(n)));
  if (!(v <= static_cast<long double>(kMaxResolution)))
    throw NumericError("schedule_s: gamma^n overflows the lattice index range");
  return static_cast<std::int64_t>(v);
}

inline double discretise_u(double u, std::int64_t s, UMode mode) {
  const double sd = static_cast<double>(s);
  double k = std::floor(sd * u);
  // s * u can round across a grid point; snap to the largest k with k/s <= u.
  if (k / sd > u) k -= 1.0;
  else if ((k + 1.0) / sd <= u) k += 1.0;
  if (mode == UMode::Floor) return k / sd;
  return (2.0 * k + 1.0) / (2.0 * sd);
}

// i-th point of the u-grid at resolution s.
inline double u_grid_point(std::int64_t i, std::int64_t s, UMode mode) {
  const double sd = static_cast<double>(s);
  if (mode == UMode::Floor) return static_cast<double>(i) / sd;
  return (2.0 * static_cast<double>(i) + 1.0) / (2.0 * sd);
}

inline double u_error_factor(UMode mode) { return mode == UMode::Floor ? 1.0 : 0.5; }

// ---------------------------------------------------------------------------
// Error constants and contraction factor

struct ErrorConstants {
  double c_a = 0.0;
  double c_b = 0.0;
  double c_x = 1.0;
};

inline ErrorConstants error_constants(const PerpetuitySpec& spec,
                                      const DiscretisationSchedule& sched) {
  const double cu = u_error_factor(sched.u_mode);
  ErrorConstants c;
  for (const auto& wb : spec.branches) {
    c.c_a = std::max(c.c_a, wb.branch.lip_phi * cu);
    c.c_b = std::max(c.c_b, wb.branch.lip_psi * cu);
  }
  c.c_x = 1.0;
  return c;
}

// Uniform bound on ||A^(n)||_p over n >= 1, or nullopt if it is not < 1.
inline std::optional<double> try_xi_bound(const PerpetuitySpec& spec,
                                          const DiscretisationSchedule& sched, int p) {
  if (p < 1) throw ConfigError("xi_bound: p must be >= 1");
  const double a = spec.a_norm(p);
  double xi = a;
  if (!spec.all_dominated()) {
    // n = 1 has a single u-point; evaluate it exactly. For n >= 2 the
    // discretisation moves A by at most C_A / s(n) <= C_A / s(2).
    const double u0 = u_grid_point(0, 1, sched.u_mode);
    double m = 0.0;
    for (const auto& wb : spec.branches) m += wb.weight * std::pow(std::fabs(wb.branch.phi(u0)), p);
    const double first = std::pow(m, 1.0 / p);
    const double rest = a + error_constants(spec, sched).c_a / static_cast<double>(schedule_s(sched, 2));
    xi = std::max(first, rest);
  }
  if (!(xi < 1.0)) return std::nullopt;
  return xi;
}

inline double xi_bound(const PerpetuitySpec& spec, const DiscretisationSchedule& sched, int p) {
  auto xi = try_xi_bound(spec, sched, p);
  if (!xi) throw NumericError("not a contraction at p=" + std::to_string(p));
  return *xi;
}

}  // namespace perpetua
