/** @file presets.hpp
 *  @brief Named problem instances with the density facts each one needs for
 *  certification.
 */
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "perpetua/ax1.hpp"
#include "perpetua/bounds.hpp"
#include "perpetua/model.hpp"
#include "perpetua/quickselect.hpp"

namespace perpetua {

// X = UX + U(1-U) on [0,1].
inline PerpetuitySpec quickselect_spec() {
  PerpetuitySpec spec;
  spec.name = "quickselect";
  spec.branches = {{1.0, make_branch(Coefficient::identity(), Coefficient::u_one_minus_u())}};
  spec.a_norm = [](int p) { return std::pow(1.0 / (p + 1.0), 1.0 / p); };
  spec.support_hint = Interval{0.0, 1.0};
  spec.mean_x = 1.0 / 3.0;
  spec.moments = {MomentProvider::Kind::ExactRecursion, quickselect::x_norm};
  validate(spec);
  return spec;
}

// X = (1+U)/2 X + G(1-U)/2 with G ~ Bernoulli(1/2) independent; X ~ Beta(2,2).
inline PerpetuitySpec interval_splitting_spec() {
  PerpetuitySpec spec;
  spec.name = "interval-splitting";
  spec.branches = {
      {0.5, make_branch(Coefficient::half_one_plus_u(), Coefficient::affine(-0.5, 0.5))},
      {0.5, make_branch(Coefficient::half_one_plus_u(), Coefficient::constant(0.0))}};
  spec.a_norm = [](int p) {
    return std::pow((std::pow(2.0, p + 1) - 1.0) / (std::pow(2.0, p) * (p + 1.0)), 1.0 / p);
  };
  spec.support_hint = Interval{0.0, 1.0};
  spec.mean_x = 0.5;
  // E X^p = 6 / ((p+2)(p+3)) for Beta(2,2)
  spec.moments = {MomentProvider::Kind::ClosedForm,
                  [](int p) { return std::pow(6.0 / ((p + 2.0) * (p + 3.0)), 1.0 / p); }};
  validate(spec);
  return spec;
}

inline double beta22_cdf(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

inline double beta22_pdf(double x) { return (x < 0.0 || x > 1.0) ? 0.0 : 6.0 * x * (1.0 - x); }

// What certification needs to know about f_X for a preset.
struct DensityFacts {
  double sup = 0.0;                                  // proven ||f_X||_inf
  std::function<ModulusSpec(double)> modulus_for_sup;  // B -> modulus valid when ||f|| <= B
  bool bootstrap = false;  // sup can be sharpened with the observed maximum
  std::optional<double> left_value;  // f(0) when the support starts at 0 with a known value
};

struct Preset {
  PerpetuitySpec spec;
  std::optional<DensityFacts> density;
  std::function<double(double)> exact_cdf;  // empty when unknown
  std::function<double(double)> exact_pdf;
};

inline Preset find_preset(const std::string& name) {
  if (name == "quickselect") {
    return {quickselect_spec(),
            DensityFacts{quickselect::density_bound_ledger().global_sup, quickselect::holder_modulus,
                         true, quickselect::f_zero(1e-12)},
            {},
            {}};
  }
  if (name == "interval-splitting") {
    // |f'| <= 6 for 6x(1-x)
    return {interval_splitting_spec(),
            DensityFacts{1.5, [](double) { return ModulusSpec::linear(6.0); }, false, std::nullopt},
            beta22_cdf,
            beta22_pdf};
  }
  const std::string prefix = "ax1-uniform(";
  if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + 1 && name.back() == ')') {
    const std::string arg = name.substr(prefix.size(), name.size() - prefix.size() - 1);
    double q = 0.0;
    std::size_t used = 0;
    try {
      q = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != arg.size()) throw ConfigError("bad ax1-uniform parameter '" + arg + "'");
    Preset p{ax1::uniform_spec(q), std::nullopt, {}, {}};
    if (q > 0.0) {
      const auto desc = ax1::uniform_descriptor(q);
      const double sup = ax1::transfer_sup(desc);
      p.density = DensityFacts{sup, [desc](double b) { return ax1::transfer_modulus(desc, b); },
                               false, std::nullopt};
    }
    return p;
  }
  throw ConfigError("unknown preset '" + name + "' (quickselect, interval-splitting, ax1-uniform(q))");
}

}  // namespace perpetua
