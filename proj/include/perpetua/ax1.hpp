/** @file ax1.hpp
 *  @brief Perpetuities X = AX + 1 with A >= 0: density sup and modulus of
 *  f_X transferred from those of f_A, and the A ~ U[0,q] preset pipeline.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "perpetua/bounds.hpp"
#include "perpetua/error.hpp"
#include "perpetua/iterator.hpp"
#include "perpetua/model.hpp"

namespace perpetua::ax1 {

// Bounded cadlag density of A: sup norm, modulus of the jump-removed part and
// the jumps (location > 0, signed height).
struct ADensityDescriptor {
  double sup = 0.0;
  ModulusSpec modulus_continuous;
  std::vector<std::pair<double, double>> jumps;
};

inline void validate(const ADensityDescriptor& d) {
  if (!(d.sup >= 0.0) || !std::isfinite(d.sup)) throw ConfigError("A-density sup must be finite and >= 0");
  std::vector<double> loc;
  for (auto [s, h] : d.jumps) {
    if (!(s > 0.0)) throw ConfigError("A-density jump locations must be strictly positive");
    if (!std::isfinite(h)) throw ConfigError("A-density jump height must be finite");
    loc.push_back(s);
  }
  std::sort(loc.begin(), loc.end());
  if (std::adjacent_find(loc.begin(), loc.end()) != loc.end())
    throw ConfigError("A-density jump locations must be distinct");
}

// ||f_X||_inf <= ||f_A||_inf
inline double transfer_sup(const ADensityDescriptor& d) {
  validate(d);
  return d.sup;
}

// Delta_X(delta) <= Delta_{fbar_A}(delta) + ||f_X|| sum |jump| delta / location
inline ModulusSpec transfer_modulus(const ADensityDescriptor& d, double density_sup_x) {
  validate(d);
  if (!(density_sup_x >= 0.0)) throw ConfigError("transfer_modulus: density sup must be >= 0");
  double c = 0.0;
  for (auto [s, h] : d.jumps) c += std::fabs(h) / s;
  return d.modulus_continuous + ModulusSpec::linear(density_sup_x * c);
}

// A ~ U[0,q]: density 1/q on [0,q), a single jump of -1/q at q, flat otherwise.
inline ADensityDescriptor uniform_descriptor(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("uniform A needs q in (0,1); q = 0 is atomic");
  return {1.0 / q, ModulusSpec::zero(), {{q, -1.0 / q}}};
}

// X = qU X + 1. Moments from E X^k (1 - E A^k) = sum_{j<k} C(k,j) E A^j E X^j.
inline PerpetuitySpec uniform_spec(double q) {
  if (!(q >= 0.0 && q < 1.0)) throw ConfigError("ax1-uniform needs 0 <= q < 1");
  PerpetuitySpec spec;
  std::ostringstream name;
  name << "ax1-uniform(" << q << ")";
  spec.name = name.str();
  spec.branches = {{1.0, make_branch(Coefficient::affine(q, 0.0), Coefficient::constant(1.0))}};
  spec.a_norm = [q](int p) { return q * std::pow(1.0 / (p + 1.0), 1.0 / p); };
  spec.support_hint = Interval{1.0, 1.0 / (1.0 - q)};
  spec.mean_x = 1.0 / (1.0 - q / 2.0);  // E X = E A E X + 1, E A = q/2
  std::vector<double> m{1.0};
  for (int k = 1; k <= 64; ++k) {
    double acc = 0.0, binom = 1.0;
    for (int j = 0; j < k; ++j) {
      acc += binom * std::pow(q, j) / (j + 1.0) * m[static_cast<std::size_t>(j)];
      binom = binom * (k - j) / (j + 1.0);
    }
    m.push_back(acc / (1.0 - std::pow(q, k) / (k + 1.0)));
  }
  spec.moments = {MomentProvider::Kind::ExactRecursion, [m](int p) {
                    if (p < 1 || p > 64) throw ConfigError("ax1 x_norm: p must be in [1, 64]");
                    return std::pow(m[static_cast<std::size_t>(p)], 1.0 / p);
                  }};
  validate(spec);
  return spec;
}

struct Ax1Result {
  IterationResult run;
  double density_sup = 0.0;
  ModulusSpec modulus;
  std::optional<KolmogorovCertificate> kolmogorov;
  std::optional<DensityCertificate> density;
};

// Full pipeline for A ~ U[0,q], b = 1. For q = 0 the fixed point is the point
// mass at 1 and no density certificate exists.
inline Ax1Result run_uniform(double q, const DiscretisationSchedule& sched, std::int64_t n_steps,
                             unsigned threads = 1) {
  IterationPlan plan{uniform_spec(q), sched, n_steps, std::nullopt, threads};
  Ax1Result r{run(plan), 0.0, ModulusSpec::zero(), std::nullopt, std::nullopt};
  if (q == 0.0) return r;
  const auto desc = uniform_descriptor(q);
  r.density_sup = transfer_sup(desc);
  r.modulus = transfer_modulus(desc, r.density_sup);
  r.kolmogorov = optimize_p(plan.spec, sched, n_steps, r.density_sup);
  r.density = density_certificate(*r.kolmogorov, r.modulus, r.run.final.s(),
                                  DChoice::automatic(static_cast<std::int64_t>(r.run.final.size())));
  return r;
}

}  // namespace perpetua::ax1
