// Hand-rolled generators for property tests. Every property runs a fixed
// number of cases from a fixed seed so failures are reproducible; the failing
// case index is part of the assertion message.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "perpetua/perpetua.hpp"

namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(g_() >> 11) * 0x1.0p-53;
  }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(g_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool coin(double p = 0.5) { return uniform() < p; }
  std::mt19937_64& engine() { return g_; }

 private:
  std::mt19937_64 g_;
};

// Runs body(rng, case_index) for `cases` cases.
template <class F>
void for_all(std::uint64_t seed, int cases, F&& body) {
  Rng rng(seed);
  for (int i = 0; i < cases; ++i) body(rng, i);
}

inline std::string at(int i) { return "case " + std::to_string(i); }

// Random lattice pmf with s in [1, 400] and up to 300 atoms. Some atoms are
// zero so prefix sums see flat stretches.
inline perpetua::LatticePMF pmf(Rng& r) {
  const auto s = r.integer(1, 400);
  const auto n = r.integer(1, 300);
  std::vector<double> m(static_cast<std::size_t>(n));
  double total = 0.0;
  for (auto& x : m) {
    x = r.coin(0.2) ? 0.0 : r.uniform(0.0, 1.0);
    total += x;
  }
  if (total == 0.0) m[0] = total = 1.0;
  for (auto& x : m) x /= total;
  perpetua::CompensatedSum acc;
  for (double x : m) acc += x;
  m.back() += 1.0 - acc.value();
  if (m.back() < 0.0) m.back() = 0.0;
  return {s, r.integer(-2 * s, 2 * s), std::move(m)};
}

// Affine coefficient with |phi| <= bound on [0,1].
inline perpetua::Coefficient affine(Rng& r, double bound) {
  const double a = r.uniform(-bound, bound);
  const double b = r.uniform(-bound, bound);
  return perpetua::Coefficient::affine(b - a, a);
}

// Random one- or two-branch spec built from affine and builtin coefficients,
// always contracting in L_1. A support hint is attached when psi >= 0 and
// phi >= 0, in which case X lies in [0, sup psi / (1 - sup phi)].
inline perpetua::PerpetuitySpec spec(Rng& r) {
  using perpetua::Coefficient;
  const int nb = r.coin() ? 1 : 2;
  std::vector<perpetua::WeightedBranch> bs;
  bool nonneg = true;
  double sup_phi = 0.0, sup_psi = 0.0;
  for (int i = 0; i < nb; ++i) {
    Coefficient phi = Coefficient::constant(0.0), psi = Coefficient::constant(0.0);
    switch (r.integer(0, 3)) {
      case 0: phi = Coefficient::identity(); break;
      case 1: phi = Coefficient::half_one_plus_u(); break;
      case 2: phi = Coefficient::affine(r.uniform(0.0, 0.5), r.uniform(0.0, 0.4)); break;
      default: {
        phi = affine(r, 0.9);
        nonneg = false;
      }
    }
    switch (r.integer(0, 2)) {
      case 0: psi = Coefficient::u_one_minus_u(r.uniform(0.1, 2.0)); break;
      case 1: psi = Coefficient::constant(r.uniform(0.0, 1.0)); break;
      default: {
        psi = affine(r, 1.0);
        nonneg = false;
      }
    }
    sup_phi = std::max(sup_phi, phi.sup());
    sup_psi = std::max(sup_psi, psi.sup());
    bs.push_back({nb == 1 ? 1.0 : 0.5, perpetua::make_branch(phi, psi)});
  }
  std::optional<perpetua::Interval> hint;
  if (nonneg && sup_phi < 1.0) hint = perpetua::Interval{0.0, sup_psi / (1.0 - sup_phi)};
  return perpetua::make_spec("random", std::move(bs), hint);
}

inline perpetua::DiscretisationSchedule schedule(Rng& r) {
  const auto mode = r.coin() ? perpetua::UMode::Floor : perpetua::UMode::Symmetric;
  if (r.coin(0.7)) return perpetua::DiscretisationSchedule::polynomial(static_cast<int>(r.integer(1, 3)), mode);
  return perpetua::DiscretisationSchedule::exponential(r.uniform(1.2, 2.5), mode);
}

}  // namespace gen
