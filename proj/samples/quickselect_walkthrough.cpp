// Approximates the Quickselect limit law on a small lattice and prints the
// certificate next to a Monte-Carlo cross-check.

#include <cstdio>

#include "perpetua/perpetua.hpp"

int main() {
  using namespace perpetua;
  const auto spec = quickselect_spec();
  const auto sched = DiscretisationSchedule::polynomial(3);
  const std::int64_t n = 20;

  const auto result = run(IterationPlan{spec, sched, n});
  const auto kol = optimize_p(spec, sched, n, quickselect::density_bound_ledger().global_sup);
  std::printf("s(%lld) = %lld, %zu atoms, %llu inner-loop ops\n", static_cast<long long>(n),
              static_cast<long long>(result.final.s()), result.final.size(),
              static_cast<unsigned long long>(result.op_count));
  std::printf("certified Kolmogorov distance %.4g (p = %d)\n", kol.bound, kol.p_used);

  oracle::McConfig mc;
  mc.samples = 200000;
  const auto sample = oracle::sample(spec, mc);
  const double gap = oracle::max_cdf_gap(oracle::EmpiricalCdf(sample.samples), result.final, 0.0, 1.0);
  std::printf("Monte-Carlo CDF gap %.4g (DKW band %.4g)\n", gap, oracle::dkw_band(mc.samples, 0.999));

  const auto density = quickselect::corrected_density(extract_density(result.final, 20), quickselect::f_zero(1e-12));
  std::printf("density near 0: %.4f (exact f(0) = %.9f)\n", density.value(0), quickselect::f_zero(1e-12));
  return 0;
}
