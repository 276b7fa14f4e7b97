/** @file iterator.hpp
 *  @brief The lattice fixed-point iteration X_n = [A^(n) X_{n-1} + b^(n)].
 *
 *  Each update scatters every (u-point, branch, atom) triple onto the new
 *  lattice. The u-loop is cut into a number of chunks that depends on s(n)
 *  only; chunks accumulate privately and are merged in ascending order, so the
 *  result is bit-identical for any thread count.
 */
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "perpetua/error.hpp"
#include "perpetua/lattice.hpp"
#include "perpetua/model.hpp"
#include "perpetua/numeric.hpp"

namespace perpetua {

struct StepStats {
  std::int64_t n = 0;
  std::int64_t s = 1;
  std::int64_t atoms = 1;
  std::uint64_t ops = 0;
  double pre_defect = 0.0;   // sum of masses - 1 before renormalisation
  double post_defect = 0.0;  // same after
  double seconds = 0.0;
};

struct IterationPlan {
  PerpetuitySpec spec;
  DiscretisationSchedule sched;
  std::int64_t n_steps = 1;
  std::optional<std::int64_t> snapshot_every;
  unsigned threads = 1;
  std::size_t memory_budget_bytes = std::size_t{2} << 30;
  std::function<void(const StepStats&)> progress;
};

struct IterationResult {
  LatticePMF final;
  std::vector<std::pair<std::int64_t, LatticePMF>> snapshots;
  std::uint64_t op_count = 0;
  std::vector<StepStats> steps;
};

inline LatticePMF initialize(const PerpetuitySpec& spec, const DiscretisationSchedule& sched) {
  const std::int64_t s0 = schedule_s(sched, 0);
  std::int64_t k = 0;
  if (!checked_floor(static_cast<double>(s0) * spec.mean_x, k))
    throw NumericError("initial atom out of range");
  return LatticePMF::point_mass(s0, k);
}

// Stored atoms of the iterate after step n (step 0 is a single atom).
inline IndexRange step_range(const PerpetuitySpec& spec, const DiscretisationSchedule& sched,
                             std::int64_t n) {
  return target_range(support_q(spec, n), schedule_s(sched, n));
}

namespace detail {

inline constexpr std::int64_t kMaxChunks = 64;
// Index slack (in atoms) tolerated when a target lands on the edge of the
// allowed range through floating-point ties.
inline constexpr double kEdgeSlack = 1e-6;

struct Lane {
  double a;  // slope in the atom offset t
  double c;  // intercept, relative to the chunk's first index
};

}  // namespace detail

inline LatticePMF update(const LatticePMF& prev, const PerpetuitySpec& spec,
                         const DiscretisationSchedule& sched, std::int64_t n, unsigned threads = 1,
                         StepStats* stats = nullptr) {
  if (n < 1) throw ConfigError("update: step index must be >= 1");
  const std::int64_t sp = schedule_s(sched, n - 1);
  if (prev.s() != sp) throw ConfigError("update: previous iterate has the wrong resolution");
  const std::int64_t s = schedule_s(sched, n);
  const IndexRange range = step_range(spec, sched, n);
  const double sd = static_cast<double>(s), spd = static_cast<double>(sp);

  const auto m = static_cast<std::int64_t>(prev.size());
  const double md = static_cast<double>(m - 1);
  const double kmin_prev = static_cast<double>(prev.k_min());
  const std::size_t nb = spec.branches.size();

  // Per-branch prescaled masses (w/s) * prev[j].
  std::vector<std::vector<double>> wm(nb, std::vector<double>(static_cast<std::size_t>(m)));
  for (std::size_t b = 0; b < nb; ++b) {
    const double f = spec.branches[b].weight / sd;
    auto pm = prev.masses();
    for (std::int64_t t = 0; t < m; ++t) wm[b][t] = pm[t] * f;
  }

  const std::int64_t chunks = std::min<std::int64_t>(s, detail::kMaxChunks);
  std::vector<double> total(static_cast<std::size_t>(range.count()), 0.0);

  struct ChunkOut {
    std::int64_t k0 = 0;
    std::vector<double> buf;
    std::string error;
  };

  auto run_chunk = [&](std::int64_t c, ChunkOut& out) {
    const std::int64_t i0 = c * s / chunks, i1 = (c + 1) * s / chunks;
    std::vector<detail::Lane> lanes;
    lanes.reserve(static_cast<std::size_t>((i1 - i0) * static_cast<std::int64_t>(nb)));
    double lo = INFINITY, hi = -INFINITY;
    for (std::int64_t i = i0; i < i1; ++i) {
      const double u = u_grid_point(i, s, sched.u_mode);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto& br = spec.branches[b].branch;
        const double a = sd * br.phi(u) / spd;
        const double c0 = a * kmin_prev + sd * br.psi(u);
        lanes.push_back({a, c0});
        lo = std::min({lo, c0, a * md + c0});
        hi = std::max({hi, c0, a * md + c0});
      }
    }
    if (!(lo >= static_cast<double>(range.lo) - detail::kEdgeSlack) ||
        !(hi < static_cast<double>(range.hi) + 1.0 + detail::kEdgeSlack)) {
      out.error = "update: mass escapes the support at step " + std::to_string(n) +
                  " (spec and support hint are inconsistent)";
      return;
    }
    out.k0 = std::max(range.lo, static_cast<std::int64_t>(std::floor(lo)));
    const double k0d = static_cast<double>(out.k0);
    // Shift intercepts so indices start at 0 and find the largest index with
    // exactly the arithmetic used in the hot loop.
    std::int64_t top = 0;
    for (auto& ln : lanes) {
      ln.c -= k0d;
      const double e0 = ln.c, e1 = ln.a * md + ln.c;
      top = std::max({top, static_cast<std::int64_t>(std::max(e0, 0.0)),
                      static_cast<std::int64_t>(std::max(e1, 0.0))});
    }
    out.buf.assign(static_cast<std::size_t>(top + 1), 0.0);
    double* __restrict acc = out.buf.data();
    // Lanes whose whole index span is nonnegative take the fast path: indices
    // are computed a block at a time (vectorisable), then four lanes of the
    // same branch scatter together so their accumulator updates overlap. The
    // order of additions depends on the chunk layout only.
    std::vector<std::vector<std::size_t>> fast(nb);
    std::size_t lane = 0;
    for (std::int64_t i = i0; i < i1; ++i) {
      for (std::size_t b = 0; b < nb; ++b, ++lane) {
        const double a = lanes[lane].a, cc = lanes[lane].c;
        if (cc >= 0.0 && a * md + cc >= 0.0) {
          fast[b].push_back(lane);
          continue;
        }
        const double* __restrict w = wm[b].data();
        for (std::int64_t t = 0; t < m; ++t) {
          const double y = a * static_cast<double>(t) + cc;
          acc[y > 0.0 ? static_cast<std::int64_t>(y) : 0] += w[t];
        }
      }
    }
    constexpr std::int64_t kBlock = 128;
    alignas(64) std::int64_t idx[4][kBlock];
    for (std::size_t b = 0; b < nb; ++b) {
      const double* __restrict w = wm[b].data();
      const auto& fl = fast[b];
      for (std::size_t f = 0; f < fl.size(); f += 4) {
        const std::size_t width = std::min<std::size_t>(4, fl.size() - f);
        for (std::int64_t t0 = 0; t0 < m; t0 += kBlock) {
          const std::int64_t len = std::min(kBlock, m - t0);
          for (std::size_t q = 0; q < width; ++q) {
            const double a = lanes[fl[f + q]].a, cc = lanes[fl[f + q]].c;
            std::int64_t* __restrict ix = idx[q];
            for (std::int64_t k = 0; k < len; ++k)
              ix[k] = static_cast<std::int64_t>(a * static_cast<double>(t0 + k) + cc);
          }
          const double* __restrict wb = w + t0;
          if (width == 4) {
            for (std::int64_t k = 0; k < len; ++k) {
              const double x = wb[k];
              acc[idx[0][k]] += x;
              acc[idx[1][k]] += x;
              acc[idx[2][k]] += x;
              acc[idx[3][k]] += x;
            }
          } else {
            for (std::size_t q = 0; q < width; ++q)
              for (std::int64_t k = 0; k < len; ++k) acc[idx[q][k]] += wb[k];
          }
        }
      }
    }
  };

  const unsigned workers = std::max(1u, threads);
  std::vector<ChunkOut> outs(std::min<std::int64_t>(chunks, workers));
  for (std::int64_t c0 = 0; c0 < chunks; c0 += static_cast<std::int64_t>(outs.size())) {
    const auto batch = std::min<std::int64_t>(static_cast<std::int64_t>(outs.size()), chunks - c0);
    if (batch == 1) {
      run_chunk(c0, outs[0]);
    } else {
      std::vector<std::thread> pool;
      for (std::int64_t q = 1; q < batch; ++q)
        pool.emplace_back(run_chunk, c0 + q, std::ref(outs[static_cast<std::size_t>(q)]));
      run_chunk(c0, outs[0]);
      for (auto& th : pool) th.join();
    }
    for (std::int64_t q = 0; q < batch; ++q) {
      auto& o = outs[static_cast<std::size_t>(q)];
      if (!o.error.empty()) throw NumericError(o.error);
      for (std::size_t idx = 0; idx < o.buf.size(); ++idx) {
        const std::int64_t k = std::min(range.hi, o.k0 + static_cast<std::int64_t>(idx));
        total[static_cast<std::size_t>(k - range.lo)] += o.buf[idx];
      }
    }
  }

  const double sum = compensated_sum(total);
  if (!(sum > 0.0)) throw NumericError("update: all mass vanished");
  const double inv = 1.0 / sum;
  for (double& x : total) x *= inv;
  const double post = compensated_sum(total);
  if (stats) {
    stats->n = n;
    stats->s = s;
    stats->atoms = range.count();
    stats->ops = static_cast<std::uint64_t>(s) * nb * static_cast<std::uint64_t>(m);
    stats->pre_defect = sum - 1.0;
    stats->post_defect = post - 1.0;
  }
  return LatticePMF(s, range.lo, std::move(total));
}

// Inner-loop trip count predicted from the schedule and support alone.
inline std::uint64_t op_count_model(const PerpetuitySpec& spec, const DiscretisationSchedule& sched,
                                    std::int64_t n_steps) {
  if (n_steps < 1) throw ConfigError("op_count_model: N must be >= 1");
  std::uint64_t total = 0;
  std::uint64_t atoms = 1;
  for (std::int64_t k = 1; k <= n_steps; ++k) {
    total += static_cast<std::uint64_t>(schedule_s(sched, k)) * spec.branches.size() * atoms;
    atoms = static_cast<std::uint64_t>(step_range(spec, sched, k).count());
  }
  return total;
}

inline IterationResult run(const IterationPlan& plan) {
  if (plan.n_steps < 1) throw ConfigError("iteration needs at least one step");
  if (plan.snapshot_every && *plan.snapshot_every < 1)
    throw ConfigError("snapshot interval must be >= 1");
  validate(plan.spec);
  {
    const auto atoms = static_cast<double>(step_range(plan.spec, plan.sched, plan.n_steps).count());
    const double arrays = 6.0 + plan.spec.branches.size() + std::max(1u, plan.threads);
    if (atoms * 8.0 * arrays > static_cast<double>(plan.memory_budget_bytes))
      throw ConfigError("lattice at N=" + std::to_string(plan.n_steps) +
                        " exceeds the memory budget");
  }

  using clock = std::chrono::steady_clock;
  LatticePMF cur = initialize(plan.spec, plan.sched);
  std::vector<std::pair<std::int64_t, LatticePMF>> snaps;
  std::vector<StepStats> steps;
  std::uint64_t ops = 0;
  for (std::int64_t n = 1; n <= plan.n_steps; ++n) {
    StepStats st;
    const auto t0 = clock::now();
    cur = update(cur, plan.spec, plan.sched, n, plan.threads, &st);
    st.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    ops += st.ops;
    steps.push_back(st);
    if (plan.progress) plan.progress(st);
    if (plan.snapshot_every && n % *plan.snapshot_every == 0 && n != plan.n_steps)
      snaps.emplace_back(n, cur);
  }
  if (plan.snapshot_every) snaps.emplace_back(plan.n_steps, cur);
  return IterationResult{std::move(cur), std::move(snaps), ops, std::move(steps)};
}

}  // namespace perpetua
