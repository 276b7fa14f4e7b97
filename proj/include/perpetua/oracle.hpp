/** @file oracle.hpp
 *  @brief Monte-Carlo ground truth: truncated backward series
 *  X = b_1 + A_1 b_2 + A_1 A_2 b_3 + ..., empirical CDFs and DKW bands.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include "perpetua/error.hpp"
#include "perpetua/lattice.hpp"
#include "perpetua/model.hpp"

namespace perpetua::oracle {

inline constexpr const char* kGeneratorName = "mt19937_64 streams seeded by splitmix64";
inline constexpr std::uint64_t kDefaultSeed = 0x243F6A8885A308D3ULL;
// Fixed stream count so the samples do not depend on the thread count.
inline constexpr int kStreams = 16;

struct McConfig {
  std::int64_t samples = 1000000;
  int truncation = 0;  // 0: derive from truncation_target
  std::uint64_t rng_seed = kDefaultSeed;
  double truncation_target = 1e-6;
  unsigned threads = 1;
};

struct McResult {
  std::vector<double> samples;
  int truncation = 0;
  double truncation_error = 0.0;  // L_1 bound on the dropped tail
  std::uint64_t seed = 0;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double unit_double(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// ||A||_1^M ||b||_1 / (1 - ||A||_1)
inline double truncation_error(const PerpetuitySpec& spec, int m) {
  const double a = spec.a_norm(1);
  double b = 0.0;
  for (const auto& wb : spec.branches) b += wb.weight * abs_moment(wb.branch.psi, 1.0);
  return std::pow(a, m) * b / (1.0 - a);
}

inline int truncation_for(const PerpetuitySpec& spec, double target) {
  const double a = spec.a_norm(1);
  if (!(a < 1.0)) throw NumericError("oracle: ||A||_1 >= 1");
  int m = 1;
  while (truncation_error(spec, m) > target) {
    if (++m > 100000) throw NumericError("oracle: truncation length out of range");
  }
  return m;
}

inline McResult sample(const PerpetuitySpec& spec, const McConfig& cfg) {
  if (cfg.samples < 1) throw ConfigError("oracle: samples must be >= 1");
  McResult out;
  out.seed = cfg.rng_seed;
  out.truncation = cfg.truncation > 0 ? cfg.truncation : truncation_for(spec, cfg.truncation_target);
  out.truncation_error = truncation_error(spec, out.truncation);
  out.samples.resize(static_cast<std::size_t>(cfg.samples));

  std::vector<double> cum;
  double c = 0.0;
  for (const auto& wb : spec.branches) cum.push_back(c += wb.weight);
  cum.back() = 1.0;

  auto run_stream = [&](int stream) {
    std::uint64_t st = cfg.rng_seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(stream + 1));
    std::mt19937_64 gen(splitmix64(st));
    const std::int64_t i0 = cfg.samples * stream / kStreams;
    const std::int64_t i1 = cfg.samples * (stream + 1) / kStreams;
    for (std::int64_t i = i0; i < i1; ++i) {
      double x = 0.0, prod = 1.0;
      for (int k = 0; k < out.truncation; ++k) {
        std::size_t b = 0;
        if (cum.size() > 1) {
          const double v = unit_double(gen);
          while (b + 1 < cum.size() && v >= cum[b]) ++b;
        }
        const double u = unit_double(gen);
        const auto& br = spec.branches[b].branch;
        x += prod * br.psi(u);
        prod *= br.phi(u);
      }
      out.samples[static_cast<std::size_t>(i)] = x;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, kStreams));
  if (workers == 1) {
    for (int s = 0; s < kStreams; ++s) run_stream(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int s = static_cast<int>(w); s < kStreams; s += static_cast<int>(workers)) run_stream(s);
      });
    for (auto& t : pool) t.join();
  }
  return out;
}

// Half-width of the DKW confidence band for an empirical CDF.
inline double dkw_band(std::int64_t samples, double confidence) {
  if (samples < 1) throw ConfigError("dkw_band: samples must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("dkw_band: confidence must lie in (0,1)");
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * static_cast<double>(samples)));
}

class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> xs) : xs_(std::move(xs)) {
    if (xs_.empty()) throw ConfigError("empirical CDF needs samples");
    std::sort(xs_.begin(), xs_.end());
  }
  double operator()(double x) const {
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    return static_cast<double>(it - xs_.begin()) / static_cast<double>(xs_.size());
  }
  double min() const { return xs_.front(); }
  double max() const { return xs_.back(); }
  std::size_t size() const { return xs_.size(); }
  const std::vector<double>& sorted() const { return xs_; }

 private:
  std::vector<double> xs_;
};

// Largest |F_emp - F_pmf| on an evenly spaced grid over [lo, hi].
inline double max_cdf_gap(const EmpiricalCdf& emp, const LatticePMF& pmf, double lo, double hi,
                          int points = 1000) {
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / std::max(1, points - 1);
    worst = std::max(worst, std::fabs(emp(x) - cdf(pmf, x)));
  }
  return worst;
}

// Classical two-sided KS statistic against a continuous CDF.
template <class Cdf>
double ks_statistic(const EmpiricalCdf& emp, const Cdf& ref) {
  const auto& xs = emp.sorted();
  const double n = static_cast<double>(xs.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = ref(xs[i]);
    worst = std::max({worst, std::fabs(static_cast<double>(i + 1) / n - f),
                      std::fabs(f - static_cast<double>(i) / n)});
  }
  return worst;
}

inline void write_samples_csv(std::ostream& os, const std::vector<double>& xs) {
  os << "x\n";
  char buf[40];
  for (double x : xs) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x);
    os << buf;
  }
}

}  // namespace perpetua::oracle
