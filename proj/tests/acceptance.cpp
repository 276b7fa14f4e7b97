// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance [--only N] [--slow]
//
// --slow runs the full Quickselect N = 80 iteration for criterion 5 (hours);
// without it a scaled N = 40 surrogate is checked against its own certificate.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "cli_app.hpp"

using namespace perpetua;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [miss] " << what << ";";
    } else {
      detail << " " << what << ";";
    }
  }
};

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

std::string num(double x, int digits = 5) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

fs::path scratch(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("perpetua_accept_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "perpetua");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

json load(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

// ---------------------------------------------------------------------------

Verdict c1() {
  Verdict v;
  Timer t;
  struct Row {
    DiscretisationSchedule sched;
    std::int64_t n;
    double value;
    int p;
  };
  const std::vector<Row> rows = {{DiscretisationSchedule::polynomial(1), 22000, 0.00178, 14},
                                 {DiscretisationSchedule::polynomial(2), 430, 0.00025, 16},
                                 {DiscretisationSchedule::polynomial(3), 80, 0.00012, 13},
                                 {DiscretisationSchedule::polynomial(4), 30, 0.00050, 3},
                                 {DiscretisationSchedule::exponential(1.5), 35, 0.00070, 3},
                                 {DiscretisationSchedule::exponential(1.7), 27, 0.00187, 2}};
  const auto qs = quickselect_spec();
  for (const auto& r : rows) {
    const auto k = optimize_p(qs, r.sched, r.n, 3.561);
    v.check(rel(k.bound, r.value) <= 0.02 && k.p_used == r.p,
            r.sched.describe() + " N=" + std::to_string(r.n) + ": " + num(k.bound, 4) + " @p=" +
                std::to_string(k.p_used) + " (target " + num(r.value, 3) + " @p=" + std::to_string(r.p) + ")");
  }
  v.check(t.seconds() < 1.0, "runtime " + num(t.seconds(), 3) + " s");
  return v;
}

Verdict c2() {
  Verdict v;
  Timer t;
  const auto b = bootstrap_density_bound(quickselect_spec(), DiscretisationSchedule::polynomial(3), 80,
                                         quickselect::holder_modulus, 18.0, 2.630);
  v.check(b.chain.size() >= 2, "chain length " + std::to_string(b.chain.size()));
  if (b.chain.size() >= 2) {
    const auto& first = b.chain[0];
    const auto& second = b.chain[1];
    v.check(rel(first.kolmogorov.bound, 5.1842e-4) <= 0.02 && first.kolmogorov.p_used == 12,
            "first pass rho " + num(first.kolmogorov.bound) + " @p=" + std::to_string(first.kolmogorov.p_used) +
                " (target 5.1842e-4 @p=12)");
    v.check(rel(second.sup_in, 7.142) <= 0.02, "second sup " + num(second.sup_in) + " (target 7.142)");
    v.check(rel(second.kolmogorov.bound, 2.2085e-4) <= 0.02,
            "second rho " + num(second.kolmogorov.bound) + " (target 2.2085e-4)");
    v.check(rel(second.density.bound, 1.8331) <= 0.02,
            "second density err " + num(second.density.bound) + " (target 1.8331)");
  }
  v.check(rel(b.kolmogorov.bound, 1.162e-4) <= 0.02, "final rho " + num(b.kolmogorov.bound) + " (target 1.162e-4)");
  v.check(rel(b.density.bound, 0.931) <= 0.02, "final density err " + num(b.density.bound) + " (target 0.931)");
  v.check(rel(b.final_sup, 3.561) <= 0.02, "final sup " + num(b.final_sup) + " (target 3.561)");
  v.check(t.seconds() < 1.0, "runtime " + num(t.seconds(), 3) + " s");
  return v;
}

Verdict c3() {
  Verdict v;
  Timer t;
  const auto dir = scratch("c3");
  const int code = cli({"approximate", "--preset", "interval-splitting", "--poly", "3", "--steps", "50", "--symmetric",
                        "--out", dir.string(), "--threads", std::to_string(threads())});
  const double secs = t.seconds();
  v.check(code == 0, "exit code " + std::to_string(code));
  if (code != 0) return v;
  const auto c = load(dir / "certificate.json");
  const double measured = c["measured_kolmogorov"], cert = c["kolmogorov"];
  v.check(measured <= 5e-5, "measured rho " + num(measured, 3) + " <= 5e-5");
  v.check(measured <= cert, "measured rho <= certified " + num(cert, 4));
  v.check(std::fabs(cert - 0.001043) < 5e-7 && c["p"] == 5, "certified rho rounds to 0.001043 @p=5");
  const double delta = c["delta"];
  v.check(std::fabs(delta - 0.01318) <= 5e-5, "delta " + num(delta, 4) + " (d=" + c["d"].dump() + ")");
  const double derr = c["measured_density_error"];
  v.check(derr <= 0.002, "density error " + num(derr, 3) + " <= 0.002 on [0.05, 0.95]");
  const double dbound = c["density_bound"];
  v.check(rel(dbound, 0.1583) <= 0.02, "density bound " + num(dbound, 4) + " (target 0.1583)");
  v.check(secs <= 600.0, "runtime " + num(secs, 4) + " s, " + c["op_count"].dump() + " ops");
  fs::remove_all(dir);
  return v;
}

Verdict c4() {
  Verdict v;
  Timer t;
  using quickselect::Rational;
  const auto m = quickselect::moments(2);
  v.check(m.exact[1] == Rational(1, 3), "E X = " + m.exact[1].str());
  // Beta-integral oracle: E X^2 (1 - E U^2) = 2 E[U^2 (1-U)] E X + E[U^2 (1-U)^2].
  const Rational eu2(1, 3), b32(1, 12), b33(1, 30);
  const Rational ex2 = (2 * b32 * m.exact[1] + b33) / (1 - eu2);
  v.check(m.exact[2] == ex2 && ex2 == Rational(2, 15), "E X^2 = " + m.exact[2].str() + " (oracle " + ex2.str() + ")");
  const double f0 = quickselect::f_zero(1e-12);
  v.check(std::fabs(f0 - 0.759947956) <= 1e-8, "f(0) = " + num(f0, 10));
  const auto L = quickselect::density_bound_ledger();
  std::string seq;
  for (int x : L.m) seq += (seq.empty() ? "" : ",") + std::to_string(x);
  v.check(L.m == std::vector<int>{7, 13, 17, 18, 17}, "M = (" + seq + ")");
  v.check(L.global_sup == 18.0 && L.tail_certified, "sup bound " + num(L.global_sup));
  v.check(t.seconds() < 1.0, "runtime " + num(t.seconds(), 3) + " s");
  return v;
}

Verdict c5(bool slow) {
  Verdict v;
  Timer t;
  const std::int64_t n = slow ? 80 : 40;
  const auto dir = scratch("c5");
  const int code = cli({"approximate", "--preset", "quickselect", "--poly", "3", "--steps", std::to_string(n),
                        "--mc-check", "--out", dir.string(), "--threads", std::to_string(threads())});
  v.check(code == 0, "N=" + std::to_string(n) + " exit code " + std::to_string(code));
  if (code != 0) return v;
  const auto c = load(dir / "certificate.json");
  const double observed = c["observed_density_max"];
  const auto chain = c["density_sup_chain"].get<std::vector<double>>();
  v.check(observed <= chain.back(), "observed max " + num(observed, 4) + " <= certified sup " + num(chain.back(), 4));
  v.check(c["mc"]["pass"].get<bool>(), "MC gap " + num(c["mc"]["cdf_gap"], 3) + " <= allowance " +
                                           num(c["mc"]["allowance"], 3));
  if (slow) v.check(observed >= 2.5 && observed <= 2.7, "observed max in [2.5, 2.7]");
  else v.detail << " surrogate run; full N=80 needs --slow;";
  v.detail << " runtime " << num(t.seconds(), 4) << " s;";
  fs::remove_all(dir);
  return v;
}

Verdict c6() {
  Verdict v;
  Timer t;
  const auto is = interval_splitting_spec();
  const auto qs = quickselect_spec();

  double defect = 0.0;
  bool monotone = true;
  for (const auto& spec : {is, qs}) {
    const auto r = run(IterationPlan{spec, DiscretisationSchedule::polynomial(3), 30, std::nullopt, threads()});
    for (const auto& st : r.steps) defect = std::max({defect, std::fabs(st.post_defect), std::fabs(st.pre_defect)});
    double prev = 0.0;
    for (std::int64_t k = r.final.k_min(); k <= r.final.k_max(); ++k) {
      monotone = monotone && r.final.cdf_index(k) >= prev;
      prev = r.final.cdf_index(k);
    }
  }
  v.check(defect <= 1e-12, "max mass defect " + num(defect, 3));
  v.check(monotone, "CDF monotone");

  bool identical = true;
  for (const auto& spec : {is, qs}) {
    IterationPlan plan{spec, DiscretisationSchedule::polynomial(3), 25};
    plan.threads = 1;
    const auto a = run(plan).final;
    plan.threads = 4;
    const auto b = run(plan).final;
    identical = identical && a.s() == b.s() && a.k_min() == b.k_min() && a.size() == b.size() &&
                std::memcmp(a.masses().data(), b.masses().data(), a.size() * sizeof(double)) == 0;
  }
  v.check(identical, "bit-identical for 1 and 4 threads");

  for (int r : {2, 3})
    for (auto mode : {UMode::Floor, UMode::Symmetric}) {
      const auto sched = DiscretisationSchedule::polynomial(r, mode);
      const auto pmf = run(IterationPlan{is, sched, 30, std::nullopt, threads()}).final;
      const double measured = kolmogorov_vs(pmf, beta22_cdf);
      const double cert = optimize_p(is, sched, 30, 1.5).bound;
      v.check(measured <= cert, "sound " + sched.describe() +
                                    " N=30: " + num(measured, 3) + " <= " + num(cert, 3));
    }

  {
    const auto sched = DiscretisationSchedule::polynomial(3);
    const auto pmf = run(IterationPlan{is, sched, 30, std::nullopt, threads()}).final;
    oracle::McConfig mc;
    mc.threads = threads();
    const auto sm = oracle::sample(is, mc);
    const double gap = oracle::max_cdf_gap(oracle::EmpiricalCdf(sm.samples), pmf, 0.0, 1.0);
    const double allow = optimize_p(is, sched, 30, 1.5).bound + oracle::dkw_band(mc.samples, 0.999) + 1e-6;
    v.check(gap <= allow, "MC gap " + num(gap, 3) + " <= " + num(allow, 3));
  }

  bool ops = true;
  for (std::int64_t n : {1, 5, 10, 20, 30}) {
    const auto sched = DiscretisationSchedule::polynomial(3);
    ops = ops && run(IterationPlan{qs, sched, n}).op_count == op_count_model(qs, sched, n);
  }
  for (std::int64_t n : {5, 10, 15, 20}) {
    const auto sched = DiscretisationSchedule::exponential(1.5);
    ops = ops && run(IterationPlan{is, sched, n}).op_count == op_count_model(is, sched, n);
  }
  v.check(ops, "op_count == model on ladders");
  v.detail << " runtime " << num(t.seconds(), 3) << " s;";
  return v;
}

Verdict c7() {
  Verdict v;
  Timer t;
  const auto r = ax1::run_uniform(0.5, DiscretisationSchedule::polynomial(2), 30, threads());
  v.check(r.density_sup == 2.0, "certified sup " + num(r.density_sup));
  bool linear = true;
  for (double d : {1e-3, 1e-2, 0.1}) linear = linear && std::fabs(r.modulus(d) - 8.0 * d) <= 1e-12 * d;
  v.check(linear, "modulus 8 delta");
  if (!r.density) {
    v.check(false, "density certificate present");
    return v;
  }
  const auto& cert = *r.density;
  const auto est = extract_density(r.run.final, cert.d);
  const double slack = 2.0 * cert.bound;
  v.check(est.max_value() <= r.density_sup + slack,
          "density max " + num(est.max_value(), 4) + " <= 2 + " + num(slack, 3));
  for (double delta : {0.01, 0.05}) {
    const auto w = static_cast<std::int64_t>(std::floor(delta * est.s));
    const auto k_lo = static_cast<std::int64_t>(std::ceil((1.0 + delta) * est.s));
    const auto k_hi = static_cast<std::int64_t>(std::floor(2.0 * est.s));
    double worst = 0.0;
    for (std::int64_t k = k_lo; k + w <= k_hi; ++k)
      for (std::int64_t j = 1; j <= w; j += std::max<std::int64_t>(1, w / 16))
        worst = std::max(worst, std::fabs(est.value(k + j) - est.value(k)));
    v.check(worst <= r.modulus(delta) + slack, "oscillation at delta=" + num(delta) + ": " + num(worst, 3) +
                                                   " <= " + num(r.modulus(delta) + slack, 3));
  }
  v.check(t.seconds() < 60.0, "runtime " + num(t.seconds(), 3) + " s");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  bool slow = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--slow") == 0) slow = true;
    else {
      std::cerr << "usage: acceptance [--only N] [--slow]\n";
      return 64;
    }
  }
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"certificate table", c1},
      {"quickselect bootstrap", c2},
      {"interval splitting ground truth", c3},
      {"quickselect analytics", c4},
      {"quickselect long run", [slow] { return c5(slow); }},
      {"property suite", c6},
      {"density transfer", c7}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && only != static_cast<int>(i + 1)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << " exception: " << e.what();
    }
    std::cout << "C" << i + 1 << " " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ":"
              << v.detail.str() << std::endl;
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
