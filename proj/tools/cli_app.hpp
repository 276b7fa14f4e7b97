// Command-line front end: approximate, certify, bench.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "perpetua/perpetua.hpp"

namespace perpetua::cli {

using nlohmann::json;

struct RunConfig {
  std::optional<std::string> preset;
  std::optional<json> inline_spec;
  std::optional<DiscretisationSchedule> sched;
  bool symmetric = false;
  std::int64_t steps = 0;
  std::optional<std::int64_t> density_d;  // empty = auto
  std::string out_dir = ".";
  std::optional<std::int64_t> mc_samples;
  std::uint64_t seed = oracle::kDefaultSeed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::int64_t> snapshot_every;
  std::optional<double> density_sup;
  std::optional<double> observed_max;
  std::vector<std::int64_t> ladder;
  std::size_t memory_budget = std::size_t{2} << 30;
  std::optional<std::string> samples_csv;
};

// ---------------------------------------------------------------------------
// Config file parsing

inline double num(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    throw ConfigError(std::string("config: expected number '") + key + "'");
  return j[key].get<double>();
}

inline Coefficient parse_coefficient(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ConfigError("config: coefficient needs a 'kind'");
  const auto kind = j["kind"].get<std::string>();
  if (kind == "identity") return Coefficient::identity();
  if (kind == "half_one_plus_u") return Coefficient::half_one_plus_u();
  if (kind == "u_one_minus_u") return Coefficient::u_one_minus_u(j.value("scale", 1.0));
  if (kind == "constant") return Coefficient::constant(num(j, "value"));
  if (kind == "affine") return Coefficient::affine(num(j, "slope"), num(j, "intercept"));
  if (kind == "piecewise") {
    try {
      return Coefficient::piecewise(j.at("breaks").get<std::vector<double>>(),
                                    j.at("pieces").get<std::vector<std::vector<double>>>(),
                                    num(j, "lipschitz"), num(j, "sup"));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad piecewise coefficient: ") + e.what());
    }
  }
  throw ConfigError("config: unknown coefficient kind '" + kind + "'");
}

inline ModulusSpec parse_modulus(const json& j) {
  ModulusSpec m;
  try {
    if (j.contains("holder"))
      for (const auto& t : j["holder"]) m = m + ModulusSpec::holder(t.at(0).get<double>(), t.at(1).get<double>());
    if (j.contains("linear")) m = m + ModulusSpec::linear(j["linear"].get<double>());
    if (j.contains("table"))
      m = m + ModulusSpec::tabulated(j["table"].get<std::vector<std::pair<double, double>>>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad modulus: ") + e.what());
  }
  return m;
}

inline Preset parse_inline_spec(const json& j) {
  if (!j.is_object() || !j.contains("branches") || !j["branches"].is_array())
    throw ConfigError("config: inline spec needs a 'branches' array");
  std::vector<WeightedBranch> branches;
  for (const auto& b : j["branches"]) {
    WeightedBranch wb{b.value("weight", 1.0),
                      make_branch(parse_coefficient(b.at("phi")), parse_coefficient(b.at("psi")))};
    if (b.contains("monotone_dominated")) wb.branch.monotone_dominated = b["monotone_dominated"].get<bool>();
    branches.push_back(std::move(wb));
  }
  std::optional<Interval> hint;
  if (j.contains("support_hint")) {
    const auto h = j["support_hint"].get<std::vector<double>>();
    if (h.size() != 2) throw ConfigError("config: support_hint must be [lo, hi]");
    hint = Interval{h[0], h[1]};
  }
  Preset p{make_spec(j.value("name", std::string("custom")), std::move(branches), hint), std::nullopt, {}, {}};
  if (j.contains("density")) {
    const auto& d = j["density"];
    const double sup = num(d, "sup");
    const ModulusSpec mod = d.contains("modulus") ? parse_modulus(d["modulus"]) : ModulusSpec::zero();
    p.density = DensityFacts{sup, [mod](double) { return mod; }, false, std::nullopt};
  }
  return p;
}

inline void apply_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    if (j.contains("preset")) cfg.preset = j["preset"].get<std::string>();
    if (j.contains("spec")) cfg.inline_spec = j["spec"];
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      if (s.contains("poly")) cfg.sched = DiscretisationSchedule::polynomial(s["poly"].get<int>());
      else if (s.contains("exp")) cfg.sched = DiscretisationSchedule::exponential(s["exp"].get<double>());
      else throw ConfigError("config: schedule needs 'poly' or 'exp'");
    }
    cfg.symmetric = j.value("symmetric", cfg.symmetric);
    if (j.contains("steps")) cfg.steps = j["steps"].get<std::int64_t>();
    if (j.contains("density_d")) {
      const auto& d = j["density_d"];
      if (d.is_number_integer() && d.get<std::int64_t>() >= 1) cfg.density_d = d.get<std::int64_t>();
      else if (d != "auto") throw ConfigError("config: density_d must be a positive integer or \"auto\"");
    }
    if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
    if (j.contains("mc_check")) {
      const auto& m = j["mc_check"];
      if (m.is_number_integer()) cfg.mc_samples = m.get<std::int64_t>();
      else if (m.is_boolean() && m.get<bool>()) cfg.mc_samples = 1000000;
      else if (m.is_object()) {
        cfg.mc_samples = m.value("samples", std::int64_t{1000000});
        if (m.contains("seed")) cfg.seed = m["seed"].get<std::uint64_t>();
      }
    }
    if (j.contains("threads")) cfg.threads = j["threads"].get<unsigned>();
    if (j.contains("snapshot_every")) cfg.snapshot_every = j["snapshot_every"].get<std::int64_t>();
    if (j.contains("density_sup")) cfg.density_sup = j["density_sup"].get<double>();
    if (j.contains("observed_max")) cfg.observed_max = j["observed_max"].get<double>();
    if (j.contains("ladder")) cfg.ladder = j["ladder"].get<std::vector<std::int64_t>>();
    if (j.contains("memory_budget_mb"))
      cfg.memory_budget = j["memory_budget_mb"].get<std::size_t>() << 20;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------

inline Preset resolve_problem(const RunConfig& cfg) {
  if (cfg.preset && cfg.inline_spec) throw ConfigError("give either a preset or an inline spec, not both");
  if (cfg.inline_spec) {
    try {
      return parse_inline_spec(*cfg.inline_spec);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad inline spec: ") + e.what());
    }
  }
  if (!cfg.preset) throw ConfigError("no problem given (use --preset or a config file)");
  return find_preset(*cfg.preset);
}

inline DiscretisationSchedule resolve_schedule(const RunConfig& cfg) {
  auto s = cfg.sched ? *cfg.sched : DiscretisationSchedule::polynomial(3);
  if (cfg.symmetric) s.u_mode = UMode::Symmetric;
  return s;
}

inline std::string fmt(double x, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  return f;
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
  return dir;
}

struct Certified {
  CertificateReport report;
  std::optional<ModulusSpec> modulus;
};

inline void certify_density(const Preset& pr, const DiscretisationSchedule& sched, std::int64_t n,
                            const RunConfig& cfg, std::int64_t d_max,
                            const std::function<double(std::int64_t)>& observed, double sup0, const DChoice& choice,
                            Certified& out) {
  const auto& facts = *pr.density;
  const std::int64_t s = schedule_s(sched, n);
  auto& r = out.report;
  if (facts.bootstrap && observed) {
    BootstrapOptions opt;
    opt.d_max = d_max;
    const auto b = bootstrap_density_bound(pr.spec, sched, n, facts.modulus_for_sup, sup0, observed, opt);
    r.kolmogorov = b.kolmogorov;
    r.density = cfg.density_d ? density_certificate(b.kolmogorov, facts.modulus_for_sup(b.chain.back().sup_in), s, choice)
                              : b.density;
    for (const auto& st : b.chain) r.density_sup_chain.push_back(st.sup_in);
    if (r.density_sup_chain.empty() || r.density_sup_chain.back() != b.final_sup)
      r.density_sup_chain.push_back(b.final_sup);
    out.modulus = r.density->modulus;
  } else {
    r.kolmogorov = optimize_p(pr.spec, sched, n, sup0);
    out.modulus = facts.modulus_for_sup(sup0);
    r.density = density_certificate(*r.kolmogorov, *out.modulus, s, choice);
    r.density_sup_chain = {sup0};
  }
}

// Best certificate for (problem, schedule, N). observed(d) is the maximum of
// the computed density with window d (bootstrapping presets only).
inline Certified certify_problem(const Preset& pr, const DiscretisationSchedule& sched, std::int64_t n,
                                 const RunConfig& cfg, std::int64_t d_max,
                                 const std::function<double(std::int64_t)>& observed) {
  const std::int64_t s = schedule_s(sched, n);
  Certified out;
  auto& r = out.report;
  r.problem = pr.spec.name;
  r.schedule = sched.describe();
  r.n = n;
  r.s = s;
  r.constants = error_constants(pr.spec, sched);
  r.moment_provider = to_string(pr.spec.moments.kind);
  const DChoice choice = cfg.density_d ? DChoice::at(*cfg.density_d) : DChoice::automatic(d_max);

  if (!pr.density) {
    // No density information: report the L_p bound at the smallest contracting p.
    for (int p = 1; p <= 64; ++p) {
      if (!try_xi_bound(pr.spec, sched, p)) continue;
      r.lp = lp_bound_direct(pr.spec, sched, n, p);
      return out;
    }
    throw NumericError("no p in [1,64] gives a contraction");
  }
  const auto& facts = *pr.density;
  const double sup0 = cfg.density_sup.value_or(facts.sup);
  try {
    certify_density(pr, sched, n, cfg, d_max, observed, sup0, choice, out);
  } catch (const CoarseLatticeError&) {
    // Too few atoms for any density window: keep the Kolmogorov certificate.
    r.kolmogorov = optimize_p(pr.spec, sched, n, sup0);
    r.density.reset();
    r.density_sup_chain = {sup0};
    out.modulus.reset();
    r.extra["notes"] = "density certificate unavailable: lattice too coarse";
  }
  r.lp = r.kolmogorov->lp;
  return out;
}

inline std::uint64_t seed_from_env(std::uint64_t fallback) {
  if (const char* e = std::getenv("PERPETUA_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(e, &used, 0);
      if (used == std::string(e).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("PERPETUA_SEED is not an integer");
  }
  return fallback;
}

// ---------------------------------------------------------------------------
// approximate

inline int cmd_approximate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Preset pr = resolve_problem(cfg);
  const auto sched = resolve_schedule(cfg);
  if (cfg.steps < 1) throw ConfigError("--steps N with N >= 1 is required");
  const auto dir = ensure_dir(cfg.out_dir);

  IterationPlan plan{pr.spec, sched, cfg.steps, cfg.snapshot_every, cfg.threads, cfg.memory_budget, {}};
  const auto n_total = cfg.steps;
  plan.progress = [&err, n_total](const StepStats& st) {
    err << "step " << st.n << "/" << n_total << "  s=" << st.s << "  atoms=" << st.atoms
        << "  ops=" << st.ops << "  " << fmt(st.seconds, 3) << "s\n";
  };
  const auto t0 = std::chrono::steady_clock::now();
  const IterationResult res = run(plan);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const LatticePMF& pmf = res.final;

  for (const auto& [n, snap] : res.snapshots) {
    if (n == cfg.steps) continue;
    auto f = open_out(dir / ("pmf_n" + std::to_string(n) + ".csv"));
    write_pmf_csv(f, snap);
  }
  {
    auto f = open_out(dir / "pmf.csv");
    write_pmf_csv(f, pmf);
  }

  const std::int64_t atoms = static_cast<std::int64_t>(pmf.size());
  auto density_at = [&](std::int64_t d) {
    auto est = extract_density(pmf, d);
    if (pr.density && pr.density->left_value) est = quickselect::corrected_density(est, *pr.density->left_value);
    return est;
  };
  std::function<double(std::int64_t)> observed;
  if (pr.density && pr.density->bootstrap)
    observed = [&](std::int64_t d) { return density_at(d).max_value(); };

  Certified cert = certify_problem(pr, sched, cfg.steps, cfg, atoms, observed);
  auto& rep = cert.report;

  std::int64_t d = 1;
  if (rep.density) d = rep.density->d;
  else if (cfg.density_d) d = *cfg.density_d;
  else d = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(pmf.s())))));
  d = std::min(d, atoms);
  const DensityEstimate est = density_at(d);
  {
    auto f = open_out(dir / "density.csv");
    write_density_csv(f, est);
  }

  rep.extra["op_count"] = res.op_count;
  rep.extra["op_count_model"] = op_count_model(pr.spec, sched, cfg.steps);
  rep.extra["seconds"] = secs;
  rep.extra["threads"] = cfg.threads;
  rep.extra["max_mass_defect"] = [&] {
    double m = 0.0;
    for (const auto& st : res.steps) m = std::max(m, std::fabs(st.post_defect));
    return m;
  }();
  rep.extra["observed_density_max"] = est.max_value();
  rep.extra["density_window_d"] = d;

  std::ostringstream txt;
  txt << "problem            " << pr.spec.name << "\n"
      << "schedule           " << sched.describe() << ", N=" << cfg.steps << ", s=" << pmf.s() << "\n"
      << "inner-loop ops     " << res.op_count << " in " << fmt(secs, 4) << " s\n"
      << "L_p bound          " << fmt(rep.lp.value) << " at p=" << rep.lp.p << "\n";
  if (rep.kolmogorov) txt << "certified rho      " << fmt(rep.kolmogorov->bound) << " (||f|| <= " << fmt(rep.kolmogorov->density_sup_used) << ")\n";
  if (rep.density)
    txt << "density bound      " << fmt(rep.density->bound) << " at delta=" << fmt(rep.density->delta)
        << " (d=" << rep.density->d << ")\n";
  if (rep.density_sup_chain.size() > 1) {
    txt << "sup chain         ";
    for (double b : rep.density_sup_chain) txt << " " << fmt(b, 5);
    txt << "\n";
  }
  txt << "density max        " << fmt(est.max_value()) << "\n";

  bool ok = true;
  if (pr.exact_cdf) {
    const double measured = kolmogorov_vs(pmf, pr.exact_cdf);
    rep.extra["measured_kolmogorov"] = measured;
    txt << "measured rho       " << fmt(measured) << " against the exact CDF\n";
    if (rep.kolmogorov && measured > rep.kolmogorov->bound) ok = false;
  }
  if (pr.exact_pdf) {
    double worst = 0.0;
    for (std::int64_t k = est.k_first; k <= est.k_last(); ++k) {
      const double x = est.x(k);
      if (x < 0.05 || x > 0.95) continue;
      worst = std::max(worst, std::fabs(est.value(k) - pr.exact_pdf(x)));
    }
    rep.extra["measured_density_error"] = worst;
    txt << "density error      " << fmt(worst) << " on [0.05, 0.95]\n";
  }

  if (cfg.mc_samples) {
    oracle::McConfig mc;
    mc.samples = *cfg.mc_samples;
    mc.rng_seed = seed_from_env(cfg.seed);
    mc.threads = cfg.threads;
    const auto sm = oracle::sample(pr.spec, mc);
    if (cfg.samples_csv) {
      auto f = open_out(*cfg.samples_csv);
      oracle::write_samples_csv(f, sm.samples);
    }
    const oracle::EmpiricalCdf emp(sm.samples);
    const double lo = pr.spec.support_hint ? pr.spec.support_hint->lo : emp.min();
    const double hi = pr.spec.support_hint ? pr.spec.support_hint->hi : emp.max();
    const double gap = oracle::max_cdf_gap(emp, pmf, lo, hi);
    const double band = oracle::dkw_band(mc.samples, 0.999);
    const double allowance = (rep.kolmogorov ? rep.kolmogorov->bound : 1.0) + band + sm.truncation_error;
    const bool pass = gap <= allowance;
    ok = ok && pass;
    rep.extra["mc"] = {{"samples", mc.samples},      {"seed", mc.rng_seed},
                       {"generator", oracle::kGeneratorName}, {"truncation", sm.truncation},
                       {"truncation_error", sm.truncation_error}, {"dkw_band", band},
                       {"cdf_gap", gap},            {"allowance", allowance},
                       {"pass", pass}};
    txt << "MC check           gap " << fmt(gap) << " vs allowance " << fmt(allowance) << " ("
        << mc.samples << " samples, seed " << mc.rng_seed << ") " << (pass ? "PASS" : "FAIL") << "\n";
  }

  {
    auto f = open_out(dir / "certificate.json");
    f << std::setw(2) << to_json(rep) << "\n";
  }
  {
    auto f = open_out(dir / "report.txt");
    f << txt.str();
  }
  out << txt.str();
  if (!ok) {
    err << "error: a measured quantity violates its certificate\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// certify

inline int cmd_certify(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const Preset pr = resolve_problem(cfg);
  const auto sched = resolve_schedule(cfg);
  if (cfg.steps < 1) throw ConfigError("--steps N with N >= 1 is required");
  std::function<double(std::int64_t)> observed;
  if (cfg.observed_max) {
    if (!pr.density || !pr.density->bootstrap)
      throw ConfigError("--observed-max only applies to presets with a bootstrappable density bound");
    const double m = *cfg.observed_max;
    observed = [m](std::int64_t) { return m; };
  }
  const Certified cert = certify_problem(pr, sched, cfg.steps, cfg, 0, observed);
  const auto j = to_json(cert.report);
  out << std::setw(2) << j << "\n";
  if (cfg.out_dir != ".") {
    auto f = open_out(ensure_dir(cfg.out_dir) / "certificate.json");
    f << std::setw(2) << j << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

inline int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Preset pr = resolve_problem(cfg);
  const auto sched = resolve_schedule(cfg);
  auto ladder = cfg.ladder;
  if (ladder.empty()) ladder = {5, 10, 20};
  std::sort(ladder.begin(), ladder.end());
  if (ladder.front() < 1) throw ConfigError("ladder entries must be >= 1");

  json rows = json::array();
  std::vector<double> lx, lops, lt;
  bool ok = true;
  out << std::setw(8) << "N" << std::setw(14) << "s(N)" << std::setw(18) << "op_count" << std::setw(18)
      << "model" << std::setw(12) << "seconds" << std::setw(10) << "ns/op\n";
  for (const auto n : ladder) {
    IterationPlan plan{pr.spec, sched, n, std::nullopt, cfg.threads, cfg.memory_budget, {}};
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run(plan);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto model = op_count_model(pr.spec, sched, n);
    if (model != res.op_count) ok = false;
    out << std::setw(8) << n << std::setw(14) << res.final.s() << std::setw(18) << res.op_count
        << std::setw(18) << model << std::setw(12) << fmt(secs, 4) << std::setw(10)
        << fmt(secs / static_cast<double>(res.op_count) * 1e9, 3) << "\n";
    rows.push_back({{"n", n}, {"s", res.final.s()}, {"op_count", res.op_count}, {"model", model}, {"seconds", secs}});
    lx.push_back(sched.kind == DiscretisationSchedule::Kind::Polynomial ? std::log(static_cast<double>(n))
                                                                         : static_cast<double>(n));
    lops.push_back(std::log(static_cast<double>(res.op_count)));
    lt.push_back(std::log(std::max(secs, 1e-9)));
  }
  json summary = {{"schedule", sched.describe()}, {"rows", rows}, {"op_count_matches_model", ok}};
  if (ladder.size() >= 2) {
    const double so = slope(lx, lops), st = slope(lops, lt);
    summary["op_count_slope"] = so;
    summary["time_vs_ops_slope"] = st;
    out << (sched.kind == DiscretisationSchedule::Kind::Polynomial ? "d log(ops)/d log(N) = " : "d log(ops)/dN = ")
        << fmt(so, 4) << ", d log(time)/d log(ops) = " << fmt(st, 4) << "\n";
  }
  if (cfg.out_dir != ".") {
    auto f = open_out(ensure_dir(cfg.out_dir) / "bench.json");
    f << std::setw(2) << summary << "\n";
  }
  if (!ok) {
    err << "error: measured op_count differs from the model\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------

inline void add_common(CLI::App* sub, RunConfig& cfg, std::string& config_path, std::optional<int>& poly,
                       std::optional<double>& gamma, std::string& density_d, std::string& mc) {
  sub->add_option("--preset", cfg.preset, "quickselect | interval-splitting | ax1-uniform(q)");
  sub->add_option("--config", config_path, "JSON run configuration");
  auto* p = sub->add_option("--poly", poly, "polynomial schedule s(n) = n^R");
  sub->add_option("--exp", gamma, "exponential schedule s(n) = ceil(GAMMA^n)")->excludes(p);
  sub->add_flag("--symmetric", cfg.symmetric, "midpoint u-discretisation");
  sub->add_option("--steps", cfg.steps, "number of iterations N");
  sub->add_option("--density-d", density_d, "density window half-width in atoms, or 'auto'");
  sub->add_option("--out", cfg.out_dir, "output directory");
  sub->add_option("--mc-check", mc, "Monte-Carlo cross-check with S samples (default 1e6)")->expected(0, 1);
  sub->add_option("--threads", cfg.threads, "worker threads");
  sub->add_option("--snapshot-every", cfg.snapshot_every, "also write the pmf every M steps");
  sub->add_option("--density-sup", cfg.density_sup, "override the a-priori bound on ||f_X||");
  sub->add_option("--samples-csv", cfg.samples_csv, "write Monte-Carlo samples to this file");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Lattice approximation of perpetuities with certified error bounds", "perpetua"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config_path, density_d, mc, ladder;
  std::optional<int> poly;
  std::optional<double> gamma;
  auto* approx = app.add_subcommand("approximate", "run the iteration and emit pmf, density and certificate");
  auto* certify = app.add_subcommand("certify", "compute the certificate for (schedule, N) without iterating");
  auto* bench = app.add_subcommand("bench", "check op counts and timing on a ladder of N");
  for (auto* sub : {approx, certify, bench}) add_common(sub, cfg, config_path, poly, gamma, density_d, mc);
  certify->add_option("--observed-max", cfg.observed_max, "observed density maximum for the bootstrap");
  bench->add_option("--ladder", ladder, "comma-separated N values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    // Config file first, then explicit flags win.
    if (!config_path.empty()) {
      RunConfig file;
      apply_config_file(config_path, file);
      auto given = [&](const char* name) {
        for (auto* sub : app.get_subcommands())
          if (const auto* o = sub->get_option_no_throw(name); o && o->count() > 0) return true;
        return false;
      };
      if (!given("--preset")) cfg.preset = file.preset;
      if (!cfg.preset) cfg.inline_spec = file.inline_spec;
      if (!given("--poly") && !given("--exp")) cfg.sched = file.sched;
      if (!given("--symmetric")) cfg.symmetric = file.symmetric;
      if (!given("--steps")) cfg.steps = file.steps;
      if (!given("--density-d") && file.density_d) cfg.density_d = file.density_d;
      if (!given("--out")) cfg.out_dir = file.out_dir;
      if (!given("--mc-check")) cfg.mc_samples = file.mc_samples;
      if (!given("--threads")) cfg.threads = file.threads;
      if (!given("--snapshot-every")) cfg.snapshot_every = file.snapshot_every;
      if (!given("--density-sup")) cfg.density_sup = file.density_sup;
      if (!given("--observed-max")) cfg.observed_max = file.observed_max;
      cfg.ladder = file.ladder;
      cfg.memory_budget = file.memory_budget;
      cfg.seed = file.seed;
    }
    if (poly) cfg.sched = DiscretisationSchedule::polynomial(*poly);
    if (gamma) cfg.sched = DiscretisationSchedule::exponential(*gamma);
    if (!density_d.empty() && density_d != "auto") {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(density_d, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != density_d.size() || v < 1) throw ConfigError("--density-d expects a positive integer or 'auto'");
      cfg.density_d = v;
    } else if (density_d == "auto") {
      cfg.density_d.reset();
    }
    for (auto* sub : app.get_subcommands())
      if (const auto* o = sub->get_option_no_throw("--mc-check"); o && o->count() > 0) {
        if (mc.empty()) {
          cfg.mc_samples = 1000000;
        } else {
          std::size_t used = 0;
          long long v = 0;
          try {
            v = std::stoll(mc, &used);
          } catch (const std::exception&) {
            used = 0;
          }
          if (used != mc.size() || v < 1) throw ConfigError("--mc-check expects a positive sample count");
          cfg.mc_samples = v;
        }
      }
    if (!ladder.empty()) {
      cfg.ladder.clear();
      std::stringstream ss(ladder);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          cfg.ladder.push_back(std::stoll(item));
        } catch (const std::exception&) {
          throw ConfigError("--ladder expects comma-separated integers");
        }
      }
    }
    if (cfg.threads < 1) throw ConfigError("--threads must be >= 1");

    if (*approx) return cmd_approximate(cfg, out, err);
    if (*certify) return cmd_certify(cfg, out, err);
    return cmd_bench(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace perpetua::cli
