/** @file report.hpp
 *  @brief JSON form of a certificate.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "perpetua/bounds.hpp"
#include "perpetua/model.hpp"

namespace perpetua {

struct CertificateReport {
  std::string problem;
  std::string schedule;
  std::int64_t n = 0;
  std::int64_t s = 1;
  LpBound lp;
  ErrorConstants constants;
  std::string moment_provider;
  std::optional<KolmogorovCertificate> kolmogorov;
  std::optional<DensityCertificate> density;
  std::vector<double> density_sup_chain;  // sup bounds used, first to last
  nlohmann::json extra = nlohmann::json::object();
};

inline const char* to_string(LpBound::Mode m) {
  switch (m) {
    case LpBound::Mode::DirectSum: return "direct-sum";
    case LpBound::Mode::ClosedFormPoly: return "closed-form-poly";
    case LpBound::Mode::ClosedFormExp: return "closed-form-exp";
  }
  return "?";
}

inline nlohmann::json to_json(const CertificateReport& r) {
  using nlohmann::json;
  json j;
  j["problem"] = r.problem;
  j["schedule"] = r.schedule;
  j["n"] = r.n;
  j["s"] = r.s;
  j["p"] = r.lp.p;
  j["lp"] = r.lp.value;
  j["lp_mode"] = to_string(r.lp.mode);
  j["xi"] = r.lp.xi;
  j["error_constants"] = {{"C_A", r.constants.c_a}, {"C_b", r.constants.c_b}, {"C_X", r.constants.c_x}};
  j["moment_provider"] = r.moment_provider;
  j["kolmogorov"] = r.kolmogorov ? json(r.kolmogorov->bound) : json(nullptr);
  j["density_sup_used"] = r.kolmogorov ? json(r.kolmogorov->density_sup_used) : json(nullptr);
  j["delta"] = r.density ? json(r.density->delta) : json(nullptr);
  j["d"] = r.density ? json(r.density->d) : json(nullptr);
  j["density_bound"] = r.density ? json(r.density->bound) : json(nullptr);
  j["modulus"] = r.density ? json(r.density->modulus.describe()) : json(nullptr);
  j["density_sup_chain"] = r.density_sup_chain;
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

}  // namespace perpetua
