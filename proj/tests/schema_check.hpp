// Validator for the JSON Schema subset used by schema/*.json: type,
// required, properties, items, enum, minimum. Unknown keywords are rejected
// so a schema cannot silently rely on something this does not check.
#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace schema_check {

using nlohmann::json;

inline bool has_type(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  throw std::invalid_argument("schema: unknown type '" + t + "'");
}

inline void validate(const json& v, const json& s, const std::string& path, std::vector<std::string>& errs) {
  static const std::set<std::string> known = {"$schema", "title", "type", "required", "properties",
                                              "items", "enum", "minimum"};
  for (auto it = s.begin(); it != s.end(); ++it)
    if (!known.count(it.key())) throw std::invalid_argument("schema: unsupported keyword '" + it.key() + "'");

  if (s.contains("type")) {
    const auto& t = s["type"];
    bool ok = false;
    if (t.is_string()) ok = has_type(v, t.get<std::string>());
    else
      for (const auto& one : t) ok = ok || has_type(v, one.get<std::string>());
    if (!ok) {
      errs.push_back(path + ": expected type " + t.dump() + ", got " + v.type_name());
      return;
    }
  }
  if (s.contains("enum")) {
    bool ok = false;
    for (const auto& e : s["enum"]) ok = ok || e == v;
    if (!ok) errs.push_back(path + ": " + v.dump() + " not in " + s["enum"].dump());
  }
  if (s.contains("minimum") && v.is_number() && v.get<double>() < s["minimum"].get<double>())
    errs.push_back(path + ": " + v.dump() + " < minimum " + s["minimum"].dump());
  if (v.is_object()) {
    if (s.contains("required"))
      for (const auto& k : s["required"])
        if (!v.contains(k.get<std::string>())) errs.push_back(path + ": missing '" + k.get<std::string>() + "'");
    if (s.contains("properties"))
      for (auto it = s["properties"].begin(); it != s["properties"].end(); ++it)
        if (v.contains(it.key())) validate(v[it.key()], it.value(), path + "." + it.key(), errs);
  }
  if (v.is_array() && s.contains("items"))
    for (std::size_t i = 0; i < v.size(); ++i) validate(v[i], s["items"], path + "[" + std::to_string(i) + "]", errs);
}

// Empty result means valid.
inline std::vector<std::string> validate(const json& v, const json& s) {
  std::vector<std::string> errs;
  validate(v, s, "$", errs);
  return errs;
}

}  // namespace schema_check
