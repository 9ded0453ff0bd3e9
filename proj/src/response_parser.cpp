#include "afr/response_parser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "afr/util.hpp"

namespace afr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// End index (inclusive) of the balanced object opening at `start`, honoring
// JSON string literals; npos when the braces never balance.
std::size_t balanced_end(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::int64_t saturating_add(std::int64_t a, std::int64_t b) {
  if (a > std::numeric_limits<std::int64_t>::max() - b) return std::numeric_limits<std::int64_t>::max();
  return a + b;
}

bool read_exists(const json& v, const std::string& name, std::vector<std::string>& warnings) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    std::string s = normalize_text(v.get<std::string>());
    if (s == "true" || s == "yes") {
      warnings.push_back("\"" + name + "\": exists given as string, read as true");
      return true;
    }
    if (s == "false" || s == "no") {
      warnings.push_back("\"" + name + "\": exists given as string, read as false");
      return false;
    }
  }
  if (v.is_number()) {
    bool b = v.get<double>() != 0.0;
    warnings.push_back("\"" + name + "\": exists given as number, read as " + (b ? "true" : "false"));
    return b;
  }
  throw Error(Errc::schema_error, "\"" + name + "\": exists must be a boolean");
}

std::int64_t read_quantity(const json& v, const std::string& name, std::vector<std::string>& warnings) {
  auto coerce_zero = [&](const std::string& why) {
    warnings.push_back("\"" + name + "\": quantity " + why + ", coerced to 0");
    return std::int64_t{0};
  };
  json q = v;
  if (q.is_string()) {
    auto s = trim(q.get<std::string>());
    json parsed = json::parse(s, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_number()) return coerce_zero("is not a number");
    warnings.push_back("\"" + name + "\": quantity given as string");
    q = parsed;
  }
  if (q.is_number_unsigned()) {
    auto u = q.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) return coerce_zero("out of range");
    return static_cast<std::int64_t>(u);
  }
  if (q.is_number_integer()) {
    auto i = q.get<std::int64_t>();
    return i < 0 ? coerce_zero("is negative") : i;
  }
  if (q.is_number_float()) {
    double d = q.get<double>();
    if (!std::isfinite(d) || d != std::floor(d)) return coerce_zero("is not an integer");
    if (d < 0) return coerce_zero("is negative");
    if (d >= 9.2e18) return coerce_zero("out of range");
    warnings.push_back("\"" + name + "\": quantity given as a real number");
    return static_cast<std::int64_t>(d);
  }
  if (q.is_boolean()) return coerce_zero("is a boolean");
  throw Error(Errc::schema_error, "\"" + name + "\": quantity must be a number");
}

}  // namespace

FeaturePrediction ParsedPrediction::get(std::string_view id) const {
  auto it = features.find(std::string(id));
  return it == features.end() ? FeaturePrediction{} : it->second;
}

std::string extract_json(std::string_view raw) {
  bool any_parsed = false;
  for (std::size_t i = raw.find('{'); i != std::string_view::npos; i = raw.find('{', i + 1)) {
    std::size_t end = balanced_end(raw, i);
    if (end == std::string_view::npos) continue;
    auto region = raw.substr(i, end - i + 1);
    json j = json::parse(region, nullptr, false, true);
    if (j.is_discarded() || !j.is_object()) continue;
    any_parsed = true;
    if (j.contains("identified_features")) return std::string(region);
  }
  if (any_parsed) throw Error(Errc::no_feature_key, "no JSON object with an identified_features key");
  throw Error(Errc::no_json_found, "reply contains no JSON object");
}

ParsedPrediction parse_features(std::string_view json_text, const FeatureTaxonomy& t) {
  json doc = json::parse(json_text, nullptr, false, true);
  if (doc.is_discarded()) throw Error(Errc::schema_error, "not valid JSON");
  if (!doc.is_object() || !doc.contains("identified_features"))
    throw Error(Errc::schema_error, "missing identified_features");
  const json& list = doc["identified_features"];
  if (!list.is_array()) throw Error(Errc::schema_error, "identified_features must be an array");

  ParsedPrediction p;
  p.raw_json = std::string(json_text);
  std::map<std::string, FeaturePrediction> merged;
  std::map<std::string, std::size_t> seen_count;
  std::vector<std::pair<std::string, UnmatchedPrediction>> unmatched;  // keyed by normalized name

  for (const auto& entry : list) {
    if (!entry.is_object()) throw Error(Errc::schema_error, "feature entry must be an object");
    for (const char* field : {"feature_name", "exists", "quantity"}) {
      if (!entry.contains(field) || entry[field].is_null())
        throw Error(Errc::schema_error, std::string("feature entry lacks \"") + field + "\"");
    }
    if (!entry["feature_name"].is_string()) throw Error(Errc::schema_error, "feature_name must be a string");
    const std::string name = entry["feature_name"].get<std::string>();
    if (trim(name).empty()) throw Error(Errc::schema_error, "feature_name is empty");

    bool exists = read_exists(entry["exists"], name, p.warnings);
    std::int64_t qty = read_quantity(entry["quantity"], name, p.warnings);
    if (exists != (qty > 0))
      p.warnings.push_back("\"" + name + "\": exists=" + (exists ? "true" : "false") + " but quantity=" +
                           std::to_string(qty) + "; treated as identified=" + (exists || qty > 0 ? "true" : "false"));
    const bool identified = exists || qty > 0;

    MatchResult m = normalize_name(name, t);
    const std::string key = m.matched() ? *m.feature_id : m.normalized_input;
    if (++seen_count[(m.matched() ? "id:" : "raw:") + key] == 2)
      p.warnings.push_back("\"" + name + "\": listed more than once; quantities summed");

    if (m.matched()) {
      auto& f = merged[key];
      f.exists = f.exists || identified;
      f.quantity = saturating_add(f.quantity, qty);
    } else {
      auto it = std::find_if(unmatched.begin(), unmatched.end(), [&](const auto& u) { return u.first == key; });
      if (it == unmatched.end()) {
        unmatched.push_back({key, UnmatchedPrediction{name, identified, qty}});
      } else {
        it->second.exists = it->second.exists || identified;
        it->second.quantity = saturating_add(it->second.quantity, qty);
      }
    }
  }
  for (auto& [id, f] : merged)
    if (f.exists || f.quantity > 0) p.features.emplace(id, f);
  for (auto& [key, u] : unmatched)
    if (u.exists || u.quantity > 0) p.unmatched.push_back(std::move(u));
  return p;
}

std::string serialize_prediction(const ParsedPrediction& p, const FeatureTaxonomy& t) {
  ordered_json list = ordered_json::array();
  for (const auto& leaf : t.leaves()) {
    auto f = p.get(leaf.id);
    list.push_back({{"feature_name", leaf.display_name}, {"exists", f.exists}, {"quantity", f.quantity}});
  }
  for (const auto& u : p.unmatched)
    list.push_back({{"feature_name", u.raw_name}, {"exists", u.exists}, {"quantity", u.quantity}});
  ordered_json doc;
  doc["identified_features"] = std::move(list);
  return doc.dump(1);
}

ParseOutcome parse_response(std::string_view raw, const FeatureTaxonomy& t) {
  ParseOutcome out;
  try {
    out.prediction = parse_features(extract_json(raw), t);
    out.ok = true;
  } catch (const Error& e) {
    out.error = e.code();
    out.error_message = e.what();
  } catch (const std::exception& e) {
    out.error = Errc::schema_error;
    out.error_message = std::string("SchemaError: ") + e.what();
  }
  return out;
}

}  // namespace afr
