#include "afr/taxonomy.hpp"

#include <cctype>
#include <set>

#include "afr/assets.hpp"
#include "afr/error.hpp"
#include "afr/util.hpp"

namespace afr {

namespace {

using ojson = nlohmann::ordered_json;

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

std::string collapse(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (is_word_byte(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::string strip_parentheticals(std::string_view s) {
  std::string out;
  int depth = 0;
  for (char c : s) {
    if (c == '(') {
      ++depth;
      out.push_back(' ');
    } else if (c == ')') {
      if (depth > 0) --depth;
      out.push_back(' ');
    } else if (depth == 0) {
      out.push_back(c);
    }
  }
  return out;
}

// Rejects duplicate keys within one object, which the DOM would silently merge.
ojson parse_strict(std::string_view text) {
  std::vector<std::set<std::string>> seen;
  std::string duplicate;
  auto cb = [&](int /*depth*/, ojson::parse_event_t ev, ojson& parsed) {
    switch (ev) {
      case ojson::parse_event_t::object_start:
        seen.emplace_back();
        break;
      case ojson::parse_event_t::object_end:
        if (!seen.empty()) seen.pop_back();
        break;
      case ojson::parse_event_t::key:
        if (!seen.empty() && !seen.back().insert(parsed.get<std::string>()).second && duplicate.empty())
          duplicate = parsed.get<std::string>();
        break;
      default:
        break;
    }
    return true;
  };
  ojson j;
  try {
    j = ojson::parse(text.begin(), text.end(), cb);
  } catch (const ojson::exception& e) {
    throw Error(Errc::malformed_taxonomy, std::string("invalid JSON: ") + e.what());
  }
  if (!duplicate.empty()) throw Error(Errc::malformed_taxonomy, "duplicate key \"" + duplicate + "\"");
  return j;
}

void collect_leaves(const ojson& node, std::vector<std::string>& path, std::vector<CanonicalFeature>& out) {
  for (const auto& [key, value] : node.items()) {
    if (value.is_array()) {
      if (!value.empty()) throw Error(Errc::malformed_taxonomy, "leaf \"" + key + "\" must be an empty list");
      CanonicalFeature f;
      f.id = slug_for(key);
      f.display_name = key;
      f.category_path = path;
      out.push_back(std::move(f));
    } else if (value.is_object()) {
      path.push_back(key);
      collect_leaves(value, path, out);
      path.pop_back();
    } else {
      throw Error(Errc::malformed_taxonomy, "node \"" + key + "\" must be an object or []");
    }
  }
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string out = collapse(strip_parentheticals(raw));
  if (out.empty()) out = collapse(raw);
  return out;
}

std::string slug_for(std::string_view display_name) {
  std::string n = normalize_text(display_name);
  constexpr std::string_view kSuffix = " features";
  if (n.size() > kSuffix.size() && n.ends_with(kSuffix)) n.resize(n.size() - kSuffix.size());
  for (char& c : n)
    if (c == ' ') c = '_';
  return n;
}

FeatureTaxonomy FeatureTaxonomy::from_json_text(std::string_view text,
                                                const std::map<std::string, std::string>& aliases) {
  FeatureTaxonomy t;
  t.tree_ = parse_strict(text);
  if (!t.tree_.is_object() || t.tree_.empty()) throw Error(Errc::malformed_taxonomy, "root must be a non-empty object");

  std::vector<std::string> path;
  collect_leaves(t.tree_, path, t.leaves_);
  if (t.leaves_.empty()) throw Error(Errc::malformed_taxonomy, "no leaf features");

  std::set<std::string> ids;
  for (const auto& leaf : t.leaves_) {
    std::string norm = normalize_text(leaf.display_name);
    if (norm.empty()) throw Error(Errc::malformed_taxonomy, "leaf name normalizes to nothing");
    if (!t.lookup_.emplace(norm, leaf.id).second)
      throw Error(Errc::malformed_taxonomy, "duplicate leaf \"" + leaf.display_name + "\"");
    if (!ids.insert(leaf.id).second) throw Error(Errc::malformed_taxonomy, "duplicate leaf id \"" + leaf.id + "\"");
  }

  std::string alias_listing;
  for (const auto& [raw_alias, id] : aliases) {
    if (!ids.contains(id)) continue;
    std::string alias = normalize_text(raw_alias);
    if (alias.empty()) continue;
    auto [it, inserted] = t.lookup_.emplace(alias, id);
    if (!inserted && it->second != id)
      throw Error(Errc::malformed_taxonomy, "alias \"" + alias + "\" maps to both " + it->second + " and " + id);
    if (inserted) {
      for (auto& leaf : t.leaves_)
        if (leaf.id == id) leaf.aliases.insert(alias);
      alias_listing += alias + "=" + id + "\n";
    }
  }

  t.version_ = "sha256:" + sha256_hex(t.serialize() + alias_listing).substr(0, 16);
  return t;
}

const CanonicalFeature* FeatureTaxonomy::find(std::string_view id) const {
  for (const auto& leaf : leaves_)
    if (leaf.id == id) return &leaf;
  return nullptr;
}

std::size_t FeatureTaxonomy::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < leaves_.size(); ++i)
    if (leaves_[i].id == id) return i;
  return std::string::npos;
}

std::string FeatureTaxonomy::serialize() const { return tree_.dump(2) + "\n"; }

std::map<std::string, std::string> parse_alias_table(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("aliases") || !j["aliases"].is_object())
    throw Error(Errc::malformed_taxonomy, "alias table must be {\"aliases\": {alias: id}}");
  std::map<std::string, std::string> out;
  for (const auto& [alias, id] : j["aliases"].items()) {
    if (!id.is_string()) throw Error(Errc::malformed_taxonomy, "alias \"" + alias + "\" must map to a string id");
    out[alias] = id.get<std::string>();
  }
  return out;
}

const FeatureTaxonomy& builtin_taxonomy() {
  static const FeatureTaxonomy t = FeatureTaxonomy::from_json_text(
      embedded_asset("taxonomy/feature_list.json"), parse_alias_table(embedded_asset("taxonomy/aliases.json")));
  return t;
}

FeatureTaxonomy load_taxonomy(const std::filesystem::path& file,
                              const std::optional<std::filesystem::path>& alias_file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const Error& e) {
    throw Error(Errc::malformed_taxonomy, e.what());
  }
  auto aliases = alias_file ? parse_alias_table(read_file(*alias_file))
                            : parse_alias_table(embedded_asset("taxonomy/aliases.json"));
  return FeatureTaxonomy::from_json_text(text, aliases);
}

const std::vector<CanonicalFeature>& leaf_features(const FeatureTaxonomy& t) { return t.leaves(); }

MatchResult normalize_name(std::string_view raw, const FeatureTaxonomy& t) {
  if (trim(raw).empty()) throw Error(Errc::empty_name, "feature name is empty");
  MatchResult r;
  r.normalized_input = normalize_text(raw);
  auto it = t.lookup().find(r.normalized_input);
  if (it != t.lookup().end()) {
    r.feature_id = it->second;
  } else {
    r.note = "no canonical name or alias matches \"" + r.normalized_input + "\"";
  }
  return r;
}

std::string render_feature_list_block(const FeatureTaxonomy& t) { return t.tree().dump(2); }

}  // namespace afr
