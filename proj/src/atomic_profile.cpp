#include "scene_forge/atomic_profile.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "scene_forge/prompts.hpp"
#include "scene_forge/util.hpp"

namespace scene_forge {

using nlohmann::json;

namespace {

std::vector<AtomicEntry> empty_category(Dimension d) {
  std::vector<AtomicEntry> out;
  for (const auto& r : atomic_relations()) {
    if (r.category == d) out.push_back(AtomicEntry{std::string(r.name), std::nullopt});
  }
  return out;
}

const AtomicRelation* find_relation(std::string_view name) {
  for (const auto& r : atomic_relations()) {
    if (iequals(r.name, name)) return &r;
  }
  return nullptr;
}

bool is_inapplicable(std::string_view value) {
  std::string v = to_lower_ascii(trim_view(value));
  while (!v.empty() && v.back() == '.') v.pop_back();
  return v.empty() || v == "n/a" || v == "na" || v == "none" || v == "not applicable" || v == "-" ||
         v == "null";
}

std::string strip_markup(std::string_view line) {
  std::string out;
  for (char c : line) {
    if (c != '*' && c != '`') out.push_back(c);
  }
  std::string_view s = trim_view(out);
  while (!s.empty() && (s.front() == '-' || s.front() == '#' || s.front() == '>' || s.front() == '+')) {
    s = trim_view(s.substr(1));
  }
  for (std::string_view bullet : {"\xE2\x80\xA2", "\xC2\xB7", "\xE2\x97\xA6"}) {
    if (s.starts_with(bullet)) s = trim_view(s.substr(bullet.size()));
  }
  return std::string(s);
}

std::optional<Dimension> category_header(std::string_view line) {
  std::string s = to_lower_ascii(line);
  while (!s.empty() && (s.back() == ':' || s.back() == ' ')) s.pop_back();
  static const std::map<std::string, Dimension> kHeaders = {
      {"engaged events", Dimension::engaged_events},
      {"events", Dimension::engaged_events},
      {"generalizable properties", Dimension::generalizable_properties},
      {"generalisable properties", Dimension::generalizable_properties},
      {"gen. properties", Dimension::generalizable_properties},
      {"properties", Dimension::generalizable_properties},
      {"evoked emotions", Dimension::evoked_emotions},
      {"emotions", Dimension::evoked_emotions},
  };
  auto it = kHeaders.find(s);
  if (it == kHeaders.end()) return std::nullopt;
  return it->second;
}

}  // namespace

const std::vector<AtomicEntry>& AtomicProfile::category(Dimension d) const {
  switch (d) {
    case Dimension::engaged_events: return engaged_events;
    case Dimension::generalizable_properties: return generalizable_properties;
    case Dimension::evoked_emotions: return evoked_emotions;
  }
  throw std::invalid_argument("unknown dimension");
}

std::vector<AtomicEntry>& AtomicProfile::category(Dimension d) {
  return const_cast<std::vector<AtomicEntry>&>(static_cast<const AtomicProfile&>(*this).category(d));
}

std::optional<std::string> AtomicProfile::value(std::string_view relation) const {
  const AtomicRelation* r = find_relation(relation);
  if (!r) throw std::invalid_argument("unknown relation '" + std::string(relation) + "'");
  for (const auto& e : category(r->category)) {
    if (e.relation == r->name) return e.value;
  }
  return std::nullopt;
}

AtomicProfile parse_atomic_profile(std::string_view raw, const UsageInstance& instance,
                                   std::vector<std::string>* warnings_out) {
  std::vector<std::string> local;
  auto& warnings = warnings_out ? *warnings_out : local;

  AtomicProfile profile;
  profile.instance_ref = instance.instance_id;
  for (Dimension d : kAllDimensions) profile.category(d) = empty_category(d);

  std::set<Dimension> seen;
  std::optional<Dimension> current;
  std::size_t recognized = 0;
  for (const auto& raw_line : split_lines(raw)) {
    std::string line = strip_markup(raw_line);
    if (line.empty() || line.starts_with("```")) continue;
    if (auto header = category_header(line)) {
      current = header;
      seen.insert(*header);
      continue;
    }
    // "Relation: value" or "Relation (description): value".
    std::size_t i = 0;
    while (i < line.size() && std::isalpha(static_cast<unsigned char>(line[i]))) ++i;
    const AtomicRelation* relation = find_relation(std::string_view(line).substr(0, i));
    std::string_view rest = trim_view(std::string_view(line).substr(i));
    if (relation && rest.starts_with("(")) {
      auto close = rest.find(')');
      rest = close == std::string_view::npos ? std::string_view{} : trim_view(rest.substr(close + 1));
    }
    if (!relation || rest.empty() || rest.front() != ':') {
      warnings.push_back("unrecognized line ignored: " + line);
      continue;
    }
    ++recognized;
    if (current && *current != relation->category) {
      warnings.push_back(std::string(relation->name) + " listed under the wrong category");
    }
    seen.insert(relation->category);
    std::string value = trim(rest.substr(1));
    for (auto& entry : profile.category(relation->category)) {
      if (entry.relation != relation->name) continue;
      if (entry.value) warnings.push_back(std::string(relation->name) + " given twice; keeping the first");
      else if (!is_inapplicable(value)) entry.value = value;
    }
  }

  if (recognized == 0) {
    throw ParseError(ParseErrorKind::malformed, "", 0, "no ATOMIC relation lines found");
  }
  for (Dimension d : kAllDimensions) {
    if (!seen.count(d)) {
      throw ParseError(ParseErrorKind::missing_section, std::string(to_string(d)), raw.size(),
                       "missing required section '" + std::string(to_string(d)) + "'");
    }
  }
  return profile;
}

std::string render_atomic_text(const AtomicProfile& profile) {
  static constexpr std::pair<Dimension, std::string_view> kTitles[] = {
      {Dimension::engaged_events, "Engaged Events"},
      {Dimension::generalizable_properties, "Generalizable Properties"},
      {Dimension::evoked_emotions, "Evoked Emotions"}};
  std::string out;
  for (const auto& [d, title] : kTitles) {
    out += std::string(title) + ":\n";
    for (const auto& e : profile.category(d)) out += "- " + e.relation + ": " + e.value.value_or("N/A") + "\n";
  }
  return out;
}

std::string render_atomic_fragment(const AtomicProfile& profile, Dimension d) {
  std::vector<std::string> lines;
  for (const auto& e : profile.category(d)) {
    if (e.value) lines.push_back(e.relation + ": " + *e.value);
  }
  return lines.empty() ? std::string("N/A") : join(lines, "\n");
}

void to_json(json& j, const AtomicProfile& profile) {
  j = json::object();
  j["instance_ref"] = profile.instance_ref;
  for (Dimension d : kAllDimensions) {
    json cat = json::object();
    for (const auto& e : profile.category(d)) cat[e.relation] = e.value ? json(*e.value) : json(nullptr);
    j[std::string(to_string(d))] = cat;
  }
  j["provenance"] = json{{"model_id", profile.provenance.model_id},
                         {"prompt_hash", profile.provenance.prompt_hash},
                         {"created_at", profile.provenance.created_at}};
}

void from_json(const json& j, AtomicProfile& profile) {
  profile = AtomicProfile{};
  profile.instance_ref = j.value("instance_ref", std::string{});
  for (Dimension d : kAllDimensions) {
    auto& cat = profile.category(d);
    cat = empty_category(d);
    auto it = j.find(std::string(to_string(d)));
    if (it == j.end() || !it->is_object()) continue;
    for (auto& e : cat) {
      auto v = it->find(e.relation);
      if (v != it->end() && v->is_string()) e.value = v->get<std::string>();
    }
  }
  if (auto p = j.find("provenance"); p != j.end() && p->is_object()) {
    profile.provenance.model_id = p->value("model_id", std::string{});
    profile.provenance.prompt_hash = p->value("prompt_hash", std::string{});
    profile.provenance.created_at = p->value("created_at", std::string{});
  }
}

}  // namespace scene_forge
