#include "scene_forge/scene_model.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "scene_forge/util.hpp"

namespace scene_forge {

using nlohmann::json;

std::string_view to_string(UsageSource source) {
  switch (source) {
    case UsageSource::coca_scenes: return "coca_scenes";
    case UsageSource::dwug: return "dwug";
    case UsageSource::other: return "other";
  }
  return "other";
}

UsageSource usage_source_from_string(std::string_view s) {
  if (s == "coca_scenes") return UsageSource::coca_scenes;
  if (s == "dwug") return UsageSource::dwug;
  if (s == "other") return UsageSource::other;
  throw std::invalid_argument("unknown usage source '" + std::string(s) + "'");
}

std::optional<std::pair<std::size_t, std::size_t>> target_byte_range(const UsageInstance& instance) {
  const std::string& ctx = instance.context_text;
  if (instance.target_span) {
    auto b = utf8_byte_offset(ctx, instance.target_span->begin);
    auto e = utf8_byte_offset(ctx, instance.target_span->end);
    if (!b || !e || *b > *e) return std::nullopt;
    return std::make_pair(*b, *e);
  }
  auto pos = ifind(ctx, instance.target_expression);
  if (!pos) return std::nullopt;
  return std::make_pair(*pos, *pos + instance.target_expression.size());
}

std::vector<std::string> check_usage_instance(const UsageInstance& instance) {
  std::vector<std::string> errors;
  if (instance.context_text.empty()) errors.push_back("context_text is empty");
  if (instance.target_expression.empty()) errors.push_back("target_expression is empty");
  if (!errors.empty()) return errors;

  if (instance.target_span) {
    auto range = target_byte_range(instance);
    if (!range) {
      errors.push_back("target_span is out of range for context_text");
    } else {
      std::string_view slice =
          std::string_view(instance.context_text).substr(range->first, range->second - range->first);
      if (slice != instance.target_expression) {
        errors.push_back("target_span slices to '" + std::string(slice) + "', not '" +
                         instance.target_expression + "'");
      }
    }
  } else if (!ifind(instance.context_text, instance.target_expression)) {
    errors.push_back("target_expression '" + instance.target_expression +
                     "' does not occur in context_text");
  }
  return errors;
}

void to_json(json& j, const UsageInstance& instance) {
  j = json{{"instance_id", instance.instance_id},
           {"context_text", instance.context_text},
           {"target_expression", instance.target_expression},
           {"keyword_lemma", instance.keyword_lemma},
           {"source", to_string(instance.source)}};
  j["target_span"] = instance.target_span
                         ? json::array({instance.target_span->begin, instance.target_span->end})
                         : json(nullptr);
  j["gold_scene_type"] = instance.gold_scene_type ? json(*instance.gold_scene_type) : json(nullptr);
}

void from_json(const json& j, UsageInstance& instance) {
  instance = UsageInstance{};
  instance.instance_id = j.at("instance_id").get<std::string>();
  instance.context_text = j.at("context_text").get<std::string>();
  instance.target_expression = j.at("target_expression").get<std::string>();
  instance.keyword_lemma = j.value("keyword_lemma", std::string{});
  instance.source = usage_source_from_string(j.value("source", std::string("other")));
  if (auto it = j.find("target_span"); it != j.end() && !it->is_null()) {
    instance.target_span = CharSpan{it->at(0).get<std::size_t>(), it->at(1).get<std::size_t>()};
  }
  if (auto it = j.find("gold_scene_type"); it != j.end() && !it->is_null()) {
    instance.gold_scene_type = it->get<std::string>();
  }
}

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::engaged_events: return "engaged_events";
    case Dimension::generalizable_properties: return "generalizable_properties";
    case Dimension::evoked_emotions: return "evoked_emotions";
  }
  return "engaged_events";
}

Dimension dimension_from_string(std::string_view s) {
  for (Dimension d : kAllDimensions) {
    if (to_string(d) == s) return d;
  }
  throw std::invalid_argument("unknown dimension '" + std::string(s) + "'");
}

// ---- labels ------------------------------------------------------------------

namespace {

constexpr std::string_view kRecognizedPrefixes[] = {"Person", "Object", "Animal", "AnimalGroup",
                                                    "Place"};

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

}  // namespace

LabelShape inspect_label(std::string_view raw) {
  LabelShape shape;
  if (raw.size() < 2) {
    shape.prefix = std::string(raw);
    return shape;
  }
  shape.suffix = raw.back();
  shape.prefix = std::string(raw.substr(0, raw.size() - 1));
  shape.valid_suffix = shape.suffix == 'X' || shape.suffix == 'Y' || shape.suffix == 'Z';
  shape.recognized_prefix =
      std::find(std::begin(kRecognizedPrefixes), std::end(kRecognizedPrefixes), shape.prefix) !=
      std::end(kRecognizedPrefixes);
  return shape;
}

bool looks_like_label(std::string_view token) {
  if (token.size() < 3 || !is_upper(token.front()) || !is_upper(token.back())) return false;
  bool has_lower = false;
  for (std::size_t i = 0; i + 1 < token.size(); ++i) {
    char c = token[i];
    if (is_lower(c)) {
      has_lower = true;
    } else if (!is_upper(c)) {
      return false;
    }
  }
  // The character before the suffix must be lowercase: "AnimalGroupX", not "ABX".
  if (!has_lower || !is_lower(token[token.size() - 2])) return false;
  LabelShape shape = inspect_label(token);
  return shape.recognized_prefix || shape.valid_suffix;
}

std::vector<EntityLabel> find_label_references(std::string_view text) {
  std::vector<EntityLabel> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    std::string_view token = text.substr(start, i - start);
    if (!token.empty() && looks_like_label(token)) out.push_back(EntityLabel{std::string(token)});
  }
  return out;
}

std::vector<std::string> ExpressionProfile::emotion_terms() const {
  std::vector<std::string> out;
  out.reserve(evoked_emotions.size());
  for (const auto& e : evoked_emotions) out.push_back(e.emotion);
  return out;
}

// ---- canonical JSON --------------------------------------------------------------

namespace {

json emotion_json(const Emotion& e) {
  json j{{"emotion", e.emotion}};
  if (e.explanation) j["explanation"] = *e.explanation;
  return j;
}

json emotions_json(const std::vector<Emotion>& emotions) {
  json arr = json::array();
  for (const auto& e : emotions) arr.push_back(emotion_json(e));
  return arr;
}

}  // namespace

void to_json(json& j, const SceneRepresentation& scene) {
  const auto& cs = scene.contextual_scene;
  const auto& ep = scene.expression_profile;

  json events = json::array();
  for (const auto& e : cs.events) events.push_back(e.text);

  json entities = json::array();
  for (const auto& ent : cs.entities) {
    json roles = json::array();
    for (const auto& r : ent.roles) {
      json role{{"role", r.role}};
      if (r.frame) role["frame"] = *r.frame;
      roles.push_back(role);
    }
    entities.push_back(json{{"label", ent.label.raw},
                            {"surface_mention", ent.surface_mention},
                            {"roles", roles},
                            {"properties", ent.properties},
                            {"emotions", emotions_json(ent.emotions)}});
  }

  j = json::object();
  j["instance_ref"] = scene.instance_ref;
  j["events"] = events;
  j["entities"] = entities;
  j["setting"] = json{{"place", cs.setting.place},
                      {"time", cs.setting.time},
                      {"atmosphere", cs.setting.atmosphere}};
  j["keyword"] = ep.keyword;
  j["assigned_label"] = ep.assigned_label ? json(ep.assigned_label->raw) : json(nullptr);
  j["engaged_events"] = ep.engaged_events;
  j["generalizable_properties"] = ep.generalizable_properties;
  j["evoked_emotions"] = emotions_json(ep.evoked_emotions);
  j["provenance"] = json{{"model_id", scene.provenance.model_id},
                         {"prompt_hash", scene.provenance.prompt_hash},
                         {"created_at", scene.provenance.created_at}};
}

std::string render_scene(const SceneRepresentation& scene) {
  json j = scene;
  return j.dump(2) + "\n";
}

namespace {

std::string emotion_text(const Emotion& e) {
  if (!e.explanation) return e.emotion;
  return e.emotion + " (" + *e.explanation + ")";
}

}  // namespace

std::string render_scene_bullets(const SceneRepresentation& scene) {
  const auto& cs = scene.contextual_scene;
  const auto& ep = scene.expression_profile;
  std::string out = "**Contextual Scene**\n* Events:\n";
  for (const auto& e : cs.events) out += "- " + e.text + "\n";

  out += "\n* Entities:\n";
  for (const auto& ent : cs.entities) {
    std::vector<std::string> segments;
    std::vector<std::string> roles;
    for (const auto& r : ent.roles) roles.push_back(r.frame ? r.role + " (" + *r.frame + ")" : r.role);
    if (!roles.empty()) segments.push_back("Roles: " + join(roles, ", "));
    if (!ent.properties.empty()) segments.push_back("Property: " + join(ent.properties, ", "));
    if (!ent.emotions.empty()) {
      std::vector<std::string> emotions;
      for (const auto& e : ent.emotions) emotions.push_back(emotion_text(e));
      segments.push_back("Emotion: " + join(emotions, ", "));
    }
    out += "- " + ent.label.raw + " (" + ent.surface_mention + ")";
    if (!segments.empty()) out += ": " + join(segments, "; ");
    out += "\n";
  }

  out += "\n* Setting:\n";
  out += "- Place: " + cs.setting.place + "\n";
  out += "- Time: " + cs.setting.time + "\n";
  out += "- Atmosphere: " + cs.setting.atmosphere + "\n";

  out += "\n**Expression Profile**";
  if (ep.assigned_label) {
    out += " (" + ep.keyword + " = " + ep.assigned_label->raw + ")\n";
  } else {
    out += "\n- Keyword: " + ep.keyword + "\n";
  }
  out += "- Engaged events: " + join(ep.engaged_events, "; ") + "\n";
  out += "- Generalizable properties: " + join(ep.generalizable_properties, "; ") + "\n";
  std::vector<std::string> emotions;
  for (const auto& e : ep.evoked_emotions) emotions.push_back(emotion_text(e));
  out += "- Evoked emotions: " + (emotions.empty() ? std::string("None") : join(emotions, "; ")) + "\n";
  return out;
}

// ---- validation ----------------------------------------------------------------

namespace {

void check_label_shape(const EntityLabel& label, std::string_view where,
                       std::vector<std::string>& warnings) {
  LabelShape shape = inspect_label(label.raw);
  if (!shape.valid_suffix) {
    warnings.push_back(std::string(where) + " label '" + label.raw +
                       "' does not end in an X/Y/Z suffix");
  }
  if (!shape.recognized_prefix) {
    warnings.push_back(std::string(where) + " label '" + label.raw +
                       "' has an unrecognized category prefix '" + shape.prefix + "'");
  }
}

void require_items(const std::vector<std::string>& items, std::string_view name,
                   std::vector<std::string>& errors) {
  if (items.empty()) errors.push_back(std::string(name) + " must contain at least one entry");
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (trim_view(items[i]).empty()) {
      errors.push_back(std::string(name) + "[" + std::to_string(i) + "] is empty");
    }
  }
}

}  // namespace

ValidationReport validate_scene(const SceneRepresentation& scene) {
  ValidationReport report;
  auto& errors = report.errors;
  auto& warnings = report.warnings;
  const auto& cs = scene.contextual_scene;
  const auto& ep = scene.expression_profile;

  if (cs.events.empty()) errors.push_back("events must contain at least one entry");
  if (cs.entities.empty()) errors.push_back("entities must contain at least one entry");

  std::set<std::string> labels;
  for (std::size_t i = 0; i < cs.entities.size(); ++i) {
    const auto& ent = cs.entities[i];
    if (ent.label.raw.empty()) {
      errors.push_back("entities[" + std::to_string(i) + "] has an empty label");
      continue;
    }
    if (!labels.insert(ent.label.raw).second) {
      errors.push_back("duplicate entity label '" + ent.label.raw + "'");
    }
    if (trim_view(ent.surface_mention).empty()) {
      errors.push_back("entity '" + ent.label.raw + "' has an empty surface mention");
    }
    check_label_shape(ent.label, "entity", warnings);
  }

  for (std::size_t i = 0; i < cs.events.size(); ++i) {
    const auto& ev = cs.events[i];
    if (trim_view(ev.text).empty()) {
      errors.push_back("events[" + std::to_string(i) + "] is empty");
      continue;
    }
    std::set<std::string> seen;
    for (const auto& ref : ev.referenced_labels()) {
      if (!seen.insert(ref.raw).second) continue;
      if (!labels.count(ref.raw)) {
        warnings.push_back("event '" + ev.text + "' references '" + ref.raw +
                           "', which is not a listed entity");
      }
      if (!inspect_label(ref.raw).valid_suffix) {
        warnings.push_back("event label '" + ref.raw + "' does not end in an X/Y/Z suffix");
      }
    }
  }

  const Setting& st = cs.setting;
  if (trim_view(st.place).empty()) errors.push_back("setting.place is empty");
  if (trim_view(st.time).empty()) errors.push_back("setting.time is empty");
  if (trim_view(st.atmosphere).empty()) errors.push_back("setting.atmosphere is empty");

  require_items(ep.engaged_events, "engaged_events", errors);
  require_items(ep.generalizable_properties, "generalizable_properties", errors);

  if (ep.assigned_label) {
    if (!labels.count(ep.assigned_label->raw)) {
      errors.push_back("assigned_label '" + ep.assigned_label->raw +
                       "' does not resolve to an entity in the contextual scene");
    }
    check_label_shape(*ep.assigned_label, "assigned", warnings);
  }
  return report;
}

}  // namespace scene_forge
