#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "scene_forge/scene_model.hpp"
#include "scene_forge/util.hpp"

namespace scene_forge {

using nlohmann::json;

namespace {

enum class Section {
  none,
  contextual,
  events,
  entities,
  setting,
  profile,
  keyword,
  assigned_label,
  engaged_events,
  generalizable_properties,
  evoked_emotions,
};

constexpr std::array kRequired = {Section::events,         Section::entities,
                                  Section::setting,        Section::engaged_events,
                                  Section::generalizable_properties, Section::evoked_emotions};

std::string section_name(Section s) {
  switch (s) {
    case Section::events: return "events";
    case Section::entities: return "entities";
    case Section::setting: return "setting";
    case Section::engaged_events: return "engaged_events";
    case Section::generalizable_properties: return "generalizable_properties";
    case Section::evoked_emotions: return "evoked_emotions";
    case Section::keyword: return "keyword";
    case Section::assigned_label: return "assigned_label";
    case Section::profile: return "expression_profile";
    case Section::contextual: return "contextual_scene";
    case Section::none: break;
  }
  return "none";
}

// ---- shared item parsers ----------------------------------------------------------

std::string strip_emphasis(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != '*' && c != '`') out.push_back(c);
  }
  return trim(out);
}

bool is_none_marker(std::string_view s) {
  std::string v = to_lower_ascii(trim_view(s));
  while (!v.empty() && (v.back() == '.' || v.back() == '!')) v.pop_back();
  static const std::set<std::string> kNone = {"none",       "n/a",         "na",
                                              "null",       "nothing",     "-",
                                              "no emotion", "no emotions", "none identified"};
  return kNone.count(v) > 0;
}

/// "Nostalgia (tied to memories)" -> {Nostalgia, tied to memories}.
Emotion parse_emotion(std::string_view text) {
  std::string s = strip_emphasis(text);
  if (!s.empty() && s.back() == ')') {
    int depth = 0;
    for (std::size_t i = s.size(); i-- > 0;) {
      if (s[i] == ')') ++depth;
      if (s[i] == '(' && --depth == 0) {
        std::string head = trim(std::string_view(s).substr(0, i));
        std::string inner = trim(std::string_view(s).substr(i + 1, s.size() - i - 2));
        if (!head.empty()) return Emotion{head, inner.empty() ? std::nullopt : std::optional(inner)};
        break;
      }
    }
  }
  for (std::string_view sep : {std::string_view(": "), std::string_view(" - "),
                               std::string_view(" \xE2\x80\x93 "), std::string_view(" \xE2\x80\x94 ")}) {
    if (auto pos = s.find(sep); pos != std::string::npos && pos > 0) {
      std::string head = trim(std::string_view(s).substr(0, pos));
      std::string tail = trim(std::string_view(s).substr(pos + sep.size()));
      return Emotion{head, tail.empty() ? std::nullopt : std::optional(tail)};
    }
  }
  return Emotion{s, std::nullopt};
}

std::vector<Emotion> parse_emotion_list(std::string_view text) {
  std::vector<Emotion> out;
  for (const auto& piece : split_top_level(text, ";,")) {
    if (is_none_marker(piece)) continue;
    Emotion e = parse_emotion(piece);
    if (!e.emotion.empty()) out.push_back(std::move(e));
  }
  return out;
}

/// "Agent (Feeding)" -> {Agent, Feeding}; "Agent" -> {Agent, none}.
RoleFrame parse_role(std::string_view text) {
  std::string s = strip_emphasis(text);
  if (!s.empty() && s.back() == ')') {
    if (auto open = s.find('('); open != std::string::npos && open > 0) {
      std::string frame = trim(std::string_view(s).substr(open + 1, s.size() - open - 2));
      return RoleFrame{trim(std::string_view(s).substr(0, open)),
                       frame.empty() ? std::nullopt : std::optional(frame)};
    }
  }
  return RoleFrame{s, std::nullopt};
}

std::vector<std::string> parse_item_list(std::string_view text, std::string_view seps = ";") {
  std::vector<std::string> out;
  for (const auto& piece : split_top_level(text, seps)) {
    std::string item = strip_emphasis(piece);
    if (!item.empty()) out.push_back(std::move(item));
  }
  return out;
}

/// "crow = AnimalGroupX", "whiskey (ObjectZ)", "(crow = AnimalGroupX)", "whiskey".
std::pair<std::string, std::optional<EntityLabel>> parse_keyword_spec(std::string_view text) {
  std::string s = strip_emphasis(text);
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = trim(std::string_view(s).substr(1, s.size() - 2));
  for (std::string_view sep : {std::string_view("->"), std::string_view("\xE2\x86\x92"), std::string_view("=")}) {
    if (auto pos = s.find(sep); pos != std::string::npos) {
      std::string kw = trim(std::string_view(s).substr(0, pos));
      std::string label = trim(std::string_view(s).substr(pos + sep.size()));
      if (!label.empty() && label.front() == '(' && label.back() == ')') {
        label = trim(std::string_view(label).substr(1, label.size() - 2));
      }
      if (label.empty()) return {kw, std::nullopt};
      return {kw, EntityLabel{label}};
    }
  }
  if (!s.empty() && s.back() == ')') {
    if (auto open = s.rfind('('); open != std::string::npos) {
      std::string head = trim(std::string_view(s).substr(0, open));
      std::string inner = trim(std::string_view(s).substr(open + 1, s.size() - open - 2));
      if (looks_like_label(inner)) return {head, EntityLabel{inner}};
      if (looks_like_label(head)) return {inner, EntityLabel{head}};
    }
  }
  return {s, std::nullopt};
}

// ---- entities ----------------------------------------------------------------------

enum class EntityAttr { roles, properties, emotions };

/// Recognizes "Property: ...", "Roles: ...", "Emotion: ..." and returns the value part.
std::optional<std::pair<EntityAttr, std::string>> entity_attribute(std::string_view segment) {
  static const std::vector<std::pair<std::string_view, EntityAttr>> kTags = {
      {"role(s) with associated frame(s)", EntityAttr::roles},
      {"role(s)", EntityAttr::roles},
      {"roles", EntityAttr::roles},
      {"role", EntityAttr::roles},
      {"properties", EntityAttr::properties},
      {"property", EntityAttr::properties},
      {"emotions", EntityAttr::emotions},
      {"emotion", EntityAttr::emotions},
  };
  std::string s = strip_emphasis(segment);
  for (const auto& [tag, attr] : kTags) {
    if (!istarts_with(s, tag)) continue;
    std::string_view rest = trim_view(std::string_view(s).substr(tag.size()));
    if (rest.empty() || rest.front() != ':') continue;
    return std::make_pair(attr, trim(rest.substr(1)));
  }
  return std::nullopt;
}

void apply_entity_value(SceneEntity& entity, EntityAttr attr, std::string_view value) {
  switch (attr) {
    case EntityAttr::roles:
      for (const auto& r : split_top_level(value, ",;")) {
        if (!is_none_marker(r)) entity.roles.push_back(parse_role(r));
      }
      break;
    case EntityAttr::properties:
      for (auto& p : parse_item_list(value, ",;")) {
        if (!is_none_marker(p)) entity.properties.push_back(std::move(p));
      }
      break;
    case EntityAttr::emotions:
      for (auto& e : parse_emotion_list(value)) entity.emotions.push_back(std::move(e));
      break;
  }
}

void apply_entity_segment(SceneEntity& entity, std::string_view segment) {
  if (auto attr = entity_attribute(segment)) {
    apply_entity_value(entity, attr->first, attr->second);
    return;
  }
  // Untagged items: "Agent (Feeding)" or "Experiencer" read as roles, while
  // lowercase descriptors such as "solitary" read as properties.
  for (const auto& item : split_top_level(segment, ",")) {
    if (is_none_marker(item)) continue;
    const RoleFrame rf = parse_role(item);
    const bool role_like = rf.frame.has_value() ||
                           (!rf.role.empty() && std::isupper(static_cast<unsigned char>(rf.role.front())));
    if (role_like) {
      entity.roles.push_back(rf);
    } else {
      entity.properties.push_back(strip_emphasis(item));
    }
  }
}

struct EntityHead {
  std::string label;
  std::string mention;
  std::string rest;
};

/// "PersonX (she): Agent (Feeding)" -> {PersonX, she, "Agent (Feeding)"}.
std::optional<EntityHead> parse_entity_head(std::string_view segment) {
  std::string s = strip_emphasis(segment);
  std::size_t i = 0;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  std::string label = s.substr(0, i);
  if (!looks_like_label(label)) return std::nullopt;
  EntityHead head{label, {}, {}};
  while (i < s.size() && s[i] == ' ') ++i;
  if (i < s.size() && s[i] == '(') {
    int depth = 0;
    std::size_t j = i;
    for (; j < s.size(); ++j) {
      if (s[j] == '(') ++depth;
      if (s[j] == ')' && --depth == 0) break;
    }
    head.mention = trim(std::string_view(s).substr(i + 1, j - i - 1));
    i = std::min(j + 1, s.size());
  }
  std::string_view rest = trim_view(std::string_view(s).substr(i));
  if (!rest.empty() && rest.front() == ':') {
    rest = trim_view(rest.substr(1));
  } else if (rest.starts_with("- ")) {
    rest = trim_view(rest.substr(2));
  } else if (!rest.empty() && head.mention.empty()) {
    // "PersonX drinks ObjectY" is prose, not an entity head.
    return std::nullopt;
  }
  head.rest = std::string(rest);
  return head;
}

std::vector<SceneEntity> parse_entity_lines(const std::vector<std::string>& lines,
                                            std::vector<std::string>& warnings) {
  std::vector<SceneEntity> entities;
  for (const auto& line : lines) {
    if (auto attr = entity_attribute(line)) {
      if (entities.empty()) {
        warnings.push_back("entity attribute line before any entity ignored: " + line);
      } else {
        apply_entity_value(entities.back(), attr->first, attr->second);
      }
      continue;
    }
    for (const auto& segment : split_top_level(line, ";")) {
      if (auto head = parse_entity_head(segment)) {
        SceneEntity entity;
        entity.label = EntityLabel{head->label};
        entity.surface_mention = head->mention;
        if (!head->rest.empty()) apply_entity_segment(entity, head->rest);
        entities.push_back(std::move(entity));
      } else if (!entities.empty()) {
        apply_entity_segment(entities.back(), segment);
      } else {
        warnings.push_back("entity line without a label ignored: " + segment);
      }
    }
  }
  return entities;
}

// ---- setting ---------------------------------------------------------------------

Setting parse_setting_lines(const std::vector<std::string>& lines) {
  Setting st;
  auto assign = [](std::string& field, std::string value) {
    if (value.empty()) return;
    field = field.empty() ? std::move(value) : field + "; " + value;
  };
  static const std::vector<std::pair<std::string_view, int>> kTags = {
      {"place", 0}, {"location", 0}, {"time", 1}, {"atmosphere", 2}, {"atmos.", 2}, {"atmos", 2}};
  for (const auto& line : lines) {
    for (const auto& piece : split_top_level(line, ";")) {
      std::string s = strip_emphasis(piece);
      int target = -1;
      std::string value = s;
      for (const auto& [tag, idx] : kTags) {
        if (!istarts_with(s, tag)) continue;
        std::string_view rest = trim_view(std::string_view(s).substr(tag.size()));
        if (rest.empty() || rest.front() != ':') continue;
        target = idx;
        value = trim(rest.substr(1));
        break;
      }
      if (target < 0) {
        if (st.place.empty()) target = 0;
        else if (st.time.empty()) target = 1;
        else target = 2;
      }
      assign(target == 0 ? st.place : target == 1 ? st.time : st.atmosphere, value);
    }
  }
  return st;
}

// ---- bullet form -------------------------------------------------------------------

/// Removes leading whitespace, list markers, numbering and heading marks.
std::string strip_decoration(std::string_view line) {
  std::string_view s = trim_view(line);
  static constexpr std::string_view kUtf8Bullets[] = {
      "\xE2\x80\xA2", "\xC2\xB7", "\xE2\x97\xA6", "\xE2\x97\x8B", "\xE2\x96\xAA", "\xE2\x80\x93"};
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    if (s.starts_with("**")) {
      // Bold header such as "**Events:**" keeps its text; only the marker goes.
      break;
    }
    char c = s.front();
    if (c == '-' || c == '*' || c == '+' || c == '#' || c == '>') {
      s = trim_view(s.substr(1));
      changed = true;
      continue;
    }
    for (auto b : kUtf8Bullets) {
      if (s.starts_with(b)) {
        s = trim_view(s.substr(b.size()));
        changed = true;
        break;
      }
    }
    if (changed) continue;
    std::size_t d = 0;
    while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d]))) ++d;
    if (d > 0 && d + 1 < s.size() && (s[d] == '.' || s[d] == ')') && s[d + 1] == ' ') {
      s = trim_view(s.substr(d + 1));
      changed = true;
    }
  }
  return std::string(s);
}

struct HeaderMatch {
  Section section;
  std::string inline_content;
};

std::optional<HeaderMatch> match_header(const std::string& stripped, bool in_profile) {
  static const std::vector<std::pair<std::string_view, Section>> kHeaders = {
      {"generalizable properties", Section::generalizable_properties},
      {"generalisable properties", Section::generalizable_properties},
      {"generalizable property", Section::generalizable_properties},
      {"expression profile", Section::profile},
      {"contextual scene", Section::contextual},
      {"evoked emotions", Section::evoked_emotions},
      {"evoked emotion", Section::evoked_emotions},
      {"engaged events", Section::engaged_events},
      {"engaged event", Section::engaged_events},
      {"assigned label", Section::assigned_label},
      {"entities", Section::entities},
      {"keyword", Section::keyword},
      {"setting", Section::setting},
      {"events", Section::events},
  };
  static const std::vector<std::pair<std::string_view, Section>> kProfileAliases = {
      {"properties", Section::generalizable_properties},
      {"emotions", Section::evoked_emotions},
      {"events", Section::engaged_events},
  };
  std::string cleaned = strip_emphasis(stripped);
  auto try_table = [&](const auto& table) -> std::optional<HeaderMatch> {
    for (const auto& [name, section] : table) {
      if (!istarts_with(cleaned, name)) continue;
      std::string_view rest = trim_view(std::string_view(cleaned).substr(name.size()));
      if (!rest.empty() && rest.front() != ':' && rest.front() != '(') continue;
      // "Keyword (crow = AnimalGroupX)" style content keeps its parentheses.
      if (!rest.empty() && rest.front() == ':') rest = trim_view(rest.substr(1));
      return HeaderMatch{section, std::string(rest)};
    }
    return std::nullopt;
  };
  if (in_profile) {
    if (auto m = try_table(kProfileAliases)) return m;
  }
  return try_table(kHeaders);
}

struct BulletDocument {
  std::map<Section, std::vector<std::string>> content;
  std::set<Section> seen;
  std::string profile_header_inline;
};

BulletDocument scan_bullets(std::string_view raw, std::vector<std::string>& warnings) {
  BulletDocument doc;
  Section current = Section::none;
  bool in_profile = false;
  for (const auto& line : split_lines(raw)) {
    std::string stripped = strip_decoration(line);
    if (stripped.empty() || stripped.starts_with("```")) continue;
    if (auto header = match_header(stripped, in_profile)) {
      current = header->section;
      doc.seen.insert(current);
      if (current == Section::profile) {
        in_profile = true;
        doc.profile_header_inline = header->inline_content;
        continue;
      }
      if (current == Section::contextual) {
        in_profile = false;
        continue;
      }
      if (current == Section::events || current == Section::entities || current == Section::setting) {
        in_profile = false;
      }
      if (!header->inline_content.empty()) doc.content[current].push_back(header->inline_content);
      continue;
    }
    if (current == Section::none || current == Section::contextual || current == Section::profile) {
      warnings.push_back("text outside any known section ignored: " + stripped);
      continue;
    }
    doc.content[current].push_back(stripped);
  }
  return doc;
}

SceneRepresentation build_from_bullets(const BulletDocument& doc, std::string_view raw,
                                       const UsageInstance& instance,
                                       std::vector<std::string>& warnings) {
  for (Section s : kRequired) {
    if (!doc.seen.count(s)) {
      throw ParseError(ParseErrorKind::missing_section, section_name(s), raw.size(),
                       "missing required section '" + section_name(s) + "'");
    }
  }
  auto lines = [&](Section s) -> const std::vector<std::string>& {
    static const std::vector<std::string> kEmpty;
    auto it = doc.content.find(s);
    return it == doc.content.end() ? kEmpty : it->second;
  };

  SceneRepresentation scene;
  scene.instance_ref = instance.instance_id;
  auto& cs = scene.contextual_scene;
  auto& ep = scene.expression_profile;

  for (const auto& line : lines(Section::events)) {
    for (auto& item : parse_item_list(line)) cs.events.push_back(SceneEvent{std::move(item)});
  }
  cs.entities = parse_entity_lines(lines(Section::entities), warnings);
  cs.setting = parse_setting_lines(lines(Section::setting));

  for (const auto& line : lines(Section::engaged_events)) {
    for (auto& item : parse_item_list(line)) ep.engaged_events.push_back(std::move(item));
  }
  for (const auto& line : lines(Section::generalizable_properties)) {
    for (auto& item : parse_item_list(line)) ep.generalizable_properties.push_back(std::move(item));
  }
  for (const auto& line : lines(Section::evoked_emotions)) {
    for (auto& e : parse_emotion_list(line)) ep.evoked_emotions.push_back(std::move(e));
  }

  if (!doc.profile_header_inline.empty()) {
    auto [kw, label] = parse_keyword_spec(doc.profile_header_inline);
    ep.keyword = kw;
    ep.assigned_label = label;
  }
  if (!lines(Section::keyword).empty()) {
    auto [kw, label] = parse_keyword_spec(lines(Section::keyword).front());
    ep.keyword = kw;
    if (label) ep.assigned_label = label;
  }
  if (!lines(Section::assigned_label).empty()) {
    std::string label = strip_emphasis(lines(Section::assigned_label).front());
    if (!label.empty() && !is_none_marker(label)) ep.assigned_label = EntityLabel{label};
  }
  if (ep.keyword.empty()) ep.keyword = instance.keyword_lemma;
  return scene;
}

// ---- JSON form ---------------------------------------------------------------------

std::string normalize_key(std::string_view key) {
  std::string out;
  for (char c : strip_emphasis(key)) {
    if (c == ' ' || c == '-') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

struct JsonFields {
  std::map<Section, json> values;
  std::optional<json> provenance;
};

void collect_json(const json& obj, bool in_profile, JsonFields& fields,
                  std::vector<std::string>& warnings) {
  for (const auto& [raw_key, value] : obj.items()) {
    const std::string key = normalize_key(raw_key);
    if ((key == "contextual_scene" || key == "scene" || key == "context") && value.is_object()) {
      collect_json(value, false, fields, warnings);
    } else if ((key == "expression_profile" || key == "profile") && value.is_object()) {
      collect_json(value, true, fields, warnings);
    } else if (key == "events") {
      fields.values[in_profile ? Section::engaged_events : Section::events] = value;
    } else if (key == "entities") {
      fields.values[Section::entities] = value;
    } else if (key == "setting") {
      fields.values[Section::setting] = value;
    } else if (key == "engaged_events" || key == "engaged_event") {
      fields.values[Section::engaged_events] = value;
    } else if (key == "generalizable_properties" || key == "generalisable_properties" ||
               (in_profile && key == "properties")) {
      fields.values[Section::generalizable_properties] = value;
    } else if (key == "evoked_emotions" || (in_profile && key == "emotions")) {
      fields.values[Section::evoked_emotions] = value;
    } else if (key == "keyword" || key == "target_keyword") {
      fields.values[Section::keyword] = value;
    } else if (key == "assigned_label" || (in_profile && key == "label")) {
      fields.values[Section::assigned_label] = value;
    } else if (key == "provenance" && value.is_object()) {
      fields.provenance = value;
    } else if (key == "instance_ref") {
      // Re-derived from the instance being parsed.
    } else {
      warnings.push_back("ignored unknown field '" + std::string(raw_key) + "'");
    }
  }
}

std::string json_text(const json& v) {
  if (v.is_string()) return trim(v.get<std::string>());
  if (v.is_null()) return {};
  return v.dump();
}

const json* find_key(const json& obj, std::initializer_list<std::string_view> names) {
  if (!obj.is_object()) return nullptr;
  for (const auto& [k, v] : obj.items()) {
    const std::string key = normalize_key(k);
    for (auto n : names) {
      if (key == n) return &v;
    }
  }
  return nullptr;
}

std::vector<std::string> json_string_list(const json& v, std::string_view seps = ";") {
  std::vector<std::string> out;
  if (v.is_array()) {
    for (const auto& el : v) {
      std::string s;
      if (el.is_object()) {
        const json* t = find_key(el, {"text", "event", "description", "property", "value"});
        s = t ? json_text(*t) : el.dump();
      } else {
        s = json_text(el);
      }
      s = strip_emphasis(s);
      if (!s.empty()) out.push_back(std::move(s));
    }
  } else if (v.is_string()) {
    out = parse_item_list(v.get<std::string>(), seps);
  }
  return out;
}

std::vector<Emotion> json_emotions(const json& v) {
  std::vector<Emotion> out;
  if (v.is_array()) {
    for (const auto& el : v) {
      if (el.is_object()) {
        const json* name = find_key(el, {"emotion", "name", "label"});
        const json* why = find_key(el, {"explanation", "reason", "why"});
        Emotion e{name ? json_text(*name) : std::string{}, std::nullopt};
        if (why && !why->is_null()) {
          std::string w = json_text(*why);
          if (!w.empty()) e.explanation = w;
        }
        if (!e.emotion.empty() && !is_none_marker(e.emotion)) out.push_back(std::move(e));
      } else if (el.is_string()) {
        std::string s = el.get<std::string>();
        if (is_none_marker(s)) continue;
        Emotion e = parse_emotion(s);
        if (!e.emotion.empty()) out.push_back(std::move(e));
      }
    }
  } else if (v.is_string()) {
    out = parse_emotion_list(v.get<std::string>());
  }
  return out;
}

SceneEntity json_entity(const json& obj, std::string fallback_label) {
  SceneEntity ent;
  const json* label = find_key(obj, {"label", "id", "entity"});
  ent.label = EntityLabel{label ? json_text(*label) : std::move(fallback_label)};
  if (const json* m = find_key(obj, {"surface_mention", "mention", "surface", "surface_form", "text"})) {
    ent.surface_mention = json_text(*m);
  }
  if (const json* roles = find_key(obj, {"roles", "role", "role(s)", "roles_and_frames"})) {
    if (roles->is_array()) {
      for (const auto& r : *roles) {
        if (r.is_object()) {
          const json* name = find_key(r, {"role", "role_name", "name"});
          const json* frame = find_key(r, {"frame", "frame_name"});
          RoleFrame rf{name ? json_text(*name) : std::string{}, std::nullopt};
          if (frame && !frame->is_null() && !json_text(*frame).empty()) rf.frame = json_text(*frame);
          if (!rf.role.empty()) ent.roles.push_back(std::move(rf));
        } else {
          std::string s = json_text(r);
          if (!s.empty()) ent.roles.push_back(parse_role(s));
        }
      }
    } else if (roles->is_string()) {
      apply_entity_value(ent, EntityAttr::roles, roles->get<std::string>());
    }
  }
  if (const json* props = find_key(obj, {"properties", "property"})) {
    ent.properties = json_string_list(*props, ",;");
  }
  if (const json* emos = find_key(obj, {"emotions", "emotion"})) ent.emotions = json_emotions(*emos);
  return ent;
}

std::vector<SceneEntity> json_entities(const json& v, std::vector<std::string>& warnings) {
  std::vector<SceneEntity> out;
  if (v.is_array()) {
    std::vector<std::string> string_lines;
    for (const auto& el : v) {
      if (el.is_object()) {
        out.push_back(json_entity(el, {}));
      } else if (el.is_string()) {
        for (auto& e : parse_entity_lines({el.get<std::string>()}, warnings)) out.push_back(std::move(e));
      }
    }
  } else if (v.is_object()) {
    for (const auto& [label, body] : v.items()) {
      if (body.is_object()) {
        out.push_back(json_entity(body, label));
      } else {
        for (auto& e : parse_entity_lines({label + ": " + json_text(body)}, warnings)) {
          out.push_back(std::move(e));
        }
      }
    }
  } else if (v.is_string()) {
    out = parse_entity_lines(split_lines(v.get<std::string>()), warnings);
  }
  return out;
}

Setting json_setting(const json& v) {
  if (v.is_object()) {
    Setting st;
    if (const json* p = find_key(v, {"place", "location"})) st.place = json_text(*p);
    if (const json* t = find_key(v, {"time"})) st.time = json_text(*t);
    if (const json* a = find_key(v, {"atmosphere", "mood"})) st.atmosphere = json_text(*a);
    return st;
  }
  if (v.is_array()) {
    std::vector<std::string> lines;
    for (const auto& el : v) lines.push_back(json_text(el));
    return parse_setting_lines(lines);
  }
  return parse_setting_lines({json_text(v)});
}

SceneRepresentation build_from_json(const json& root, std::string_view raw, std::size_t base,
                                    const UsageInstance& instance,
                                    std::vector<std::string>& warnings) {
  JsonFields fields;
  collect_json(root, false, fields, warnings);
  for (Section s : kRequired) {
    if (!fields.values.count(s)) {
      throw ParseError(ParseErrorKind::missing_section, section_name(s), base + raw.size(),
                       "missing required section '" + section_name(s) + "'");
    }
  }
  SceneRepresentation scene;
  scene.instance_ref = instance.instance_id;
  auto& cs = scene.contextual_scene;
  auto& ep = scene.expression_profile;
  for (auto& e : json_string_list(fields.values[Section::events])) cs.events.push_back(SceneEvent{e});
  cs.entities = json_entities(fields.values[Section::entities], warnings);
  cs.setting = json_setting(fields.values[Section::setting]);
  ep.engaged_events = json_string_list(fields.values[Section::engaged_events]);
  ep.generalizable_properties = json_string_list(fields.values[Section::generalizable_properties]);
  ep.evoked_emotions = json_emotions(fields.values[Section::evoked_emotions]);

  const bool has_label_field = fields.values.count(Section::assigned_label) > 0;
  if (fields.values.count(Section::keyword)) {
    std::string kw = json_text(fields.values[Section::keyword]);
    if (has_label_field) {
      ep.keyword = kw;
    } else {
      auto [k, label] = parse_keyword_spec(kw);
      ep.keyword = k;
      ep.assigned_label = label;
    }
  }
  if (has_label_field) {
    const json& label = fields.values[Section::assigned_label];
    std::string raw_label = json_text(label);
    if (!raw_label.empty() && !is_none_marker(raw_label)) ep.assigned_label = EntityLabel{raw_label};
  }
  if (ep.keyword.empty()) ep.keyword = instance.keyword_lemma;

  if (fields.provenance) {
    const json& p = *fields.provenance;
    scene.provenance.model_id = p.value("model_id", std::string{});
    scene.provenance.prompt_hash = p.value("prompt_hash", std::string{});
    scene.provenance.created_at = p.value("created_at", std::string{});
  }
  return scene;
}

}  // namespace

SceneRepresentation parse_scene(std::string_view raw, const UsageInstance& instance,
                                std::vector<std::string>* warnings_out) {
  std::vector<std::string> local_warnings;
  std::vector<std::string>& warnings = warnings_out ? *warnings_out : local_warnings;

  std::optional<ParseError> json_error;
  const std::size_t open = raw.find('{');
  const std::size_t close = raw.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    std::string_view body = raw.substr(open, close - open + 1);
    try {
      json root = json::parse(body);
      if (root.is_object()) return build_from_json(root, body, open, instance, warnings);
    } catch (const json::parse_error& e) {
      json_error = ParseError(ParseErrorKind::malformed, "", open + (e.byte > 0 ? e.byte - 1 : 0),
                              std::string("unparseable JSON: ") + e.what());
    }
  }

  std::vector<std::string> scan_warnings;
  BulletDocument doc = scan_bullets(raw, scan_warnings);
  bool any_known = false;
  for (Section s : kRequired) any_known = any_known || doc.seen.count(s) > 0;
  if (!any_known) {
    if (json_error) throw *json_error;
    throw ParseError(ParseErrorKind::malformed, "", 0,
                     "no scene sections found (expected events, entities, setting, engaged "
                     "events, generalizable properties, evoked emotions)");
  }
  warnings.insert(warnings.end(), scan_warnings.begin(), scan_warnings.end());
  return build_from_bullets(doc, raw, instance, warnings);
}

}  // namespace scene_forge
