#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace scene_forge {

// ---- usage instances -------------------------------------------------------

enum class UsageSource { coca_scenes, dwug, other };

std::string_view to_string(UsageSource source);
UsageSource usage_source_from_string(std::string_view s);

/// Half-open range of code-point offsets into a context.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

/// A context u together with the target expression x that occurs in it.
struct UsageInstance {
  std::string instance_id;
  std::string context_text;
  std::string target_expression;
  std::optional<CharSpan> target_span;
  std::string keyword_lemma;
  UsageSource source = UsageSource::other;
  std::optional<std::string> gold_scene_type;

  friend bool operator==(const UsageInstance&, const UsageInstance&) = default;
};

/// Lists violated instance invariants; empty means valid.
std::vector<std::string> check_usage_instance(const UsageInstance& instance);

/// Byte range of the target expression inside context_text: the explicit span
/// when present, otherwise the first case-insensitive occurrence.
std::optional<std::pair<std::size_t, std::size_t>> target_byte_range(const UsageInstance& instance);

void to_json(nlohmann::json& j, const UsageInstance& instance);
void from_json(const nlohmann::json& j, UsageInstance& instance);

// ---- profile dimensions ------------------------------------------------------

/// The three expression-profile components; also the evaluation dimensions.
enum class Dimension { engaged_events, generalizable_properties, evoked_emotions };

inline constexpr Dimension kAllDimensions[] = {
    Dimension::engaged_events, Dimension::generalizable_properties, Dimension::evoked_emotions};

std::string_view to_string(Dimension d);
Dimension dimension_from_string(std::string_view s);

// ---- scene schema ------------------------------------------------------------

struct EntityLabel {
  std::string raw;
  friend bool operator==(const EntityLabel&, const EntityLabel&) = default;
};

struct LabelShape {
  std::string prefix;
  char suffix = '\0';
  bool recognized_prefix = false;
  bool valid_suffix = false;
};

/// Splits a label like "AnimalGroupX" into prefix and suffix letter.
LabelShape inspect_label(std::string_view raw);

/// True for CamelCase tokens ending in a single capital letter that either
/// carry a known category prefix or an X/Y/Z suffix (PersonX, AnimalQ, ...).
bool looks_like_label(std::string_view token);

/// Label-shaped tokens occurring in free text, in order of appearance.
std::vector<EntityLabel> find_label_references(std::string_view text);

struct SceneEvent {
  std::string text;
  std::vector<EntityLabel> referenced_labels() const { return find_label_references(text); }
  friend bool operator==(const SceneEvent&, const SceneEvent&) = default;
};

struct RoleFrame {
  std::string role;
  std::optional<std::string> frame;
  friend bool operator==(const RoleFrame&, const RoleFrame&) = default;
};

struct Emotion {
  std::string emotion;
  std::optional<std::string> explanation;
  friend bool operator==(const Emotion&, const Emotion&) = default;
};

struct SceneEntity {
  EntityLabel label;
  std::string surface_mention;
  std::vector<RoleFrame> roles;
  std::vector<std::string> properties;
  std::vector<Emotion> emotions;
  friend bool operator==(const SceneEntity&, const SceneEntity&) = default;
};

/// "unspecified" marks a field the context does not reveal.
struct Setting {
  std::string place;
  std::string time;
  std::string atmosphere;
  friend bool operator==(const Setting&, const Setting&) = default;
};

struct ContextualScene {
  std::vector<SceneEvent> events;
  std::vector<SceneEntity> entities;
  Setting setting;
  friend bool operator==(const ContextualScene&, const ContextualScene&) = default;
};

/// Target-expression-centred part of a scene. An empty evoked_emotions list is
/// the model's explicit "None".
struct ExpressionProfile {
  std::string keyword;
  std::optional<EntityLabel> assigned_label;
  std::vector<std::string> engaged_events;
  std::vector<std::string> generalizable_properties;
  std::vector<Emotion> evoked_emotions;

  std::vector<std::string> emotion_terms() const;
  friend bool operator==(const ExpressionProfile&, const ExpressionProfile&) = default;
};

struct Provenance {
  std::string model_id;
  std::string prompt_hash;
  std::string created_at;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SceneRepresentation {
  std::string instance_ref;
  ContextualScene contextual_scene;
  ExpressionProfile expression_profile;
  Provenance provenance;
  friend bool operator==(const SceneRepresentation&, const SceneRepresentation&) = default;
};

// ---- parsing -----------------------------------------------------------------

enum class ParseErrorKind { missing_section, malformed };

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, std::string section, std::size_t offset, const std::string& what)
      : std::runtime_error(what), kind_(kind), section_(std::move(section)), offset_(offset) {}

  ParseErrorKind kind() const { return kind_; }
  /// Name of the missing section (missing_section) or the section being read.
  const std::string& section() const { return section_; }
  /// Byte offset into the raw completion where the problem was detected.
  std::size_t offset() const { return offset_; }

 private:
  ParseErrorKind kind_;
  std::string section_;
  std::size_t offset_;
};

/// Parses a raw completion in either the JSON form or the bullet-list form.
/// Non-fatal oddities (ignored fields, stray lines) go to `warnings`.
SceneRepresentation parse_scene(std::string_view raw, const UsageInstance& instance,
                                std::vector<std::string>* warnings = nullptr);

/// Canonical on-disk document (JSON, two-space indent, trailing newline).
std::string render_scene(const SceneRepresentation& scene);

/// Bullet-list rendering in the layout of the few-shot examples.
std::string render_scene_bullets(const SceneRepresentation& scene);

void to_json(nlohmann::json& j, const SceneRepresentation& scene);

// ---- validation ----------------------------------------------------------------

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

ValidationReport validate_scene(const SceneRepresentation& scene);

}  // namespace scene_forge
