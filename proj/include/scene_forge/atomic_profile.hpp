#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scene_forge/scene_model.hpp"

namespace scene_forge {

/// One relation slot. An empty value means the relation was judged
/// inapplicable (N/A) or left out by the model.
struct AtomicEntry {
  std::string relation;
  std::optional<std::string> value;
  friend bool operator==(const AtomicEntry&, const AtomicEntry&) = default;
};

/// Baseline profile over the 22 commonsense relations. Each category holds
/// every relation of that category, in table order.
struct AtomicProfile {
  std::string instance_ref;
  std::vector<AtomicEntry> engaged_events;
  std::vector<AtomicEntry> generalizable_properties;
  std::vector<AtomicEntry> evoked_emotions;
  Provenance provenance;

  const std::vector<AtomicEntry>& category(Dimension d) const;
  std::vector<AtomicEntry>& category(Dimension d);
  /// Value for a relation name, or nullopt when inapplicable. Throws on unknown names.
  std::optional<std::string> value(std::string_view relation) const;

  friend bool operator==(const AtomicProfile&, const AtomicProfile&) = default;
};

/// Parses "Relation: value" lines grouped under category headers. Relations
/// that are missing or answered "N/A" become inapplicable.
/// Throws ParseError{missing_section} when a whole category is absent and
/// ParseError{malformed} when no relation line is recognized.
AtomicProfile parse_atomic_profile(std::string_view raw, const UsageInstance& instance,
                                   std::vector<std::string>* warnings = nullptr);

/// Text block in the same layout the parser reads.
std::string render_atomic_text(const AtomicProfile& profile);

/// "Relation: value" lines for one dimension, skipping inapplicable relations.
std::string render_atomic_fragment(const AtomicProfile& profile, Dimension d);

void to_json(nlohmann::json& j, const AtomicProfile& profile);
void from_json(const nlohmann::json& j, AtomicProfile& profile);

}  // namespace scene_forge
