#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "scene_forge/scene_model.hpp"

namespace scene_forge {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct FewShotExample {
  std::string input_text;
  std::string output_text;
};

struct PromptBundle {
  std::string system_instruction;
  std::vector<FewShotExample> few_shot_examples;
  std::string user_message;

  /// system, then one user/assistant pair per example, then the query.
  std::vector<ChatMessage> messages() const;
};

/// Stable textual form of a conversation, used for cache keys and prompt hashes.
std::string serialize_messages(const std::vector<ChatMessage>& messages);

/// The scene-abstraction system instruction.
const std::string& scene_system_instruction();

/// The three bundled few-shot examples: crow, coffee, rain.
const std::vector<FewShotExample>& default_scene_examples();

/// Wraps the target expression in ** markers, e.g. "drinking **whiskey** late".
std::string highlight_target(const UsageInstance& instance);

/// "Sentence: <highlighted context>\nKeyword: <lemma>".
std::string format_query(const UsageInstance& instance);

/// Throws std::invalid_argument when k exceeds the number of examples.
PromptBundle build_scene_prompt(const UsageInstance& instance, const std::vector<FewShotExample>& examples,
                                std::size_t k);

struct AtomicRelation {
  std::string_view name;
  std::string_view description;
  Dimension category;
};

/// The 22 relations in category order: 10 event, 7 property, 5 emotion relations.
const std::vector<AtomicRelation>& atomic_relations();

const std::string& atomic_system_instruction();

PromptBundle build_atomic_prompt(const UsageInstance& instance);

}  // namespace scene_forge
