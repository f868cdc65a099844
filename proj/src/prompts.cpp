#include "scene_forge/prompts.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "scene_forge/util.hpp"

namespace scene_forge {

std::vector<ChatMessage> PromptBundle::messages() const {
  std::vector<ChatMessage> out;
  out.reserve(2 + 2 * few_shot_examples.size());
  out.push_back({"system", system_instruction});
  for (const auto& ex : few_shot_examples) {
    out.push_back({"user", ex.input_text});
    out.push_back({"assistant", ex.output_text});
  }
  out.push_back({"user", user_message});
  return out;
}

std::string serialize_messages(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += "<|" + m.role + "|>\n";
    out += m.content;
    out += "\n";
  }
  return out;
}

const std::string& scene_system_instruction() {
  static const std::string text =
      R"TXT(Given a sentence and a target keyword, extract a structured scene abstraction and format your response as a bullet point list, covering the following fields:

1. Events:
- List only what happened in COMET-ATOMIC style (e.g., "PersonX opens ObjectY").
- Do not include properties, emotions, or interpretations.
- Do not include definitions or static facts.

2. Entities:
- List each entity with its surface mention (e.g., "PersonX (she)").
- For each entity, include:
  o Role(s) with associated Frame(s)
  o Property: context-specific traits with brief explanations
  o Emotion: inferred emotional states with explanations

3. Setting:
- Describe Place, Time, and Atmosphere if inferable.
- Use "unspecified" when not identifiable.

4. Expression Profile:
- Keyword: the target linguistic expression (with its assigned label)
- Engaged Events: COMET-ATOMIC style events involving the keyword
- Generalizable Properties: abstract traits implied by the context

Constraints:
- All entity labels must use X/Y/Z suffixes only (e.g., PersonX).
- Format must be a bullet-style list without extra explanation.
)TXT";
  return text;
}

const std::vector<FewShotExample>& default_scene_examples() {
  static const std::vector<FewShotExample> examples = {
      {
          "Sentence: Sometimes she would just stay by the window, feeding the **crows** while he was "
          "doing some paperwork, just like old times.\nKeyword: crow",
          R"TXT(**Contextual Scene**
*** Events:**
PersonX stays near a window; PersonX feeds AnimalGroupX; PersonY does paperwork nearby; PersonX and PersonY share a quiet routine

*** Entities:**
· PersonX (she): Agent (Feeding), Experiencer (Remembering_past); Property: Reflective; Emotion: Calm, Nostalgia
· PersonY (he): Co-participant (Routine_activity), Worker (Office_work)
· AnimalGroupX (the crows): Recipients (Feeding), Symbols (Memory_triggering); Property: Accustomed to being fed

*** Setting:**
· Place: by a window (indoors); Time: reflective moment;
· Atmosphere: calm and nostalgic

**Expression Profile** (crow = AnimalGroupX)
· Engaged events: PersonX feeds them; they receive food as part of a habitual routine
· Generalizable properties: commonly present near humans; respond to routine interactions; may evoke memories through repeated presence; passive figures in quiet domestic routines
· Evoked emotions: Nostalgia (tied to memories of past shared routines); Serenity (presence contributes to a peaceful atmosphere)
)TXT",
      },
      {
          "Sentence: She drank her third **coffee** of the morning and kept typing.\nKeyword: coffee",
          R"TXT(**Contextual Scene**
*** Events:**
PersonX drinks ObjectY; PersonX types continuously

*** Entities:**
· PersonX (she): Agent (Ingestion), Worker (Being_employed); Property: productive, alert
· ObjectY (coffee): Ingestibles (Ingestion); Property: stimulating, caffeinated

*** Setting:**
· Place: unspecified; Time: morning;
· Atmosphere: focused, energetic

**Expression Profile** (coffee = ObjectY)
· Engaged events: PersonX drinks it; Supports PersonX's work
· Generalizable properties: Boosts productivity; Work ritual for energy
· Evoked emotions: Motivation (The act of drinking coffee suggests a drive to continue working.)
)TXT",
      },
      {
          "Sentence: The **rain** drummed on the tin roof while the children huddled under a blanket, "
          "giggling at every thunderclap.\nKeyword: rain",
          R"TXT(**Contextual Scene**
*** Events:**
ObjectX drums on ObjectY; PersonX huddles under ObjectZ; PersonX giggles at each thunderclap

*** Entities:**
· ObjectX (the rain): Cause (Impact), Sound_source (Make_noise); Property: steady, loud on metal
· PersonX (the children): Agent (Taking_shelter), Experiencer (Emotion_directed); Property: playful, sheltered; Emotion: Delight, Coziness
· ObjectY (the tin roof): Ground (Impact); Property: thin, resonant
· ObjectZ (a blanket): Shelter (Protecting); Property: soft, shared

*** Setting:**
· Place: under a tin roof (indoors); Time: during a thunderstorm;
· Atmosphere: cozy and playful despite the storm

**Expression Profile** (rain = ObjectX)
· Engaged events: ObjectX drums on the roof; it drives PersonX to huddle together
· Generalizable properties: audible presence that fills a shelter; turns a storm into a shared game; marks the line between outside weather and inside safety
· Evoked emotions: Coziness (the sound heightens the warmth of being sheltered); Excitement (the storm makes the moment playful)
)TXT",
      },
  };
  return examples;
}

std::string highlight_target(const UsageInstance& instance) {
  auto range = target_byte_range(instance);
  if (!range) return instance.context_text;
  const auto& text = instance.context_text;
  return text.substr(0, range->first) + "**" + text.substr(range->first, range->second - range->first) + "**" +
         text.substr(range->second);
}

std::string format_query(const UsageInstance& instance) {
  return "Sentence: " + highlight_target(instance) + "\nKeyword: " + instance.keyword_lemma;
}

PromptBundle build_scene_prompt(const UsageInstance& instance, const std::vector<FewShotExample>& examples,
                                std::size_t k) {
  if (k > examples.size()) {
    throw std::invalid_argument(fmt::format("requested {} few-shot examples but only {} are available", k,
                                            examples.size()));
  }
  PromptBundle bundle;
  bundle.system_instruction = scene_system_instruction();
  bundle.few_shot_examples.assign(examples.begin(), examples.begin() + static_cast<std::ptrdiff_t>(k));
  bundle.user_message = format_query(instance);
  return bundle;
}

const std::vector<AtomicRelation>& atomic_relations() {
  using D = Dimension;
  static const std::vector<AtomicRelation> relations = {
      {"Causes", "What the event causes", D::engaged_events},
      {"HinderedBy", "What prevents the event", D::engaged_events},
      {"xReason", "Why PersonX acts", D::engaged_events},
      {"HasSubEvent", "Steps making up the event", D::engaged_events},
      {"isBefore", "What usually happens before", D::engaged_events},
      {"isAfter", "What usually happens after", D::engaged_events},
      {"xIntent", "What PersonX intends", D::engaged_events},
      {"xNeed", "What PersonX needs beforehand", D::engaged_events},
      {"xEffect", "What happens to PersonX", D::engaged_events},
      {"oEffect", "What happens to others", D::engaged_events},
      {"ObjectUse", "What the keyword is used for", D::generalizable_properties},
      {"HasProperty", "Attribute or quality", D::generalizable_properties},
      {"MadeUpOf", "Material or components", D::generalizable_properties},
      {"AtLocation", "Where typically found", D::generalizable_properties},
      {"CapableOf", "What the keyword can do", D::generalizable_properties},
      {"Desires", "What it wants (if animate)", D::generalizable_properties},
      {"NotDesires", "What it avoids (if animate)", D::generalizable_properties},
      {"xReact", "How PersonX feels afterward", D::evoked_emotions},
      {"oReact", "How others feel", D::evoked_emotions},
      {"xWant", "What PersonX wants next", D::evoked_emotions},
      {"oWant", "What others want", D::evoked_emotions},
      {"xAttr", "How PersonX is perceived", D::evoked_emotions},
  };
  return relations;
}

namespace {

std::string_view category_title(Dimension d) {
  switch (d) {
    case Dimension::engaged_events: return "Engaged Events";
    case Dimension::generalizable_properties: return "Generalizable Properties";
    case Dimension::evoked_emotions: return "Evoked Emotions";
  }
  return "";
}

}  // namespace

const std::string& atomic_system_instruction() {
  static const std::string text = [] {
    std::string s =
        "Given a sentence and a target keyword, describe the keyword in this situation with the "
        "ATOMIC-2020 commonsense relations listed below. Answer every relation on its own line as "
        "\"Relation: value\", grouped under the three category headers in the order shown. Write "
        "\"N/A\" when a relation does not apply (for example Desires and NotDesires for an "
        "inanimate keyword).\n";
    for (Dimension d : kAllDimensions) {
      s += fmt::format("\n{}:\n", category_title(d));
      for (const auto& r : atomic_relations()) {
        if (r.category == d) s += fmt::format("- {}: {}\n", r.name, r.description);
      }
    }
    s += "\nFormat must be a plain list without extra explanation.\n";
    return s;
  }();
  return text;
}

PromptBundle build_atomic_prompt(const UsageInstance& instance) {
  PromptBundle bundle;
  bundle.system_instruction = atomic_system_instruction();
  bundle.user_message = format_query(instance);
  return bundle;
}

}  // namespace scene_forge
