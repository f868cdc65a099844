#include <cctype>
#include <set>

#include <httplib.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "scene_forge/generation.hpp"
#include "scene_forge/util.hpp"

namespace scene_forge {

using nlohmann::json;

// ---- HTTP ------------------------------------------------------------------------

HttpChatProvider::HttpChatProvider(Options options) : options_(std::move(options)) {}

json HttpChatProvider::request_body(std::span<const ChatMessage> messages, const GenerationConfig& config) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
  return json{{"model", config.model_id},
              {"messages", msgs},
              {"temperature", config.temperature},
              {"max_tokens", config.max_tokens},
              {"top_p", config.top_p},
              {"frequency_penalty", config.frequency_penalty},
              {"presence_penalty", config.presence_penalty}};
}

std::string HttpChatProvider::completion_from_response(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ProviderError(0, "chat response is not valid JSON");
  try {
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(0, std::string("unexpected chat response shape: ") + e.what());
  }
}

std::string HttpChatProvider::send(std::span<const ChatMessage> messages, const GenerationConfig& config) {
  // One client per call keeps the provider safe to share between threads.
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout_seconds, 0);
  client.set_read_timeout(options_.timeout_seconds, 0);
  client.set_write_timeout(options_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
  auto result = client.Post(options_.path, headers, request_body(messages, config).dump(), "application/json");
  if (!result) {
    throw ProviderError(0, "chat request failed: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw ProviderError(result->status,
                        fmt::format("chat endpoint returned HTTP {}: {}", result->status,
                                    result->body.substr(0, 300)));
  }
  return completion_from_response(result->body);
}

// ---- replay -----------------------------------------------------------------------

ReplayChatProvider::ReplayChatProvider(std::vector<Rule> rules, bool synthesize_fallback)
    : rules_(std::move(rules)), synthesize_fallback_(synthesize_fallback) {}

ReplayChatProvider ReplayChatProvider::from_file(const std::filesystem::path& path) {
  json j = json::parse(read_file(path));
  const auto base = path.parent_path();
  std::vector<Rule> rules;
  for (const auto& r : j.value("rules", json::array())) {
    Rule rule;
    rule.match = r.at("match").get<std::string>();
    rule.system_match = r.value("system_match", std::string{});
    if (auto it = r.find("responses"); it != r.end()) {
      rule.responses = it->get<std::vector<std::string>>();
    }
    if (auto it = r.find("response_files"); it != r.end()) {
      for (const auto& f : *it) rule.responses.push_back(read_file(base / f.get<std::string>()));
    }
    if (rule.responses.empty()) throw std::runtime_error("replay rule '" + rule.match + "' has no responses");
    rules.push_back(std::move(rule));
  }
  return ReplayChatProvider(std::move(rules), j.value("synthesize_fallback", true));
}

namespace {

std::string line_value(std::string_view text, std::string_view prefix) {
  for (const auto& line : split_lines(text)) {
    if (istarts_with(line, prefix)) return trim(std::string_view(line).substr(prefix.size()));
  }
  return {};
}

std::string remove_markers(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.substr(i, 2) == "**") {
      ++i;
      continue;
    }
    out.push_back(s[i]);
  }
  return out;
}

}  // namespace

std::string ReplayChatProvider::send(std::span<const ChatMessage> messages, const GenerationConfig&) {
  calls_.fetch_add(1);
  std::string_view system;
  if (!messages.empty() && messages.front().role == "system") system = messages.front().content;

  // The query is the newest user turn that is not a repair request; every
  // assistant turn after it is an earlier attempt at the same query.
  std::optional<std::size_t> query;
  for (std::size_t i = messages.size(); i-- > 0;) {
    if (messages[i].role == "user" && !messages[i].content.starts_with(kRepairPrefix)) {
      query = i;
      break;
    }
  }
  if (!query) throw ProviderError(400, "replay provider received no user message");
  std::size_t attempt = 0;
  for (std::size_t i = *query + 1; i < messages.size(); ++i) {
    if (messages[i].role == "assistant") ++attempt;
  }
  const std::string& text = messages[*query].content;

  for (const auto& rule : rules_) {
    if (text.find(rule.match) == std::string::npos) continue;
    if (!rule.system_match.empty() && system.find(rule.system_match) == std::string_view::npos) continue;
    return rule.responses[std::min(attempt, rule.responses.size() - 1)];
  }
  if (!synthesize_fallback_) {
    throw ProviderError(404, "no replay rule matches the query");
  }
  const std::string sentence = line_value(text, "Sentence:");
  const std::string keyword = line_value(text, "Keyword:");
  if (system.find("ATOMIC-2020") != std::string_view::npos) {
    return synthesize_atomic_completion(sentence, keyword);
  }
  return synthesize_scene_completion(sentence, keyword);
}

// ---- synthesized completions ------------------------------------------------------

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "the",  "and",  "was",   "were", "with",  "that",  "this",  "from",  "for",  "his",
      "her",  "its",  "their", "they", "them",  "she",   "him",   "had",   "has",  "have",
      "into", "onto", "over",  "under", "while", "when", "then",  "there", "what", "which",
      "who",  "would", "could", "just", "some",  "like",  "very",  "been",  "are",  "but",
      "not",  "all",  "out",   "off",  "one",   "our",   "your",  "you",   "than", "after"};
  return words;
}

/// Distinct lowercase content words of the sentence, keyword excluded.
std::vector<std::string> content_words(std::string_view sentence, std::string_view keyword,
                                       std::string_view target) {
  const std::string kw = to_lower_ascii(keyword);
  const std::string tg = to_lower_ascii(target);
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string token;
  auto flush = [&] {
    if (token.size() >= 3 && !stopwords().count(token) && token != kw && token != tg &&
        !(kw.size() >= 3 && token.starts_with(kw)) && seen.insert(token).second) {
      out.push_back(token);
    }
    token.clear();
  };
  for (unsigned char c : sentence) {
    if (std::isalpha(c) || c >= 0x80) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  if (out.empty()) out.push_back("something");
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

/// "Sentence with **target**" -> target, falling back to the keyword.
std::string highlighted(std::string_view sentence, std::string_view keyword) {
  auto open = sentence.find("**");
  if (open != std::string_view::npos) {
    auto close = sentence.find("**", open + 2);
    if (close != std::string_view::npos) return std::string(sentence.substr(open + 2, close - open - 2));
  }
  return std::string(keyword);
}

}  // namespace

std::string synthesize_scene_completion(std::string_view sentence, std::string_view keyword) {
  const std::string target = highlighted(sentence, keyword);
  const auto words = content_words(remove_markers(sentence), keyword, target);
  auto w = [&](std::size_t i) { return words[i % words.size()]; };
  std::vector<std::string> props;
  for (std::size_t i = 0; i < std::min<std::size_t>(words.size(), 3); ++i) props.push_back("linked to " + w(i));

  std::string out;
  out += "**Contextual Scene**\n";
  out += "* Events:\n";
  out += "- PersonX encounters ObjectX\n";
  out += fmt::format("- PersonX {} {}\n", w(0), w(1));
  out += "\n* Entities:\n";
  out += "- PersonX (someone): Roles: Participant (Encounter)\n";
  out += fmt::format("- ObjectX ({}): Roles: Theme (Encounter); Property: {}\n", target, w(0));
  out += "\n* Setting:\n";
  out += "- Place: unspecified\n";
  out += "- Time: unspecified\n";
  out += fmt::format("- Atmosphere: {}\n", w(2));
  out += fmt::format("\n**Expression Profile** ({} = ObjectX)\n", keyword);
  out += fmt::format("- Engaged events: PersonX {} it; it {} {}\n", w(0), w(1), w(2));
  out += "- Generalizable properties: " + join(props, "; ") + "\n";
  out += fmt::format("- Evoked emotions: {}; {}\n", capitalize(w(0)), w(1));
  return out;
}

std::string synthesize_atomic_completion(std::string_view sentence, std::string_view keyword) {
  const std::string target = highlighted(sentence, keyword);
  const auto words = content_words(remove_markers(sentence), keyword, target);
  std::string out;
  std::optional<Dimension> current;
  std::size_t i = 0;
  for (const auto& r : atomic_relations()) {
    if (current != r.category) {
      current = r.category;
      out += r.category == Dimension::engaged_events           ? "Engaged Events:\n"
             : r.category == Dimension::generalizable_properties ? "Generalizable Properties:\n"
                                                                 : "Evoked Emotions:\n";
    }
    if (r.name == "Desires" || r.name == "NotDesires") {
      out += fmt::format("- {}: N/A\n", r.name);
    } else {
      out += fmt::format("- {}: {} {}\n", r.name, words[i % words.size()], words[(i + 1) % words.size()]);
      ++i;
    }
  }
  return out;
}

}  // namespace scene_forge
