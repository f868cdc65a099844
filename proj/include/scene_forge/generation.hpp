#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scene_forge/atomic_profile.hpp"
#include "scene_forge/prompts.hpp"
#include "scene_forge/scene_model.hpp"

namespace scene_forge {

struct GenerationConfig {
  std::string model_id = "gpt-4o-mini";
  double temperature = 0.2;
  int max_tokens = 512;
  double top_p = 1.0;
  double frequency_penalty = 0.0;
  double presence_penalty = 0.0;
  int max_repair_attempts = 2;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

/// Transport-level failure. status is the HTTP status, or 0 when no response arrived.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }
  /// 0, 429 and 5xx are worth retrying; other statuses are not.
  bool retryable() const { return status_ == 0 || status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

class GenerationFailed : public std::runtime_error {
 public:
  GenerationFailed(int attempts, std::string last_error)
      : std::runtime_error("generation failed after " + std::to_string(attempts) +
                           " attempt(s): " + last_error),
        attempts_(attempts),
        last_error_(std::move(last_error)) {}
  int attempts() const { return attempts_; }
  const std::string& last_error() const { return last_error_; }

 private:
  int attempts_;
  std::string last_error_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Returns the assistant completion text. Must be safe to call concurrently.
  virtual std::string send(std::span<const ChatMessage> messages, const GenerationConfig& config) = 0;
};

/// OpenAI-compatible chat-completions client.
class HttpChatProvider : public ChatProvider {
 public:
  struct Options {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key;
    int timeout_seconds = 120;
  };

  explicit HttpChatProvider(Options options);
  std::string send(std::span<const ChatMessage> messages, const GenerationConfig& config) override;

  /// Request body for the given conversation (exposed for tests).
  static nlohmann::json request_body(std::span<const ChatMessage> messages, const GenerationConfig& config);
  /// Extracts choices[0].message.content; throws ProviderError on a malformed body.
  static std::string completion_from_response(std::string_view body);

 private:
  Options options_;
};

/// Offline provider driven by a fixture of canned completions.
///
/// Fixture layout:
///   {"rules": [{"match": "...", "system_match": "...", "responses": ["..."]},
///              {"match": "...", "response_files": ["relative/path.txt"]}]}
///
/// A rule applies when `match` occurs in the latest query message (and
/// `system_match`, if given, occurs in the system message). The n-th response
/// answers the n-th attempt on that query; the last one repeats. Queries with
/// no matching rule get a deterministic document synthesized from the
/// sentence, so corpora without hand-written fixtures still run offline.
class ReplayChatProvider : public ChatProvider {
 public:
  struct Rule {
    std::string match;
    std::string system_match;
    std::vector<std::string> responses;
  };

  ReplayChatProvider() = default;
  explicit ReplayChatProvider(std::vector<Rule> rules, bool synthesize_fallback = true);
  static ReplayChatProvider from_file(const std::filesystem::path& path);
  ReplayChatProvider(ReplayChatProvider&& other) noexcept
      : rules_(std::move(other.rules_)),
        synthesize_fallback_(other.synthesize_fallback_),
        calls_(other.calls_.load()) {}

  std::string send(std::span<const ChatMessage> messages, const GenerationConfig& config) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<Rule> rules_;
  bool synthesize_fallback_ = true;
  std::atomic<std::size_t> calls_{0};
};

/// Deterministic completions built from the query sentence alone.
std::string synthesize_scene_completion(std::string_view sentence, std::string_view keyword);
std::string synthesize_atomic_completion(std::string_view sentence, std::string_view keyword);

/// Content-addressed store of completions: <dir>/<key[0:2]>/<key>.txt.
class CompletionCache {
 public:
  explicit CompletionCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  /// sha256 over the model id and the full prompt text. Sampling parameters are
  /// deliberately excluded.
  static std::string key(std::string_view model_id, std::string_view prompt_text);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, std::string_view completion) const;
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  /// Replaced in tests to avoid real sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GenerationOptions {
  const CompletionCache* cache = nullptr;
  RetryPolicy retry;
  /// Timestamp source for provenance; defaults to the wall clock.
  std::function<std::string()> clock;
  /// Number of few-shot examples for scene prompts.
  std::size_t k = 3;
};

struct SceneGeneration {
  SceneRepresentation scene;
  int attempts = 0;
  std::vector<std::string> warnings;
};

struct AtomicGeneration {
  AtomicProfile profile;
  int attempts = 0;
  std::vector<std::string> warnings;
};

/// Sends one conversation with transport retries and optional caching.
std::string send_with_retry(ChatProvider& provider, const GenerationConfig& config,
                            const std::vector<ChatMessage>& messages, const GenerationOptions& options);

/// Every repair message starts with this, so providers can tell it apart
/// from the original query.
inline constexpr std::string_view kRepairPrefix = "Your previous response could not be used";

/// Text of the follow-up message sent after an unusable completion.
std::string repair_instruction(const std::string& error, const std::string& section);

SceneGeneration generate_scene(ChatProvider& provider, const GenerationConfig& config,
                               const UsageInstance& instance, const std::vector<FewShotExample>& examples,
                               const GenerationOptions& options = {});

AtomicGeneration generate_atomic_profile(ChatProvider& provider, const GenerationConfig& config,
                                         const UsageInstance& instance, const GenerationOptions& options = {});

}  // namespace scene_forge
