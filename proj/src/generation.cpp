#include "scene_forge/generation.hpp"

#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "scene_forge/util.hpp"

namespace scene_forge {

void GenerationConfig::validate() const {
  if (model_id.empty()) throw std::invalid_argument("model_id must be non-empty");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be > 0");
  if (max_repair_attempts < 0) throw std::invalid_argument("max_repair_attempts must be >= 0");
}

std::string CompletionCache::key(std::string_view model_id, std::string_view prompt_text) {
  std::string material;
  material.reserve(model_id.size() + 1 + prompt_text.size());
  material.append(model_id).append("\n").append(prompt_text);
  return sha256_hex(material);
}

std::filesystem::path CompletionCache::path_for(const std::string& key) const {
  if (key.size() < 3) throw std::invalid_argument("cache key too short");
  return dir_ / key.substr(0, 2) / (key + ".txt");
}

std::optional<std::string> CompletionCache::lookup(const std::string& key) const {
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  return read_file(path);
}

void CompletionCache::store(const std::string& key, std::string_view completion) const {
  atomic_write_file(path_for(key), completion);
}

std::string send_with_retry(ChatProvider& provider, const GenerationConfig& config,
                            const std::vector<ChatMessage>& messages, const GenerationOptions& options) {
  std::string key;
  if (options.cache) {
    key = CompletionCache::key(config.model_id, serialize_messages(messages));
    if (auto hit = options.cache->lookup(key)) return *hit;
  }
  const auto& retry = options.retry;
  for (int attempt = 0;; ++attempt) {
    try {
      std::string completion = provider.send(messages, config);
      if (options.cache) options.cache->store(key, completion);
      return completion;
    } catch (const ProviderError& e) {
      if (!e.retryable() || attempt >= retry.max_retries) throw;
      const auto delay = retry.base_delay * (1LL << attempt);
      if (retry.sleep) {
        retry.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
}

std::string repair_instruction(const std::string& error, const std::string& section) {
  std::string out = std::string(kRepairPrefix) + ": " + error + ".";
  if (!section.empty()) out += " The '" + section + "' section is missing.";
  out += " Reply again with the complete output in the requested format and nothing else.";
  return out;
}

namespace {

struct Unusable {
  std::string message;
  std::string section;
};

/// Sends the prompt, feeding parse failures back as repair requests until
/// `parse` succeeds or the repair budget runs out.
template <typename Result, typename Parse>
std::pair<Result, int> run_with_repairs(ChatProvider& provider, const GenerationConfig& config,
                                        const PromptBundle& bundle, const GenerationOptions& options,
                                        Parse&& parse) {
  config.validate();
  std::vector<ChatMessage> messages = bundle.messages();
  const int max_attempts = 1 + config.max_repair_attempts;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::string completion = send_with_retry(provider, config, messages, options);
    Unusable problem;
    try {
      return {parse(completion), attempt};
    } catch (const ParseError& e) {
      problem = {e.what(), e.section()};
    } catch (const Unusable& u) {
      problem = u;
    }
    last_error = problem.message;
    messages.push_back({"assistant", completion});
    messages.push_back({"user", repair_instruction(problem.message, problem.section)});
  }
  throw GenerationFailed(max_attempts, last_error);
}

Provenance make_provenance(const GenerationConfig& config, const PromptBundle& bundle,
                           const GenerationOptions& options) {
  return Provenance{config.model_id, sha256_hex(serialize_messages(bundle.messages())),
                    options.clock ? options.clock() : utc_timestamp_now()};
}

}  // namespace

SceneGeneration generate_scene(ChatProvider& provider, const GenerationConfig& config,
                               const UsageInstance& instance, const std::vector<FewShotExample>& examples,
                               const GenerationOptions& options) {
  const PromptBundle bundle = build_scene_prompt(instance, examples, options.k);
  SceneGeneration out;
  auto [scene, attempts] = run_with_repairs<SceneRepresentation>(
      provider, config, bundle, options, [&](const std::string& completion) {
        std::vector<std::string> warnings;
        SceneRepresentation parsed = parse_scene(completion, instance, &warnings);
        ValidationReport report = validate_scene(parsed);
        if (!report.ok()) throw Unusable{"the scene is invalid: " + join(report.errors, "; "), ""};
        warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());
        out.warnings = std::move(warnings);
        return parsed;
      });
  out.scene = std::move(scene);
  out.attempts = attempts;
  out.scene.provenance = make_provenance(config, bundle, options);
  return out;
}

AtomicGeneration generate_atomic_profile(ChatProvider& provider, const GenerationConfig& config,
                                         const UsageInstance& instance, const GenerationOptions& options) {
  const PromptBundle bundle = build_atomic_prompt(instance);
  AtomicGeneration out;
  auto [profile, attempts] = run_with_repairs<AtomicProfile>(
      provider, config, bundle, options, [&](const std::string& completion) {
        std::vector<std::string> warnings;
        AtomicProfile parsed = parse_atomic_profile(completion, instance, &warnings);
        out.warnings = std::move(warnings);
        return parsed;
      });
  out.profile = std::move(profile);
  out.attempts = attempts;
  out.profile.provenance = make_provenance(config, bundle, options);
  return out;
}

}  // namespace scene_forge
