#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scene_forge/generation.hpp"

namespace scene_forge {

/// Flat key/value settings. Keys are lowercase with underscores; a key set in
/// a later layer replaces the earlier value.
using ConfigLayer = std::map<std::string, std::string>;

/// Reads `key = value` lines. `[section]` headers prefix the following keys
/// with "section_", `#` starts a comment, values may be quoted.
/// Throws std::invalid_argument with the line number on malformed input.
ConfigLayer parse_config_text(std::string_view text);
ConfigLayer load_config_file(const std::filesystem::path& path);

/// SCENE_FORGE_<KEY> variables for every known key (SCENE_FORGE_API_KEY, ...).
/// `getenv` is injectable for tests.
ConfigLayer config_from_env(const std::function<const char*(const char*)>& getenv = nullptr);

struct RunConfig {
  std::optional<std::uint64_t> seed;

  std::string provider = "mock";  ///< live | mock
  std::filesystem::path mock_fixture;
  std::string chat_url = "https://api.openai.com";
  std::string chat_path = "/v1/chat/completions";
  std::string api_key;
  GenerationConfig generation;
  std::size_t few_shot_k = 3;

  std::string embedding_provider = "auto";  ///< auto (hashbag under mock, http under live) | hashbag | http
  std::string embedding_url = "http://127.0.0.1:8080";
  std::string embedding_path = "/v1/embeddings";
  std::string embedding_model = "all-mpnet-base-v2";
  std::size_t embedding_dim = 768;
  std::size_t embedding_batch_size = 32;

  std::filesystem::path cache_dir = ".scene_forge_cache";
  bool no_cache = false;
  std::size_t max_in_flight = 4;
  std::string format = "table";  ///< table | json

  /// Every key accepted by apply().
  static const std::vector<std::string>& keys();
  /// Applies a layer; unknown keys and unparsable values throw std::invalid_argument.
  void apply(const ConfigLayer& layer);
  /// Checks cross-field constraints; throws std::invalid_argument.
  void validate() const;
  /// Throws std::invalid_argument naming the command when no seed is set.
  std::uint64_t require_seed(std::string_view command) const;
};

}  // namespace scene_forge
