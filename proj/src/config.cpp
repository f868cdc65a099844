#include "scene_forge/config.hpp"

#include <algorithm>
#include <cstdlib>

#include <fmt/format.h>

#include "scene_forge/util.hpp"

namespace scene_forge {

namespace {

std::string unquote(std::string_view v, std::size_t line) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'')) {
    if (v.back() != v.front()) throw std::invalid_argument(fmt::format("config line {}: unterminated string", line));
    return std::string(v.substr(1, v.size() - 2));
  }
  // Trailing comment after an unquoted value.
  if (auto hash = v.find('#'); hash != std::string_view::npos) v = trim_view(v.substr(0, hash));
  return std::string(v);
}

bool is_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

std::string normalize_key(std::string_view k) {
  std::string out = to_lower_ascii(k);
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(value, &used));
    } else if constexpr (std::is_signed_v<T>) {
      out = static_cast<T>(std::stoll(value, &used));
    } else {
      if (!value.empty() && value.front() == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(value, &used));
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("config key {}: '{}' is not a valid number", key, value));
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = to_lower_ascii(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(fmt::format("config key {}: '{}' is not a boolean", key, value));
}

}  // namespace

ConfigLayer parse_config_text(std::string_view text) {
  ConfigLayer out;
  std::string section;
  std::size_t n = 0;
  for (const auto& raw : split_lines(text)) {
    ++n;
    std::string_view line = trim_view(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument(fmt::format("config line {}: bad section header", n));
      section = normalize_key(trim_view(line.substr(1, line.size() - 2)));
      if (section.empty() || !std::all_of(section.begin(), section.end(), is_key_char)) {
        throw std::invalid_argument(fmt::format("config line {}: bad section name", n));
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument(fmt::format("config line {}: expected key = value", n));
    std::string key = normalize_key(trim_view(line.substr(0, eq)));
    if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char)) {
      throw std::invalid_argument(fmt::format("config line {}: bad key", n));
    }
    if (!section.empty()) key = section + "_" + key;
    out[key] = unquote(trim_view(line.substr(eq + 1)), n);
  }
  return out;
}

ConfigLayer load_config_file(const std::filesystem::path& path) {
  try {
    return parse_config_text(read_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

ConfigLayer config_from_env(const std::function<const char*(const char*)>& getenv) {
  ConfigLayer out;
  for (const auto& key : RunConfig::keys()) {
    std::string name = "SCENE_FORGE_";
    for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    const char* v = getenv ? getenv(name.c_str()) : std::getenv(name.c_str());
    if (v && *v) out[key] = v;
  }
  return out;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "seed", "provider", "mock_fixture", "chat_url", "chat_path", "api_key", "model", "temperature",
      "max_tokens", "top_p", "frequency_penalty", "presence_penalty", "max_repair_attempts", "few_shot_k",
      "embedding_provider", "embedding_url", "embedding_path", "embedding_model", "embedding_dim",
      "embedding_batch_size", "cache_dir", "no_cache", "max_in_flight", "format"};
  return k;
}

void RunConfig::apply(const ConfigLayer& layer) {
  for (const auto& [key, value] : layer) {
    if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else if (key == "provider") provider = value;
    else if (key == "mock_fixture") mock_fixture = value;
    else if (key == "chat_url") chat_url = value;
    else if (key == "chat_path") chat_path = value;
    else if (key == "api_key") api_key = value;
    else if (key == "model") generation.model_id = value;
    else if (key == "temperature") generation.temperature = parse_number<double>(key, value);
    else if (key == "max_tokens") generation.max_tokens = parse_number<int>(key, value);
    else if (key == "top_p") generation.top_p = parse_number<double>(key, value);
    else if (key == "frequency_penalty") generation.frequency_penalty = parse_number<double>(key, value);
    else if (key == "presence_penalty") generation.presence_penalty = parse_number<double>(key, value);
    else if (key == "max_repair_attempts") generation.max_repair_attempts = parse_number<int>(key, value);
    else if (key == "few_shot_k") few_shot_k = parse_number<std::size_t>(key, value);
    else if (key == "embedding_provider") embedding_provider = value;
    else if (key == "embedding_url") embedding_url = value;
    else if (key == "embedding_path") embedding_path = value;
    else if (key == "embedding_model") embedding_model = value;
    else if (key == "embedding_dim") embedding_dim = parse_number<std::size_t>(key, value);
    else if (key == "embedding_batch_size") embedding_batch_size = parse_number<std::size_t>(key, value);
    else if (key == "cache_dir") cache_dir = value;
    else if (key == "no_cache") no_cache = parse_bool(key, value);
    else if (key == "max_in_flight") max_in_flight = parse_number<std::size_t>(key, value);
    else if (key == "format") format = value;
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

void RunConfig::validate() const {
  if (provider != "live" && provider != "mock") {
    throw std::invalid_argument("provider must be live or mock, got '" + provider + "'");
  }
  if (embedding_provider != "auto" && embedding_provider != "hashbag" && embedding_provider != "http") {
    throw std::invalid_argument("embedding_provider must be auto, hashbag or http, got '" + embedding_provider + "'");
  }
  if (format != "table" && format != "json") throw std::invalid_argument("format must be table or json");
  if (max_in_flight == 0) throw std::invalid_argument("max_in_flight must be positive");
  if (embedding_dim == 0 || embedding_batch_size == 0) {
    throw std::invalid_argument("embedding_dim and embedding_batch_size must be positive");
  }
  generation.validate();
}

std::uint64_t RunConfig::require_seed(std::string_view command) const {
  if (!seed) throw std::invalid_argument(fmt::format("{} samples and needs --seed (or seed in the config)", command));
  return *seed;
}

}  // namespace scene_forge
