#include "scene_forge/embedding.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <sstream>

#include <httplib.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "scene_forge/util.hpp"

namespace scene_forge {

using nlohmann::json;

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
  double sq = 0.0;
  for (double x : raw) sq += x * x;
  if (raw.empty()) throw std::invalid_argument("cannot normalize an empty vector");
  if (!(sq > 0.0) || !std::isfinite(sq)) {
    std::fill(raw.begin(), raw.end(), 0.0);
    raw[0] = 1.0;
    return EmbeddingVector(std::move(raw));
  }
  const double n = std::sqrt(sq);
  for (double& x : raw) x /= n;
  return EmbeddingVector(std::move(raw));
}

double EmbeddingVector::norm() const {
  double sq = 0.0;
  for (double x : values_) sq += x * x;
  return std::sqrt(sq);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch(fmt::format("cosine of vectors with dimensions {} and {}", a.dim(), b.dim()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a.values()[i] * b.values()[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

// ---- hash bag ---------------------------------------------------------------------

HashBagEmbeddingProvider::HashBagEmbeddingProvider(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
}

std::string HashBagEmbeddingProvider::id() const { return fmt::format("mock-hashbag-{}", dim_); }

std::vector<std::string> HashBagEmbeddingProvider::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::size_t HashBagEmbeddingProvider::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dim_);
}

EmbeddingVector HashBagEmbeddingProvider::embed(std::string_view text) {
  std::vector<double> counts(dim_, 0.0);
  for (const auto& t : tokenize(text)) counts[bucket(t)] += 1.0;
  return EmbeddingVector::normalized(std::move(counts));
}

// ---- HTTP -------------------------------------------------------------------------

HttpEmbeddingProvider::HttpEmbeddingProvider(Options options) : options_(std::move(options)) {
  if (options_.batch_size == 0) options_.batch_size = 1;
}

EmbeddingVector HttpEmbeddingProvider::embed(std::string_view text) {
  std::vector<std::string> one{std::string(text)};
  return embed_batch(one).front();
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed_batch(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout_seconds, 0);
  client.set_read_timeout(options_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  for (std::size_t start = 0; start < texts.size(); start += options_.batch_size) {
    const std::size_t end = std::min(texts.size(), start + options_.batch_size);
    json input = json::array();
    for (std::size_t i = start; i < end; ++i) input.push_back(texts[i]);
    json body{{"model", options_.model}, {"input", input}};
    auto res = client.Post(options_.path, headers, body.dump(), "application/json");
    if (!res) throw std::runtime_error("embedding request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw std::runtime_error(fmt::format("embedding endpoint returned HTTP {}", res->status));
    }
    json reply = json::parse(res->body);
    const auto& data = reply.at("data");
    if (data.size() != end - start) throw std::runtime_error("embedding endpoint returned the wrong count");
    // Entries may come back in any order; "index" says where each belongs.
    std::vector<std::vector<double>> batch(end - start);
    for (std::size_t k = 0; k < data.size(); ++k) {
      std::size_t idx = data[k].value("index", k);
      if (idx >= batch.size()) throw std::runtime_error("embedding index out of range");
      batch[idx] = data[k].at("embedding").get<std::vector<double>>();
    }
    for (auto& v : batch) {
      if (v.size() != options_.dim) {
        throw DimensionMismatch(fmt::format("expected {}-d embeddings, got {}", options_.dim, v.size()));
      }
      out.push_back(EmbeddingVector::normalized(std::move(v)));
    }
  }
  return out;
}

EmbeddingVector embed(EmbeddingProvider& provider, std::string_view text) {
  EmbeddingVector v = provider.embed(text);
  if (v.dim() != provider.dim()) {
    throw DimensionMismatch(fmt::format("provider {} returned {} values, expected {}", provider.id(), v.dim(),
                                        provider.dim()));
  }
  if (std::abs(v.norm() - 1.0) > 1e-6) {
    throw std::runtime_error("provider " + provider.id() + " returned a non-unit vector");
  }
  return v;
}

// ---- serialization ----------------------------------------------------------------

namespace {

std::string_view component_label(Dimension kind) {
  switch (kind) {
    case Dimension::engaged_events: return "engaged events";
    case Dimension::generalizable_properties: return "generalizable properties";
    case Dimension::evoked_emotions: return "evoked emotions";
  }
  return "";
}

/// Keeps the "label: items." shape unambiguous: no inner ": " and no
/// trailing period on an item.
std::string sanitize_item(std::string_view item) {
  std::string s = trim(item);
  for (auto pos = s.find(": "); pos != std::string::npos; pos = s.find(": ", pos)) {
    s.replace(pos, 2, " - ");
  }
  while (!s.empty() && (s.back() == '.' || std::isspace(static_cast<unsigned char>(s.back())))) s.pop_back();
  return s;
}

}  // namespace

std::string serialize_component(Dimension kind, const std::vector<std::string>& items) {
  std::vector<std::string> clean;
  for (const auto& item : items) {
    std::string s = sanitize_item(item);
    if (!s.empty()) clean.push_back(std::move(s));
  }
  return std::string(component_label(kind)) + ": " + (clean.empty() ? std::string("none") : join(clean, ", ")) +
         ".";
}

std::vector<std::string> component_items(const ExpressionProfile& profile, Dimension kind) {
  switch (kind) {
    case Dimension::engaged_events: return profile.engaged_events;
    case Dimension::generalizable_properties: return profile.generalizable_properties;
    case Dimension::evoked_emotions: {
      std::vector<std::string> terms;
      for (const auto& e : profile.evoked_emotions) terms.push_back(to_lower_ascii(e.emotion));
      return terms;
    }
  }
  return {};
}

std::string_view to_string(ReprCondition c) {
  switch (c) {
    case ReprCondition::text: return "text";
    case ReprCondition::text_event: return "text+event";
    case ReprCondition::text_property: return "text+property";
    case ReprCondition::text_emotion: return "text+emotion";
    case ReprCondition::text_scene: return "text+scene";
    case ReprCondition::scene_only: return "scene";
  }
  return "";
}

std::string_view display_name(ReprCondition c) {
  switch (c) {
    case ReprCondition::text: return "Text only";
    case ReprCondition::text_event: return "Text + Event";
    case ReprCondition::text_property: return "Text + Property";
    case ReprCondition::text_emotion: return "Text + Emotion";
    case ReprCondition::text_scene: return "Text + Scene";
    case ReprCondition::scene_only: return "Scene only";
  }
  return "";
}

ReprCondition condition_from_string(std::string_view s) {
  for (ReprCondition c : kAllConditions) {
    if (iequals(s, to_string(c))) return c;
  }
  if (iequals(s, "scene-only") || iequals(s, "scene_only")) return ReprCondition::scene_only;
  throw std::invalid_argument("unknown representation condition '" + std::string(s) + "'");
}

std::string build_condition_text(ReprCondition cond, const UsageInstance& instance,
                                 const ExpressionProfile* profile, const ComponentSerializer& serializer) {
  if (cond == ReprCondition::text) return instance.context_text;
  if (!profile) {
    throw MissingProfile("condition " + std::string(to_string(cond)) + " needs a scene for instance " +
                         instance.instance_id);
  }
  auto part = [&](Dimension d) { return serializer(d, component_items(*profile, d)); };
  const std::string& u = instance.context_text;
  switch (cond) {
    case ReprCondition::text_event: return u + " " + part(Dimension::engaged_events);
    case ReprCondition::text_property: return u + " " + part(Dimension::generalizable_properties);
    case ReprCondition::text_emotion: return u + " " + part(Dimension::evoked_emotions);
    case ReprCondition::text_scene:
      return u + " " + part(Dimension::engaged_events) + " " + part(Dimension::generalizable_properties) + " " +
             part(Dimension::evoked_emotions);
    case ReprCondition::scene_only:
      return part(Dimension::engaged_events) + " " + part(Dimension::generalizable_properties) + " " +
             part(Dimension::evoked_emotions);
    case ReprCondition::text: break;
  }
  return u;
}

// ---- vector files -------------------------------------------------------------------

namespace {

std::uint32_t to_little_endian(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    x = ((x & 0xFF) << 24) | ((x & 0xFF00) << 8) | ((x >> 8) & 0xFF00) | (x >> 24);
  }
  return x;
}

}  // namespace

void write_vector_file(const std::filesystem::path& path, const EmbeddingVector& v, std::string_view provider_id) {
  if (provider_id.find_first_of(" \n") != std::string_view::npos) {
    throw std::invalid_argument("provider id must not contain whitespace");
  }
  std::string out = fmt::format("{} {}\n", v.dim(), provider_id);
  out.reserve(out.size() + 4 * v.dim());
  for (double x : v.values()) {
    const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    char bytes[4];
    std::memcpy(bytes, &bits, 4);
    out.append(bytes, 4);
  }
  atomic_write_file(path, out);
}

StoredVector read_vector_file(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw std::runtime_error(path.string() + ": missing vector header");
  std::istringstream header(data.substr(0, nl));
  std::size_t dim = 0;
  StoredVector out;
  if (!(header >> dim >> out.provider_id)) throw std::runtime_error(path.string() + ": bad vector header");
  if (data.size() - nl - 1 != 4 * dim) {
    throw std::runtime_error(fmt::format("{}: expected {} bytes of float data", path.string(), 4 * dim));
  }
  out.values.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, data.data() + nl + 1 + 4 * i, 4);
    out.values[i] = std::bit_cast<float>(to_little_endian(bits));
  }
  return out;
}

}  // namespace scene_forge
