#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "scene_forge/scene_model.hpp"

namespace scene_forge {

/// Unit-length real vector.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  /// Scales `raw` to unit L2 norm. A zero vector maps to the first basis vector.
  static EmbeddingVector normalized(std::vector<double> raw);

  std::size_t dim() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double norm() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dot product of two unit vectors, clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(std::string_view text) = 0;
  /// Default implementation embeds one text at a time.
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);
  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
};

/// Offline bag-of-tokens embedding: each lowercase alphanumeric token adds one
/// to the bucket chosen by its FNV-1a hash. Texts that share no token are
/// orthogonal unless two tokens collide.
class HashBagEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashBagEmbeddingProvider(std::size_t dim = 256);
  EmbeddingVector embed(std::string_view text) override;
  std::size_t dim() const override { return dim_; }
  std::string id() const override;

  static std::vector<std::string> tokenize(std::string_view text);
  std::size_t bucket(std::string_view token) const;

 private:
  std::size_t dim_;
};

/// Client for an OpenAI-style /v1/embeddings endpoint, such as a local
/// sentence-transformers server.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  struct Options {
    std::string base_url = "http://127.0.0.1:8080";
    std::string path = "/v1/embeddings";
    std::string model = "all-mpnet-base-v2";
    std::string api_key;
    std::size_t dim = 768;
    std::size_t batch_size = 32;
    int timeout_seconds = 120;
  };

  explicit HttpEmbeddingProvider(Options options);
  EmbeddingVector embed(std::string_view text) override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;
  std::size_t dim() const override { return options_.dim; }
  std::string id() const override { return options_.model; }

 private:
  Options options_;
};

/// Embeds and checks the provider's contract (dimension and unit norm).
EmbeddingVector embed(EmbeddingProvider& provider, std::string_view text);

// ---- serialization ----------------------------------------------------------------

/// "<label>: a, b, c." with labels "engaged events", "generalizable
/// properties" and "evoked emotions"; an empty list gives "<label>: none.".
std::string serialize_component(Dimension kind, const std::vector<std::string>& items);

using ComponentSerializer = std::function<std::string(Dimension, const std::vector<std::string>&)>;

/// Items of one profile component as they are serialized. Emotions contribute
/// their lowercased terms without explanations.
std::vector<std::string> component_items(const ExpressionProfile& profile, Dimension kind);

enum class ReprCondition { text, text_event, text_property, text_emotion, text_scene, scene_only };

inline constexpr ReprCondition kAllConditions[] = {ReprCondition::text,          ReprCondition::text_event,
                                                   ReprCondition::text_property, ReprCondition::text_emotion,
                                                   ReprCondition::text_scene,    ReprCondition::scene_only};

/// "text", "text+event", "text+property", "text+emotion", "text+scene", "scene".
std::string_view to_string(ReprCondition c);
/// Row label used in reports, e.g. "Text + Scene".
std::string_view display_name(ReprCondition c);
ReprCondition condition_from_string(std::string_view s);

class MissingProfile : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Text to embed for one instance under a representation condition. `profile`
/// may be null only for ReprCondition::text.
std::string build_condition_text(ReprCondition cond, const UsageInstance& instance,
                                 const ExpressionProfile* profile,
                                 const ComponentSerializer& serializer = serialize_component);

// ---- vector files -------------------------------------------------------------------

/// "<dim> <provider id>\n" followed by dim little-endian float32 values.
void write_vector_file(const std::filesystem::path& path, const EmbeddingVector& v, std::string_view provider_id);

struct StoredVector {
  std::string provider_id;
  std::vector<float> values;
};

StoredVector read_vector_file(const std::filesystem::path& path);

}  // namespace scene_forge
