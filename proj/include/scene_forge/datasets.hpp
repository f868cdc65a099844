#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scene_forge/scene_model.hpp"
#include "scene_forge/util.hpp"

namespace scene_forge {

// ---- scene-typed corpora -----------------------------------------------------------

/// keyword -> scene type -> sentences, in file order within each scene type.
struct SceneTypedCorpus {
  std::map<std::string, std::map<std::string, std::vector<UsageInstance>>> keywords;

  std::size_t size() const;
  /// All instances, keyword by keyword and scene type by scene type.
  std::vector<UsageInstance> instances() const;

  friend bool operator==(const SceneTypedCorpus&, const SceneTypedCorpus&) = default;
};

inline constexpr std::size_t kSceneTypesPerKeyword = 4;
inline constexpr std::size_t kSentencesPerSceneType = 5;

class CorpusShapeError : public std::runtime_error {
 public:
  CorpusShapeError(std::string keyword, std::string scene_type, const std::string& message)
      : std::runtime_error(message), keyword(std::move(keyword)), scene_type(std::move(scene_type)) {}
  std::string keyword;
  std::string scene_type;  ///< empty when the keyword has the wrong number of scene types
};

class CorpusParseError : public std::runtime_error {
 public:
  CorpusParseError(std::size_t line, const std::string& message)
      : std::runtime_error(message), line(line) {}
  std::size_t line;
};

/// Parses corpus TSV text: keyword, scene_type, sentence_id, sentence. An
/// optional first line equal to the column names is skipped, as are blank
/// lines. Strict mode requires 4 scene types x 5 sentences per keyword and
/// that every sentence contains its keyword; lenient mode reports those
/// problems through `warnings` instead.
SceneTypedCorpus parse_corpus(std::string_view text, bool strict, std::vector<std::string>* warnings = nullptr);
SceneTypedCorpus load_corpus(const std::filesystem::path& path, bool strict,
                             std::vector<std::string>* warnings = nullptr);

std::string format_corpus(const SceneTypedCorpus& corpus);
void save_corpus(const std::filesystem::path& path, const SceneTypedCorpus& corpus);

// ---- odd-scene-out trials ------------------------------------------------------------

struct OddOneOutTrial {
  std::string trial_id;
  std::string keyword;
  std::vector<UsageInstance> candidates;  ///< presentation order
  std::size_t gold_index = 0;
  std::string base_scene_type;
  std::string odd_scene_type;

  friend bool operator==(const OddOneOutTrial&, const OddOneOutTrial&) = default;
};

class InsufficientSentences : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lists violated trial invariants; empty means valid.
std::vector<std::string> check_trial(const OddOneOutTrial& trial);

OddOneOutTrial sample_trial(const SceneTypedCorpus& corpus, const std::string& keyword,
                            const std::string& base_type, const std::string& odd_type, SeededRng& rng);

/// For every keyword, `trials_per_keyword` trials whose (base, odd) type
/// pairs are drawn without replacement from the keyword's ordered pairs whose
/// base type has at least four sentences.
/// Each keyword gets its own generator derived from (seed, keyword), so a
/// keyword's trials do not depend on which other keywords are present.
std::vector<OddOneOutTrial> sample_trial_set(const SceneTypedCorpus& corpus, std::size_t trials_per_keyword,
                                             std::uint64_t seed);

void to_json(nlohmann::json& j, const OddOneOutTrial& trial);
void from_json(const nlohmann::json& j, OddOneOutTrial& trial);

struct TrialFile {
  std::uint64_t seed = 0;
  std::vector<OddOneOutTrial> trials;
};

/// One header line ({"format":"scene-forge-trials",...}) then one trial per line.
std::string format_trials(const TrialFile& file);
TrialFile parse_trials(std::string_view text);
void save_trials(const std::filesystem::path& path, const TrialFile& file);
TrialFile load_trials(const std::filesystem::path& path);

// ---- usage ingestion -------------------------------------------------------------------

enum class UsageFormat { dwug_like, plain_tsv };

UsageFormat usage_format_from_string(std::string_view s);

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  std::vector<UsageInstance> instances;
  std::vector<RowError> errors;
};

/// dwug_like: tab-separated with a header naming at least identifier, lemma,
/// context and indexes_target_token ("start:end" in code points). A lemma
/// with a part-of-speech suffix ("attack_nn") is reduced to "attack". When
/// the optional target column is present the slice must equal it.
///
/// plain_tsv: id, keyword, sentence, then optionally target, start, end.
/// A header line starting with "id" is skipped. Without offsets the target
/// (or the keyword) is located case-insensitively.
///
/// Bad rows are reported in `errors` and skipped.
IngestResult parse_usages(std::string_view text, UsageFormat format);
IngestResult ingest_usages(const std::filesystem::path& path, UsageFormat format);

}  // namespace scene_forge
