#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scene_forge/datasets.hpp"
#include "scene_forge/embedding.hpp"
#include "scene_forge/scene_model.hpp"

namespace scene_forge {

// ---- odd-scene-out ---------------------------------------------------------------------

/// Mean cosine of each vector to the others.
std::vector<double> mean_pairwise_similarity(std::span<const EmbeddingVector> vectors);

/// Index of the candidate with the lowest mean cosine to the other four;
/// ties go to the lowest index.
std::size_t predict_odd(std::span<const EmbeddingVector> vectors);

struct TrialPrediction {
  std::string trial_id;
  std::string keyword;
  std::size_t gold_index = 0;
  std::size_t predicted = 0;
  bool correct = false;
  std::vector<double> mean_similarity;
};

struct OddEvalResult {
  ReprCondition condition = ReprCondition::text;
  std::vector<TrialPrediction> trials;
  std::size_t correct = 0;
  double accuracy = 0.0;  ///< 0 when there are no trials
};

/// instance_id -> expression profile of its generated scene.
using ProfileStore = std::map<std::string, ExpressionProfile>;

class MissingScenes : public std::runtime_error {
 public:
  explicit MissingScenes(std::vector<std::string> ids);
  std::vector<std::string> instance_ids;
};

struct OddEvalOptions {
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 32;
};

/// Embeds every distinct candidate once, then predicts each trial. Results
/// are in trial order whatever the scheduling.
OddEvalResult run_odd_eval(const std::vector<OddOneOutTrial>& trials, ReprCondition condition,
                           const ProfileStore& profiles, EmbeddingProvider& provider,
                           const OddEvalOptions& options = {});

struct OddEvalReport {
  std::uint64_t seed = 0;
  std::string embedding_provider;
  std::vector<OddEvalResult> results;
};

nlohmann::json to_json(const OddEvalReport& report, bool include_trials = true);
/// Accuracy table with Input / Scene feature / Acc. columns, rows in the
/// order text, text+scene, text+event, text+property, text+emotion, scene.
std::string format_odd_table(const OddEvalReport& report);

// ---- ratings and agreement ------------------------------------------------------------------

struct RatingRecord {
  std::string item_id;
  std::string rater_id;
  std::string label;
  std::string group;  ///< empty means ungrouped
};

/// Items x raters matrix of categorical labels; absent cells are missing.
struct RatingsMatrix {
  std::vector<std::string> items;
  std::vector<std::string> raters;
  std::vector<std::string> categories;
  std::vector<std::vector<std::optional<std::string>>> cells;  ///< [item][rater]

  /// Items and raters appear in first-seen order. When `categories` is empty
  /// the observed labels (sorted) are used. Duplicate (item, rater) pairs and
  /// labels outside `categories` are errors.
  static RatingsMatrix from_records(const std::vector<RatingRecord>& records,
                                    std::vector<std::string> categories = {});

  /// Throws std::invalid_argument when Q < 2 or an item has no rating.
  void validate() const;
};

/// Gwet's AC1 over the items that have at least two ratings.
double gwet_ac1(const RatingsMatrix& m);

/// Share of items (with at least two ratings) on which every rater agrees.
double full_agreement_ratio(const RatingsMatrix& m);

/// Mean over all present (item, rater) cells of label == gold[item].
double human_accuracy(const RatingsMatrix& m, const std::map<std::string, std::string>& gold);

struct GroupAgreement {
  std::string group;
  std::size_t items = 0;
  std::size_t raters = 0;
  std::size_t ratings = 0;
  std::optional<double> human_accuracy;  ///< only with gold labels
  std::optional<double> full_agreement;  ///< absent when no item has two ratings
  std::optional<double> ac1;
};

struct AgreementReport {
  std::vector<GroupAgreement> groups;  ///< sorted by group name
  std::optional<double> mean_accuracy;
  std::optional<double> mean_full_agreement;
  std::optional<double> mean_ac1;
};

AgreementReport agreement_report(const std::vector<RatingRecord>& records,
                                 const std::map<std::string, std::string>* gold = nullptr,
                                 const std::vector<std::string>& categories = {});

nlohmann::json to_json(const AgreementReport& report);
/// Metric rows (Human Accuracy, Full Agreement, Gwet's AC1) by group, plus a Mean column.
std::string format_agreement_table(const AgreementReport& report);

// ---- significance tests ---------------------------------------------------------------------

/// P(X >= k) for X ~ Binomial(n, p0).
double binomial_test_one_sided(std::uint64_t k, std::uint64_t n, double p0 = 0.5);

enum class MwuMode { exact, normal_approx };

struct MannWhitneyResult {
  double u_x = 0.0;  ///< pairs (x_i, y_j) with x_i > y_j, ties counting one half
  double u_y = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;  ///< alternative: x tends to exceed y
  double p_less = 1.0;
  bool exact = false;  ///< false when exact mode fell back to the approximation
};

/// Exact mode enumerates the null distribution when there are no ties and
/// min(n_x, n_y) <= 8; otherwise (or in normal_approx mode) it uses the
/// normal approximation with tie-corrected variance and continuity correction.
MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                                 MwuMode mode = MwuMode::exact);

// ---- preference judgments -------------------------------------------------------------------

enum class Schema { scene, atomic };
std::string_view to_string(Schema s);
Schema schema_from_string(std::string_view s);

enum class Reason {
  lacks_info,
  over_interpretation,
  false_info,
  irrelevant,
  verbose,
  hard_to_understand,
  not_applicable,
  other
};
inline constexpr Reason kAllReasons[] = {Reason::lacks_info,        Reason::over_interpretation,
                                         Reason::false_info,        Reason::irrelevant,
                                         Reason::verbose,           Reason::hard_to_understand,
                                         Reason::not_applicable,    Reason::other};
std::string_view to_string(Reason r);
Reason reason_from_string(std::string_view s);

struct PreferenceJudgment {
  std::string item_id;
  Dimension dimension = Dimension::engaged_events;
  std::string annotator_id;
  Schema preferred = Schema::scene;
  int rating = 5;
  std::vector<Reason> reasons;  ///< kept sorted and unique
  std::optional<std::string> other_text;
  std::string elicitation_text;
  Schema blinding = Schema::scene;  ///< schema that was shown as "A"

  friend bool operator==(const PreferenceJudgment&, const PreferenceJudgment&) = default;
};

/// Rule violations of a judgment; empty means valid.
std::vector<std::string> check_judgment(const PreferenceJudgment& j);

void to_json(nlohmann::json& j, const PreferenceJudgment& p);
void from_json(const nlohmann::json& j, PreferenceJudgment& p);

struct RatingSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  ///< population SD (divisor n)
};

struct DimensionPreference {
  Dimension dimension = Dimension::engaged_events;
  std::size_t total = 0;
  std::size_t scene_preferred = 0;
  double scene_rate = 0.0;
  double binomial_p = 1.0;
  std::optional<RatingSummary> scene_rating;
  std::optional<RatingSummary> atomic_rating;
  std::optional<MannWhitneyResult> rating_test;  ///< scene-preferred vs atomic-preferred ratings
  std::size_t atomic_preferred = 0;
  /// Reason -> (cases citing it, percent of atomic-preferred cases).
  std::map<Reason, std::pair<std::size_t, double>> failure_reasons;
  std::vector<GroupAgreement> agreement;  ///< on the preferred-schema labels
};

struct PreferenceReport {
  std::vector<DimensionPreference> dimensions;  ///< only dimensions with judgments
  std::size_t total = 0;
  std::size_t scene_preferred = 0;
  double scene_rate = 0.0;
  double binomial_p = 1.0;
};

/// `annotator_groups` maps annotator ids to group names; annotators not in
/// the map form one unnamed group.
PreferenceReport preference_report(const std::vector<PreferenceJudgment>& judgments,
                                   const std::map<std::string, std::string>& annotator_groups = {});

nlohmann::json to_json(const PreferenceReport& report);
/// Preference rates and ratings by dimension, then the failure breakdown.
std::string format_preference_tables(const PreferenceReport& report);

}  // namespace scene_forge
