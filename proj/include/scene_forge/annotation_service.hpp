#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scene_forge/atomic_profile.hpp"
#include "scene_forge/datasets.hpp"
#include "scene_forge/evaluation.hpp"
#include "scene_forge/scene_model.hpp"

namespace scene_forge {

// ---- item content -------------------------------------------------------------------

/// Self-elicitation question for a dimension with [KEYWORD] replaced.
std::string elicitation_prompt(Dimension d, std::string_view keyword);

/// Plain-text fragment of one scene profile component, one entry per line.
std::string scene_fragment(const ExpressionProfile& profile, Dimension d);

/// Plain-text fragment of one ATOMIC category. Relation names are replaced
/// by everyday phrases ("used for: ...") so the text does not name its schema.
std::string atomic_fragment(const AtomicProfile& profile, Dimension d);

/// Which schema is shown as "A" for an item: splitmix64(seed ^ fnv1a64(item_id)),
/// low bit set means the scene profile.
Schema blinded_a_schema(std::uint64_t seed, std::string_view item_id);

// ---- manifest -----------------------------------------------------------------------

struct ManifestItem {
  std::string item_id;
  UsageInstance instance;
  Dimension dimension = Dimension::engaged_events;
  std::string scene_text;
  std::string atomic_text;
};

struct ManifestSession {
  std::string session_id;
  std::string annotator_id;
  std::string group;
  std::vector<std::string> items;
  std::vector<std::string> trials;
};

/// Study definition. JSON layout:
///   {"seed": 7, "items": [...], "trials": [...] or "trials_file": "x.jsonl",
///    "sessions": [{"session_id", "annotator_id", "group", "items": [...], "trials": [...]}]}
struct Manifest {
  std::uint64_t seed = 0;
  std::vector<ManifestItem> items;
  std::vector<OddOneOutTrial> trials;
  std::vector<ManifestSession> sessions;

  /// Throws std::invalid_argument on unknown or duplicate ids.
  void validate() const;
  static Manifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static Manifest load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

ManifestItem make_manifest_item(std::string item_id, const UsageInstance& instance, Dimension d,
                                const ExpressionProfile& scene, const AtomicProfile& atomic);

// ---- service ------------------------------------------------------------------------

/// What the client sees. Which schema sits behind "A" is kept server-side.
struct AnnotationItem {
  std::string item_id;
  UsageInstance instance;
  Dimension dimension = Dimension::engaged_events;
  std::string elicitation_prompt;
  std::string profile_a_text;
  std::string profile_b_text;
};

struct OddTrialView {
  std::string trial_id;
  std::string keyword;
  std::vector<UsageInstance> candidates;  ///< gold_scene_type cleared
};

struct Progress {
  std::size_t answered = 0;
  std::size_t total = 0;
};

struct JudgmentSubmission {
  std::string item_id;
  std::string preferred;  ///< "A" or "B"
  int rating = 0;
  std::vector<std::string> reasons;
  std::optional<std::string> other_text;
  std::string elicitation_text;
};

struct OddChoice {
  std::string trial_id;
  std::string session_id;
  std::string annotator_id;
  std::string group;
  int choice = 0;
};

void to_json(nlohmann::json& j, const OddChoice& c);
void from_json(const nlohmann::json& j, OddChoice& c);

/// Rating records (item = trial, label = chosen index) for agreement statistics.
std::vector<RatingRecord> odd_choice_records(const std::vector<OddChoice>& choices);
/// trial_id -> gold index as a label, matching odd_choice_records.
std::map<std::string, std::string> odd_gold_labels(const std::vector<OddOneOutTrial>& trials);
/// The five position labels "0".."4".
std::vector<std::string> odd_choice_categories();

class UnknownSession : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class UnknownItem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DuplicateSubmission : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class SubmissionRejected : public std::runtime_error {
 public:
  explicit SubmissionRejected(std::vector<std::string> rules);
  std::vector<std::string> rules;
};

/// Drives the preference study and the human odd-scene-out track. Accepted
/// submissions are appended to judgments.jsonl and odd_choices.jsonl in the
/// log directory and replayed when a service is created over the same
/// directory. A full snapshot (state.json) is written atomically every
/// `snapshot_every` accepted submissions.
class AnnotationService {
 public:
  struct Options {
    std::size_t snapshot_every = 25;
  };

  AnnotationService(Manifest manifest, std::filesystem::path log_dir, Options options);
  AnnotationService(Manifest manifest, std::filesystem::path log_dir)
      : AnnotationService(std::move(manifest), std::move(log_dir), Options{}) {}

  /// Next unanswered item of the session, or nullopt when all are done.
  std::optional<AnnotationItem> next_item(const std::string& session_id) const;
  Progress item_progress(const std::string& session_id) const;
  void submit_judgment(const std::string& session_id, const JudgmentSubmission& submission);

  std::optional<OddTrialView> next_odd_trial(const std::string& session_id) const;
  Progress trial_progress(const std::string& session_id) const;
  void submit_odd_choice(const std::string& session_id, const std::string& trial_id, int choice);

  /// Item order presented to a session (seeded per session).
  std::vector<std::string> item_order(const std::string& session_id) const;
  std::vector<std::string> trial_order(const std::string& session_id) const;

  std::vector<PreferenceJudgment> judgments() const;
  std::vector<OddChoice> odd_choices() const;
  const Manifest& manifest() const { return manifest_; }
  /// annotator_id -> group, from the manifest sessions.
  std::map<std::string, std::string> annotator_groups() const;
  std::size_t session_count() const { return manifest_.sessions.size(); }
  /// Lines of the logs that could not be replayed (for example a torn final line).
  const std::vector<std::string>& replay_warnings() const { return replay_warnings_; }

  /// Writes state.json now.
  void snapshot() const;

 private:
  const ManifestSession& session(const std::string& id) const;
  void replay();
  void after_append();

  Manifest manifest_;
  std::filesystem::path log_dir_;
  Options options_;
  std::map<std::string, std::size_t> session_index_;
  std::map<std::string, std::size_t> item_index_;
  std::map<std::string, std::size_t> trial_index_;
  std::map<std::string, std::vector<std::string>> item_orders_;
  std::map<std::string, std::vector<std::string>> trial_orders_;

  mutable std::shared_mutex mutex_;
  std::vector<PreferenceJudgment> judgments_;
  std::vector<OddChoice> odd_choices_;
  std::set<std::pair<std::string, std::string>> answered_items_;   // (annotator, item)
  std::set<std::pair<std::string, std::string>> answered_trials_;  // (annotator, trial)
  std::size_t appends_since_snapshot_ = 0;
  std::vector<std::string> replay_warnings_;
};

// ---- HTTP ---------------------------------------------------------------------------

nlohmann::json item_to_wire(const AnnotationItem& item);
nlohmann::json trial_to_wire(const OddTrialView& trial);
JudgmentSubmission submission_from_wire(const nlohmann::json& j);

/// HTTP front end:
///   GET  /api/health
///   GET  /api/session/{id}/next          POST /api/session/{id}/judgment
///   GET  /api/session/{id}/odd/next      POST /api/session/{id}/odd/choice
/// Errors come back as {"error": ..., "rules": [...]} with 400 (bad body),
/// 404 (unknown session or item), 409 (duplicate) or 422 (rule violation).
class AnnotationServer {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    int port = 0;  ///< 0 picks a free port
    std::filesystem::path static_dir;  ///< served at / when set
  };

  AnnotationServer(AnnotationService& service, Options options);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds and starts serving on a background thread; returns the port.
  int start();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scene_forge
