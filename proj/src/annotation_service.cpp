#include "scene_forge/annotation_service.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "scene_forge/util.hpp"

namespace scene_forge {

using nlohmann::json;

namespace {

constexpr std::string_view kJudgmentLog = "judgments.jsonl";
constexpr std::string_view kChoiceLog = "odd_choices.jsonl";
constexpr std::string_view kSnapshot = "state.json";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string_view relation_phrase(std::string_view relation) {
  static const std::map<std::string_view, std::string_view> kPhrases = {
      {"Causes", "leads to"},
      {"HinderedBy", "can be prevented by"},
      {"xReason", "because"},
      {"HasSubEvent", "involves"},
      {"isBefore", "happens before"},
      {"isAfter", "happens after"},
      {"xIntent", "the person intends"},
      {"xNeed", "the person first needs"},
      {"xEffect", "effect on the person"},
      {"oEffect", "effect on others"},
      {"ObjectUse", "used for"},
      {"HasProperty", "has the quality"},
      {"MadeUpOf", "made of"},
      {"AtLocation", "found at"},
      {"CapableOf", "can"},
      {"Desires", "wants"},
      {"NotDesires", "avoids"},
      {"xReact", "the person feels"},
      {"oReact", "others feel"},
      {"xWant", "the person then wants"},
      {"oWant", "others then want"},
      {"xAttr", "the person is seen as"},
  };
  auto it = kPhrases.find(relation);
  return it == kPhrases.end() ? relation : it->second;
}

std::uint64_t order_seed(std::uint64_t seed, std::string_view kind, std::string_view session_id) {
  return splitmix64(seed ^ fnv1a64(std::string(kind) + ":" + std::string(session_id)));
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for appending");
  out << line << '\n';
  out.flush();
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

}  // namespace

// ---- item content -------------------------------------------------------------------

std::string elicitation_prompt(Dimension d, std::string_view keyword) {
  std::string_view templ;
  switch (d) {
    case Dimension::engaged_events:
      templ = "What happened with the [KEYWORD] in the situation? What did they do or what occurred to them?";
      break;
    case Dimension::generalizable_properties:
      templ =
          "What are the prominent properties of the [KEYWORD] in this situation? In your interpretation, what "
          "properties stand out as most meaningful or relevant in this context?";
      break;
    case Dimension::evoked_emotions:
      templ = "Which emotions or wishes does the [KEYWORD] evoke in the situation?";
      break;
  }
  return replace_all(std::string(templ), "[KEYWORD]", keyword);
}

std::string scene_fragment(const ExpressionProfile& profile, Dimension d) {
  std::vector<std::string> lines;
  switch (d) {
    case Dimension::engaged_events: lines = profile.engaged_events; break;
    case Dimension::generalizable_properties: lines = profile.generalizable_properties; break;
    case Dimension::evoked_emotions:
      for (const auto& e : profile.evoked_emotions) {
        lines.push_back(e.explanation ? e.emotion + ": " + *e.explanation : e.emotion);
      }
      break;
  }
  return lines.empty() ? std::string("None") : join(lines, "\n");
}

std::string atomic_fragment(const AtomicProfile& profile, Dimension d) {
  std::vector<std::string> lines;
  for (const auto& e : profile.category(d)) {
    if (e.value) lines.push_back(std::string(relation_phrase(e.relation)) + ": " + *e.value);
  }
  return lines.empty() ? std::string("None") : join(lines, "\n");
}

Schema blinded_a_schema(std::uint64_t seed, std::string_view item_id) {
  return (splitmix64(seed ^ fnv1a64(item_id)) & 1U) ? Schema::scene : Schema::atomic;
}

// ---- manifest -----------------------------------------------------------------------

ManifestItem make_manifest_item(std::string item_id, const UsageInstance& instance, Dimension d,
                                const ExpressionProfile& scene, const AtomicProfile& atomic) {
  return ManifestItem{std::move(item_id), instance, d, scene_fragment(scene, d), atomic_fragment(atomic, d)};
}

void Manifest::validate() const {
  std::set<std::string> item_ids, trial_ids, session_ids;
  for (const auto& it : items) {
    if (it.item_id.empty()) throw std::invalid_argument("manifest item without item_id");
    if (!item_ids.insert(it.item_id).second) throw std::invalid_argument("duplicate item_id " + it.item_id);
  }
  for (const auto& t : trials) {
    if (!trial_ids.insert(t.trial_id).second) throw std::invalid_argument("duplicate trial_id " + t.trial_id);
    auto problems = check_trial(t);
    if (!problems.empty()) throw std::invalid_argument("trial " + t.trial_id + ": " + join(problems, "; "));
  }
  for (const auto& s : sessions) {
    if (s.session_id.empty() || s.annotator_id.empty()) {
      throw std::invalid_argument("session needs session_id and annotator_id");
    }
    if (!session_ids.insert(s.session_id).second) throw std::invalid_argument("duplicate session " + s.session_id);
    std::set<std::string> seen;
    for (const auto& id : s.items) {
      if (!item_ids.count(id)) throw std::invalid_argument("session " + s.session_id + " lists unknown item " + id);
      if (!seen.insert(id).second) throw std::invalid_argument("session " + s.session_id + " repeats item " + id);
    }
    seen.clear();
    for (const auto& id : s.trials) {
      if (!trial_ids.count(id)) throw std::invalid_argument("session " + s.session_id + " lists unknown trial " + id);
      if (!seen.insert(id).second) throw std::invalid_argument("session " + s.session_id + " repeats trial " + id);
    }
  }
  // One session per annotator keeps duplicate detection per (annotator, item) unambiguous.
  std::set<std::string> annotators;
  for (const auto& s : sessions) {
    if (!annotators.insert(s.annotator_id).second) {
      throw std::invalid_argument("annotator " + s.annotator_id + " has more than one session");
    }
  }
}

Manifest Manifest::from_json(const json& j, const std::filesystem::path& base_dir) {
  Manifest m;
  m.seed = j.value("seed", std::uint64_t{0});
  for (const auto& it : j.value("items", json::array())) {
    ManifestItem item;
    item.item_id = it.at("item_id").get<std::string>();
    item.instance = it.at("instance").get<UsageInstance>();
    item.dimension = dimension_from_string(it.at("dimension").get<std::string>());
    item.scene_text = it.at("scene_text").get<std::string>();
    item.atomic_text = it.at("atomic_text").get<std::string>();
    m.items.push_back(std::move(item));
  }
  if (j.contains("trials")) {
    m.trials = j.at("trials").get<std::vector<OddOneOutTrial>>();
  } else if (j.contains("trials_file")) {
    std::filesystem::path p = j.at("trials_file").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    m.trials = load_trials(p).trials;
  }
  for (const auto& s : j.value("sessions", json::array())) {
    ManifestSession session;
    session.session_id = s.at("session_id").get<std::string>();
    session.annotator_id = s.at("annotator_id").get<std::string>();
    session.group = s.value("group", std::string());
    session.items = s.value("items", std::vector<std::string>{});
    session.trials = s.value("trials", std::vector<std::string>{});
    m.sessions.push_back(std::move(session));
  }
  m.validate();
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

json Manifest::to_json() const {
  json items_json = json::array();
  for (const auto& it : items) {
    items_json.push_back({{"item_id", it.item_id},
                          {"instance", it.instance},
                          {"dimension", scene_forge::to_string(it.dimension)},
                          {"scene_text", it.scene_text},
                          {"atomic_text", it.atomic_text}});
  }
  json sessions_json = json::array();
  for (const auto& s : sessions) {
    sessions_json.push_back({{"session_id", s.session_id},
                             {"annotator_id", s.annotator_id},
                             {"group", s.group},
                             {"items", s.items},
                             {"trials", s.trials}});
  }
  return json{{"seed", seed}, {"items", items_json}, {"trials", trials}, {"sessions", sessions_json}};
}

// ---- odd choices --------------------------------------------------------------------

void to_json(json& j, const OddChoice& c) {
  j = json{{"trial_id", c.trial_id},
           {"session_id", c.session_id},
           {"annotator_id", c.annotator_id},
           {"group", c.group},
           {"choice", c.choice}};
}

void from_json(const json& j, OddChoice& c) {
  c.trial_id = j.at("trial_id").get<std::string>();
  c.session_id = j.at("session_id").get<std::string>();
  c.annotator_id = j.at("annotator_id").get<std::string>();
  c.group = j.value("group", std::string());
  c.choice = j.at("choice").get<int>();
}

std::vector<RatingRecord> odd_choice_records(const std::vector<OddChoice>& choices) {
  std::vector<RatingRecord> out;
  out.reserve(choices.size());
  for (const auto& c : choices) out.push_back(RatingRecord{c.trial_id, c.annotator_id, std::to_string(c.choice), c.group});
  return out;
}

std::map<std::string, std::string> odd_gold_labels(const std::vector<OddOneOutTrial>& trials) {
  std::map<std::string, std::string> out;
  for (const auto& t : trials) out[t.trial_id] = std::to_string(t.gold_index);
  return out;
}

std::vector<std::string> odd_choice_categories() { return {"0", "1", "2", "3", "4"}; }

SubmissionRejected::SubmissionRejected(std::vector<std::string> r)
    : std::runtime_error("submission rejected: " + join(r, "; ")), rules(std::move(r)) {}

// ---- service ------------------------------------------------------------------------

AnnotationService::AnnotationService(Manifest manifest, std::filesystem::path log_dir, Options options)
    : manifest_(std::move(manifest)), log_dir_(std::move(log_dir)), options_(options) {
  manifest_.validate();
  for (std::size_t i = 0; i < manifest_.sessions.size(); ++i) session_index_[manifest_.sessions[i].session_id] = i;
  for (std::size_t i = 0; i < manifest_.items.size(); ++i) item_index_[manifest_.items[i].item_id] = i;
  for (std::size_t i = 0; i < manifest_.trials.size(); ++i) trial_index_[manifest_.trials[i].trial_id] = i;
  for (const auto& s : manifest_.sessions) {
    auto items = s.items;
    SeededRng item_rng(order_seed(manifest_.seed, "items", s.session_id));
    item_rng.shuffle(items);
    item_orders_[s.session_id] = std::move(items);
    auto trials = s.trials;
    SeededRng trial_rng(order_seed(manifest_.seed, "trials", s.session_id));
    trial_rng.shuffle(trials);
    trial_orders_[s.session_id] = std::move(trials);
  }
  std::filesystem::create_directories(log_dir_);
  replay();
}

void AnnotationService::replay() {
  auto add_judgment = [&](const PreferenceJudgment& j) {
    if (answered_items_.insert({j.annotator_id, j.item_id}).second) judgments_.push_back(j);
  };
  auto add_choice = [&](const OddChoice& c) {
    if (answered_trials_.insert({c.annotator_id, c.trial_id}).second) odd_choices_.push_back(c);
  };

  const auto snapshot_path = log_dir_ / kSnapshot;
  if (std::filesystem::exists(snapshot_path)) {
    try {
      json state = json::parse(read_file(snapshot_path));
      for (const auto& j : state.at("judgments")) add_judgment(j.get<PreferenceJudgment>());
      for (const auto& c : state.at("odd_choices")) add_choice(c.get<OddChoice>());
    } catch (const std::exception& e) {
      replay_warnings_.push_back(fmt::format("{}: {}", kSnapshot, e.what()));
    }
  }

  auto replay_log = [&](std::string_view name, const auto& handle) {
    const auto path = log_dir_ / name;
    if (!std::filesystem::exists(path)) return;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim_view(lines[i]).empty()) continue;
      try {
        handle(json::parse(lines[i]));
      } catch (const std::exception& e) {
        replay_warnings_.push_back(fmt::format("{}:{}: skipped ({})", name, i + 1, e.what()));
      }
    }
  };
  replay_log(kJudgmentLog, [&](const json& j) { add_judgment(j.get<PreferenceJudgment>()); });
  replay_log(kChoiceLog, [&](const json& j) { add_choice(j.get<OddChoice>()); });
}

const ManifestSession& AnnotationService::session(const std::string& id) const {
  auto it = session_index_.find(id);
  if (it == session_index_.end()) throw UnknownSession("unknown session '" + id + "'");
  return manifest_.sessions[it->second];
}

std::vector<std::string> AnnotationService::item_order(const std::string& session_id) const {
  session(session_id);
  return item_orders_.at(session_id);
}

std::vector<std::string> AnnotationService::trial_order(const std::string& session_id) const {
  session(session_id);
  return trial_orders_.at(session_id);
}

std::optional<AnnotationItem> AnnotationService::next_item(const std::string& session_id) const {
  const auto& s = session(session_id);
  std::shared_lock lock(mutex_);
  for (const auto& id : item_orders_.at(session_id)) {
    if (answered_items_.count({s.annotator_id, id})) continue;
    const auto& it = manifest_.items[item_index_.at(id)];
    const bool scene_first = blinded_a_schema(manifest_.seed, id) == Schema::scene;
    AnnotationItem out;
    out.item_id = id;
    out.instance = it.instance;
    out.instance.gold_scene_type.reset();
    out.dimension = it.dimension;
    out.elicitation_prompt = elicitation_prompt(it.dimension, it.instance.keyword_lemma);
    out.profile_a_text = scene_first ? it.scene_text : it.atomic_text;
    out.profile_b_text = scene_first ? it.atomic_text : it.scene_text;
    return out;
  }
  return std::nullopt;
}

Progress AnnotationService::item_progress(const std::string& session_id) const {
  const auto& s = session(session_id);
  std::shared_lock lock(mutex_);
  Progress p{0, s.items.size()};
  for (const auto& id : s.items) p.answered += answered_items_.count({s.annotator_id, id});
  return p;
}

void AnnotationService::submit_judgment(const std::string& session_id, const JudgmentSubmission& sub) {
  const auto& s = session(session_id);
  if (std::find(s.items.begin(), s.items.end(), sub.item_id) == s.items.end()) {
    throw UnknownItem("item '" + sub.item_id + "' is not part of session '" + session_id + "'");
  }
  const auto& item = manifest_.items[item_index_.at(sub.item_id)];

  std::vector<std::string> rules;
  PreferenceJudgment j;
  j.item_id = sub.item_id;
  j.dimension = item.dimension;
  j.annotator_id = s.annotator_id;
  j.blinding = blinded_a_schema(manifest_.seed, sub.item_id);
  const Schema other = j.blinding == Schema::scene ? Schema::atomic : Schema::scene;
  if (sub.preferred == "A") {
    j.preferred = j.blinding;
  } else if (sub.preferred == "B") {
    j.preferred = other;
  } else {
    rules.push_back("preferred must be \"A\" or \"B\"");
  }
  j.rating = sub.rating;
  for (const auto& r : sub.reasons) {
    try {
      j.reasons.push_back(reason_from_string(r));
    } catch (const std::exception&) {
      rules.push_back("unknown reason '" + r + "'");
    }
  }
  std::sort(j.reasons.begin(), j.reasons.end());
  j.reasons.erase(std::unique(j.reasons.begin(), j.reasons.end()), j.reasons.end());
  j.other_text = sub.other_text;
  j.elicitation_text = sub.elicitation_text;
  for (auto& e : check_judgment(j)) rules.push_back(std::move(e));
  if (!rules.empty()) throw SubmissionRejected(std::move(rules));

  std::unique_lock lock(mutex_);
  if (answered_items_.count({j.annotator_id, j.item_id})) {
    throw DuplicateSubmission("item '" + j.item_id + "' was already judged by " + j.annotator_id);
  }
  append_line(log_dir_ / kJudgmentLog, json(j).dump());
  answered_items_.insert({j.annotator_id, j.item_id});
  judgments_.push_back(std::move(j));
  after_append();
}

std::optional<OddTrialView> AnnotationService::next_odd_trial(const std::string& session_id) const {
  const auto& s = session(session_id);
  std::shared_lock lock(mutex_);
  for (const auto& id : trial_orders_.at(session_id)) {
    if (answered_trials_.count({s.annotator_id, id})) continue;
    const auto& t = manifest_.trials[trial_index_.at(id)];
    OddTrialView v{t.trial_id, t.keyword, t.candidates};
    for (auto& c : v.candidates) c.gold_scene_type.reset();
    return v;
  }
  return std::nullopt;
}

Progress AnnotationService::trial_progress(const std::string& session_id) const {
  const auto& s = session(session_id);
  std::shared_lock lock(mutex_);
  Progress p{0, s.trials.size()};
  for (const auto& id : s.trials) p.answered += answered_trials_.count({s.annotator_id, id});
  return p;
}

void AnnotationService::submit_odd_choice(const std::string& session_id, const std::string& trial_id, int choice) {
  const auto& s = session(session_id);
  if (std::find(s.trials.begin(), s.trials.end(), trial_id) == s.trials.end()) {
    throw UnknownItem("trial '" + trial_id + "' is not part of session '" + session_id + "'");
  }
  if (choice < 0 || choice > 4) throw SubmissionRejected({fmt::format("choice {} is outside 0..4", choice)});

  std::unique_lock lock(mutex_);
  if (answered_trials_.count({s.annotator_id, trial_id})) {
    throw DuplicateSubmission("trial '" + trial_id + "' was already answered by " + s.annotator_id);
  }
  OddChoice c{trial_id, session_id, s.annotator_id, s.group, choice};
  append_line(log_dir_ / kChoiceLog, json(c).dump());
  answered_trials_.insert({s.annotator_id, trial_id});
  odd_choices_.push_back(std::move(c));
  after_append();
}

void AnnotationService::after_append() {
  // Caller holds the unique lock.
  if (options_.snapshot_every == 0 || ++appends_since_snapshot_ < options_.snapshot_every) return;
  appends_since_snapshot_ = 0;
  atomic_write_file(log_dir_ / kSnapshot, json{{"judgments", judgments_}, {"odd_choices", odd_choices_}}.dump(2) + "\n");
}

void AnnotationService::snapshot() const {
  std::shared_lock lock(mutex_);
  atomic_write_file(log_dir_ / kSnapshot, json{{"judgments", judgments_}, {"odd_choices", odd_choices_}}.dump(2) + "\n");
}

std::vector<PreferenceJudgment> AnnotationService::judgments() const {
  std::shared_lock lock(mutex_);
  return judgments_;
}

std::vector<OddChoice> AnnotationService::odd_choices() const {
  std::shared_lock lock(mutex_);
  return odd_choices_;
}

std::map<std::string, std::string> AnnotationService::annotator_groups() const {
  std::map<std::string, std::string> out;
  for (const auto& s : manifest_.sessions) out[s.annotator_id] = s.group;
  return out;
}

// ---- wire format --------------------------------------------------------------------

namespace {

json instance_to_wire(const UsageInstance& u) {
  json j{{"instance_id", u.instance_id},
         {"context_text", u.context_text},
         {"target_expression", u.target_expression},
         {"keyword", u.keyword_lemma}};
  if (u.target_span) {
    j["target_span"] = {u.target_span->begin, u.target_span->end};
  } else {
    j["target_span"] = nullptr;
  }
  return j;
}

}  // namespace

json item_to_wire(const AnnotationItem& item) {
  return json{{"item_id", item.item_id},
              {"instance", instance_to_wire(item.instance)},
              {"dimension", to_string(item.dimension)},
              {"elicitation_prompt", item.elicitation_prompt},
              {"profile_a", item.profile_a_text},
              {"profile_b", item.profile_b_text}};
}

json trial_to_wire(const OddTrialView& trial) {
  json candidates = json::array();
  for (const auto& c : trial.candidates) candidates.push_back(instance_to_wire(c));
  return json{{"trial_id", trial.trial_id}, {"keyword", trial.keyword}, {"candidates", candidates}};
}

JudgmentSubmission submission_from_wire(const json& j) {
  JudgmentSubmission s;
  s.item_id = j.at("item_id").get<std::string>();
  s.preferred = j.at("preferred").get<std::string>();
  s.rating = j.at("rating").get<int>();
  s.reasons = j.value("reasons", std::vector<std::string>{});
  if (j.contains("other_text") && !j.at("other_text").is_null()) {
    s.other_text = j.at("other_text").get<std::string>();
  }
  s.elicitation_text = j.value("elicitation_text", std::string());
  return s;
}

// ---- HTTP server --------------------------------------------------------------------

struct AnnotationServer::Impl {
  AnnotationService& service;
  Options options;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  Impl(AnnotationService& s, Options o) : service(s), options(std::move(o)) { install_routes(); }

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const UnknownSession& e) {
      send(res, 404, {{"error", e.what()}});
    } catch (const UnknownItem& e) {
      send(res, 404, {{"error", e.what()}});
    } catch (const DuplicateSubmission& e) {
      send(res, 409, {{"error", e.what()}});
    } catch (const SubmissionRejected& e) {
      send(res, 422, {{"error", e.what()}, {"rules", e.rules}});
    } catch (const json::exception& e) {
      send(res, 400, {{"error", std::string("malformed request body: ") + e.what()}});
    } catch (const std::exception& e) {
      send(res, 500, {{"error", e.what()}});
    }
  }

  static json progress_json(const Progress& p) { return {{"answered", p.answered}, {"total", p.total}}; }

  void install_routes() {
    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"status", "ok"}, {"sessions", service.session_count()}});
    });
    server.Get(R"(/api/session/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        auto item = service.next_item(id);
        json body{{"done", !item}, {"progress", progress_json(service.item_progress(id))}};
        body["item"] = item ? item_to_wire(*item) : json(nullptr);
        send(res, 200, body);
      });
    });
    server.Post(R"(/api/session/([^/]+)/judgment)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        service.submit_judgment(id, submission_from_wire(json::parse(req.body)));
        send(res, 200, {{"ok", true}, {"progress", progress_json(service.item_progress(id))}});
      });
    });
    server.Get(R"(/api/session/([^/]+)/odd/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        auto trial = service.next_odd_trial(id);
        json body{{"done", !trial}, {"progress", progress_json(service.trial_progress(id))}};
        body["trial"] = trial ? trial_to_wire(*trial) : json(nullptr);
        send(res, 200, body);
      });
    });
    server.Post(R"(/api/session/([^/]+)/odd/choice)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        json body = json::parse(req.body);
        service.submit_odd_choice(id, body.at("trial_id").get<std::string>(), body.at("choice").get<int>());
        send(res, 200, {{"ok", true}, {"progress", progress_json(service.trial_progress(id))}});
      });
    });
    if (!options.static_dir.empty() && !server.set_mount_point("/", options.static_dir.string())) {
      throw std::runtime_error("static directory " + options.static_dir.string() + " does not exist");
    }
  }

  void bind() {
    if (port >= 0) return;
    if (options.port == 0) {
      port = server.bind_to_any_port(options.host);
    } else {
      port = server.bind_to_port(options.host, options.port) ? options.port : -1;
    }
    if (port < 0) throw std::runtime_error(fmt::format("cannot bind {}:{}", options.host, options.port));
  }
};

AnnotationServer::AnnotationServer(AnnotationService& service, Options options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start() {
  impl_->bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int AnnotationServer::port() const { return impl_->port; }

}  // namespace scene_forge
