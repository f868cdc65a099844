// Runs every acceptance criterion and prints one PASS/FAIL/SKIP line for each.
// Exit status is nonzero when any criterion that ran has failed.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>

#include <unistd.h>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "scene_forge/annotation_service.hpp"
#include "scene_forge/cli.hpp"
#include "scene_forge/datasets.hpp"
#include "scene_forge/embedding.hpp"
#include "scene_forge/evaluation.hpp"
#include "scene_forge/generation.hpp"
#include "scene_forge/util.hpp"
#include "support/oracles.hpp"

using namespace scene_forge;
using namespace scene_forge::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SCENE_FORGE_DATA_DIR;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::vector<std::string> notes;     // measured values, printed on the line
  std::vector<std::string> failures;  // failed expectations

  void expect(bool ok, std::string what) {
    if (!ok) failures.push_back(std::move(what));
  }
  void note(std::string s) { notes.push_back(std::move(s)); }
};

struct Criterion {
  std::string name;
  std::function<void(Outcome&)> check;
};

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / fmt::format("sf_accept_{}_{}", name, ::getpid());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

UsageInstance make_instance(std::string id, std::string context, std::string target, std::string lemma) {
  UsageInstance u;
  u.instance_id = std::move(id);
  u.context_text = std::move(context);
  u.target_expression = std::move(target);
  u.keyword_lemma = std::move(lemma);
  return u;
}

UsageInstance whiskey_instance() {
  return make_instance("whiskey-1", "The man sat alone at the kitchen table, drinking whiskey late at night.",
                       "whiskey", "whiskey");
}

// ---- statistics oracles -----------------------------------------------------------------

void statistics_oracles(Outcome& o) {
  auto m = RatingsMatrix::from_records(records_from_counts({{3, 0}, {2, 1}, {0, 3}, {1, 2}}, {"A", "B"}));
  const double ac1 = gwet_ac1(m);
  auto perfect = RatingsMatrix::from_records(records_from_counts({{3, 0}, {0, 3}, {3, 0}, {0, 3}}, {"A", "B"}));
  const double full = full_agreement_ratio(m);
  o.note(fmt::format("ac1={:.9f} perfect={} full_agreement={}", ac1, gwet_ac1(perfect), full));
  o.expect(close(ac1, 1.0 / 3.0, 1e-9), "AC1 on the 4-item matrix");
  o.expect(gwet_ac1(perfect) == 1.0, "AC1 on the perfect matrix");
  o.expect(full == 0.5, "full agreement ratio");
}

// ---- exact tests -------------------------------------------------------------------------

void exact_tests(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  const double p44 = binomial_test_one_sided(4, 4);
  const double p329 = binomial_test_one_sided(329, 360);
  o.expect(p44 == 0.0625, "binomial(4,4) == 0.0625 exactly");
  o.expect(p329 < 1e-3, "binomial(329,360) < 1e-3");

  SeededRng rng(555);
  int cases = 0, mismatches = 0;
  for (; cases < 600; ++cases) {
    const std::size_t nx = 1 + rng.below(5), ny = 1 + rng.below(5);
    std::vector<double> values;
    for (std::size_t i = 0; i < nx + ny; ++i) values.push_back(static_cast<double>(i) * 1.5 - 3.0);
    rng.shuffle(values);
    std::vector<double> x(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(nx));
    std::vector<double> y(values.begin() + static_cast<std::ptrdiff_t>(nx), values.end());
    const auto r = mann_whitney_u(x, y, MwuMode::exact);
    const auto b = brute_force_mwu(x, y);
    const bool ok = r.exact && r.u_x == b.u && close(r.p_greater, b.p_greater, 1e-12) &&
                    close(r.p_less, b.p_less, 1e-12) && close(r.p_two_sided, b.p_two, 1e-12);
    mismatches += !ok;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.note(fmt::format("p(4,4)={} p(329,360)={:.3e} mwu_cases={} mismatches={} time={:.2f}s", p44, p329, cases,
                     mismatches, secs));
  o.expect(cases >= 500 && mismatches == 0, "Mann-Whitney exact mode vs brute force");
  o.expect(secs < 10.0, "runtime under 10 s");
}

// ---- odd-one-out -------------------------------------------------------------------------

void odd_one_out(Outcome& o) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<EmbeddingVector> fixture;
  for (auto [x, y] : std::vector<std::pair<double, double>>{{1, 0}, {0.8, 0.6}, {0.6, 0.8}, {0.9, 0.436}, {-0.6, 0.8}}) {
    fixture.push_back(EmbeddingVector::normalized({x, y}));
  }
  const auto predicted = predict_odd(fixture);
  o.expect(predicted == 4, "predict_odd on the 2-d fixture");

  const auto corpus = load_corpus(kData / "corpora" / "separable_26x4x5.tsv", true);
  auto evaluate = [&] {
    const auto trials = sample_trial_set(corpus, 4, 2024);
    ReplayChatProvider chat;
    GenerationOptions gen;
    gen.clock = [] { return std::string("1970-01-01T00:00:00Z"); };
    ProfileStore store;
    for (const auto& u : corpus.instances()) {
      store[u.instance_id] =
          generate_scene(chat, GenerationConfig{}, u, default_scene_examples(), gen).scene.expression_profile;
    }
    HashBagEmbeddingProvider embedder;
    OddEvalReport report{2024, embedder.id(), {}};
    for (ReprCondition c : kAllConditions) report.results.push_back(run_odd_eval(trials, c, store, embedder));
    return report;
  };
  const auto first = evaluate();
  const auto second = evaluate();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 2.0;

  std::vector<std::string> accs;
  bool all_one = true;
  for (const auto& r : first.results) {
    accs.push_back(fmt::format("{}={:.3f}", to_string(r.condition), r.accuracy));
    all_one = all_one && r.accuracy == 1.0 && r.trials.size() == 104;
  }
  const bool identical = to_json(first).dump() == to_json(second).dump() &&
                         format_odd_table(first) == format_odd_table(second);
  o.note(fmt::format("predict_odd={} {} reproducible={} time/run={:.2f}s", predicted, join(accs, " "), identical, secs));
  o.expect(all_one, "accuracy 1.0 over 104 trials in every condition");
  o.expect(identical, "byte-identical rerun");
  o.expect(secs < 5.0, "runtime under 5 s");
}

// ---- serialization goldens -----------------------------------------------------------------

void serialization_goldens(Outcome& o) {
  const std::string emo = serialize_component(Dimension::evoked_emotions, {"loneliness", "resignation", "introspection"});
  o.expect(emo == "evoked emotions: loneliness, resignation, introspection.", "component golden");

  const auto u = whiskey_instance();
  const auto profile = parse_scene(read_file(kData / "fixtures" / "whiskey_scene.txt"), u).expression_profile;
  const std::string s = "The man sat alone at the kitchen table, drinking whiskey late at night.";
  const std::string ev = "engaged events: PersonX drinks it, It is consumed alone at ObjectY.";
  const std::string pr =
      "generalizable properties: Often associated with solitude and reflection, can signify coping mechanisms "
      "during difficult times.";
  const std::string em = "evoked emotions: melancholy, loneliness.";
  const std::vector<std::pair<ReprCondition, std::string>> goldens = {
      {ReprCondition::text, s},
      {ReprCondition::text_event, s + " " + ev},
      {ReprCondition::text_property, s + " " + pr},
      {ReprCondition::text_emotion, s + " " + em},
      {ReprCondition::text_scene, s + " " + ev + " " + pr + " " + em},
      {ReprCondition::scene_only, ev + " " + pr + " " + em},
  };
  int matched = 0;
  for (const auto& [c, golden] : goldens) {
    const bool ok = build_condition_text(c, u, &profile) == golden;
    matched += ok;
    o.expect(ok, fmt::format("condition {} golden", to_string(c)));
  }
  o.note(fmt::format("component=\"{}\" conditions_matched={}/6", emo, matched));
}

// ---- generation robustness ---------------------------------------------------------------

class ScriptedProvider : public ChatProvider {
 public:
  explicit ScriptedProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string send(std::span<const ChatMessage>, const GenerationConfig&) override {
    std::lock_guard lock(mu_);
    return replies_[std::min(calls_++, replies_.size() - 1)];
  }

 private:
  std::vector<std::string> replies_;
  std::size_t calls_ = 0;
  std::mutex mu_;
};

void generation_robustness(Outcome& o) {
  const std::string valid = read_file(kData / "fixtures" / "whiskey_scene.txt");
  GenerationOptions opts;
  opts.clock = [] { return std::string("1970-01-01T00:00:00Z"); };
  opts.retry.sleep = [](std::chrono::milliseconds) {};

  ScriptedProvider repaired({"I am not sure what you mean.", valid});
  const auto ok = generate_scene(repaired, {}, whiskey_instance(), default_scene_examples(), opts);
  o.expect(ok.attempts == 2, "malformed then valid succeeds with attempts=2");

  ScriptedProvider broken({"garbage"});
  int failed_attempts = -1;
  try {
    generate_scene(broken, {}, whiskey_instance(), default_scene_examples(), opts);
  } catch (const GenerationFailed& e) {
    failed_attempts = e.attempts();
  }
  o.expect(failed_attempts == GenerationConfig{}.max_repair_attempts + 1, "exhausted repairs raise GenerationFailed");

  std::vector<std::pair<std::string, UsageInstance>> fixtures = {
      {read_file(kData / "fixtures" / "whiskey_scene.txt"), whiskey_instance()},
      {read_file(kData / "fixtures" / "crow_scene.txt"),
       make_instance("crow-1",
                     "Sometimes she would just stay by the window, feeding the crows while he was doing some "
                     "paperwork, just like old times.",
                     "crows", "crow")},
      {read_file(kData / "fixtures" / "coffee_scene.json"),
       make_instance("coffee-1", "She drank her third coffee of the morning and kept typing.", "coffee", "coffee")},
  };
  for (const auto& ex : default_scene_examples()) fixtures.push_back({ex.output_text, make_instance("ex", "", "", "kw")});
  std::size_t clean = 0;
  for (const auto& [raw, u] : fixtures) {
    const auto scene = parse_scene(raw, u);
    const bool good = validate_scene(scene).errors.empty() && parse_scene(render_scene(scene), u) == scene;
    clean += good;
  }
  o.note(fmt::format("repair_attempts={} exhausted_attempts={} fixtures_clean={}/{}", ok.attempts, failed_attempts,
                     clean, fixtures.size()));
  o.expect(clean == fixtures.size(), "every bundled fixture round-trips with zero validation errors");
}

// ---- live smoke --------------------------------------------------------------------------

int run_cli(std::vector<std::string> args, std::string& out, std::string& err) {
  args.insert(args.begin(), "scene-forge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  out = o.str();
  err = e.str();
  return code;
}

void live_smoke(Outcome& o) {
  const char* key = std::getenv("SCENE_FORGE_API_KEY");
  if (!key || !*key) {
    o.status = Status::skip;
    o.note("SCENE_FORGE_API_KEY not set");
    return;
  }
  const auto dir = scratch("live");
  const auto fixture = (kData / "corpora" / "table3_fixture.tsv").string();
  std::string out, err;
  run_cli({"generate", "--provider", "live", "--input", fixture, "--out", (dir / "scenes").string(), "--cache-dir",
           (dir / "cache").string()},
          out, err);
  std::size_t parsed = 0;
  const auto instances = load_corpus(fixture, false).instances();
  for (const auto& u : instances) {
    const auto path = dir / "scenes" / (safe_file_stem(u.instance_id) + ".json");
    try {
      parsed += fs::exists(path) && validate_scene(parse_scene(read_file(path), u)).ok();
    } catch (const std::exception&) {
    }
  }
  const double rate = static_cast<double>(parsed) / static_cast<double>(instances.size());
  o.expect(rate >= 0.95, "at least 95% parse-valid scenes");

  auto check_report = [&](const std::string& corpus_path, const std::vector<std::string>& extra, bool check_chance) {
    std::vector<std::string> args{"odd-eval", "--provider", "live", "--seed", "1", "--condition", "all", "--corpus",
                                  corpus_path, "--format", "json", "--cache-dir", (dir / "cache").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const int code = run_cli(args, out, err);
    o.expect(code == 0, "odd-eval exits 0 (" + corpus_path + "): " + err);
    if (code != 0) return;
    const auto results = json::parse(out)["report"]["results"];
    o.expect(results.size() == 6, "six-condition report");
    for (const auto& r : results) {
      o.note(fmt::format("{}={:.3f}", r["condition"].get<std::string>(), r["accuracy"].get<double>()));
      if (check_chance) o.expect(r["accuracy"].get<double>() >= 0.2, "accuracy at or above chance");
    }
  };
  check_report(fixture, {"--scenes", (dir / "scenes").string(), "--per-keyword", "1"}, false);
  if (const char* full = std::getenv("SCENE_FORGE_FULL_CORPUS"); full && *full) check_report(full, {}, true);
  o.note(fmt::format("parse_valid={}/{}", parsed, instances.size()));
}

// ---- report fidelity -----------------------------------------------------------------------

void report_fidelity(Outcome& o) {
  const auto report = preference_report(thirty_judgments(), {{"a1", "Group 1"}, {"a2", "Group 1"}});
  if (report.dimensions.size() != 3) {
    o.expect(false, "three dimensions in the report");
    return;
  }
  const auto& ee = report.dimensions[0];
  const auto& gp = report.dimensions[1];
  const auto& em = report.dimensions[2];
  o.expect(report.total == 30 && report.scene_preferred == 21, "overall preference counts");
  o.expect(ee.scene_rate == 0.8 && gp.scene_rate == 0.7 && em.scene_rate == 0.6, "per-dimension preference rates");
  o.expect(ee.binomial_p == 56.0 / 1024 && gp.binomial_p == 176.0 / 1024 && em.binomial_p == 386.0 / 1024,
           "binomial p-values");
  o.expect(ee.scene_rating->mean == 4.5 && close(ee.scene_rating->sd, std::sqrt(0.5), 1e-15), "EE scene rating");
  o.expect(ee.atomic_rating->mean == 3.5 && ee.atomic_rating->sd == 0.5, "EE atomic rating");
  o.expect(gp.scene_rating->mean == 5.0 && gp.scene_rating->sd == 0.0, "GP scene rating");
  o.expect(close(gp.atomic_rating->mean, 11.0 / 3.0, 1e-15) && close(gp.atomic_rating->sd, std::sqrt(14.0) / 3.0, 1e-15),
           "GP atomic rating");
  o.expect(close(em.scene_rating->mean, 26.0 / 6.0, 1e-15), "EM scene rating");
  o.expect(em.atomic_rating->mean == 3.75 && close(em.atomic_rating->sd, std::sqrt(0.6875), 1e-15), "EM atomic rating");
  o.expect(ee.failure_reasons.at(Reason::lacks_info).second == 100.0 && ee.failure_reasons.at(Reason::other).second == 50.0,
           "EE failure percentages");
  o.expect(em.failure_reasons.at(Reason::not_applicable).second == 50.0, "EM N/A percentage");
  double row = 0;
  for (const auto& [r, cp] : ee.failure_reasons) row += cp.second;
  o.expect(row == 150.0, "multi-select row sums above 100%");
  o.note(fmt::format("rates={}/{}/{} ee_scene={:.2f}±{:.4f} gp_atomic={:.4f}±{:.4f} ee_reason_row={}%", ee.scene_rate,
                     gp.scene_rate, em.scene_rate, ee.scene_rating->mean, ee.scene_rating->sd, gp.atomic_rating->mean,
                     gp.atomic_rating->sd, row));
}

// ---- service protocol ----------------------------------------------------------------------

void service_protocol(Outcome& o) {
  Manifest m;
  m.seed = 11;
  const auto u = whiskey_instance();
  m.items = {{"w-ee", u, Dimension::engaged_events, "PersonX drinks it alone", "the person intends: to relax"},
             {"w-gp", u, Dimension::generalizable_properties, "strong", "made of: grain"},
             {"w-em", u, Dimension::evoked_emotions, "melancholy", "the person feels: calm"}};
  m.sessions = {{"s1", "ann1", "expert", {"w-ee", "w-gp", "w-em"}, {}}};
  AnnotationService service(m, scratch("service"));
  AnnotationServer server(service, {});
  httplib::Client client("127.0.0.1", server.start());

  auto post = [&](const json& body) {
    auto r = client.Post("/api/session/s1/judgment", body.dump(), "application/json");
    return r ? r->status : -1;
  };
  auto body = [](const std::string& id, int rating, json reasons) {
    return json{{"item_id", id}, {"preferred", "B"}, {"rating", rating}, {"reasons", std::move(reasons)},
                {"elicitation_text", "he drinks to forget"}};
  };
  const int no_reason = post(body("w-ee", 4, json::array()));
  const int na_on_events = post(body("w-ee", 3, json::array({"not_applicable"})));
  o.expect(no_reason == 422, "rating 4 without a reason is rejected");
  o.expect(na_on_events == 422, "not_applicable on an Events item is rejected");

  int completed = 0;
  for (int step = 0; step < 3; ++step) {
    auto r = client.Get("/api/session/s1/next");
    if (!r || r->status != 200) break;
    const json next = json::parse(r->body);
    if (next["done"] == true || next["item"].contains("blinding")) break;
    completed += post(body(next["item"]["item_id"], 5, json::array())) == 200;
  }
  auto done = client.Get("/api/session/s1/next");
  const bool finished = done && json::parse(done->body)["done"] == true;
  o.expect(completed == 3 && finished && service.judgments().size() == 3, "scripted 3-item session completes");
  server.stop();

  int scene_first = 0;
  for (int i = 0; i < 1000; ++i) scene_first += blinded_a_schema(20240601, fmt::format("item-{}", i)) == Schema::scene;
  const double freq = scene_first / 1000.0;
  o.expect(close(freq, 0.5, 0.05), "blinding frequency 0.5 +- 0.05");
  o.note(fmt::format("rejects={}/{} session_items={} blinding_freq={:.3f}", no_reason, na_on_events, completed, freq));
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"statistics-oracles", statistics_oracles},     {"exact-tests", exact_tests},
      {"odd-one-out", odd_one_out},                   {"serialization-goldens", serialization_goldens},
      {"generation-robustness", generation_robustness}, {"live-pipeline-smoke", live_smoke},
      {"report-fidelity", report_fidelity},           {"service-protocol", service_protocol},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      c.check(o);
    } catch (const std::exception& e) {
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    if (!o.failures.empty()) o.status = Status::fail;
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
    std::string line = fmt::format("{} {:<22} {}", tag, c.name, join(o.notes, " "));
    if (!o.failures.empty()) line += " | failed: " + join(o.failures, "; ");
    std::cout << line << "\n";
    failed += o.status == Status::fail;
  }
  std::cout << fmt::format("{} of {} criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
