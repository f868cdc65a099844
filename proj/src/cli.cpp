#include "scene_forge/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "scene_forge/annotation_service.hpp"
#include "scene_forge/config.hpp"
#include "scene_forge/datasets.hpp"
#include "scene_forge/embedding.hpp"
#include "scene_forge/evaluation.hpp"
#include "scene_forge/generation.hpp"
#include "scene_forge/util.hpp"

namespace scene_forge::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kPartialFailure = 1;
constexpr int kUsageError = 2;

// Flag values collected by CLI11 before the config layers are merged.
struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string provider, cache_dir, condition = "all", out, format, mock_fixture, embedding_provider;
  bool no_cache = false;
  std::optional<std::size_t> max_in_flight;

  std::string input, input_format = "corpus", scenes, corpus, trials, ratings, gold, categories, judgments,
      manifest, log_dir = "annotation_logs", host = "127.0.0.1", static_dir;
  std::size_t per_keyword = 4;
  int port = 8000;
  bool include_trials = false;
};

ConfigLayer flag_layer(const Flags& f) {
  ConfigLayer l;
  if (f.seed) l["seed"] = std::to_string(*f.seed);
  if (!f.provider.empty()) l["provider"] = f.provider;
  if (!f.cache_dir.empty()) l["cache_dir"] = f.cache_dir;
  if (!f.format.empty()) l["format"] = f.format;
  if (!f.mock_fixture.empty()) l["mock_fixture"] = f.mock_fixture;
  if (!f.embedding_provider.empty()) l["embedding_provider"] = f.embedding_provider;
  if (f.no_cache) l["no_cache"] = "true";
  if (f.max_in_flight) l["max_in_flight"] = std::to_string(*f.max_in_flight);
  return l;
}

struct Context {
  RunConfig cfg;
  Flags flags;
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> failures;
  std::mutex failures_mutex;

  void fail(std::string message) {
    std::lock_guard lock(failures_mutex);
    failures.push_back(std::move(message));
  }

  int finish() {
    std::sort(failures.begin(), failures.end());
    for (const auto& f : failures) err << "error: " << f << "\n";
    if (!failures.empty()) err << failures.size() << " failure(s)\n";
    return failures.empty() ? 0 : kPartialFailure;
  }

  std::string seed_text() const { return cfg.seed ? std::to_string(*cfg.seed) : std::string("unset"); }

  /// Writes a report to --out (atomically) or to stdout.
  void emit(std::string_view command, const std::string& table, const json& report) {
    std::string text;
    if (cfg.format == "json") {
      json doc{{"command", command}, {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)}, {"report", report}};
      text = doc.dump(2) + "\n";
    } else {
      text = table;
    }
    if (flags.out.empty()) {
      out << text;
    } else {
      atomic_write_file(flags.out, text);
      out << "wrote " << flags.out << "\n";
    }
  }
};

std::vector<UsageInstance> load_instances(Context& ctx, const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--input is required");
  if (ctx.flags.input_format == "corpus") return load_corpus(path, false).instances();
  auto result = ingest_usages(path, usage_format_from_string(ctx.flags.input_format));
  for (const auto& e : result.errors) ctx.fail(fmt::format("{}:{}: {}", path, e.line, e.message));
  return std::move(result.instances);
}

std::unique_ptr<ChatProvider> make_chat_provider(const RunConfig& cfg) {
  if (cfg.provider == "live") {
    if (cfg.api_key.empty()) throw std::invalid_argument("live provider needs SCENE_FORGE_API_KEY or api_key");
    return std::make_unique<HttpChatProvider>(HttpChatProvider::Options{cfg.chat_url, cfg.chat_path, cfg.api_key});
  }
  if (!cfg.mock_fixture.empty()) return std::make_unique<ReplayChatProvider>(ReplayChatProvider::from_file(cfg.mock_fixture));
  return std::make_unique<ReplayChatProvider>();
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& cfg) {
  const std::string kind =
      cfg.embedding_provider == "auto" ? (cfg.provider == "mock" ? "hashbag" : "http") : cfg.embedding_provider;
  if (kind == "hashbag") return std::make_unique<HashBagEmbeddingProvider>();
  HttpEmbeddingProvider::Options o;
  o.base_url = cfg.embedding_url;
  o.path = cfg.embedding_path;
  o.model = cfg.embedding_model;
  o.dim = cfg.embedding_dim;
  o.batch_size = cfg.embedding_batch_size;
  o.api_key = cfg.api_key;
  return std::make_unique<HttpEmbeddingProvider>(o);
}

struct GenerationSetup {
  std::unique_ptr<ChatProvider> provider;
  std::optional<CompletionCache> cache;
  GenerationOptions options;
};

GenerationSetup generation_setup(const RunConfig& cfg) {
  GenerationSetup s;
  s.provider = make_chat_provider(cfg);
  if (!cfg.no_cache) s.cache.emplace(cfg.cache_dir);
  s.options.cache = s.cache ? &*s.cache : nullptr;
  s.options.k = cfg.few_shot_k;
  // Mock runs must be byte-identical, so provenance time is pinned.
  if (cfg.provider == "mock") s.options.clock = [] { return std::string("1970-01-01T00:00:00Z"); };
  return s;
}

std::vector<ReprCondition> conditions_from_flag(const std::string& flag) {
  if (flag == "all") return {std::begin(kAllConditions), std::end(kAllConditions)};
  return {condition_from_string(flag)};
}

fs::path scene_path(const fs::path& dir, const UsageInstance& u) { return dir / (safe_file_stem(u.instance_id) + ".json"); }

/// Loads stored scenes for the given instances; missing or unreadable files are skipped.
ProfileStore load_profiles(Context& ctx, const fs::path& dir, const std::vector<UsageInstance>& instances,
                           bool report_missing) {
  ProfileStore store;
  for (const auto& u : instances) {
    const auto path = scene_path(dir, u);
    if (!fs::exists(path)) {
      if (report_missing) ctx.fail(fmt::format("{}: no scene file {}", u.instance_id, path.string()));
      continue;
    }
    try {
      store[u.instance_id] = parse_scene(read_file(path), u).expression_profile;
    } catch (const std::exception& e) {
      ctx.fail(fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return store;
}

/// Generates scenes in parallel and returns them by instance id; failures are recorded.
std::map<std::string, SceneRepresentation> generate_scenes(Context& ctx, const std::vector<UsageInstance>& instances) {
  auto setup = generation_setup(ctx.cfg);
  std::vector<std::optional<SceneRepresentation>> results(instances.size());
  parallel_for(instances.size(), ctx.cfg.max_in_flight, [&](std::size_t i) {
    try {
      results[i] = generate_scene(*setup.provider, ctx.cfg.generation, instances[i], default_scene_examples(),
                                  setup.options)
                       .scene;
    } catch (const std::exception& e) {
      ctx.fail(fmt::format("{}: {}", instances[i].instance_id, e.what()));
    }
  });
  std::map<std::string, SceneRepresentation> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (results[i]) out.emplace(instances[i].instance_id, std::move(*results[i]));
  }
  return out;
}

// ---- commands -----------------------------------------------------------------------

int cmd_generate(Context& ctx) {
  if (ctx.flags.out.empty()) throw std::invalid_argument("generate needs --out <dir>");
  const auto instances = load_instances(ctx, ctx.flags.input);
  const auto scenes = generate_scenes(ctx, instances);
  for (const auto& [id, scene] : scenes) {
    const auto& u = *std::find_if(instances.begin(), instances.end(), [&](const auto& x) { return x.instance_id == id; });
    atomic_write_file(scene_path(ctx.flags.out, u), render_scene(scene));
  }
  ctx.out << fmt::format("seed {}  generated {}/{} scenes into {}\n", ctx.seed_text(), scenes.size(), instances.size(),
                         ctx.flags.out);
  return ctx.finish();
}

int cmd_atomic(Context& ctx) {
  if (ctx.flags.out.empty()) throw std::invalid_argument("atomic needs --out <dir>");
  const auto instances = load_instances(ctx, ctx.flags.input);
  auto setup = generation_setup(ctx.cfg);
  std::atomic<std::size_t> done{0};
  parallel_for(instances.size(), ctx.cfg.max_in_flight, [&](std::size_t i) {
    try {
      auto gen = generate_atomic_profile(*setup.provider, ctx.cfg.generation, instances[i], setup.options);
      json j = gen.profile;
      atomic_write_file(scene_path(ctx.flags.out, instances[i]), j.dump(2) + "\n");
      ++done;
    } catch (const std::exception& e) {
      ctx.fail(fmt::format("{}: {}", instances[i].instance_id, e.what()));
    }
  });
  ctx.out << fmt::format("seed {}  generated {}/{} atomic profiles into {}\n", ctx.seed_text(), done.load(),
                         instances.size(), ctx.flags.out);
  return ctx.finish();
}

int cmd_embed(Context& ctx) {
  if (ctx.flags.out.empty()) throw std::invalid_argument("embed needs --out <dir>");
  const auto instances = load_instances(ctx, ctx.flags.input);
  const auto conditions = conditions_from_flag(ctx.flags.condition);
  const bool needs_scenes = std::any_of(conditions.begin(), conditions.end(),
                                        [](ReprCondition c) { return c != ReprCondition::text; });
  if (needs_scenes && ctx.flags.scenes.empty()) throw std::invalid_argument("scene conditions need --scenes <dir>");
  const ProfileStore store = needs_scenes ? load_profiles(ctx, ctx.flags.scenes, instances, true) : ProfileStore{};
  auto provider = make_embedding_provider(ctx.cfg);
  std::size_t written = 0;
  for (ReprCondition c : conditions) {
    std::vector<const UsageInstance*> todo;
    std::vector<std::string> texts;
    for (const auto& u : instances) {
      auto it = store.find(u.instance_id);
      if (c != ReprCondition::text && it == store.end()) continue;
      todo.push_back(&u);
      texts.push_back(build_condition_text(c, u, it == store.end() ? nullptr : &it->second));
    }
    const std::size_t batch = ctx.cfg.embedding_batch_size;
    const std::size_t chunks = (texts.size() + batch - 1) / batch;
    parallel_for(chunks, ctx.cfg.max_in_flight, [&](std::size_t k) {
      const std::size_t begin = k * batch, end = std::min(texts.size(), begin + batch);
      try {
        auto vs = provider->embed_batch(std::span<const std::string>(texts).subspan(begin, end - begin));
        for (std::size_t i = begin; i < end; ++i) {
          write_vector_file(fs::path(ctx.flags.out) / std::string(to_string(c)) / (safe_file_stem(todo[i]->instance_id) + ".vec"),
                            vs[i - begin], provider->id());
        }
      } catch (const std::exception& e) {
        ctx.fail(fmt::format("{} batch {}: {}", to_string(c), k, e.what()));
      }
    });
    written += texts.size();
  }
  ctx.out << fmt::format("seed {}  embeddings {}  wrote {} vectors into {}\n", ctx.seed_text(), provider->id(), written,
                         ctx.flags.out);
  return ctx.finish();
}

int cmd_sample_trials(Context& ctx) {
  if (ctx.flags.corpus.empty()) throw std::invalid_argument("sample-trials needs --corpus");
  const auto seed = ctx.cfg.require_seed("sample-trials");
  const auto corpus = load_corpus(ctx.flags.corpus, true);
  TrialFile file{seed, sample_trial_set(corpus, ctx.flags.per_keyword, seed)};
  if (ctx.flags.out.empty()) {
    ctx.out << format_trials(file);
  } else {
    save_trials(ctx.flags.out, file);
    ctx.out << fmt::format("seed {}  wrote {} trials to {}\n", seed, file.trials.size(), ctx.flags.out);
  }
  return ctx.finish();
}

int cmd_odd_eval(Context& ctx) {
  if (ctx.flags.corpus.empty()) throw std::invalid_argument("odd-eval needs --corpus");
  const auto corpus = load_corpus(ctx.flags.corpus, false);
  TrialFile trials;
  if (!ctx.flags.trials.empty()) {
    trials = load_trials(ctx.flags.trials);
    if (ctx.cfg.seed && *ctx.cfg.seed != trials.seed) {
      throw std::invalid_argument(fmt::format("--seed {} disagrees with the trials file seed {}", *ctx.cfg.seed, trials.seed));
    }
    ctx.cfg.seed = trials.seed;
  } else {
    trials.seed = ctx.cfg.require_seed("odd-eval");
    trials.trials = sample_trial_set(corpus, ctx.flags.per_keyword, trials.seed);
  }

  const auto conditions = conditions_from_flag(ctx.flags.condition);
  const bool needs_scenes = std::any_of(conditions.begin(), conditions.end(),
                                        [](ReprCondition c) { return c != ReprCondition::text; });
  std::vector<UsageInstance> used;
  std::set<std::string> seen;
  for (const auto& t : trials.trials) {
    for (const auto& c : t.candidates) {
      if (seen.insert(c.instance_id).second) used.push_back(c);
    }
  }

  ProfileStore store;
  if (needs_scenes) {
    if (!ctx.flags.scenes.empty()) {
      store = load_profiles(ctx, ctx.flags.scenes, used, true);
    } else {
      for (auto& [id, scene] : generate_scenes(ctx, used)) store.emplace(id, std::move(scene.expression_profile));
    }
  }

  auto provider = make_embedding_provider(ctx.cfg);
  OddEvalReport report{trials.seed, provider->id(), {}};
  OddEvalOptions options;
  options.max_in_flight = ctx.cfg.max_in_flight;
  options.batch_size = ctx.cfg.embedding_batch_size;
  for (ReprCondition c : conditions) {
    try {
      report.results.push_back(run_odd_eval(trials.trials, c, store, *provider, options));
    } catch (const MissingScenes& e) {
      ctx.fail(fmt::format("condition {} skipped: {}", to_string(c), e.what()));
    }
  }
  ctx.emit("odd-eval", format_odd_table(report), to_json(report, ctx.flags.include_trials));
  return ctx.finish();
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  std::size_t n = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++n;
    if (trim_view(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return out;
}

int cmd_iaa(Context& ctx) {
  if (ctx.flags.ratings.empty()) throw std::invalid_argument("iaa needs --ratings");
  std::vector<RatingRecord> records;
  bool odd_choices = false;
  for (const auto& j : read_jsonl(ctx.flags.ratings)) {
    if (j.contains("trial_id")) {
      odd_choices = true;
      auto c = j.get<OddChoice>();
      records.push_back(odd_choice_records({c}).front());
    } else {
      records.push_back({j.at("item_id").get<std::string>(), j.at("rater_id").get<std::string>(),
                         j.at("label").get<std::string>(), j.value("group", std::string())});
    }
  }
  std::vector<std::string> categories;
  if (!ctx.flags.categories.empty()) {
    categories = split(ctx.flags.categories, ',');
  } else if (odd_choices) {
    categories = odd_choice_categories();
  }

  std::optional<std::map<std::string, std::string>> gold;
  if (!ctx.flags.gold.empty()) {
    const std::string text = read_file(ctx.flags.gold);
    if (text.find("scene-forge-trials") != std::string::npos) {
      gold = odd_gold_labels(parse_trials(text).trials);
    } else {
      gold = json::parse(text).get<std::map<std::string, std::string>>();
    }
  }
  const auto report = agreement_report(records, gold ? &*gold : nullptr, categories);
  ctx.emit("iaa", fmt::format("seed {}  ratings {}\n", ctx.seed_text(), records.size()) + format_agreement_table(report),
           to_json(report));
  return ctx.finish();
}

int cmd_stats(Context& ctx) {
  if (ctx.flags.judgments.empty()) throw std::invalid_argument("stats needs --judgments");
  std::vector<PreferenceJudgment> judgments;
  std::size_t n = 0;
  for (const auto& j : read_jsonl(ctx.flags.judgments)) {
    ++n;
    auto p = j.get<PreferenceJudgment>();
    auto problems = check_judgment(p);
    if (!problems.empty()) {
      ctx.fail(fmt::format("judgment {} ({}): {}", n, p.item_id, join(problems, "; ")));
      continue;
    }
    judgments.push_back(std::move(p));
  }
  std::map<std::string, std::string> groups;
  if (!ctx.flags.manifest.empty()) {
    for (const auto& s : Manifest::load(ctx.flags.manifest).sessions) groups[s.annotator_id] = s.group;
  }
  const auto report = preference_report(judgments, groups);
  ctx.emit("stats", fmt::format("seed {}  judgments {}\n", ctx.seed_text(), judgments.size()) +
                        format_preference_tables(report),
           to_json(report));
  return ctx.finish();
}

volatile std::sig_atomic_t g_stop_requested = 0;

extern "C" void request_stop(int) { g_stop_requested = 1; }

int cmd_serve(Context& ctx) {
  if (ctx.flags.manifest.empty()) throw std::invalid_argument("serve needs --manifest");
  AnnotationService service(Manifest::load(ctx.flags.manifest), ctx.flags.log_dir);
  for (const auto& w : service.replay_warnings()) ctx.err << "warning: " << w << "\n";
  AnnotationServer::Options options;
  options.host = ctx.flags.host;
  options.port = ctx.flags.port;
  options.static_dir = ctx.flags.static_dir;
  AnnotationServer server(service, options);
  g_stop_requested = 0;
  std::signal(SIGINT, request_stop);
  std::signal(SIGTERM, request_stop);
  const int port = server.start();
  ctx.out << fmt::format("seed {}  serving {} session(s) on http://{}:{}\n", service.manifest().seed,
                         service.session_count(), ctx.flags.host, port)
          << std::flush;
  while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  service.snapshot();
  return ctx.finish();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"scene-forge: scene representations for word usages, and their evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", f.config_path, "Key/value config file");
  app.add_option("--seed", f.seed, "Seed for every sampling step");
  app.add_option("--provider", f.provider, "Chat provider")->check(CLI::IsMember({"live", "mock"}));
  app.add_option("--mock-fixture", f.mock_fixture, "Canned completions for the mock provider");
  app.add_option("--embedding-provider", f.embedding_provider, "Embedding provider")
      ->check(CLI::IsMember({"auto", "hashbag", "http"}));
  app.add_option("--cache-dir", f.cache_dir, "Completion cache directory");
  app.add_flag("--no-cache", f.no_cache, "Bypass the completion cache");
  app.add_option("--max-in-flight", f.max_in_flight, "Concurrent provider calls");
  app.add_option("--format", f.format, "Report format")->check(CLI::IsMember({"table", "json"}));
  app.add_option("--out", f.out, "Output file or directory");

  auto input_opts = [&](CLI::App* sub) {
    sub->add_option("--input", f.input, "Usage instances")->required();
    sub->add_option("--input-format", f.input_format, "corpus, plain_tsv or dwug_like")
        ->check(CLI::IsMember({"corpus", "plain_tsv", "dwug_like"}));
  };
  std::vector<std::string> condition_names{"all"};
  for (ReprCondition c : kAllConditions) condition_names.emplace_back(to_string(c));

  auto* generate = app.add_subcommand("generate", "Generate scene representations");
  input_opts(generate);
  auto* atomic = app.add_subcommand("atomic", "Generate baseline commonsense profiles");
  input_opts(atomic);
  auto* embed = app.add_subcommand("embed", "Embed representation-condition texts");
  input_opts(embed);
  embed->add_option("--scenes", f.scenes, "Directory of generated scenes");
  embed->add_option("--condition", f.condition, "Representation condition")->check(CLI::IsMember(condition_names));
  auto* odd = app.add_subcommand("odd-eval", "Odd-scene-out evaluation over representation conditions");
  odd->add_option("--corpus", f.corpus, "Scene-typed corpus TSV")->required();
  odd->add_option("--trials", f.trials, "Trials file (sampled from --seed when absent)");
  odd->add_option("--per-keyword", f.per_keyword, "Trials per keyword when sampling");
  odd->add_option("--scenes", f.scenes, "Directory of generated scenes (generated when absent)");
  odd->add_option("--condition", f.condition, "Representation condition")->check(CLI::IsMember(condition_names));
  odd->add_flag("--include-trials", f.include_trials, "Per-trial predictions in JSON output");
  auto* iaa = app.add_subcommand("iaa", "Human accuracy and agreement from a ratings log");
  iaa->add_option("--ratings", f.ratings, "JSONL ratings or odd-scene-out choices")->required();
  iaa->add_option("--gold", f.gold, "Trials file or JSON object of gold labels");
  iaa->add_option("--categories", f.categories, "Comma-separated category list");
  auto* stats = app.add_subcommand("stats", "Preference report from a judgment log");
  stats->add_option("--judgments", f.judgments, "judgments.jsonl")->required();
  stats->add_option("--manifest", f.manifest, "Study manifest (annotator groups)");
  auto* sample = app.add_subcommand("sample-trials", "Sample odd-scene-out trials");
  sample->add_option("--corpus", f.corpus, "Scene-typed corpus TSV")->required();
  sample->add_option("--per-keyword", f.per_keyword, "Trials per keyword");
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--manifest", f.manifest, "Study manifest")->required();
  serve->add_option("--log-dir", f.log_dir, "Directory for the append-only logs");
  serve->add_option("--host", f.host, "Bind address");
  serve->add_option("--port", f.port, "Port (0 picks a free one)");
  serve->add_option("--static", f.static_dir, "Directory of UI assets served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : kUsageError;
  }

  Context ctx{RunConfig{}, f, out, err, {}, {}};
  try {
    if (!f.config_path.empty()) ctx.cfg.apply(load_config_file(f.config_path));
    ctx.cfg.apply(flag_layer(f));
    ctx.cfg.apply(config_from_env());
    ctx.cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*generate) return cmd_generate(ctx);
    if (*atomic) return cmd_atomic(ctx);
    if (*embed) return cmd_embed(ctx);
    if (*odd) return cmd_odd_eval(ctx);
    if (*iaa) return cmd_iaa(ctx);
    if (*stats) return cmd_stats(ctx);
    if (*sample) return cmd_sample_trials(ctx);
    if (*serve) return cmd_serve(ctx);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    ctx.fail(e.what());
    return ctx.finish();
  }
  return kUsageError;
}

}  // namespace scene_forge::cli
