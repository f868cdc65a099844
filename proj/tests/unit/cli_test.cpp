#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <unistd.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "scene_forge/annotation_service.hpp"
#include "scene_forge/cli.hpp"
#include "scene_forge/config.hpp"
#include "scene_forge/util.hpp"
#include "support/oracles.hpp"

using namespace scene_forge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SCENE_FORGE_DATA_DIR;

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "scene-forge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  static int counter = 0;
  auto dir = fs::temp_directory_path() / fmt::format("sf_cli_{}_{}_{}", name, ::getpid(), counter++);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string corpus(const char* name) { return (kData / "corpora" / name).string(); }

}  // namespace

TEST_CASE("config text parsing") {
  auto layer = parse_config_text(
      "# comment\n"
      "seed = 42\n"
      "provider = \"mock\"   \n"
      "[embedding]\n"
      "model = 'all-mpnet-base-v2'\n"
      "batch-size = 8  # trailing\n");
  CHECK(layer.at("seed") == "42");
  CHECK(layer.at("provider") == "mock");
  CHECK(layer.at("embedding_model") == "all-mpnet-base-v2");
  CHECK(layer.at("embedding_batch_size") == "8");

  RunConfig cfg;
  cfg.apply(layer);
  CHECK(cfg.seed == 42u);
  CHECK(cfg.embedding_batch_size == 8);
  CHECK_NOTHROW(cfg.validate());

  auto throws_with = [](std::string_view text, std::string_view needle) {
    try {
      parse_config_text(text);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
  };
  CHECK(throws_with("seed = 1\nnonsense\n", "line 2"));
  CHECK(throws_with("[open\n", "line 1"));
  CHECK(throws_with("k = \"unterminated\n", "unterminated"));

  RunConfig bad;
  CHECK_THROWS_AS(bad.apply({{"sed", "1"}}), std::invalid_argument);
  CHECK_THROWS_AS(bad.apply({{"seed", "-3"}}), std::invalid_argument);
  CHECK_THROWS_AS(bad.apply({{"temperature", "hot"}}), std::invalid_argument);
  bad.apply({{"provider", "remote"}});
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig{}.require_seed("odd-eval"), std::invalid_argument);
}

TEST_CASE("config layers: file, then flags, then environment") {
  std::map<std::string, std::string> env{{"SCENE_FORGE_API_KEY", "sk-test"}, {"SCENE_FORGE_SEED", "9"}};
  auto layer = config_from_env([&](const char* name) -> const char* {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(layer.size() == 2);
  CHECK(layer.at("api_key") == "sk-test");

  auto dir = fresh_dir("layers");
  atomic_write_file(dir / "run.toml", "seed = 1\nformat = \"json\"\n");
  // The flag overrides the file.
  auto r = run_cli({"iaa", "--config", (dir / "run.toml").string(), "--seed", "5", "--ratings",
                    (kData / "fixtures" / "iaa_4item.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["seed"] == 5);

  // The environment overrides the flag.
  ::setenv("SCENE_FORGE_FORMAT", "table", 1);
  r = run_cli({"iaa", "--config", (dir / "run.toml").string(), "--seed", "5", "--ratings",
               (kData / "fixtures" / "iaa_4item.jsonl").string()});
  ::unsetenv("SCENE_FORGE_FORMAT");
  CHECK(r.code == 0);
  CHECK(r.out.starts_with("seed 5"));
}

TEST_CASE("iaa on the 4-item matrix prints AC1 0.3333") {
  auto r = run_cli({"iaa", "--ratings", (kData / "fixtures" / "iaa_4item.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("Gwet's AC1") != std::string::npos);
  CHECK(r.out.find("0.3333") != std::string::npos);
  CHECK(r.out.find("50.00%") != std::string::npos);  // full agreement

  r = run_cli({"iaa", "--format", "json", "--ratings", (kData / "fixtures" / "iaa_4item.jsonl").string()});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["command"] == "iaa");
  CHECK(j["seed"].is_null());
}

TEST_CASE("odd-eval with the mock provider on the separable corpus") {
  auto dir = fresh_dir("odd");
  const std::vector<std::string> args{"odd-eval",    "--condition", "all",       "--provider",
                                      "mock",        "--seed",      "2024",      "--corpus",
                                      corpus("separable_26x4x5.tsv"), "--cache-dir", (dir / "cache").string()};
  auto first = run_cli(args);
  INFO(first.err);
  REQUIRE(first.code == 0);
  CHECK(first.out.starts_with("seed 2024  embeddings mock-hashbag-256"));
  std::size_t ones = 0;
  for (std::size_t p = first.out.find("1.000"); p != std::string::npos; p = first.out.find("1.000", p + 1)) ++ones;
  CHECK(ones == 6);
  CHECK(first.out.find("104/104") != std::string::npos);

  // A second run (now served from the cache) is byte-identical.
  auto second = run_cli(args);
  CHECK(second.code == 0);
  CHECK(second.out == first.out);

  // Sampling through sample-trials gives the same trials.
  auto trials = dir / "trials.jsonl";
  auto s = run_cli({"sample-trials", "--seed", "2024", "--corpus", corpus("separable_26x4x5.tsv"), "--out", trials.string()});
  CHECK(s.code == 0);
  auto from_file = run_cli({"odd-eval", "--condition", "all", "--provider", "mock", "--trials", trials.string(),
                            "--corpus", corpus("separable_26x4x5.tsv"), "--cache-dir", (dir / "cache").string()});
  CHECK(from_file.code == 0);
  CHECK(from_file.out == first.out);

  auto mismatch = run_cli({"odd-eval", "--seed", "7", "--trials", trials.string(), "--corpus",
                           corpus("separable_26x4x5.tsv"), "--no-cache"});
  CHECK(mismatch.code == 2);
}

TEST_CASE("sampling commands require a seed") {
  auto r = run_cli({"sample-trials", "--corpus", corpus("separable_26x4x5.tsv")});
  CHECK(r.code == 2);
  CHECK(r.err.find("--seed") != std::string::npos);
  r = run_cli({"odd-eval", "--corpus", corpus("separable_26x4x5.tsv"), "--condition", "text"});
  CHECK(r.code == 2);

  r = run_cli({"sample-trials", "--seed", "3", "--per-keyword", "1", "--corpus", corpus("separable_26x4x5.tsv")});
  CHECK(r.code == 0);
  auto file = parse_trials(r.out);
  CHECK(file.seed == 3);
  CHECK(file.trials.size() == 26);
}

TEST_CASE("generate, embed and odd-eval over stored scenes") {
  auto dir = fresh_dir("pipeline");
  auto g = run_cli({"generate", "--provider", "mock", "--no-cache", "--input", corpus("table3_fixture.tsv"), "--out",
                    (dir / "scenes").string()});
  INFO(g.err);
  REQUIRE(g.code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "scenes")) files += e.path().extension() == ".json";
  CHECK(files == 15);

  auto e = run_cli({"embed", "--provider", "mock", "--input", corpus("table3_fixture.tsv"), "--scenes",
                    (dir / "scenes").string(), "--condition", "text+emotion", "--out", (dir / "vec").string()});
  CHECK(e.code == 0);
  auto stored = read_vector_file(dir / "vec" / "text+emotion" / "raccoon-a.vec");
  CHECK(stored.provider_id == "mock-hashbag-256");
  CHECK(stored.values.size() == 256);
  double sq = 0;
  for (float v : stored.values) sq += static_cast<double>(v) * v;
  CHECK(std::abs(sq - 1.0) < 1e-5);

  auto o = run_cli({"odd-eval", "--provider", "mock", "--seed", "1", "--per-keyword", "1", "--corpus",
                    corpus("table3_fixture.tsv"), "--scenes", (dir / "scenes").string(), "--format", "json"});
  INFO(o.err);
  CHECK(o.code == 0);
  auto j = json::parse(o.out);
  CHECK(j["report"]["results"].size() == 6);
  CHECK(j["report"]["results"][0]["total"] == 3);

  // Removing one scene makes the scene conditions fail while text still runs.
  fs::remove(dir / "scenes" / "raccoon-a.json");
  o = run_cli({"odd-eval", "--provider", "mock", "--seed", "1", "--per-keyword", "1", "--corpus",
               corpus("table3_fixture.tsv"), "--scenes", (dir / "scenes").string()});
  CHECK(o.code == 1);
  CHECK(o.err.find("raccoon-a") != std::string::npos);
  CHECK(o.out.find("Text only") != std::string::npos);
}

TEST_CASE("generation failures are listed and exit nonzero") {
  auto dir = fresh_dir("fail");
  atomic_write_file(dir / "mock.json",
                    R"({"rules":[{"match":"Raccoons","responses":["this is not a scene"]}]})");
  auto a = run_cli({"atomic", "--provider", "mock", "--no-cache", "--input", corpus("table3_fixture.tsv"), "--out",
                    (dir / "atomic").string()});
  CHECK(a.code == 0);
  CHECK(fs::exists(dir / "atomic" / "fire-a.json"));

  auto g = run_cli({"generate", "--provider", "mock", "--no-cache", "--mock-fixture", (dir / "mock.json").string(),
                    "--input", corpus("table3_fixture.tsv"), "--out", (dir / "scenes").string()});
  CHECK(g.code == 1);
  CHECK(g.err.find("raccoon-") != std::string::npos);
  CHECK(g.out.find("generated 14/15") != std::string::npos);
}

TEST_CASE("stats over a judgment log") {
  auto dir = fresh_dir("stats");
  std::string log;
  for (const auto& j : testing::thirty_judgments()) log += json(j).dump() + "\n";
  atomic_write_file(dir / "judgments.jsonl", log);
  auto r = run_cli({"stats", "--judgments", (dir / "judgments.jsonl").string()});
  INFO(r.err);
  CHECK(r.code == 0);
  CHECK(r.out.find("80.0%") != std::string::npos);  // engaged events scene preference 8/10
  CHECK(r.out.find("4.50 ± 0.71") != std::string::npos);

  json broken = json(testing::thirty_judgments()[0]);
  broken["rating"] = 4;
  atomic_write_file(dir / "bad.jsonl", log + broken.dump() + "\n");
  r = run_cli({"stats", "--judgments", (dir / "bad.jsonl").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("judgment 31") != std::string::npos);
}

TEST_CASE("iaa over odd-scene-out choices with gold from the trials file") {
  auto dir = fresh_dir("iaa_odd");
  auto corpus_data = load_corpus(kData / "corpora" / "separable_26x4x5.tsv", true);
  TrialFile trials{5, sample_trial_set(corpus_data, 1, 5)};
  save_trials(dir / "trials.jsonl", trials);
  std::string log;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < trials.trials.size(); ++i) {
    const auto& t = trials.trials[i];
    for (int a = 0; a < 2; ++a) {
      const int choice = a == 0 || i % 4 == 0 ? static_cast<int>(t.gold_index) : static_cast<int>((t.gold_index + 2) % 5);
      correct += choice == static_cast<int>(t.gold_index);
      log += json(OddChoice{t.trial_id, fmt::format("s{}", a), fmt::format("a{}", a), "crowd", choice}).dump() + "\n";
    }
  }
  atomic_write_file(dir / "choices.jsonl", log);
  auto r = run_cli({"iaa", "--format", "json", "--ratings", (dir / "choices.jsonl").string(), "--gold",
                    (dir / "trials.jsonl").string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  const double expected = static_cast<double>(correct) / static_cast<double>(2 * trials.trials.size());
  CHECK(j["report"]["groups"][0]["human_accuracy"].get<double>() == doctest::Approx(expected));
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"odd-eval", "--corpus", corpus("separable_26x4x5.tsv"), "--condition", "text+vibes"}).code == 2);
  CHECK(run_cli({"iaa", "--ratings", "/nonexistent/file.jsonl"}).code != 0);
  CHECK(run_cli({"--help"}).code == 0);
}
