#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "doctest.h"
#include "scene_forge/evaluation.hpp"
#include "scene_forge/generation.hpp"
#include "support/oracles.hpp"

using namespace scene_forge;
using namespace scene_forge::testing;

namespace {

const std::filesystem::path kData = SCENE_FORGE_DATA_DIR;

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector::normalized(std::move(v)); }

class ConstantProvider : public EmbeddingProvider {
 public:
  EmbeddingVector embed(std::string_view) override { return vec({1.0, 0.0, 0.0}); }
  std::size_t dim() const override { return 3; }
  std::string id() const override { return "constant"; }
};

}  // namespace

// ---- predict_odd ---------------------------------------------------------------------

TEST_CASE("predict_odd") {
  SUBCASE("orthogonal outlier") {
    std::vector<EmbeddingVector> v{vec({1, 0}), vec({1, 0}), vec({1, 0}), vec({0, 1}), vec({1, 0})};
    CHECK(predict_odd(v) == 3);
  }
  SUBCASE("ties go to the lowest index") {
    std::vector<EmbeddingVector> v(5, vec({0.3, 0.4}));
    CHECK(predict_odd(v) == 0);
  }
  SUBCASE("hand-computed 2-d fixture") {
    std::vector<EmbeddingVector> v{vec({1, 0}), vec({0.8, 0.6}), vec({0.6, 0.8}), vec({0.9, 0.436}),
                                   vec({-0.6, 0.8})};
    CHECK(predict_odd(v) == 4);
    // Oracle: all ten pairwise cosines written out.
    auto c = [](double ax, double ay, double bx, double by) {
      return (ax * bx + ay * by) / (std::hypot(ax, ay) * std::hypot(bx, by));
    };
    const double pts[5][2] = {{1, 0}, {0.8, 0.6}, {0.6, 0.8}, {0.9, 0.436}, {-0.6, 0.8}};
    auto mean = mean_pairwise_similarity(v);
    for (int i = 0; i < 5; ++i) {
      double s = 0;
      for (int j = 0; j < 5; ++j) {
        if (j != i) s += c(pts[i][0], pts[i][1], pts[j][0], pts[j][1]);
      }
      CHECK(mean[i] == doctest::Approx(s / 4).epsilon(1e-12));
    }
    CHECK(mean[4] < 0.25);
  }
  SUBCASE("errors") {
    std::vector<EmbeddingVector> four(4, vec({1, 0}));
    CHECK_THROWS_AS(predict_odd(four), std::invalid_argument);
    std::vector<EmbeddingVector> mixed{vec({1, 0}), vec({1, 0}), vec({1, 0}), vec({1, 0}), vec({1, 0, 0})};
    CHECK_THROWS_AS(predict_odd(mixed), DimensionMismatch);
  }
  SUBCASE("invariant under positive rescaling before normalization") {
    SeededRng rng(8);
    auto draw = [&] { return static_cast<double>(rng.below(20001)) / 10000.0 - 1.0; };
    for (int t = 0; t < 300; ++t) {
      std::vector<std::vector<double>> raw(5, std::vector<double>(6));
      for (auto& r : raw) {
        for (auto& x : r) x = draw();
      }
      std::vector<EmbeddingVector> a, b;
      const double scale = 0.001 + static_cast<double>(rng.below(100000)) / 10.0;
      for (auto& r : raw) {
        a.push_back(vec(r));
        std::vector<double> s = r;
        for (auto& x : s) x *= scale;
        b.push_back(vec(s));
      }
      CHECK(predict_odd(a) == predict_odd(b));
    }
  }
}

// ---- run_odd_eval ----------------------------------------------------------------------

TEST_CASE("run_odd_eval") {
  auto corpus = load_corpus(kData / "corpora/separable_26x4x5.tsv", true);
  auto trials = sample_trial_set(corpus, 4, 2024);
  REQUIRE(trials.size() == 104);
  HashBagEmbeddingProvider mock;

  SUBCASE("constructed separability, text condition") {
    auto r = run_odd_eval(trials, ReprCondition::text, {}, mock);
    CHECK(r.accuracy == 1.0);
    CHECK(r.correct == 104);
    CHECK(r.trials.size() == 104);
  }
  SUBCASE("identical embeddings score the share of gold index 0") {
    ConstantProvider flat;
    auto r = run_odd_eval(trials, ReprCondition::text, {}, flat);
    const auto zero = std::count_if(trials.begin(), trials.end(), [](const auto& t) { return t.gold_index == 0; });
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(zero) / 104.0));
    for (const auto& p : r.trials) CHECK(p.predicted == 0);
  }
  SUBCASE("missing scenes are listed") {
    ProfileStore partial;
    partial[trials[0].candidates[0].instance_id] = ExpressionProfile{};
    try {
      run_odd_eval(trials, ReprCondition::text_scene, partial, mock);
      FAIL("expected MissingScenes");
    } catch (const MissingScenes& e) {
      std::set<std::string> ids;
      for (const auto& t : trials) {
        for (const auto& c : t.candidates) ids.insert(c.instance_id);
      }
      CHECK(e.instance_ids.size() == ids.size() - 1);
      CHECK(std::is_sorted(e.instance_ids.begin(), e.instance_ids.end()));
    }
  }
  SUBCASE("results do not depend on scheduling") {
    OddEvalOptions serial{1, 1}, wide{8, 7};
    auto a = run_odd_eval(trials, ReprCondition::text, {}, mock, serial);
    auto b = run_odd_eval(trials, ReprCondition::text, {}, mock, wide);
    CHECK(to_json(OddEvalReport{1, "m", {a}}) == to_json(OddEvalReport{1, "m", {b}}));
  }
  SUBCASE("every condition with offline scenes") {
    ReplayChatProvider chat;
    GenerationOptions gen;
    gen.clock = [] { return std::string("1970-01-01T00:00:00Z"); };
    ProfileStore store;
    for (const auto& u : corpus.instances()) {
      store[u.instance_id] =
          generate_scene(chat, GenerationConfig{}, u, default_scene_examples(), gen).scene.expression_profile;
    }
    OddEvalReport report{2024, mock.id(), {}};
    for (ReprCondition c : kAllConditions) {
      report.results.push_back(run_odd_eval(trials, c, store, mock));
      CHECK(report.results.back().accuracy == 1.0);
    }
    const std::string table = format_odd_table(report);
    CHECK(table.find("Text only") != std::string::npos);
    CHECK(table.find("Scene only") != std::string::npos);
    CHECK(std::count(table.begin(), table.end(), '\n') == 8);
    CHECK(table.find("1.000") != std::string::npos);
    auto j = to_json(report);
    CHECK(j["results"].size() == 6);
    CHECK(j["results"][5]["condition"] == "scene");
  }
}

// ---- agreement -----------------------------------------------------------------------

TEST_CASE("gwet_ac1 and full agreement on the 4-item matrix") {
  auto m = RatingsMatrix::from_records(records_from_counts({{3, 0}, {2, 1}, {0, 3}, {1, 2}}, {"A", "B"}));
  CHECK(std::abs(gwet_ac1(m) - 1.0 / 3.0) <= 1e-9);
  CHECK(full_agreement_ratio(m) == 0.5);

  auto perfect = RatingsMatrix::from_records(records_from_counts({{3, 0}, {0, 3}, {3, 0}}, {"A", "B"}));
  CHECK(gwet_ac1(perfect) == 1.0);
  CHECK(full_agreement_ratio(perfect) == 1.0);

  auto single = RatingsMatrix::from_records({{"i1", "r1", "A", ""}, {"i2", "r1", "B", ""}});
  CHECK_THROWS_AS(full_agreement_ratio(single), std::invalid_argument);
  CHECK_THROWS_AS(gwet_ac1(single), std::invalid_argument);
  CHECK_THROWS_AS(RatingsMatrix::from_records({{"i1", "r1", "A", ""}, {"i1", "r1", "B", ""}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(RatingsMatrix::from_records({{"i1", "r1", "C", ""}}, {"A", "B"}), std::invalid_argument);
  auto one_cat = RatingsMatrix::from_records({{"i1", "r1", "A", ""}, {"i1", "r2", "A", ""}});
  CHECK_THROWS_AS(gwet_ac1(one_cat), std::invalid_argument);
}

TEST_CASE("gwet_ac1 with missing ratings uses only multi-rated items") {
  auto recs = records_from_counts({{3, 0}, {2, 1}, {0, 3}, {1, 2}}, {"A", "B"});
  recs.push_back({"lonely", "r0", "A", ""});
  auto m = RatingsMatrix::from_records(recs);
  CHECK(std::abs(gwet_ac1(m) - 1.0 / 3.0) <= 1e-9);
  CHECK(full_agreement_ratio(m) == 0.5);
}

TEST_CASE("gwet_ac1 is invariant under relabeling") {
  SeededRng rng(31);
  const std::vector<std::string> names = {"c0", "c1", "c2", "c3"};
  for (int t = 0; t < 200; ++t) {
    const std::size_t q = 2 + rng.below(3);
    std::vector<std::string> cats(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(q));
    std::vector<std::string> perm = cats;
    rng.shuffle(perm);
    std::map<std::string, std::string> relabel;
    for (std::size_t i = 0; i < q; ++i) relabel[cats[i]] = perm[i];

    std::vector<RatingRecord> a, b;
    const std::size_t items = 2 + rng.below(10), raters = 2 + rng.below(4);
    for (std::size_t i = 0; i < items; ++i) {
      for (std::size_t r = 0; r < raters; ++r) {
        if (r >= 2 && rng.below(4) == 0) continue;  // some missing cells
        const std::string label = cats[rng.below(q)];
        a.push_back({fmt::format("i{}", i), fmt::format("r{}", r), label, ""});
        b.push_back({fmt::format("i{}", i), fmt::format("r{}", r), relabel[label], ""});
      }
    }
    auto ma = RatingsMatrix::from_records(a, cats);
    auto mb = RatingsMatrix::from_records(b, cats);
    CHECK(gwet_ac1(ma) == doctest::Approx(gwet_ac1(mb)).epsilon(1e-12));
    CHECK(gwet_ac1(ma) <= 1.0 + 1e-12);
  }
}

TEST_CASE("human accuracy") {
  std::map<std::string, std::string> gold;
  std::vector<RatingRecord> recs;
  int correct = 0;
  for (int i = 0; i < 52; ++i) {
    const std::string item = fmt::format("t{}", i);
    gold[item] = std::to_string(i % 5);
    for (int r = 0; r < 3; ++r) {
      const bool right = correct < 137 && (i * 3 + r) % 8 != 7;
      if (right) ++correct;
      recs.push_back({item, fmt::format("g1-{}", r), right ? gold[item] : std::to_string((i + 1) % 5), "Group 1"});
    }
  }
  REQUIRE(correct == 137);
  auto m = RatingsMatrix::from_records(recs, {"0", "1", "2", "3", "4"});
  CHECK(m.items.size() * m.raters.size() == 156);
  CHECK(human_accuracy(m, gold) == 137.0 / 156.0);

  auto all_right = RatingsMatrix::from_records({{"a", "r1", "x", ""}, {"a", "r2", "x", ""}});
  CHECK(human_accuracy(all_right, {{"a", "x"}}) == 1.0);
  auto half = RatingsMatrix::from_records(
      {{"a", "r1", "x", ""}, {"a", "r2", "y", ""}, {"b", "r1", "y", ""}, {"b", "r2", "x", ""}});
  CHECK(human_accuracy(half, {{"a", "x"}, {"b", "x"}}) == 0.5);
  CHECK_THROWS_AS(human_accuracy(half, {{"a", "x"}}), std::invalid_argument);

  auto report = agreement_report(recs, &gold, {"0", "1", "2", "3", "4"});
  REQUIRE(report.groups.size() == 1);
  CHECK(report.groups[0].group == "Group 1");
  CHECK(report.groups[0].ratings == 156);
  CHECK(*report.groups[0].human_accuracy == 137.0 / 156.0);
  const auto table = format_agreement_table(report);
  CHECK(table.find("87.82%") != std::string::npos);
  CHECK(table.find("Gwet's AC1") != std::string::npos);
}

TEST_CASE("agreement report by group") {
  auto g1 = records_from_counts({{3, 0}, {2, 1}, {0, 3}, {1, 2}}, {"A", "B"});
  auto g2 = records_from_counts({{3, 0}, {0, 3}}, {"A", "B"});
  for (auto& r : g1) r.group = "Group 1";
  for (auto& r : g2) {
    r.group = "Group 2";
    r.item_id += "-g2";
  }
  g1.insert(g1.end(), g2.begin(), g2.end());
  auto report = agreement_report(g1);
  REQUIRE(report.groups.size() == 2);
  CHECK(*report.groups[0].ac1 == doctest::Approx(1.0 / 3.0));
  CHECK(*report.groups[1].ac1 == 1.0);
  CHECK(*report.mean_ac1 == doctest::Approx(2.0 / 3.0));
  CHECK(*report.mean_full_agreement == doctest::Approx(0.75));
  CHECK_FALSE(report.mean_accuracy.has_value());
  CHECK(format_agreement_table(report).find("0.3333") != std::string::npos);
}

// ---- binomial ---------------------------------------------------------------------------

TEST_CASE("binomial_test_one_sided") {
  CHECK(binomial_test_one_sided(1, 1) == 0.5);
  CHECK(binomial_test_one_sided(4, 4) == 0.0625);
  CHECK(binomial_test_one_sided(0, 10) == 1.0);
  CHECK(binomial_test_one_sided(11, 10) == 0.0);
  CHECK(binomial_test_one_sided(7, 10) == 176.0 / 1024.0);

  const double p = binomial_test_one_sided(329, 360);
  CHECK(p < 1e-3);
  CHECK(p > 0.0);
  const long double oracle = binomial_tail_oracle(329, 360, 0.5L);
  CHECK(p == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-9));

  for (int n : {20, 75, 200}) {
    for (double p0 : {0.2, 0.5, 0.73}) {
      for (int k = 0; k <= n; k += 3) {
        CHECK(binomial_test_one_sided(k, n, p0) ==
              doctest::Approx(static_cast<double>(binomial_tail_oracle(k, n, p0))).epsilon(1e-9));
      }
    }
  }
  CHECK(binomial_test_one_sided(9000, 10000) < 1e-300);
  CHECK_THROWS_AS(binomial_test_one_sided(1, 2, 1.5), std::invalid_argument);
}

TEST_CASE("binomial tail is non-increasing in k") {
  for (int n : {1, 2, 5, 17, 60, 61, 62, 63, 100, 360, 1000, 10000}) {
    for (double p0 : {0.5, 0.1, 0.9}) {
      double prev = 2.0;
      const int step = n > 1000 ? 7 : 1;  // keep the largest case quick
      for (int k = 0; k <= n + 1; k += step) {
        const double v = binomial_test_one_sided(k, n, p0);
        CHECK(v <= prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
      }
    }
  }
}

// ---- Mann-Whitney ------------------------------------------------------------------------

TEST_CASE("mann_whitney_u examples") {
  std::vector<double> x{3, 4}, y{1, 2};
  auto r = mann_whitney_u(x, y);
  CHECK(r.exact);
  CHECK(r.u_x == 4.0);
  CHECK(r.u_y == 0.0);
  CHECK(r.p_greater == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(r.p_two_sided == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  auto swapped = mann_whitney_u(y, x);
  CHECK(swapped.u_x == 2 * 2 - r.u_x);
  CHECK(swapped.p_less == doctest::Approx(r.p_greater).epsilon(1e-12));

  std::vector<double> a{1, 2, 2, 5}, b{2, 5, 1, 2};
  CHECK(mann_whitney_u(a, b).p_two_sided == 1.0);
  std::vector<double> c{1, 4, 9}, d{9, 1, 4};
  CHECK(mann_whitney_u(c, d, MwuMode::exact).p_two_sided == 1.0);

  CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{}, y), std::invalid_argument);
}

TEST_CASE("mann_whitney_u normal approximation") {
  std::vector<double> x, y;
  for (int i = 1; i <= 10; ++i) x.push_back(i);
  for (int i = 11; i <= 20; ++i) y.push_back(i);
  auto r = mann_whitney_u(x, y, MwuMode::normal_approx);
  CHECK_FALSE(r.exact);
  CHECK(r.u_x == 0.0);
  // mu = 50, var = 10*10*21/12 = 175, z = (50 - 0.5) / sqrt(175)
  const double z = 49.5 / std::sqrt(175.0);
  CHECK(r.p_two_sided == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(r.p_less == doctest::Approx(0.5 * std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));

  // Ties: x = {1,1,2}, y = {2,3}. Midranks 1.5,1.5,3.5 | 3.5,5; U_x = 6.5 - 6 = 0.5.
  // Tie term: two groups of 2 -> 2 * 6 = 12; var = 6/12 * (6 - 12/20) = 2.7.
  auto t = mann_whitney_u(std::vector<double>{1, 1, 2}, std::vector<double>{2, 3});
  CHECK_FALSE(t.exact);
  CHECK(t.u_x == 0.5);
  const double zt = (std::abs(0.5 - 3.0) - 0.5) / std::sqrt(2.7);
  CHECK(t.p_two_sided == doctest::Approx(std::erfc(zt / std::sqrt(2.0))).epsilon(1e-12));

  auto flat = mann_whitney_u(std::vector<double>{2, 2}, std::vector<double>{2, 2, 2});
  CHECK(flat.p_two_sided == 1.0);
  CHECK(flat.u_x == 3.0);
}

TEST_CASE("mann_whitney_u exact mode matches brute force for sizes up to 5") {
  SeededRng rng(555);
  int cases = 0;
  for (; cases < 600; ++cases) {
    const std::size_t nx = 1 + rng.below(5), ny = 1 + rng.below(5);
    std::vector<double> values;
    for (std::size_t i = 0; i < nx + ny; ++i) values.push_back(static_cast<double>(i) * 1.5 - 3.0);
    rng.shuffle(values);
    std::vector<double> x(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(nx));
    std::vector<double> y(values.begin() + static_cast<std::ptrdiff_t>(nx), values.end());
    auto r = mann_whitney_u(x, y, MwuMode::exact);
    auto oracle = brute_force_mwu(x, y);
    CHECK(r.exact);
    CHECK(r.u_x == oracle.u);
    CHECK(r.p_greater == doctest::Approx(oracle.p_greater).epsilon(1e-12));
    CHECK(r.p_less == doctest::Approx(oracle.p_less).epsilon(1e-12));
    CHECK(r.p_two_sided == doctest::Approx(oracle.p_two).epsilon(1e-12));
  }
  CHECK(cases >= 500);

  // U from midranks equals pairwise counting with ties as one half.
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(1 + rng.below(6)), y(1 + rng.below(6));
    for (auto& v : x) v = static_cast<double>(rng.below(4));
    for (auto& v : y) v = static_cast<double>(rng.below(4));
    CHECK(mann_whitney_u(x, y).u_x == brute_force_mwu(x, y).u);
  }
}

TEST_CASE("exact mode handles one large sample") {
  std::vector<double> x{100, 101}, y;
  for (int i = 0; i < 300; ++i) y.push_back(i * 0.1);
  auto r = mann_whitney_u(x, y);
  CHECK(r.exact);
  CHECK(r.u_x == 600.0);
  // Both x values above all 300 y: probability 1 / C(302, 2).
  CHECK(r.p_greater == doctest::Approx(1.0 / (302.0 * 301.0 / 2.0)).epsilon(1e-9));
}

// ---- preference report ---------------------------------------------------------------------

TEST_CASE("judgment rules") {
  auto ok = judgment(Dimension::engaged_events, 0, Schema::scene, 5, {});
  CHECK(check_judgment(ok).empty());
  auto j = ok;
  j.rating = 4;
  CHECK(check_judgment(j).size() == 1);
  j.reasons = {Reason::not_applicable};
  CHECK(check_judgment(j).size() == 1);
  j.dimension = Dimension::evoked_emotions;
  CHECK(check_judgment(j).empty());
  j.rating = 0;
  CHECK_FALSE(check_judgment(j).empty());
  j = ok;
  j.elicitation_text = "  ";
  CHECK_FALSE(check_judgment(j).empty());
  j = ok;
  j.reasons = {Reason::verbose};
  CHECK_FALSE(check_judgment(j).empty());

  nlohmann::json wire = thirty_judgments()[9];
  CHECK(wire["reasons"] == nlohmann::json::array({"lacks_info", "other"}));
  CHECK(wire["other_text"] == "too short");
  for (const char* key : {"item_id", "dimension", "annotator_id", "preferred", "rating", "reasons", "other_text",
                          "elicitation_text", "blinding"}) {
    CHECK(wire.contains(key));
  }
  CHECK(wire.size() == 9);
  CHECK(wire.get<PreferenceJudgment>() == thirty_judgments()[9]);
}

TEST_CASE("preference report on the 30-judgment log") {
  const auto js = thirty_judgments();
  REQUIRE(js.size() == 30);
  for (const auto& j : js) REQUIRE(check_judgment(j).empty());
  auto report = preference_report(js, {{"a1", "Group 1"}, {"a2", "Group 1"}});

  CHECK(report.total == 30);
  CHECK(report.scene_preferred == 21);
  CHECK(report.scene_rate == 0.7);
  CHECK(report.binomial_p == doctest::Approx(static_cast<double>(binomial_tail_oracle(21, 30, 0.5L))).epsilon(1e-12));
  REQUIRE(report.dimensions.size() == 3);

  const auto& ee = report.dimensions[0];
  CHECK(ee.dimension == Dimension::engaged_events);
  CHECK(ee.total == 10);
  CHECK(ee.scene_rate == 0.8);
  CHECK(ee.binomial_p == 56.0 / 1024.0);
  CHECK(ee.scene_rating->mean == 4.5);
  CHECK(ee.scene_rating->sd == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(ee.atomic_rating->mean == 3.5);
  CHECK(ee.atomic_rating->sd == 0.5);
  CHECK(ee.failure_reasons.at(Reason::lacks_info) == std::pair<std::size_t, double>{2, 100.0});
  CHECK(ee.failure_reasons.at(Reason::other) == std::pair<std::size_t, double>{1, 50.0});
  CHECK(ee.failure_reasons.at(Reason::verbose).first == 0);
  CHECK_FALSE(ee.failure_reasons.count(Reason::not_applicable));
  double row = 0;
  for (const auto& [r, cp] : ee.failure_reasons) row += cp.second;
  CHECK(row == 150.0);  // multi-select row above 100%
  REQUIRE(ee.rating_test.has_value());

  const auto& gp = report.dimensions[1];
  CHECK(gp.scene_preferred == 7);
  CHECK(gp.scene_rate == 0.7);
  CHECK(gp.binomial_p == 176.0 / 1024.0);
  CHECK(gp.scene_rating->mean == 5.0);
  CHECK(gp.scene_rating->sd == 0.0);
  CHECK(gp.atomic_rating->mean == doctest::Approx(11.0 / 3.0).epsilon(1e-15));
  CHECK(gp.atomic_rating->sd == doctest::Approx(std::sqrt(14.0) / 3.0).epsilon(1e-15));
  for (Reason r : {Reason::over_interpretation, Reason::lacks_info, Reason::false_info, Reason::irrelevant}) {
    CHECK(gp.failure_reasons.at(r).first == 1);
    CHECK(gp.failure_reasons.at(r).second == doctest::Approx(100.0 / 3.0).epsilon(1e-15));
  }

  const auto& em = report.dimensions[2];
  CHECK(em.scene_rate == 0.6);
  CHECK(em.binomial_p == 386.0 / 1024.0);
  CHECK(em.scene_rating->mean == doctest::Approx(26.0 / 6.0).epsilon(1e-15));
  CHECK(em.atomic_rating->mean == 3.75);
  CHECK(em.atomic_rating->sd == doctest::Approx(std::sqrt(0.6875)).epsilon(1e-15));
  CHECK(em.failure_reasons.at(Reason::not_applicable) == std::pair<std::size_t, double>{2, 50.0});
  CHECK(em.failure_reasons.at(Reason::lacks_info).second == 25.0);
  CHECK(em.failure_reasons.at(Reason::verbose).second == 25.0);

  REQUIRE(ee.agreement.size() == 1);
  CHECK(ee.agreement[0].group == "Group 1");
  CHECK(ee.agreement[0].items == 5);

  const auto text = format_preference_tables(report);
  CHECK(text.find("Engaged Events") != std::string::npos);
  CHECK(text.find("80.0%") != std::string::npos);
  CHECK(text.find("4.50 ± 0.71") != std::string::npos);
  CHECK(text.find("population SD") != std::string::npos);
  auto j = to_json(report);
  CHECK(j["overall"]["scene_rate"] == 0.7);
  CHECK(j["dimensions"][0]["failure_reasons"]["lacks_info"]["percent"] == 100.0);
}

TEST_CASE("preference report edge cases") {
  CHECK(preference_report({}).dimensions.empty());
  CHECK(format_preference_tables(preference_report({})) == "no judgments\n");
  std::vector<PreferenceJudgment> all5;
  for (int k = 0; k < 6; ++k) all5.push_back(judgment(Dimension::evoked_emotions, k, Schema::scene, 5, {}));
  auto r = preference_report(all5);
  REQUIRE(r.dimensions.size() == 1);
  CHECK(r.dimensions[0].scene_rate == 1.0);
  CHECK(r.dimensions[0].scene_rating->mean == 5.0);
  CHECK(r.dimensions[0].scene_rating->sd == 0.0);
  CHECK_FALSE(r.dimensions[0].atomic_rating.has_value());
  CHECK(r.dimensions[0].failure_reasons.empty());
  CHECK(r.dimensions[0].binomial_p == 1.0 / 64.0);
}
