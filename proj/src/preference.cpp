#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "scene_forge/evaluation.hpp"

namespace scene_forge {

using nlohmann::json;

std::string_view to_string(Schema s) { return s == Schema::scene ? "scene" : "atomic"; }

Schema schema_from_string(std::string_view s) {
  if (s == "scene") return Schema::scene;
  if (s == "atomic") return Schema::atomic;
  throw std::invalid_argument("unknown schema '" + std::string(s) + "'");
}

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::lacks_info: return "lacks_info";
    case Reason::over_interpretation: return "over_interpretation";
    case Reason::false_info: return "false_info";
    case Reason::irrelevant: return "irrelevant";
    case Reason::verbose: return "verbose";
    case Reason::hard_to_understand: return "hard_to_understand";
    case Reason::not_applicable: return "not_applicable";
    case Reason::other: return "other";
  }
  return "other";
}

Reason reason_from_string(std::string_view s) {
  for (Reason r : kAllReasons) {
    if (to_string(r) == s) return r;
  }
  throw std::invalid_argument("unknown reason '" + std::string(s) + "'");
}

std::vector<std::string> check_judgment(const PreferenceJudgment& j) {
  std::vector<std::string> errors;
  if (j.item_id.empty()) errors.push_back("item_id is empty");
  if (j.annotator_id.empty()) errors.push_back("annotator_id is empty");
  if (trim_view(j.elicitation_text).empty()) {
    errors.push_back("elicitation_text is required before the comparison");
  }
  if (j.rating < 1 || j.rating > 5) errors.push_back(fmt::format("rating {} is outside 1..5", j.rating));
  if (j.rating < 5 && j.reasons.empty()) errors.push_back("a rating below 5 needs at least one reason");
  if (j.rating == 5 && !j.reasons.empty()) errors.push_back("a rating of 5 takes no reasons");
  const bool has_na = std::find(j.reasons.begin(), j.reasons.end(), Reason::not_applicable) != j.reasons.end();
  if (has_na && j.dimension != Dimension::evoked_emotions) {
    errors.push_back("not_applicable applies only to evoked_emotions");
  }
  const bool other = std::find(j.reasons.begin(), j.reasons.end(), Reason::other) != j.reasons.end();
  if (j.other_text && !other) errors.push_back("other_text needs the 'other' reason");
  return errors;
}

void to_json(json& j, const PreferenceJudgment& p) {
  json reasons = json::array();
  for (Reason r : p.reasons) reasons.push_back(to_string(r));
  j = json{{"item_id", p.item_id},
           {"dimension", to_string(p.dimension)},
           {"annotator_id", p.annotator_id},
           {"preferred", to_string(p.preferred)},
           {"rating", p.rating},
           {"reasons", reasons},
           {"other_text", p.other_text ? json(*p.other_text) : json(nullptr)},
           {"elicitation_text", p.elicitation_text},
           {"blinding", to_string(p.blinding)}};
}

void from_json(const json& j, PreferenceJudgment& p) {
  j.at("item_id").get_to(p.item_id);
  p.dimension = dimension_from_string(j.at("dimension").get<std::string>());
  j.at("annotator_id").get_to(p.annotator_id);
  p.preferred = schema_from_string(j.at("preferred").get<std::string>());
  j.at("rating").get_to(p.rating);
  p.reasons.clear();
  for (const auto& r : j.value("reasons", json::array())) p.reasons.push_back(reason_from_string(r.get<std::string>()));
  std::sort(p.reasons.begin(), p.reasons.end());
  p.reasons.erase(std::unique(p.reasons.begin(), p.reasons.end()), p.reasons.end());
  if (j.contains("other_text") && !j["other_text"].is_null()) {
    p.other_text = j["other_text"].get<std::string>();
  } else {
    p.other_text.reset();
  }
  p.elicitation_text = j.value("elicitation_text", "");
  p.blinding = schema_from_string(j.value("blinding", "scene"));
}

namespace {

std::optional<RatingSummary> summarize(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  RatingSummary s;
  s.n = xs.size();
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double sq = 0.0;
  for (double x : xs) sq += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(sq / n);
  return s;
}

}  // namespace

PreferenceReport preference_report(const std::vector<PreferenceJudgment>& judgments,
                                   const std::map<std::string, std::string>& annotator_groups) {
  PreferenceReport report;
  for (Dimension d : kAllDimensions) {
    DimensionPreference dp;
    dp.dimension = d;
    std::vector<double> scene_ratings, atomic_ratings;
    std::vector<RatingRecord> labels;
    for (const auto& j : judgments) {
      if (j.dimension != d) continue;
      ++dp.total;
      if (j.preferred == Schema::scene) {
        ++dp.scene_preferred;
        scene_ratings.push_back(j.rating);
      } else {
        ++dp.atomic_preferred;
        atomic_ratings.push_back(j.rating);
        for (Reason r : j.reasons) ++dp.failure_reasons[r].first;
      }
      auto g = annotator_groups.find(j.annotator_id);
      labels.push_back({j.item_id, j.annotator_id, std::string(to_string(j.preferred)),
                        g == annotator_groups.end() ? std::string() : g->second});
    }
    if (dp.total == 0) continue;

    dp.scene_rate = static_cast<double>(dp.scene_preferred) / static_cast<double>(dp.total);
    dp.binomial_p = binomial_test_one_sided(dp.scene_preferred, dp.total);
    dp.scene_rating = summarize(scene_ratings);
    dp.atomic_rating = summarize(atomic_ratings);
    if (!scene_ratings.empty() && !atomic_ratings.empty()) {
      dp.rating_test = mann_whitney_u(scene_ratings, atomic_ratings);
    }
    if (dp.atomic_preferred > 0) {
      for (Reason r : kAllReasons) {
        if (r == Reason::not_applicable && d != Dimension::evoked_emotions) continue;
        auto& [count, percent] = dp.failure_reasons[r];
        percent = 100.0 * static_cast<double>(count) / static_cast<double>(dp.atomic_preferred);
      }
    }
    dp.agreement = agreement_report(labels, nullptr, {"atomic", "scene"}).groups;

    report.total += dp.total;
    report.scene_preferred += dp.scene_preferred;
    report.dimensions.push_back(std::move(dp));
  }
  if (report.total > 0) {
    report.scene_rate = static_cast<double>(report.scene_preferred) / static_cast<double>(report.total);
    report.binomial_p = binomial_test_one_sided(report.scene_preferred, report.total);
  }
  return report;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const std::optional<RatingSummary>& s) {
  if (!s) return nullptr;
  return json{{"n", s->n}, {"mean", s->mean}, {"sd", s->sd}};
}

std::string_view dimension_title(Dimension d) {
  switch (d) {
    case Dimension::engaged_events: return "Engaged Events";
    case Dimension::generalizable_properties: return "Gen. Properties";
    case Dimension::evoked_emotions: return "Evoked Emotions";
  }
  return "";
}

std::string_view reason_title(Reason r) {
  switch (r) {
    case Reason::lacks_info: return "Lacks info.";
    case Reason::over_interpretation: return "Over-interp.";
    case Reason::false_info: return "False info.";
    case Reason::irrelevant: return "Irrelevant";
    case Reason::verbose: return "Verbose";
    case Reason::hard_to_understand: return "Hard to understand";
    case Reason::not_applicable: return "N/A";
    case Reason::other: return "Other";
  }
  return "";
}

std::string rating_cell(const std::optional<RatingSummary>& s) {
  return s ? fmt::format("{:.2f} ± {:.2f}", s->mean, s->sd) : "-";
}

std::string p_cell(double p) { return p < 1e-3 ? fmt::format("{:.2e}", p) : fmt::format("{:.4f}", p); }

}  // namespace

json to_json(const PreferenceReport& report) {
  json dims = json::array();
  for (const auto& d : report.dimensions) {
    json reasons = json::object();
    for (const auto& [r, cp] : d.failure_reasons) {
      reasons[std::string(to_string(r))] = {{"count", cp.first}, {"percent", cp.second}};
    }
    json test = nullptr;
    if (d.rating_test) {
      test = {{"u_scene", d.rating_test->u_x},
              {"u_atomic", d.rating_test->u_y},
              {"p_two_sided", d.rating_test->p_two_sided},
              {"p_scene_greater", d.rating_test->p_greater},
              {"exact", d.rating_test->exact}};
    }
    json groups = json::array();
    for (const auto& g : d.agreement) {
      groups.push_back({{"group", g.group},
                        {"items", g.items},
                        {"full_agreement", opt(g.full_agreement)},
                        {"gwet_ac1", opt(g.ac1)}});
    }
    dims.push_back({{"dimension", to_string(d.dimension)},
                    {"total", d.total},
                    {"scene_preferred", d.scene_preferred},
                    {"atomic_preferred", d.atomic_preferred},
                    {"scene_rate", d.scene_rate},
                    {"binomial_p", d.binomial_p},
                    {"scene_rating", summary_json(d.scene_rating)},
                    {"atomic_rating", summary_json(d.atomic_rating)},
                    {"rating_test", test},
                    {"failure_reasons", reasons},
                    {"agreement", groups}});
  }
  return json{{"dimensions", dims},
              {"overall",
               {{"total", report.total},
                {"scene_preferred", report.scene_preferred},
                {"scene_rate", report.scene_rate},
                {"binomial_p", report.binomial_p}}},
              {"sd", "population (divisor N)"}};
}

std::string format_preference_tables(const PreferenceReport& report) {
  if (report.dimensions.empty()) return "no judgments\n";
  std::string out;

  std::vector<std::vector<std::string>> pref{
      {"Dimension", "N", "Pref. %", "Scene rating", "ATOMIC rating", "Binomial p", "Mann-Whitney p"}};
  for (const auto& d : report.dimensions) {
    pref.push_back({std::string(dimension_title(d.dimension)), std::to_string(d.total),
                    fmt::format("{:.1f}%", 100.0 * d.scene_rate), rating_cell(d.scene_rating),
                    rating_cell(d.atomic_rating), p_cell(d.binomial_p),
                    d.rating_test ? p_cell(d.rating_test->p_two_sided) : "-"});
  }
  pref.push_back({"Overall", std::to_string(report.total), fmt::format("{:.1f}%", 100.0 * report.scene_rate), "-",
                  "-", p_cell(report.binomial_p), "-"});
  out += render_table(pref);
  out += "Ratings: mean ± population SD (divisor N) of the preferred profile. Mann-Whitney p is two-sided.\n\n";

  std::vector<std::string> header{"Dimension", "% ATOMIC preferred"};
  for (Reason r : kAllReasons) header.emplace_back(reason_title(r));
  std::vector<std::vector<std::string>> fail{header};
  for (const auto& d : report.dimensions) {
    std::vector<std::string> row{std::string(dimension_title(d.dimension)),
                                 fmt::format("{:.1f}%", 100.0 * (1.0 - d.scene_rate))};
    for (Reason r : kAllReasons) {
      auto it = d.failure_reasons.find(r);
      row.push_back(it == d.failure_reasons.end() ? "-" : fmt::format("{:.0f}%", it->second.second));
    }
    fail.push_back(std::move(row));
  }
  out += render_table(fail);
  out += "Reason columns count ATOMIC-preferred cases; reasons are multi-select, so a row can exceed 100%.\n\n";

  std::vector<std::vector<std::string>> agree{{"Dimension", "Group", "Items", "Full Agr.", "Gwet's AC1"}};
  for (const auto& d : report.dimensions) {
    for (const auto& g : d.agreement) {
      agree.push_back({std::string(dimension_title(d.dimension)), g.group, std::to_string(g.items),
                       g.full_agreement ? fmt::format("{:.1f}%", 100.0 * *g.full_agreement) : "-",
                       g.ac1 ? fmt::format("{:.3f}", *g.ac1) : "-"});
    }
  }
  out += render_table(agree);
  return out;
}

}  // namespace scene_forge
