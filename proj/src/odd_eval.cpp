#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "scene_forge/evaluation.hpp"

namespace scene_forge {

using nlohmann::json;

std::vector<double> mean_pairwise_similarity(std::span<const EmbeddingVector> vectors) {
  const std::size_t n = vectors.size();
  if (n < 2) throw std::invalid_argument("need at least two vectors");
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sim[i][j] = sim[j][i] = cosine(vectors[i], vectors[j]);
  }
  std::vector<double> mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) s += sim[i][j];
    }
    mean[i] = s / static_cast<double>(n - 1);
  }
  return mean;
}

std::size_t predict_odd(std::span<const EmbeddingVector> vectors) {
  if (vectors.size() != 5) {
    throw std::invalid_argument(fmt::format("odd-scene-out needs 5 candidates, got {}", vectors.size()));
  }
  const auto mean = mean_pairwise_similarity(vectors);
  std::size_t best = 0;
  for (std::size_t i = 1; i < mean.size(); ++i) {
    if (mean[i] < mean[best]) best = i;
  }
  return best;
}

MissingScenes::MissingScenes(std::vector<std::string> ids)
    : std::runtime_error(fmt::format("no scene for {} instance(s): {}", ids.size(), join(ids, ", "))),
      instance_ids(std::move(ids)) {}

OddEvalResult run_odd_eval(const std::vector<OddOneOutTrial>& trials, ReprCondition condition,
                           const ProfileStore& profiles, EmbeddingProvider& provider,
                           const OddEvalOptions& options) {
  // Distinct candidates in first-seen order.
  std::vector<const UsageInstance*> unique;
  std::map<std::string, std::size_t> slot;
  for (const auto& t : trials) {
    if (t.candidates.size() != 5) throw std::invalid_argument("trial " + t.trial_id + " does not have 5 candidates");
    for (const auto& c : t.candidates) {
      if (slot.emplace(c.instance_id, unique.size()).second) unique.push_back(&c);
    }
  }

  if (condition != ReprCondition::text) {
    std::set<std::string> missing;
    for (const auto* u : unique) {
      if (!profiles.count(u->instance_id)) missing.insert(u->instance_id);
    }
    if (!missing.empty()) throw MissingScenes({missing.begin(), missing.end()});
  }

  std::vector<std::string> texts;
  texts.reserve(unique.size());
  for (const auto* u : unique) {
    auto it = profiles.find(u->instance_id);
    texts.push_back(build_condition_text(condition, *u, it == profiles.end() ? nullptr : &it->second));
  }

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t chunks = (texts.size() + batch - 1) / batch;
  std::vector<EmbeddingVector> vectors(texts.size());
  parallel_for(chunks, std::max<std::size_t>(1, options.max_in_flight), [&](std::size_t c) {
    const std::size_t begin = c * batch, end = std::min(texts.size(), begin + batch);
    auto out = provider.embed_batch(std::span<const std::string>(texts).subspan(begin, end - begin));
    if (out.size() != end - begin) throw std::runtime_error("embedding provider returned the wrong count");
    for (std::size_t i = begin; i < end; ++i) {
      auto& v = out[i - begin];
      if (v.dim() != provider.dim() || std::abs(v.norm() - 1.0) > 1e-6) {
        throw std::runtime_error("provider " + provider.id() + " returned a malformed vector");
      }
      vectors[i] = std::move(v);
    }
  });

  OddEvalResult result;
  result.condition = condition;
  for (const auto& t : trials) {
    std::vector<EmbeddingVector> five;
    for (const auto& c : t.candidates) five.push_back(vectors[slot.at(c.instance_id)]);
    TrialPrediction p;
    p.trial_id = t.trial_id;
    p.keyword = t.keyword;
    p.gold_index = t.gold_index;
    p.mean_similarity = mean_pairwise_similarity(five);
    p.predicted = predict_odd(five);
    p.correct = p.predicted == p.gold_index;
    if (p.correct) ++result.correct;
    result.trials.push_back(std::move(p));
  }
  result.accuracy =
      trials.empty() ? 0.0 : static_cast<double>(result.correct) / static_cast<double>(trials.size());
  return result;
}

namespace {

constexpr ReprCondition kTableOrder[] = {ReprCondition::text,          ReprCondition::text_scene,
                                         ReprCondition::text_event,    ReprCondition::text_property,
                                         ReprCondition::text_emotion,  ReprCondition::scene_only};

std::pair<std::string_view, std::string_view> table_labels(ReprCondition c) {
  switch (c) {
    case ReprCondition::text: return {"Text only", "-"};
    case ReprCondition::text_scene: return {"Text + Scene", "All (Event+Prop+Emo)"};
    case ReprCondition::text_event: return {"Text + Scene", "Event only"};
    case ReprCondition::text_property: return {"Text + Scene", "Property only"};
    case ReprCondition::text_emotion: return {"Text + Scene", "Emotion only"};
    case ReprCondition::scene_only: return {"Scene only", "All (Event+Prop+Emo)"};
  }
  return {"", ""};
}

}  // namespace

json to_json(const OddEvalReport& report, bool include_trials) {
  json results = json::array();
  for (const auto& r : report.results) {
    json row{{"condition", to_string(r.condition)},
             {"label", display_name(r.condition)},
             {"accuracy", r.accuracy},
             {"correct", r.correct},
             {"total", r.trials.size()}};
    if (include_trials) {
      json trials = json::array();
      for (const auto& t : r.trials) {
        trials.push_back({{"trial_id", t.trial_id},
                          {"keyword", t.keyword},
                          {"gold_index", t.gold_index},
                          {"predicted", t.predicted},
                          {"correct", t.correct},
                          {"mean_similarity", t.mean_similarity}});
      }
      row["trials"] = std::move(trials);
    }
    results.push_back(std::move(row));
  }
  return json{{"seed", report.seed}, {"embedding_provider", report.embedding_provider}, {"results", results}};
}

std::string format_odd_table(const OddEvalReport& report) {
  std::vector<std::vector<std::string>> rows{{"Input", "Scene feature", "Acc.", "Correct"}};
  for (ReprCondition c : kTableOrder) {
    for (const auto& r : report.results) {
      if (r.condition != c) continue;
      auto [input, feature] = table_labels(c);
      rows.push_back({std::string(input), std::string(feature), fmt::format("{:.3f}", r.accuracy),
                      fmt::format("{}/{}", r.correct, r.trials.size())});
    }
  }
  return fmt::format("seed {}  embeddings {}\n", report.seed, report.embedding_provider) + render_table(rows);
}

}  // namespace scene_forge
