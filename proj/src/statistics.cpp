#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "scene_forge/evaluation.hpp"

namespace scene_forge {

using nlohmann::json;

// ---- ratings matrix ---------------------------------------------------------------------

RatingsMatrix RatingsMatrix::from_records(const std::vector<RatingRecord>& records,
                                          std::vector<std::string> categories) {
  RatingsMatrix m;
  std::map<std::string, std::size_t> item_index, rater_index;
  for (const auto& r : records) {
    if (item_index.emplace(r.item_id, m.items.size()).second) m.items.push_back(r.item_id);
    if (rater_index.emplace(r.rater_id, m.raters.size()).second) m.raters.push_back(r.rater_id);
  }
  if (categories.empty()) {
    std::set<std::string> seen;
    for (const auto& r : records) seen.insert(r.label);
    categories.assign(seen.begin(), seen.end());
  }
  const std::set<std::string> allowed(categories.begin(), categories.end());
  if (allowed.size() != categories.size()) throw std::invalid_argument("duplicate category names");
  m.categories = std::move(categories);

  m.cells.assign(m.items.size(), std::vector<std::optional<std::string>>(m.raters.size()));
  for (const auto& r : records) {
    if (!allowed.count(r.label)) {
      throw std::invalid_argument(fmt::format("label '{}' on item '{}' is not a known category", r.label, r.item_id));
    }
    auto& cell = m.cells[item_index.at(r.item_id)][rater_index.at(r.rater_id)];
    if (cell) {
      throw std::invalid_argument(
          fmt::format("rater '{}' rated item '{}' more than once", r.rater_id, r.item_id));
    }
    cell = r.label;
  }
  return m;
}

void RatingsMatrix::validate() const {
  if (categories.size() < 2) throw std::invalid_argument("a ratings matrix needs at least two categories");
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (std::none_of(cells[i].begin(), cells[i].end(), [](const auto& c) { return c.has_value(); })) {
      throw std::invalid_argument("item '" + items[i] + "' has no rating");
    }
  }
}

namespace {

/// Per-item category counts for items with at least two ratings.
std::vector<std::vector<std::size_t>> multi_rated_counts(const RatingsMatrix& m) {
  std::map<std::string, std::size_t> cat;
  for (std::size_t q = 0; q < m.categories.size(); ++q) cat[m.categories[q]] = q;
  std::vector<std::vector<std::size_t>> out;
  for (const auto& row : m.cells) {
    std::vector<std::size_t> counts(m.categories.size(), 0);
    std::size_t n = 0;
    for (const auto& c : row) {
      if (c) {
        ++counts[cat.at(*c)];
        ++n;
      }
    }
    if (n >= 2) out.push_back(std::move(counts));
  }
  if (out.empty()) throw std::invalid_argument("no item has two or more ratings");
  return out;
}

}  // namespace

double gwet_ac1(const RatingsMatrix& m) {
  m.validate();
  const auto counts = multi_rated_counts(m);
  const double q = static_cast<double>(m.categories.size());
  double pa = 0.0;
  std::vector<double> pi(m.categories.size(), 0.0);
  for (const auto& row : counts) {
    const double r = static_cast<double>(std::accumulate(row.begin(), row.end(), std::size_t{0}));
    double agree = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double c = static_cast<double>(row[k]);
      agree += c * (c - 1.0);
      pi[k] += c / r;
    }
    pa += agree / (r * (r - 1.0));
  }
  const double n = static_cast<double>(counts.size());
  pa /= n;
  double pe = 0.0;
  for (double p : pi) {
    p /= n;
    pe += p * (1.0 - p);
  }
  pe /= (q - 1.0);
  return (pa - pe) / (1.0 - pe);
}

double full_agreement_ratio(const RatingsMatrix& m) {
  const auto counts = multi_rated_counts(m);
  std::size_t unanimous = 0;
  for (const auto& row : counts) {
    if (std::count_if(row.begin(), row.end(), [](std::size_t c) { return c > 0; }) == 1) ++unanimous;
  }
  return static_cast<double>(unanimous) / static_cast<double>(counts.size());
}

double human_accuracy(const RatingsMatrix& m, const std::map<std::string, std::string>& gold) {
  std::size_t cells = 0, correct = 0;
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    auto g = gold.find(m.items[i]);
    if (g == gold.end()) throw std::invalid_argument("no gold label for item '" + m.items[i] + "'");
    for (const auto& c : m.cells[i]) {
      if (!c) continue;
      ++cells;
      if (*c == g->second) ++correct;
    }
  }
  if (cells == 0) throw std::invalid_argument("no ratings to score");
  return static_cast<double>(correct) / static_cast<double>(cells);
}

AgreementReport agreement_report(const std::vector<RatingRecord>& records,
                                 const std::map<std::string, std::string>* gold,
                                 const std::vector<std::string>& categories) {
  std::vector<std::string> cats = categories;
  if (cats.empty()) {
    std::set<std::string> seen;
    for (const auto& r : records) seen.insert(r.label);
    if (gold) {
      for (const auto& [item, label] : *gold) seen.insert(label);
    }
    cats.assign(seen.begin(), seen.end());
  }
  std::map<std::string, std::vector<RatingRecord>> by_group;
  for (const auto& r : records) by_group[r.group.empty() ? "all" : r.group].push_back(r);

  AgreementReport report;
  std::vector<double> acc, full, ac1;
  for (const auto& [group, recs] : by_group) {
    GroupAgreement g;
    g.group = group;
    auto m = RatingsMatrix::from_records(recs, cats);
    g.items = m.items.size();
    g.raters = m.raters.size();
    g.ratings = recs.size();
    if (gold) {
      g.human_accuracy = human_accuracy(m, *gold);
      acc.push_back(*g.human_accuracy);
    }
    const bool multi = std::any_of(m.cells.begin(), m.cells.end(), [](const auto& row) {
      return std::count_if(row.begin(), row.end(), [](const auto& c) { return c.has_value(); }) >= 2;
    });
    if (multi) {
      g.full_agreement = full_agreement_ratio(m);
      full.push_back(*g.full_agreement);
      if (m.categories.size() >= 2) {
        g.ac1 = gwet_ac1(m);
        ac1.push_back(*g.ac1);
      }
    }
    report.groups.push_back(std::move(g));
  }
  auto mean = [](const std::vector<double>& v) -> std::optional<double> {
    if (v.empty()) return std::nullopt;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  report.mean_accuracy = mean(acc);
  report.mean_full_agreement = mean(full);
  report.mean_ac1 = mean(ac1);
  return report;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string pct(const std::optional<double>& v) { return v ? fmt::format("{:.2f}%", 100.0 * *v) : "-"; }
std::string dec(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "-"; }

}  // namespace

json to_json(const AgreementReport& report) {
  json groups = json::array();
  for (const auto& g : report.groups) {
    groups.push_back({{"group", g.group},
                      {"items", g.items},
                      {"raters", g.raters},
                      {"ratings", g.ratings},
                      {"human_accuracy", opt(g.human_accuracy)},
                      {"full_agreement", opt(g.full_agreement)},
                      {"gwet_ac1", opt(g.ac1)}});
  }
  return json{{"groups", groups},
              {"mean", {{"human_accuracy", opt(report.mean_accuracy)},
                        {"full_agreement", opt(report.mean_full_agreement)},
                        {"gwet_ac1", opt(report.mean_ac1)}}}};
}

std::string format_agreement_table(const AgreementReport& report) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Metric"};
  for (const auto& g : report.groups) header.push_back(g.group);
  header.push_back("Mean");
  rows.push_back(header);
  std::vector<std::string> acc{"Human Accuracy"}, full{"Full Agreement"}, ac1{"Gwet's AC1"};
  for (const auto& g : report.groups) {
    acc.push_back(pct(g.human_accuracy));
    full.push_back(pct(g.full_agreement));
    ac1.push_back(dec(g.ac1));
  }
  acc.push_back(pct(report.mean_accuracy));
  full.push_back(pct(report.mean_full_agreement));
  ac1.push_back(dec(report.mean_ac1));
  if (report.mean_accuracy) rows.push_back(acc);
  rows.push_back(full);
  rows.push_back(ac1);
  return render_table(rows);
}

// ---- binomial ---------------------------------------------------------------------------

double binomial_test_one_sided(std::uint64_t k, std::uint64_t n, double p0) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw std::invalid_argument("p0 must lie in [0, 1]");
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p0 == 0.0) return 0.0;
  if (p0 == 1.0) return 1.0;

  if (p0 == 0.5 && n <= 62) {
    // Integer binomial coefficients and a power-of-two scale keep this exact.
    std::uint64_t c = 1, tail = 0;  // c = C(n, i), walking i from 0 up
    for (std::uint64_t i = 0; i <= n; ++i) {
      if (i >= k) tail += c;
      c = c * (n - i) / (i + 1);
    }
    return std::ldexp(static_cast<double>(tail), -static_cast<int>(n));
  }

  const double lp = std::log(p0), lq = std::log1p(-p0);
  const double nn = static_cast<double>(n);
  auto log_term = [&](std::uint64_t i) {
    const double x = static_cast<double>(i);
    return std::lgamma(nn + 1) - std::lgamma(x + 1) - std::lgamma(nn - x + 1) + x * lp + (nn - x) * lq;
  };
  // Scale by the modal term so every tail is summed in the same order from
  // i = n downwards, which keeps the result monotone in k.
  const auto mode = std::min<std::uint64_t>(n, static_cast<std::uint64_t>(std::floor((nn + 1) * p0)));
  const double ref = log_term(mode);
  double sum = 0.0;
  for (std::uint64_t i = n + 1; i-- > k;) sum += std::exp(log_term(i) - ref);
  return std::min(1.0, sum * std::exp(ref));
}

// ---- Mann-Whitney U -----------------------------------------------------------------------

namespace {

/// Null distribution of U for samples of sizes a and b (no ties), as
/// probabilities indexed by u in [0, a*b].
std::vector<double> u_distribution(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  // p[j] holds the distribution for sizes (j, current column).
  std::vector<std::vector<double>> p(a + 1, std::vector<double>{1.0});
  for (std::size_t col = 1; col <= b; ++col) {
    std::vector<std::vector<double>> next(a + 1);
    next[0] = {1.0};
    for (std::size_t j = 1; j <= a; ++j) {
      next[j].assign(j * col + 1, 0.0);
      const double wx = static_cast<double>(j) / static_cast<double>(j + col);
      const double wy = 1.0 - wx;
      for (std::size_t u = 0; u < next[j].size(); ++u) {
        double v = 0.0;
        if (u >= col && u - col < next[j - 1].size()) v += wx * next[j - 1][u - col];
        if (u < p[j].size()) v += wy * p[j][u];
        next[j][u] = v;
      }
    }
    p = std::move(next);
  }
  return p[a];
}

double normal_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> x, std::span<const double> y, MwuMode mode) {
  if (x.empty() || y.empty()) throw std::invalid_argument("Mann-Whitney U needs two non-empty samples");
  const std::size_t nx = x.size(), ny = y.size(), n = nx + ny;

  std::vector<std::pair<double, bool>> all;  // value, from x
  all.reserve(n);
  for (double v : x) all.emplace_back(v, true);
  for (double v : y) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum_x = 0.0, tie_term = 0.0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second) rank_sum_x += midrank;
    }
    if (t > 1) {
      ties = true;
      tie_term += t * t * t - t;
    }
    i = j;
  }

  MannWhitneyResult r;
  const double fx = static_cast<double>(nx), fy = static_cast<double>(ny), fn = static_cast<double>(n);
  r.u_x = rank_sum_x - fx * (fx + 1.0) / 2.0;
  r.u_y = fx * fy - r.u_x;

  if (mode == MwuMode::exact && !ties && std::min(nx, ny) <= 8) {
    const auto dist = u_distribution(nx, ny);
    const auto u = static_cast<std::size_t>(std::llround(r.u_x));
    double ge = 0.0, le = 0.0;
    for (std::size_t v = 0; v < dist.size(); ++v) {
      if (v >= u) ge += dist[v];
      if (v <= u) le += dist[v];
    }
    r.p_greater = std::min(1.0, ge);
    r.p_less = std::min(1.0, le);
    r.p_two_sided = std::min(1.0, 2.0 * std::min(ge, le));
    r.exact = true;
    return r;
  }

  const double mu = fx * fy / 2.0;
  const double var = fx * fy / 12.0 * ((fn + 1.0) - tie_term / (fn * (fn - 1.0)));
  if (!(var > 0.0)) return r;  // every value tied: no evidence either way
  const double sd = std::sqrt(var);
  r.p_greater = std::min(1.0, normal_upper((r.u_x - mu - 0.5) / sd));
  r.p_less = std::min(1.0, normal_upper((mu - r.u_x - 0.5) / sd));
  const double z = std::max(0.0, std::abs(r.u_x - mu) - 0.5) / sd;
  r.p_two_sided = std::min(1.0, 2.0 * normal_upper(z));
  return r;
}

}  // namespace scene_forge
