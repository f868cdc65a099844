#include "scene_forge/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace scene_forge {

using nlohmann::json;

namespace {

constexpr std::string_view kCorpusHeader = "keyword\tscene_type\tsentence_id\tsentence";
constexpr std::string_view kTrialFormat = "scene-forge-trials";

bool is_word_byte(unsigned char c) { return std::isalpha(c) || c >= 0x80 || c == '\''; }

/// Finds `stem` at the start of a word and widens the match to the whole
/// word. An exact whole-word match wins over a prefix match.
std::optional<std::pair<std::size_t, std::size_t>> locate_word(std::string_view text, std::string_view stem) {
  if (stem.empty()) return std::nullopt;
  const std::string lower = to_lower_ascii(text);
  const std::string needle = to_lower_ascii(stem);
  std::optional<std::pair<std::size_t, std::size_t>> prefix_hit;
  for (auto pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
    if (pos > 0 && is_word_byte(static_cast<unsigned char>(lower[pos - 1]))) continue;
    std::size_t end = pos + needle.size();
    if (end == lower.size() || !is_word_byte(static_cast<unsigned char>(lower[end]))) return std::pair{pos, end};
    while (end < lower.size() && is_word_byte(static_cast<unsigned char>(lower[end])) && lower[end] != '\'') ++end;
    if (!prefix_hit) prefix_hit = std::pair{pos, end};
  }
  return prefix_hit;
}

CharSpan span_of(std::string_view text, std::pair<std::size_t, std::size_t> bytes) {
  return {utf8_index_of_byte(text, bytes.first), utf8_index_of_byte(text, bytes.second)};
}

void reject_separators(std::string_view field, std::string_view what) {
  if (field.find_first_of("\t\r\n") != std::string_view::npos) {
    throw std::invalid_argument(fmt::format("{} '{}' contains a tab or line break", what, field));
  }
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields = split(line, '\t');
  for (auto& f : fields) {
    if (!f.empty() && f.back() == '\r') f.pop_back();
  }
  return fields;
}

}  // namespace

// ---- corpora ------------------------------------------------------------------------

std::size_t SceneTypedCorpus::size() const {
  std::size_t n = 0;
  for (const auto& [kw, types] : keywords) {
    for (const auto& [type, sentences] : types) n += sentences.size();
  }
  return n;
}

std::vector<UsageInstance> SceneTypedCorpus::instances() const {
  std::vector<UsageInstance> out;
  out.reserve(size());
  for (const auto& [kw, types] : keywords) {
    for (const auto& [type, sentences] : types) out.insert(out.end(), sentences.begin(), sentences.end());
  }
  return out;
}

SceneTypedCorpus parse_corpus(std::string_view text, bool strict, std::vector<std::string>* warnings) {
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };
  SceneTypedCorpus corpus;
  std::set<std::string> seen_ids;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim_view(line).empty()) continue;
    if (line_no == 1 && line == kCorpusHeader) continue;

    auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw CorpusParseError(line_no, fmt::format("line {}: expected 4 tab-separated fields, found {}", line_no,
                                                  fields.size()));
    }
    const std::string keyword = trim(fields[0]);
    const std::string scene_type = trim(fields[1]);
    const std::string sentence_id = trim(fields[2]);
    const std::string sentence = trim(fields[3]);
    if (keyword.empty() || scene_type.empty() || sentence_id.empty() || sentence.empty()) {
      throw CorpusParseError(line_no, fmt::format("line {}: empty field", line_no));
    }
    if (!seen_ids.insert(sentence_id).second) {
      throw CorpusParseError(line_no, fmt::format("line {}: duplicate sentence_id '{}'", line_no, sentence_id));
    }

    UsageInstance u;
    u.instance_id = sentence_id;
    u.context_text = sentence;
    u.keyword_lemma = keyword;
    u.source = UsageSource::coca_scenes;
    u.gold_scene_type = scene_type;
    if (auto hit = locate_word(sentence, keyword)) {
      u.target_expression = sentence.substr(hit->first, hit->second - hit->first);
      u.target_span = span_of(sentence, *hit);
    } else {
      std::string msg =
          fmt::format("line {}: keyword '{}' does not occur in sentence '{}'", line_no, keyword, sentence_id);
      if (strict) throw CorpusParseError(line_no, msg);
      warn(std::move(msg));
      u.target_expression = keyword;
    }
    corpus.keywords[keyword][scene_type].push_back(std::move(u));
  }

  for (const auto& [keyword, types] : corpus.keywords) {
    if (types.size() != kSceneTypesPerKeyword) {
      std::string msg = fmt::format("keyword '{}' has {} scene types, expected {}", keyword, types.size(),
                                    kSceneTypesPerKeyword);
      if (strict) throw CorpusShapeError(keyword, "", msg);
      warn(std::move(msg));
    }
    for (const auto& [type, sentences] : types) {
      if (sentences.size() != kSentencesPerSceneType) {
        std::string msg = fmt::format("keyword '{}' scene type '{}' has {} sentences, expected {}", keyword, type,
                                      sentences.size(), kSentencesPerSceneType);
        if (strict) throw CorpusShapeError(keyword, type, msg);
        warn(std::move(msg));
      }
    }
  }
  return corpus;
}

SceneTypedCorpus load_corpus(const std::filesystem::path& path, bool strict, std::vector<std::string>* warnings) {
  const std::string text = read_file(path);
  try {
    return parse_corpus(text, strict, warnings);
  } catch (const CorpusParseError& e) {
    throw CorpusParseError(e.line, path.string() + ": " + e.what());
  } catch (const CorpusShapeError& e) {
    throw CorpusShapeError(e.keyword, e.scene_type, path.string() + ": " + e.what());
  }
}

std::string format_corpus(const SceneTypedCorpus& corpus) {
  std::string out(kCorpusHeader);
  out += '\n';
  for (const auto& [keyword, types] : corpus.keywords) {
    for (const auto& [type, sentences] : types) {
      for (const auto& u : sentences) {
        for (std::string_view f : {std::string_view(keyword), std::string_view(type),
                                   std::string_view(u.instance_id), std::string_view(u.context_text)}) {
          reject_separators(f, "corpus field");
        }
        out += fmt::format("{}\t{}\t{}\t{}\n", keyword, type, u.instance_id, u.context_text);
      }
    }
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const SceneTypedCorpus& corpus) {
  atomic_write_file(path, format_corpus(corpus));
}

// ---- trials -------------------------------------------------------------------------

std::vector<std::string> check_trial(const OddOneOutTrial& t) {
  std::vector<std::string> errors;
  if (t.candidates.size() != 5) {
    errors.push_back(fmt::format("trial has {} candidates, expected 5", t.candidates.size()));
    return errors;
  }
  if (t.gold_index > 4) errors.push_back("gold_index out of range");
  if (t.base_scene_type == t.odd_scene_type) errors.push_back("base and odd scene types are equal");
  std::set<std::string> ids;
  std::size_t base = 0;
  for (std::size_t i = 0; i < t.candidates.size(); ++i) {
    const auto& c = t.candidates[i];
    ids.insert(c.instance_id);
    if (c.keyword_lemma != t.keyword) errors.push_back("candidate " + c.instance_id + " has another keyword");
    const std::string type = c.gold_scene_type.value_or("");
    if (i == t.gold_index) {
      if (type != t.odd_scene_type) errors.push_back("gold candidate is not of the odd scene type");
    } else if (type == t.base_scene_type) {
      ++base;
    }
  }
  if (base != 4) errors.push_back(fmt::format("{} candidates share the base scene type, expected 4", base));
  if (ids.size() != 5) errors.push_back("candidates are not distinct");
  return errors;
}

OddOneOutTrial sample_trial(const SceneTypedCorpus& corpus, const std::string& keyword,
                            const std::string& base_type, const std::string& odd_type, SeededRng& rng) {
  if (base_type == odd_type) {
    throw std::invalid_argument("base and odd scene types must differ (both '" + base_type + "')");
  }
  auto kw = corpus.keywords.find(keyword);
  if (kw == corpus.keywords.end()) throw InsufficientSentences("unknown keyword '" + keyword + "'");
  auto pool_of = [&](const std::string& type) -> const std::vector<UsageInstance>& {
    static const std::vector<UsageInstance> none;
    auto it = kw->second.find(type);
    return it == kw->second.end() ? none : it->second;
  };
  const auto& base_pool = pool_of(base_type);
  const auto& odd_pool = pool_of(odd_type);
  if (base_pool.size() < 4 || odd_pool.empty()) {
    throw InsufficientSentences(fmt::format(
        "keyword '{}': need at least 4 '{}' and 1 '{}' sentences, have {} and {}", keyword, base_type, odd_type,
        base_pool.size(), odd_pool.size()));
  }

  // Partial Fisher-Yates over the base pool indices.
  std::vector<std::size_t> idx(base_pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < 4; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);

  std::vector<std::size_t> order = {0, 1, 2, 3, 4};  // 4 marks the odd sentence
  const std::size_t odd_pick = rng.below(odd_pool.size());
  rng.shuffle(order);

  OddOneOutTrial trial;
  trial.keyword = keyword;
  trial.base_scene_type = base_type;
  trial.odd_scene_type = odd_type;
  std::string id_material;
  for (std::size_t pos = 0; pos < 5; ++pos) {
    if (order[pos] == 4) {
      trial.gold_index = pos;
      trial.candidates.push_back(odd_pool[odd_pick]);
    } else {
      trial.candidates.push_back(base_pool[idx[order[pos]]]);
    }
    id_material += trial.candidates.back().instance_id + "\n";
  }
  trial.trial_id = fmt::format("{}:{}>{}:{:08x}", keyword, base_type, odd_type, fnv1a64(id_material) & 0xffffffffu);
  return trial;
}

std::vector<OddOneOutTrial> sample_trial_set(const SceneTypedCorpus& corpus, std::size_t trials_per_keyword,
                                             std::uint64_t seed) {
  std::vector<OddOneOutTrial> trials;
  for (const auto& [keyword, types] : corpus.keywords) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [a, sa] : types) {
      for (const auto& [b, sb] : types) {
        if (a != b && sa.size() >= 4 && !sb.empty()) pairs.emplace_back(a, b);
      }
    }
    if (pairs.size() < trials_per_keyword) {
      throw InsufficientSentences(fmt::format("keyword '{}' offers {} scene-type pairs, {} trials requested",
                                              keyword, pairs.size(), trials_per_keyword));
    }
    SeededRng rng(splitmix64(seed ^ fnv1a64(keyword)));
    rng.shuffle(pairs);
    for (std::size_t t = 0; t < trials_per_keyword; ++t) {
      trials.push_back(sample_trial(corpus, keyword, pairs[t].first, pairs[t].second, rng));
    }
  }
  return trials;
}

void to_json(json& j, const OddOneOutTrial& t) {
  j = json{{"trial_id", t.trial_id},           {"keyword", t.keyword},
           {"candidates", t.candidates},       {"gold_index", t.gold_index},
           {"base_scene_type", t.base_scene_type}, {"odd_scene_type", t.odd_scene_type}};
}

void from_json(const json& j, OddOneOutTrial& t) {
  j.at("trial_id").get_to(t.trial_id);
  j.at("keyword").get_to(t.keyword);
  j.at("candidates").get_to(t.candidates);
  j.at("gold_index").get_to(t.gold_index);
  j.at("base_scene_type").get_to(t.base_scene_type);
  j.at("odd_scene_type").get_to(t.odd_scene_type);
}

std::string format_trials(const TrialFile& file) {
  std::string out =
      json{{"format", kTrialFormat}, {"version", 1}, {"seed", file.seed}, {"count", file.trials.size()}}.dump();
  out += '\n';
  for (const auto& t : file.trials) {
    out += json(t).dump();
    out += '\n';
  }
  return out;
}

TrialFile parse_trials(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && trim_view(lines[i]).empty()) ++i;
  if (i == lines.size()) throw std::runtime_error("trial file is empty");
  TrialFile file;
  json header = json::parse(lines[i]);
  if (header.value("format", "") != kTrialFormat) throw std::runtime_error("not a trial file (bad header line)");
  file.seed = header.at("seed").get<std::uint64_t>();
  const auto count = header.at("count").get<std::size_t>();
  for (++i; i < lines.size(); ++i) {
    if (trim_view(lines[i]).empty()) continue;
    try {
      file.trials.push_back(json::parse(lines[i]).get<OddOneOutTrial>());
    } catch (const json::exception& e) {
      throw std::runtime_error(fmt::format("trial file line {}: {}", i + 1, e.what()));
    }
  }
  if (file.trials.size() != count) {
    throw std::runtime_error(fmt::format("trial file declares {} trials but holds {}", count, file.trials.size()));
  }
  return file;
}

void save_trials(const std::filesystem::path& path, const TrialFile& file) {
  atomic_write_file(path, format_trials(file));
}

TrialFile load_trials(const std::filesystem::path& path) { return parse_trials(read_file(path)); }

// ---- ingestion ----------------------------------------------------------------------

UsageFormat usage_format_from_string(std::string_view s) {
  if (iequals(s, "dwug_like") || iequals(s, "dwug")) return UsageFormat::dwug_like;
  if (iequals(s, "plain_tsv") || iequals(s, "tsv")) return UsageFormat::plain_tsv;
  throw std::invalid_argument("unknown usage format '" + std::string(s) + "'");
}

namespace {

std::optional<std::size_t> parse_index(std::string_view s) {
  s = trim_view(s);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Fills target_expression and target_span from code-point offsets, checking
/// them against `expected` when it is non-empty.
std::optional<std::string> apply_offsets(UsageInstance& u, std::size_t begin, std::size_t end,
                                         std::string_view expected) {
  if (begin >= end) return fmt::format("offsets {}:{} are empty or reversed", begin, end);
  auto b = utf8_byte_offset(u.context_text, begin);
  auto e = utf8_byte_offset(u.context_text, end);
  if (!b || !e) return fmt::format("offsets {}:{} fall outside the sentence", begin, end);
  std::string slice = u.context_text.substr(*b, *e - *b);
  if (!expected.empty() && slice != expected) {
    return fmt::format("offsets {}:{} slice to '{}', not '{}'", begin, end, slice, expected);
  }
  u.target_expression = std::move(slice);
  u.target_span = CharSpan{begin, end};
  return std::nullopt;
}

std::optional<std::string> locate_target(UsageInstance& u, std::string_view target) {
  auto pos = ifind(u.context_text, target);
  if (!pos) return fmt::format("'{}' does not occur in the sentence", target);
  std::pair<std::size_t, std::size_t> bytes{*pos, *pos + target.size()};
  u.target_expression = u.context_text.substr(bytes.first, target.size());
  u.target_span = span_of(u.context_text, bytes);
  return std::nullopt;
}

std::string strip_pos_suffix(std::string lemma) {
  auto us = lemma.rfind('_');
  if (us != std::string::npos && us > 0 && lemma.size() - us <= 4) lemma.resize(us);
  return lemma;
}

void ingest_dwug(const std::vector<std::string>& lines, IngestResult& out) {
  std::size_t i = 0;
  while (i < lines.size() && trim_view(lines[i]).empty()) ++i;
  if (i == lines.size()) return;
  std::map<std::string, std::size_t> col;
  const auto header = split_tabs(lines[i]);
  for (std::size_t c = 0; c < header.size(); ++c) col[to_lower_ascii(trim(header[c]))] = c;
  for (const char* required : {"identifier", "lemma", "context", "indexes_target_token"}) {
    if (!col.count(required)) {
      out.errors.push_back({i + 1, fmt::format("header lacks the '{}' column", required)});
      return;
    }
  }
  const auto target_col = col.count("target") ? std::optional(col.at("target")) : std::nullopt;
  for (++i; i < lines.size(); ++i) {
    if (trim_view(lines[i]).empty()) continue;
    const std::size_t line_no = i + 1;
    const auto f = split_tabs(lines[i]);
    if (f.size() != header.size()) {
      out.errors.push_back({line_no, fmt::format("expected {} fields, found {}", header.size(), f.size())});
      continue;
    }
    UsageInstance u;
    u.instance_id = trim(f[col.at("identifier")]);
    u.keyword_lemma = strip_pos_suffix(trim(f[col.at("lemma")]));
    u.context_text = f[col.at("context")];
    u.source = UsageSource::dwug;
    if (u.instance_id.empty() || u.context_text.empty()) {
      out.errors.push_back({line_no, "empty identifier or context"});
      continue;
    }
    const auto offsets = split(f[col.at("indexes_target_token")], ':');
    std::optional<std::size_t> b, e;
    if (offsets.size() == 2) {
      b = parse_index(offsets[0]);
      e = parse_index(offsets[1]);
    }
    if (!b || !e) {
      out.errors.push_back({line_no, "indexes_target_token must look like start:end"});
      continue;
    }
    const std::string expected = target_col ? trim(f[*target_col]) : std::string();
    if (auto err = apply_offsets(u, *b, *e, expected)) {
      out.errors.push_back({line_no, *err});
      continue;
    }
    out.instances.push_back(std::move(u));
  }
}

void ingest_plain(const std::vector<std::string>& lines, IngestResult& out) {
  bool first = true;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim_view(lines[i]).empty()) continue;
    const std::size_t line_no = i + 1;
    const auto f = split_tabs(lines[i]);
    if (first && !f.empty() && iequals(trim(f[0]), "id")) {
      first = false;
      continue;
    }
    first = false;
    if (f.size() != 3 && f.size() != 4 && f.size() != 6) {
      out.errors.push_back({line_no, fmt::format("expected 3, 4 or 6 fields, found {}", f.size())});
      continue;
    }
    UsageInstance u;
    u.instance_id = trim(f[0]);
    u.keyword_lemma = trim(f[1]);
    u.context_text = f[2];
    if (u.instance_id.empty() || u.keyword_lemma.empty() || trim_view(u.context_text).empty()) {
      out.errors.push_back({line_no, "empty id, keyword or sentence"});
      continue;
    }
    const std::string target = f.size() >= 4 ? trim(f[3]) : std::string();
    std::optional<std::string> err;
    if (f.size() == 6 && !(trim_view(f[4]).empty() && trim_view(f[5]).empty())) {
      auto b = parse_index(f[4]);
      auto e = parse_index(f[5]);
      err = (b && e) ? apply_offsets(u, *b, *e, target) : std::optional<std::string>("offsets must be integers");
    } else {
      err = locate_target(u, target.empty() ? std::string_view(u.keyword_lemma) : std::string_view(target));
    }
    if (err) {
      out.errors.push_back({line_no, *err});
      continue;
    }
    out.instances.push_back(std::move(u));
  }
}

}  // namespace

IngestResult parse_usages(std::string_view text, UsageFormat format) {
  IngestResult out;
  auto lines = split_lines(text);
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  if (format == UsageFormat::dwug_like) {
    ingest_dwug(lines, out);
  } else {
    ingest_plain(lines, out);
  }
  std::set<std::string> ids;
  std::vector<UsageInstance> unique;
  for (auto& u : out.instances) {
    if (ids.insert(u.instance_id).second) {
      unique.push_back(std::move(u));
    } else {
      out.errors.push_back({0, "duplicate instance id '" + u.instance_id + "'"});
    }
  }
  out.instances = std::move(unique);
  return out;
}

IngestResult ingest_usages(const std::filesystem::path& path, UsageFormat format) {
  return parse_usages(read_file(path), format);
}

}  // namespace scene_forge
