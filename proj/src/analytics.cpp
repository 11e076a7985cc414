// Copyright 2026 The finecap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "finecap/analytics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "finecap/errors.hpp"
#include "finecap/io.hpp"
#include "finecap/resources.hpp"
#include "finecap/text.hpp"
#include "json.hpp"

namespace finecap {

LexiconTagger::LexiconTagger(std::unordered_map<std::string, PartOfSpeech> lexicon)
    : lexicon_(std::move(lexicon)) {}

LexiconTagger LexiconTagger::parse(std::string_view text) {
  std::unordered_map<std::string, PartOfSpeech> lex;
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find_first_of("\t ");
    if (tab == std::string::npos) {
      throw ParseError("lexicon line " + std::to_string(line_no) + ": expected word and tag");
    }
    const std::string word = to_lower(line.substr(0, tab));
    const std::string tag = trim(line.substr(tab + 1));
    PartOfSpeech pos;
    if (tag == "noun") pos = PartOfSpeech::kNoun;
    else if (tag == "verb") pos = PartOfSpeech::kVerb;
    else if (tag == "adj") pos = PartOfSpeech::kAdjective;
    else throw ParseError("lexicon line " + std::to_string(line_no) + ": unknown tag '" + tag + "'");
    lex.emplace(word, pos);
  }
  return LexiconTagger(std::move(lex));
}

LexiconTagger LexiconTagger::builtin() { return parse(resources::lexicon()); }

LexiconTagger LexiconTagger::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::vector<PartOfSpeech> LexiconTagger::tag(const std::vector<std::string>& tokens) const {
  std::vector<PartOfSpeech> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = lexicon_.find(t);
    out.push_back(it == lexicon_.end() ? PartOfSpeech::kOther : it->second);
  }
  return out;
}

DatasetStats compute_stats(std::span<const std::string> captions, const Tagger& tagger,
                           const WarningSink& warn) {
  if (captions.empty()) throw InvalidArgument("compute_stats: caption list is empty");
  DatasetStats st;
  std::set<std::string> vocab;
  std::size_t words = 0, nouns = 0, verbs = 0, adjs = 0;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto tokens = tokenize(captions[i]);
    std::vector<PartOfSpeech> tags;
    try {
      tags = tagger.tag(tokens);
      if (tags.size() != tokens.size()) throw Error(ErrorCode::kParse, "tag count mismatch");
    } catch (const std::exception& e) {
      ++st.skipped;
      if (warn) warn("caption " + std::to_string(i) + " skipped: " + e.what());
      continue;
    }
    ++st.captions;
    words += tokens.size();
    vocab.insert(tokens.begin(), tokens.end());
    for (auto t : tags) {
      if (t == PartOfSpeech::kNoun) ++nouns;
      else if (t == PartOfSpeech::kVerb) ++verbs;
      else if (t == PartOfSpeech::kAdjective) ++adjs;
    }
  }
  st.vocab_size = vocab.size();
  if (st.captions > 0) {
    const double n = static_cast<double>(st.captions);
    st.avg_words = static_cast<double>(words) / n;
    st.avg_nouns = static_cast<double>(nouns) / n;
    st.avg_verbs = static_cast<double>(verbs) / n;
    st.avg_adjs = static_cast<double>(adjs) / n;
  }
  return st;
}

ManyToManyCount count_many_to_many(std::span<const CaptionMoment> records) {
  std::map<std::string, std::set<std::string>> moments;
  std::map<std::string, std::size_t> records_per_caption;
  for (const auto& r : records) {
    const std::string key = normalize_caption(r.caption);
    moments[key].insert(r.moment_key);
    ++records_per_caption[key];
  }
  ManyToManyCount out;
  for (const auto& [caption, keys] : moments) {
    if (keys.size() < 2) continue;
    ++out.num_classes;
    out.num_instances += records_per_caption[caption];
  }
  return out;
}

namespace {

void require_span(Span s, const char* which) {
  if (!std::isfinite(s.start) || !std::isfinite(s.end) || !(s.start < s.end)) {
    throw InvalidArgument(std::string("t_iou: invalid span ") + which + " (need start < end)");
  }
}

}  // namespace

double t_iou(Span a, Span b) {
  require_span(a, "a");
  require_span(b, "b");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = (a.end - a.start) + (b.end - b.start) - inter;
  return inter / uni;
}

std::string_view to_string(RetrievalTask task) {
  switch (task) {
    case RetrievalTask::kVcmr: return "vcmr";
    case RetrievalTask::kSvmr: return "svmr";
    case RetrievalTask::kVr: return "vr";
  }
  return "?";
}

std::optional<RetrievalTask> parse_retrieval_task(std::string_view s) {
  if (s == "vcmr") return RetrievalTask::kVcmr;
  if (s == "svmr") return RetrievalTask::kSvmr;
  if (s == "vr") return RetrievalTask::kVr;
  return std::nullopt;
}

double recall_at(const PredictionSet& preds, std::span<const GroundTruth> gt, RetrievalTask task,
                 double m, int k, const WarningSink& warn) {
  if (k <= 0) throw InvalidArgument("recall_at: K must be positive");
  if (task != RetrievalTask::kVr && !(m >= 0.0 && m <= 1.0)) {
    throw InvalidArgument("recall_at: tIoU threshold must lie in [0, 1]");
  }
  if (gt.empty()) throw InvalidArgument("recall_at: no ground-truth queries");
  const auto cutoff = static_cast<std::size_t>(k);
  std::size_t hits = 0;
  for (const auto& g : gt) {
    auto it = preds.find(g.query_id);
    if (it == preds.end()) {
      if (warn) warn("query " + g.query_id + " has no predictions; counted as a miss");
      continue;
    }
    bool hit = false;
    std::size_t rank = 0;
    std::set<std::string> seen_videos;
    for (const auto& p : it->second) {
      if (rank >= cutoff) break;
      switch (task) {
        case RetrievalTask::kVcmr:
          ++rank;
          hit = p.video_id == g.video_id && t_iou(p.span, g.span) > m;
          break;
        case RetrievalTask::kSvmr:
          if (p.video_id != g.video_id) continue;
          ++rank;
          hit = t_iou(p.span, g.span) > m;
          break;
        case RetrievalTask::kVr:
          if (!seen_videos.insert(p.video_id).second) continue;
          ++rank;
          hit = p.video_id == g.video_id;
          break;
      }
      if (hit) break;
    }
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gt.size());
}

namespace {

Span span_from(const nlohmann::json& j, const std::string& where) {
  Span s;
  try {
    s.start = j.at("t_s").get<double>();
    s.end = j.at("t_e").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where + ": t_s and t_e must be numbers");
  }
  if (!(s.start < s.end)) throw ParseError(where + ": need t_s < t_e");
  return s;
}

std::string string_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ParseError(where + ": " + key + " must be a string");
  }
  return j.at(key).get<std::string>();
}

nlohmann::json parse_line(const std::string& line, const std::string& where) {
  try {
    auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
}

}  // namespace

PredictionSet load_predictions(const std::filesystem::path& path) {
  PredictionSet out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto j = parse_line(line, where);
    const std::string qid = string_field(j, "query_id", where);
    if (!j.contains("ranked") || !j.at("ranked").is_array()) {
      throw ParseError(where + ": ranked must be an array");
    }
    std::vector<RankedMoment> ranked;
    for (std::size_t i = 0; i < j.at("ranked").size(); ++i) {
      const auto& r = j.at("ranked")[i];
      const std::string rw = where + ": ranked[" + std::to_string(i) + "]";
      RankedMoment rm;
      rm.video_id = string_field(r, "video_id", rw);
      rm.span = span_from(r, rw);
      if (!r.contains("score") || !r.at("score").is_number()) throw ParseError(rw + ": score must be a number");
      rm.score = r.at("score").get<double>();
      if (!ranked.empty() && rm.score > ranked.back().score) {
        throw ParseError(rw + ": scores must be non-increasing");
      }
      ranked.push_back(std::move(rm));
    }
    if (!out.emplace(qid, std::move(ranked)).second) {
      throw ParseError(where + ": duplicate query_id " + qid);
    }
  }
  return out;
}

std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path) {
  std::vector<GroundTruth> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto j = parse_line(line, where);
    out.push_back({string_field(j, "query_id", where), string_field(j, "video_id", where),
                   span_from(j, where)});
  }
  return out;
}

std::vector<RecallRow> recall_table(const PredictionSet& preds, std::span<const GroundTruth> gt,
                                    std::span<const RetrievalTask> tasks,
                                    std::span<const double> thresholds, std::span<const int> ks,
                                    const WarningSink& warn) {
  std::vector<RecallRow> rows;
  bool warned = false;
  // Missing-query warnings are emitted once, not once per grid cell.
  WarningSink once = [&](const std::string& msg) {
    if (!warned && warn) warn(msg);
  };
  for (auto task : tasks) {
    const std::vector<double> ms =
        task == RetrievalTask::kVr ? std::vector<double>{0.0}
                                   : std::vector<double>(thresholds.begin(), thresholds.end());
    for (double m : ms) {
      for (int k : ks) {
        std::vector<std::string> pending;
        WarningSink collect = [&](const std::string& msg) { pending.push_back(msg); };
        rows.push_back({task, m, k, recall_at(preds, gt, task, m, k, collect)});
        if (!warned) {
          for (const auto& msg : pending) once(msg);
          warned = !pending.empty();
        }
      }
    }
  }
  return rows;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string row_metric(const RecallRow& r) {
  if (r.task == RetrievalTask::kVr) return "r" + std::to_string(r.k);
  return fmt("%g", r.m) + "/r" + std::to_string(r.k);
}

}  // namespace

std::string render_recall_text(std::span<const RecallRow> rows) {
  std::vector<std::array<std::string, 3>> cells;
  cells.push_back({"task", "metric", "recall"});
  for (const auto& r : rows) {
    cells.push_back({std::string(to_string(r.task)), row_metric(r), fmt("%.2f", 100.0 * r.recall)});
  }
  std::array<std::size_t, 3> width{};
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < 3; ++i) width[i] = std::max(width[i], c[i].size());
  }
  std::ostringstream out;
  for (const auto& c : cells) {
    out << c[0] << std::string(width[0] - c[0].size() + 2, ' ') << c[1]
        << std::string(width[1] - c[1].size() + 2, ' ')
        << std::string(width[2] - c[2].size(), ' ') << c[2] << '\n';
  }
  return out.str();
}

std::string render_recall_jsonl(std::span<const RecallRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::json j = {{"task", to_string(r.task)}, {"K", r.k}, {"recall", r.recall}};
    if (r.task != RetrievalTask::kVr) j["m"] = r.m;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace finecap
