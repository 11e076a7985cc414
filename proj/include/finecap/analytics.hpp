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

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace finecap {

enum class PartOfSpeech { kNoun, kVerb, kAdjective, kOther };

// Part-of-speech tagging interface. Implementations may throw to signal that
// a caption cannot be tagged; compute_stats then skips that caption.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual std::vector<PartOfSpeech> tag(const std::vector<std::string>& tokens) const = 0;
};

// Word-list tagger: each token is looked up in a lexicon of
// "word<TAB>noun|verb|adj" lines. Approximate by design.
class LexiconTagger final : public Tagger {
 public:
  explicit LexiconTagger(std::unordered_map<std::string, PartOfSpeech> lexicon);
  static LexiconTagger parse(std::string_view text);
  static LexiconTagger builtin();
  static LexiconTagger load(const std::filesystem::path& path);

  std::vector<PartOfSpeech> tag(const std::vector<std::string>& tokens) const override;
  std::size_t size() const { return lexicon_.size(); }

 private:
  std::unordered_map<std::string, PartOfSpeech> lexicon_;
};

struct DatasetStats {
  std::size_t vocab_size = 0;
  std::size_t captions = 0;  // captions actually counted
  std::size_t skipped = 0;   // captions the tagger rejected
  double avg_words = 0.0;
  double avg_nouns = 0.0;
  double avg_verbs = 0.0;
  double avg_adjs = 0.0;
};

using WarningSink = std::function<void(const std::string&)>;

DatasetStats compute_stats(std::span<const std::string> captions, const Tagger& tagger,
                           const WarningSink& warn = {});

struct CaptionMoment {
  std::string caption;
  std::string moment_key;
};

struct ManyToManyCount {
  std::size_t num_classes = 0;
  std::size_t num_instances = 0;
};

inline constexpr std::string_view kManyToManyDefinition = "definition v1";

// A class is a normalized caption attached to two or more distinct moment
// keys; instances are the records that fall into some class.
ManyToManyCount count_many_to_many(std::span<const CaptionMoment> records);

struct Span {
  double start = 0.0;
  double end = 0.0;
};

double t_iou(Span a, Span b);

enum class RetrievalTask { kVcmr, kSvmr, kVr };
std::string_view to_string(RetrievalTask task);
std::optional<RetrievalTask> parse_retrieval_task(std::string_view s);

struct RankedMoment {
  std::string video_id;
  Span span;
  double score = 0.0;
};

// query id -> ranked proposals, scores non-increasing.
using PredictionSet = std::map<std::string, std::vector<RankedMoment>>;

struct GroundTruth {
  std::string query_id;
  std::string video_id;
  Span span;
};

// Fraction of ground-truth queries with a hit in the top K. vcmr needs the
// right video and tIoU > m; svmr ranks only proposals from the ground-truth
// video; vr needs the right video among the top K distinct videos.
double recall_at(const PredictionSet& preds, std::span<const GroundTruth> gt, RetrievalTask task,
                 double m, int k, const WarningSink& warn = {});

PredictionSet load_predictions(const std::filesystem::path& path);
std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path);

struct RecallRow {
  RetrievalTask task = RetrievalTask::kVcmr;
  double m = 0.0;  // unused for vr
  int k = 1;
  double recall = 0.0;
};

std::vector<RecallRow> recall_table(const PredictionSet& preds, std::span<const GroundTruth> gt,
                                    std::span<const RetrievalTask> tasks,
                                    std::span<const double> thresholds, std::span<const int> ks,
                                    const WarningSink& warn = {});

// Aligned text table and one JSON object per line.
std::string render_recall_text(std::span<const RecallRow> rows);
std::string render_recall_jsonl(std::span<const RecallRow> rows);

}  // namespace finecap
