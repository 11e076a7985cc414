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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace finecap {

enum class Split { kTrain, kVal, kTest };
enum class CaptionKind { kStatic, kDynamic };

std::string_view to_string(Split split);
std::string_view to_string(CaptionKind kind);
std::optional<Split> parse_split(std::string_view s);
std::optional<CaptionKind> parse_caption_kind(std::string_view s);

// One source annotation (V, t_s, t_e, q).
struct MomentRecord {
  std::string video_id;
  double t_s = 0.0;
  double t_e = 0.0;
  std::string q;
  Split split = Split::kTrain;

  // Stable identifier "<video_id>@<t_s>-<t_e>" used for frames, caches and
  // manifests.
  std::string key() const;

  friend bool operator==(const MomentRecord&, const MomentRecord&) = default;
};

struct CaptionCandidate {
  std::string text;
  CaptionKind kind = CaptionKind::kStatic;
  std::optional<double> score;  // absent before scoring
  bool filtered = false;        // below the filter threshold, kept in file

  friend bool operator==(const CaptionCandidate&,
                         const CaptionCandidate&) = default;
};

struct Selection {
  CaptionKind kind = CaptionKind::kStatic;
  std::size_t index = 0;

  friend bool operator==(const Selection&, const Selection&) = default;
};

struct AnnotatedMoment {
  MomentRecord moment;
  std::vector<CaptionCandidate> statics;
  std::vector<CaptionCandidate> dynamics;
  std::optional<Selection> selected;
  // Sorted, unique status markers such as "dynamics_failed".
  std::vector<std::string> flags;

  const CaptionCandidate* find(const Selection& sel) const;
  void add_flag(std::string flag);
  bool has_flag(std::string_view flag) const;

  friend bool operator==(const AnnotatedMoment&,
                         const AnnotatedMoment&) = default;
};

// Disturbed rewrites of one coarse caption and the selected extremes.
struct DisturbedSet {
  MomentRecord source;
  std::vector<std::string> positives;
  std::vector<std::string> static_negs;
  std::vector<std::string> dynamic_negs;
  std::string best_pos;
  std::string best_static_neg;
  std::string best_dynamic_neg;
  std::vector<std::string> flags;

  friend bool operator==(const DisturbedSet&, const DisturbedSet&) = default;
};

namespace flags {
inline constexpr std::string_view kStaticsUndercount = "statics_undercount";
inline constexpr std::string_view kStaticsFailed = "statics_failed";
inline constexpr std::string_view kDynamicsUndercount = "dynamics_undercount";
inline constexpr std::string_view kDynamicsFailed = "dynamics_failed";
inline constexpr std::string_view kQuestionsUndercount = "questions_undercount";
inline constexpr std::string_view kAnnotationFailed = "annotation_failed";
inline constexpr std::string_view kPositivesUndercount = "positives_undercount";
inline constexpr std::string_view kStaticNegsUndercount = "static_negs_undercount";
inline constexpr std::string_view kDynamicNegsUndercount = "dynamic_negs_undercount";
inline constexpr std::string_view kNegativeDuplicateDropped =
    "negative_duplicate_dropped";
}  // namespace flags

// Type invariants. Each returns the violated rule, or nullopt when valid.
std::optional<std::string> check(const MomentRecord& m);
std::optional<std::string> check(const CaptionCandidate& c);
std::optional<std::string> check(const AnnotatedMoment& a);
std::optional<std::string> check(const DisturbedSet& d);

}  // namespace finecap
