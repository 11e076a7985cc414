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

#include "finecap/types.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace finecap {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::string_view to_string(CaptionKind kind) {
  return kind == CaptionKind::kStatic ? "static" : "dynamic";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

std::optional<CaptionKind> parse_caption_kind(std::string_view s) {
  if (s == "static") return CaptionKind::kStatic;
  if (s == "dynamic") return CaptionKind::kDynamic;
  return std::nullopt;
}

std::string MomentRecord::key() const {
  // nlohmann renders doubles in shortest round-trip form.
  return video_id + "@" + nlohmann::json(t_s).dump() + "-" +
         nlohmann::json(t_e).dump();
}

const CaptionCandidate* AnnotatedMoment::find(const Selection& sel) const {
  const auto& list = sel.kind == CaptionKind::kStatic ? statics : dynamics;
  return sel.index < list.size() ? &list[sel.index] : nullptr;
}

void AnnotatedMoment::add_flag(std::string flag) {
  auto it = std::lower_bound(flags.begin(), flags.end(), flag);
  if (it == flags.end() || *it != flag) flags.insert(it, std::move(flag));
}

bool AnnotatedMoment::has_flag(std::string_view flag) const {
  return std::binary_search(flags.begin(), flags.end(), flag);
}

namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

}  // namespace

std::optional<std::string> check(const MomentRecord& m) {
  if (m.video_id.empty()) return "video_id non-empty";
  if (!std::isfinite(m.t_s) || !std::isfinite(m.t_e)) return "finite times";
  if (m.t_s < 0.0) return "t_s >= 0";
  if (!(m.t_s < m.t_e)) return "t_s < t_e";
  if (blank(m.q)) return "q non-empty";
  return std::nullopt;
}

std::optional<std::string> check(const CaptionCandidate& c) {
  if (blank(c.text)) return "text non-empty";
  if (c.score && !(*c.score >= 0.0 && *c.score <= 1.0)) return "0 <= score <= 1";
  return std::nullopt;
}

std::optional<std::string> check(const AnnotatedMoment& a) {
  if (auto err = check(a.moment)) return err;
  for (const auto& c : a.statics) {
    if (c.kind != CaptionKind::kStatic) return "statics have kind=static";
    if (auto err = check(c)) return err;
  }
  for (const auto& c : a.dynamics) {
    if (c.kind != CaptionKind::kDynamic) return "dynamics have kind=dynamic";
    if (auto err = check(c)) return err;
  }
  if (a.selected && a.find(*a.selected) == nullptr) {
    return "selected indexes an existing candidate";
  }
  return std::nullopt;
}

std::optional<std::string> check(const DisturbedSet& d) {
  if (auto err = check(d.source)) return err;
  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  if (!contains(d.positives, d.best_pos)) return "best_pos in positives";
  if (!contains(d.static_negs, d.best_static_neg)) {
    return "best_static_neg in static_negs";
  }
  if (!contains(d.dynamic_negs, d.best_dynamic_neg)) {
    return "best_dynamic_neg in dynamic_negs";
  }
  return std::nullopt;
}

}  // namespace finecap
