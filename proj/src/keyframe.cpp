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

#include "finecap/keyframe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "finecap/errors.hpp"

namespace finecap {

std::optional<std::string> check(const SegmentationConfig& cfg) {
  if (cfg.max_segments < 1) return "L >= 1";
  if (!(cfg.initial_threshold > 0.0)) return "initial threshold > 0";
  if (!(cfg.threshold_min < cfg.threshold_max)) return "theta_min < theta_max";
  if (cfg.max_iterations < 1) return "iterations >= 1";
  if (!(cfg.analysis_fps > 0.0)) return "analysis fps > 0";
  return std::nullopt;
}

namespace {

std::array<double, 3> to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r) {
      h = std::fmod((g - b) / delta, 6.0);
      if (h < 0.0) h += 6.0;
    } else if (mx == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
    h /= 6.0;
  }
  const double s = mx > 0.0 ? delta / mx : 0.0;
  return {h, s, mx};
}

}  // namespace

double content_score(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidArgument("frame dimensions differ: " + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height));
  }
  const std::size_t pixels = static_cast<std::size_t>(a.width) * a.height;
  if (pixels == 0) return 0.0;
  std::array<double, 3> sum{};
  for (std::size_t i = 0; i < pixels; ++i) {
    const auto ha = to_hsv(a.rgb[3 * i], a.rgb[3 * i + 1], a.rgb[3 * i + 2]);
    const auto hb = to_hsv(b.rgb[3 * i], b.rgb[3 * i + 1], b.rgb[3 * i + 2]);
    for (int c = 0; c < 3; ++c) sum[c] += std::abs(ha[c] - hb[c]);
  }
  return 100.0 * (sum[0] + sum[1] + sum[2]) / (3.0 * static_cast<double>(pixels));
}

std::size_t count_segments(std::span<const double> scores, double threshold) {
  return 1 + static_cast<std::size_t>(
                 std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; }));
}

SegmentationResult search_cuts(std::span<const double> scores, const SegmentationConfig& cfg) {
  if (auto err = check(cfg)) throw InvalidArgument("segmentation config: " + *err);
  const std::size_t cap = cfg.max_segments;
  SegmentationResult out;
  auto cuts_above = [&](double theta) {
    std::vector<std::size_t> cuts;
    for (std::size_t k = 0; k < scores.size(); ++k) {
      if (scores[k] > theta) cuts.push_back(k + 1);
    }
    return cuts;
  };

  if (count_segments(scores, cfg.threshold_min) <= cap) {
    out.threshold = cfg.threshold_min;
    out.cuts = cuts_above(out.threshold);
    return out;
  }
  if (count_segments(scores, cfg.threshold_max) > cap) {
    // No threshold in range satisfies the cap: keep the L-1 strongest cuts,
    // earlier frames first on ties.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
    order.resize(cap - 1);
    for (std::size_t k : order) out.cuts.push_back(k + 1);
    std::sort(out.cuts.begin(), out.cuts.end());
    out.threshold = cfg.threshold_max;
    out.capped = true;
    return out;
  }

  // Invariant: count(lo) > L >= count(hi). count is non-increasing in theta.
  double lo = cfg.threshold_min, hi = cfg.threshold_max;
  double probe = cfg.initial_threshold;
  while (out.iterations < cfg.max_iterations) {
    const double mid = (probe > lo && probe < hi) ? probe : 0.5 * (lo + hi);
    probe = 0.0;
    ++out.iterations;
    const std::size_t n = count_segments(scores, mid);
    if (n <= cap) {
      hi = mid;
      // A smaller threshold with the same count keeps the same cut set.
      if (n == cap) break;
    } else {
      lo = mid;
    }
  }
  out.threshold = hi;
  out.cuts = cuts_above(hi);
  return out;
}

SegmentationResult segment_moment(const FrameSequence& seq, const SegmentationConfig& cfg) {
  if (seq.frames.empty()) throw InvalidArgument("empty frame sequence");
  if (!(seq.t_s < seq.t_e)) throw InvalidArgument("frame sequence span must satisfy t_s < t_e");
  if (auto err = check(seq)) throw InvalidArgument("frame sequence: " + *err);

  std::vector<double> scores;
  scores.reserve(seq.frames.size() - 1);
  std::shared_ptr<const Image> prev = seq.frames.size() > 1 ? seq.frames[0].decode() : nullptr;
  for (std::size_t k = 1; k < seq.frames.size(); ++k) {
    auto cur = seq.frames[k].decode();
    scores.push_back(content_score(*prev, *cur));
    prev = std::move(cur);
  }
  SegmentationResult out = search_cuts(scores, cfg);

  // Boundaries sit halfway between the frames on either side of a cut, so
  // every segment has positive length and the segments tile [t_s, t_e].
  std::vector<std::size_t> starts = {0};
  starts.insert(starts.end(), out.cuts.begin(), out.cuts.end());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const std::size_t first = starts[s];
    const std::size_t last = s + 1 < starts.size() ? starts[s + 1] - 1 : seq.frames.size() - 1;
    Segment seg;
    seg.start = s == 0 ? seq.t_s
                       : 0.5 * (seq.frames[first - 1].timestamp + seq.frames[first].timestamp);
    seg.end = s + 1 < starts.size()
                  ? 0.5 * (seq.frames[last].timestamp + seq.frames[last + 1].timestamp)
                  : seq.t_e;
    const double mid = 0.5 * (seg.start + seg.end);
    std::size_t best = first;
    for (std::size_t k = first + 1; k <= last; ++k) {
      if (std::abs(seq.frames[k].timestamp - mid) < std::abs(seq.frames[best].timestamp - mid)) {
        best = k;
      }
    }
    seg.key_frame = seq.frames[best];
    out.segments.push_back(std::move(seg));
  }
  return out;
}

SegmentationResult select_keyframes(const FrameSequence& all, const SegmentationConfig& cfg) {
  FramePolicy policy;
  policy.kind = FramePolicy::Kind::kRate;
  policy.value = cfg.analysis_fps;
  return segment_moment(sample_frames(all, policy), cfg);
}

}  // namespace finecap
