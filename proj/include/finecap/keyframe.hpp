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
#include <span>
#include <string>
#include <vector>

#include "finecap/frames.hpp"
#include "finecap/image.hpp"

namespace finecap {

struct SegmentationConfig {
  std::size_t max_segments = 1;     // L
  double initial_threshold = 27.0;  // first bisection probe
  double threshold_min = 1.0;
  double threshold_max = 100.0;
  int max_iterations = 20;
  double analysis_fps = 2.0;
};

std::optional<std::string> check(const SegmentationConfig& cfg);

struct Segment {
  double start = 0.0;
  double end = 0.0;
  FrameRef key_frame;  // analysis frame nearest the segment's mid-time
};

struct SegmentationResult {
  std::vector<Segment> segments;
  double threshold = 0.0;
  int iterations = 0;
  // Frame indices that start a new segment.
  std::vector<std::size_t> cuts;
  // True when even threshold_max produced more than L segments and the L-1
  // strongest cuts were kept instead.
  bool capped = false;
};

// Mean absolute difference of per-pixel hue, saturation and value channels
// (each in [0,1]), averaged over channels and scaled to [0,100].
double content_score(const Image& a, const Image& b);

// Number of segments produced by cutting wherever score > threshold.
std::size_t count_segments(std::span<const double> scores, double threshold);

// Threshold search over consecutive-frame scores (scores[k] compares frame k
// with frame k+1). Returns cut indices into the frame list.
SegmentationResult search_cuts(std::span<const double> scores,
                               const SegmentationConfig& cfg);

// Splits the frame span into at most L segments and picks each segment's
// mid-time frame. `frames` are the analysis frames.
SegmentationResult segment_moment(const FrameSequence& frames,
                                  const SegmentationConfig& cfg);

// Samples analysis frames at cfg.analysis_fps, then segments.
SegmentationResult select_keyframes(const FrameSequence& all,
                                    const SegmentationConfig& cfg);

}  // namespace finecap
