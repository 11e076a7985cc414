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

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "finecap/image.hpp"
#include "finecap/types.hpp"

namespace finecap {

// A decoded image held in memory or an image file on disk.
struct FrameRef {
  double timestamp = 0.0;
  std::filesystem::path path;
  std::shared_ptr<const Image> image;

  // Decoded pixels; reads `path` when no in-memory image is attached.
  std::shared_ptr<const Image> decode() const;
  // Encoded PNG bytes suitable for a model request.
  std::string png_bytes() const;
};

struct FrameSequence {
  std::string moment_key;
  double t_s = 0.0;
  double t_e = 0.0;
  std::vector<FrameRef> frames;

  bool empty() const { return frames.empty(); }
};

// Timestamps strictly increasing and inside [t_s, t_e].
std::optional<std::string> check(const FrameSequence& seq);

class FrameProvider {
 public:
  virtual ~FrameProvider() = default;
  virtual FrameSequence frames_for(const MomentRecord& moment) const = 0;
};

// Reads `<root>/<video_id>/<timestamp_ms>.png`.
class DirectoryFrameProvider : public FrameProvider {
 public:
  explicit DirectoryFrameProvider(std::filesystem::path root);
  FrameSequence frames_for(const MomentRecord& moment) const override;

 private:
  std::filesystem::path root_;
};

// Frame sampling policies: a fixed rate ("fps:8") or a fixed count spread
// uniformly over the available frames ("uniform:64").
struct FramePolicy {
  enum class Kind { kRate, kUniform };
  Kind kind = Kind::kRate;
  double value = 8.0;

  static FramePolicy parse(const std::string& spec);
  std::string to_string() const;
  // Number of frames the policy asks for over `seq`, before capping by the
  // number available.
  std::size_t requested(const FrameSequence& seq) const;
};

// min(n, available) indices spread uniformly over [0, available).
std::vector<std::size_t> uniform_indices(std::size_t available, std::size_t n);

FrameSequence sample_frames(const FrameSequence& seq, const FramePolicy& policy);
FrameSequence sample_uniform(const FrameSequence& seq, std::size_t n);

// Populates `<out_root>/<video_id>/<timestamp_ms>.png` by running an external
// decoder binary with ffmpeg-compatible arguments. Returns the frame count.
std::size_t extract_frames(const std::filesystem::path& decoder,
                           const std::filesystem::path& video,
                           const std::filesystem::path& out_root,
                           const std::string& video_id, double fps);

}  // namespace finecap
