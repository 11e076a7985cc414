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

#include "finecap/frames.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include "finecap/errors.hpp"
#include "finecap/io.hpp"

namespace finecap {

namespace fs = std::filesystem;

std::shared_ptr<const Image> FrameRef::decode() const {
  if (image) return image;
  if (path.empty()) throw InvalidArgument("frame has neither image nor path");
  return std::make_shared<const Image>(read_png(path));
}

std::string FrameRef::png_bytes() const {
  if (!path.empty() && !image) return read_file(path);
  return encode_png(*decode());
}

std::optional<std::string> check(const FrameSequence& seq) {
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const double t = seq.frames[i].timestamp;
    if (t < seq.t_s || t > seq.t_e) return "timestamps within [t_s, t_e]";
    if (i > 0 && !(seq.frames[i - 1].timestamp < t)) {
      return "timestamps strictly increasing";
    }
  }
  return std::nullopt;
}

DirectoryFrameProvider::DirectoryFrameProvider(fs::path root)
    : root_(std::move(root)) {}

FrameSequence DirectoryFrameProvider::frames_for(const MomentRecord& m) const {
  FrameSequence seq;
  seq.moment_key = m.key();
  seq.t_s = m.t_s;
  seq.t_e = m.t_e;
  const fs::path dir = root_ / m.video_id;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return seq;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    long long ms = 0;
    auto [ptr, err] = std::from_chars(stem.data(), stem.data() + stem.size(), ms);
    if (err != std::errc() || ptr != stem.data() + stem.size()) continue;
    const double t = static_cast<double>(ms) / 1000.0;
    if (t < m.t_s || t > m.t_e) continue;
    seq.frames.push_back(FrameRef{t, entry.path(), nullptr});
  }
  std::sort(seq.frames.begin(), seq.frames.end(),
            [](const FrameRef& a, const FrameRef& b) { return a.timestamp < b.timestamp; });
  return seq;
}

FramePolicy FramePolicy::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw InvalidArgument("frame policy must look like 'fps:8' or 'uniform:64', got '" +
                          spec + "'");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string num = spec.substr(colon + 1);
  char* end = nullptr;
  const double value = std::strtod(num.c_str(), &end);
  if (num.empty() || *end != '\0' || !(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument("frame policy value must be positive: '" + spec + "'");
  }
  FramePolicy p;
  if (kind == "fps") {
    p.kind = Kind::kRate;
  } else if (kind == "uniform") {
    p.kind = Kind::kUniform;
    if (value != std::floor(value)) throw InvalidArgument("uniform count must be an integer");
  } else {
    throw InvalidArgument("unknown frame policy '" + kind + "'");
  }
  p.value = value;
  return p;
}

std::string FramePolicy::to_string() const {
  std::string num = std::to_string(value);
  num.erase(num.find_last_not_of('0') + 1);
  if (!num.empty() && num.back() == '.') num.pop_back();
  return (kind == Kind::kRate ? "fps:" : "uniform:") + num;
}

std::size_t FramePolicy::requested(const FrameSequence& seq) const {
  if (kind == Kind::kUniform) return static_cast<std::size_t>(value);
  if (seq.frames.empty()) return 0;
  const double span = seq.frames.back().timestamp - seq.frames.front().timestamp;
  return static_cast<std::size_t>(std::floor(span * value + 1e-9)) + 1;
}

std::vector<std::size_t> uniform_indices(std::size_t available, std::size_t n) {
  std::vector<std::size_t> out;
  if (available == 0 || n == 0) return out;
  if (n >= available) {
    for (std::size_t i = 0; i < available; ++i) out.push_back(i);
    return out;
  }
  if (n == 1) return {(available - 1) / 2};
  // Spacing (available-1)/(n-1) >= 1, so rounded positions stay distinct.
  const double step = static_cast<double>(available - 1) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(static_cast<std::size_t>(std::llround(step * static_cast<double>(i))));
  }
  return out;
}

FrameSequence sample_uniform(const FrameSequence& seq, std::size_t n) {
  FrameSequence out{seq.moment_key, seq.t_s, seq.t_e, {}};
  for (std::size_t idx : uniform_indices(seq.frames.size(), n)) {
    out.frames.push_back(seq.frames[idx]);
  }
  return out;
}

FrameSequence sample_frames(const FrameSequence& seq, const FramePolicy& policy) {
  return sample_uniform(seq, policy.requested(seq));
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

}  // namespace

std::size_t extract_frames(const fs::path& decoder, const fs::path& video,
                           const fs::path& out_root, const std::string& video_id,
                           double fps) {
  if (!(fps > 0.0)) throw InvalidArgument("fps must be positive");
  const fs::path dir = out_root / video_id;
  const fs::path staging = out_root / (".staging-" + video_id);
  fs::remove_all(staging);
  fs::create_directories(staging);
  fs::create_directories(dir);
  const std::string cmd = shell_quote(decoder.string()) + " -loglevel error -i " +
                          shell_quote(video.string()) + " -vf fps=" +
                          std::to_string(fps) + " " +
                          shell_quote((staging / "%06d.png").string());
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    fs::remove_all(staging);
    throw IoError("decoder failed (" + std::to_string(rc) + "): " + cmd);
  }
  std::vector<fs::path> produced;
  for (const auto& e : fs::directory_iterator(staging)) {
    if (e.path().extension() == ".png") produced.push_back(e.path());
  }
  std::sort(produced.begin(), produced.end());
  // Output frame k (1-based) of the fps filter sits at (k-1)/fps seconds.
  for (std::size_t k = 0; k < produced.size(); ++k) {
    const long long ms = std::llround(static_cast<double>(k) * 1000.0 / fps);
    fs::rename(produced[k], dir / (std::to_string(ms) + ".png"));
  }
  fs::remove_all(staging);
  return produced.size();
}

}  // namespace finecap
