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

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "finecap/config.hpp"
#include "finecap/dataset.hpp"
#include "finecap/image.hpp"
#include "finecap/io.hpp"
#include "finecap/model_context.hpp"
#include "finecap/types.hpp"

namespace finecap::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "finecap-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  bool coin() { return integer(0, 1) == 1; }
  template <typename T>
  const T& pick(const std::vector<T>& v) { return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))]; }
  std::mt19937_64& engine() { return gen_; }

  std::vector<double> gaussian(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal();
    return v;
  }
  std::vector<double> unit(std::size_t n) {
    auto v = gaussian(n);
    double s = 0.0;
    for (double x : v) s += x * x;
    for (auto& x : v) x /= std::sqrt(s);
    return v;
  }

 private:
  std::mt19937_64 gen_;
};

// Synthetic moment corpus: `n_videos` videos with PNG frames every 125 ms
// whose color changes in three flat scenes, and `n_moments` moments spread
// over them.
struct Fixture {
  std::filesystem::path root;
  std::filesystem::path frames_dir;
  std::filesystem::path moments;
  std::vector<MomentRecord> records;
};

inline Image scene_image(int scene, int video) {
  const std::uint8_t palette[4][3] = {{200, 40, 40}, {40, 180, 60}, {30, 60, 200}, {220, 220, 40}};
  const auto* c = palette[(scene + video) % 4];
  Image img = Image::solid(16, 12, c[0], c[1], c[2]);
  // A video-specific patch so frame embeddings differ between videos.
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * 16 + x) * 3;
      img.rgb[i] = static_cast<std::uint8_t>(20 * video);
      img.rgb[i + 1] = static_cast<std::uint8_t>(255 - 20 * video);
    }
  }
  return img;
}

inline Fixture make_fixture(const std::filesystem::path& root, std::size_t n_moments,
                            std::size_t n_videos = 5, double video_len = 12.0) {
  static const std::vector<std::string> kActions = {
      "a person opens the door",     "a man sits on a chair",   "a woman drinks from a cup",
      "a person closes the laptop",  "a child throws a ball",   "a person washes the dishes",
      "a man puts on his shoes",     "a woman reads a book",    "a person turns off the light",
      "a man takes a towel"};
  Fixture f;
  f.root = root;
  f.frames_dir = root / "frames";
  for (std::size_t v = 0; v < n_videos; ++v) {
    const std::string vid = "vid" + std::to_string(v);
    const int steps = static_cast<int>(video_len * 8.0);
    for (int k = 0; k <= steps; ++k) {
      const double t = k * 0.125;
      const int scene = static_cast<int>(3.0 * t / video_len);
      write_png(f.frames_dir / vid / (std::to_string(k * 125) + ".png"),
                scene_image(scene, static_cast<int>(v)));
    }
  }
  for (std::size_t i = 0; i < n_moments; ++i) {
    MomentRecord m;
    m.video_id = "vid" + std::to_string(i % n_videos);
    const double start = static_cast<double>((i / n_videos) % 4) * 2.0;
    m.t_s = start;
    m.t_e = start + 4.0;
    m.q = kActions[i % kActions.size()];
    m.split = i % 5 == 4 ? Split::kTest : Split::kTrain;
    f.records.push_back(m);
  }
  f.moments = root / "moments.jsonl";
  save_dataset(std::span<const MomentRecord>(f.records), f.moments);
  return f;
}

// Mock-mode config with frames under the fixture.
inline Config mock_config(const Fixture& f, std::uint64_t seed = 0) {
  nlohmann::json doc = nlohmann::json::object();
  doc["mock"] = {{"enabled", true}};
  doc["frames_dir"] = f.frames_dir.string();
  doc["seed"] = seed;
  return parse_config(doc, f.root);
}

// Model context over one mock transport for every chat role, a mock
// sentence embedder, and no retry delays.
struct MockModels {
  std::shared_ptr<MockChatTransport> transport;
  std::shared_ptr<MockEmbedder> embedder;
  ModelContext ctx;
};

inline MockModels mock_models(std::vector<MockRule> rules, std::size_t embed_dim = 32) {
  MockModels m;
  m.transport = std::make_shared<MockChatTransport>(std::move(rules));
  m.embedder = std::make_shared<MockEmbedder>(embed_dim, 1);
  RetryPolicy retry;
  retry.max_retries = 0;
  retry.sleep = [](double) {};
  m.ctx.backends.llm = std::make_shared<ChatClient>(Role::kLlm, m.transport, std::nullopt, retry);
  m.ctx.backends.image_lmm =
      std::make_shared<ChatClient>(Role::kImageLmm, m.transport, std::nullopt, retry);
  m.ctx.backends.video_lmm =
      std::make_shared<ChatClient>(Role::kVideoLmm, m.transport, std::nullopt, retry);
  m.ctx.backends.embedder = m.embedder;
  m.ctx.llm_temperature = m.ctx.image_lmm_temperature = m.ctx.video_lmm_temperature = 0.0;
  return m;
}

}  // namespace finecap::testing
