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
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "finecap/config.hpp"
#include "finecap/errors.hpp"
#include "finecap/model_context.hpp"
#include "finecap/perturb.hpp"

namespace finecap {

enum class Stage {
  kKeyframes,
  kCaptionStatics,
  kCaptionDynamics,
  kPerturb,
  kEmbed,
  kTrainEvaluator,
  kScore,
  kSelect,
  kStats,
  kEvalMetrics,
};

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);
// keyframes through select, in dependency order.
const std::vector<Stage>& annotation_stages();

enum class LogLevel { kDebug, kInfo, kWarn, kError };

// logfmt lines: ts=... level=... stage=... moment=... event=... msg=...
class Logger {
 public:
  using Sink = std::function<void(const std::string& line)>;
  using Field = std::pair<std::string, std::string>;

  explicit Logger(Sink sink = {}, LogLevel min_level = LogLevel::kInfo);
  static Logger to_stderr(LogLevel min_level = LogLevel::kInfo);

  void log(LogLevel level, std::string_view stage, std::string_view moment,
           std::string_view event, std::string_view msg = {},
           const std::vector<Field>& fields = {}) const;

 private:
  Sink sink_;
  LogLevel min_level_;
  std::shared_ptr<std::mutex> mu_;
};

std::string logfmt_value(std::string_view v);

// Exit codes shared by the CLI and the C API.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitError = 2;

struct RunOptions {
  std::filesystem::path work_dir = ".";
  std::filesystem::path moments;       // default: <work_dir>/moments.jsonl
  std::filesystem::path stats_input;   // default: <work_dir>/fig.jsonl
  std::filesystem::path lexicon;       // default: bundled lexicon
  std::filesystem::path predictions;   // eval-metrics
  std::filesystem::path ground_truth;  // eval-metrics
  bool force = false;
};

struct StageReport {
  Stage stage = Stage::kKeyframes;
  int exit_code = kExitOk;
  bool manifest_match = false;
  std::vector<SkipRecord> failures;
  std::string error;  // set when exit_code == kExitError
  std::optional<ErrorCode> error_code;
};

// Builds model handles for every role from the config (mock or HTTP).
BackendSet make_backends(const Config& cfg);

// Runs stages over files in a work directory. Stages only communicate
// through those files; each stage records its input and output digests in
// <work_dir>/manifest.json and is skipped when nothing changed.
class Pipeline {
 public:
  Pipeline(Config cfg, RunOptions opts, Logger logger = Logger::to_stderr());
  ~Pipeline();

  // Replaces the config-built backends, e.g. with injected transports.
  void set_backends(BackendSet backends);

  StageReport run(Stage stage);
  // Runs annotation_stages() in order, stopping at the first hard error.
  // The exit code is the worst one seen.
  StageReport run_all();

  const Config& config() const { return cfg_; }
  std::filesystem::path path_of(std::string_view file) const;

 private:
  struct Impl;
  Config cfg_;
  RunOptions opts_;
  Logger log_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace finecap
