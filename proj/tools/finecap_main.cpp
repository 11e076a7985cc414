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

// finecap command-line driver. Talks to the library only through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "finecap/finecap.h"

namespace {

struct Globals {
  std::string config;
  std::string cache_dir;
  int workers = 0;
  long long seed = -1;
  bool force = false;
  bool mock = false;
  std::string work_dir = ".";
  std::string log_level = "info";
  std::vector<std::string> overrides;
};

struct StageArgs {
  std::string moments;
  std::string input;
  std::string lexicon;
  std::string predictions;
  std::string ground_truth;
  bool echo = false;
  std::string video;
  std::string video_id;
  double fps = 8.0;
};

int fail(fc_context* ctx, fc_status st) {
  std::cerr << "error: " << fc_last_error(ctx) << " (" << fc_status_name(st) << ")\n";
  return fc_exit_code(st);
}

bool set(fc_context* ctx, const std::string& key, const std::string& value, fc_status& st) {
  st = fc_context_set_option(ctx, key.c_str(), value.c_str());
  return st == FC_OK;
}

void print_file(const std::string& path) {
  std::ifstream in(path);
  if (in) std::cout << in.rdbuf();
}

std::string join(const std::string& dir, const std::string& file) {
  if (dir.empty() || dir == ".") return file;
  return dir.back() == '/' ? dir + file : dir + "/" + file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finecap: fine-grained video moment annotation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fc_version()));

  Globals g;
  app.add_option("--config", g.config, "JSON config file (defaults when omitted)");
  app.add_option("--cache-dir", g.cache_dir, "Model response cache directory");
  app.add_option("--workers", g.workers, "Worker threads per stage")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Global seed")->check(CLI::NonNegativeNumber);
  app.add_flag("--force", g.force, "Re-run stages even when the manifest matches");
  app.add_flag("--mock", g.mock, "Use deterministic mock model backends");
  app.add_option("--work-dir", g.work_dir, "Directory holding stage inputs and outputs");
  app.add_option("--log-level", g.log_level, "debug, info, warn, error or off");
  app.add_option("--set", g.overrides, "Config override key=value (dotted key), repeatable");

  StageArgs a;
  std::vector<std::pair<std::string, CLI::App*>> commands;
  const std::vector<std::pair<std::string, std::string>> stage_help = {
      {"keyframes", "Segment moments and pick key frames"},
      {"caption-statics", "Describe key frames and write static captions"},
      {"caption-dynamics", "Question the video model and write dynamic captions"},
      {"perturb", "Generate disturbed captions for evaluator training"},
      {"embed", "Embed moments and caption texts"},
      {"train-evaluator", "Train the caption evaluator"},
      {"score", "Score every caption candidate"},
      {"select", "Pick the best caption per moment and write fig.jsonl"},
      {"stats", "Caption statistics and many-to-many counts"},
      {"eval-metrics", "Recall metrics for a retrieval prediction file"},
      {"run-all", "Run keyframes through select"},
  };
  for (const auto& [name, help] : stage_help) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name != "eval-metrics" && name != "stats") {
      sub->add_option("--moments", a.moments, "Coarse moments file (default <work-dir>/moments.jsonl)");
    }
    if (name == "stats") {
      sub->add_option("--input", a.input, "Annotated file (default <work-dir>/fig.jsonl)");
      sub->add_option("--lexicon", a.lexicon, "Word<TAB>pos lexicon replacing the bundled one");
    }
    if (name == "eval-metrics") {
      sub->add_option("--predictions", a.predictions, "Predictions JSONL")->required();
      sub->add_option("--ground-truth", a.ground_truth, "Ground-truth JSONL")->required();
    }
    commands.emplace_back(name, sub);
  }
  CLI::App* validate = app.add_subcommand("validate-config", "Validate the config and fill defaults");
  validate->add_flag("--echo", a.echo, "Print the normalized config");
  CLI::App* extract = app.add_subcommand("extract-frames", "Decode a video into <frames_dir>/<video_id>/<ms>.png");
  extract->add_option("--video", a.video, "Video file")->required();
  extract->add_option("--video-id", a.video_id, "Directory name under frames_dir")->required();
  extract->add_option("--fps", a.fps, "Frames per second to write")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  fc_context* ctx = nullptr;
  fc_status st = fc_context_create(g.config.empty() ? nullptr : g.config.c_str(), &ctx);
  if (st != FC_OK) return fail(nullptr, st);
  struct Guard {
    fc_context* c;
    ~Guard() { fc_context_destroy(c); }
  } guard{ctx};

  for (const auto& ov : g.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << ov << "'\n";
      return 2;
    }
    if (!set(ctx, "config." + ov.substr(0, eq), ov.substr(eq + 1), st)) return fail(ctx, st);
  }
  if (!g.cache_dir.empty() && !set(ctx, "config.cache_dir", "\"" + g.cache_dir + "\"", st)) return fail(ctx, st);
  if (g.workers > 0 && !set(ctx, "config.workers", std::to_string(g.workers), st)) return fail(ctx, st);
  if (g.seed >= 0 && !set(ctx, "config.seed", std::to_string(g.seed), st)) return fail(ctx, st);
  if (g.mock && !set(ctx, "config.mock.enabled", "true", st)) return fail(ctx, st);
  if (!set(ctx, "log_level", g.log_level, st)) return fail(ctx, st);
  if (!set(ctx, "work_dir", g.work_dir, st)) return fail(ctx, st);
  if (g.force && !set(ctx, "force", "1", st)) return fail(ctx, st);

  if (validate->parsed()) {
    if (a.echo) {
      std::size_t needed = 0;
      fc_normalized_config_json(ctx, nullptr, 0, &needed);
      std::string buf(needed, '\0');
      st = fc_normalized_config_json(ctx, buf.data(), buf.size(), &needed);
      if (st != FC_OK) return fail(ctx, st);
      std::cout << buf.c_str() << "\n";
    } else {
      std::cerr << "config ok\n";
    }
    return 0;
  }

  if (extract->parsed()) {
    std::size_t count = 0;
    st = fc_extract_frames(ctx, a.video.c_str(), a.video_id.c_str(), a.fps, &count);
    if (st != FC_OK) return fail(ctx, st);
    std::cerr << count << " frames written\n";
    return 0;
  }

  for (const auto& [name, sub] : commands) {
    if (!sub->parsed()) continue;
    if (!a.moments.empty() && !set(ctx, "moments", a.moments, st)) return fail(ctx, st);
    if (!a.input.empty() && !set(ctx, "stats_input", a.input, st)) return fail(ctx, st);
    if (!a.lexicon.empty() && !set(ctx, "lexicon", a.lexicon, st)) return fail(ctx, st);
    if (!a.predictions.empty() && !set(ctx, "predictions", a.predictions, st)) return fail(ctx, st);
    if (!a.ground_truth.empty() && !set(ctx, "ground_truth", a.ground_truth, st)) return fail(ctx, st);
    st = fc_run_stage(ctx, name.c_str());
    if (st == FC_OK || st == FC_PARTIAL) {
      if (name == "eval-metrics") print_file(join(g.work_dir, "metrics.txt"));
      if (name == "stats") print_file(join(g.work_dir, "stats.json"));
    }
    if (st == FC_PARTIAL) {
      std::cerr << "warning: " << fc_last_failure_count(ctx) << " moment(s) failed; see manifest.json\n";
      return 1;
    }
    if (st != FC_OK) return fail(ctx, st);
    return 0;
  }
  return 2;
}
