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
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "finecap/errors.hpp"
#include "finecap/types.hpp"
#include "json.hpp"

namespace finecap {

enum class Schema { kCoarse, kFig, kDisturbed };

using Dataset = std::variant<std::vector<MomentRecord>,
                             std::vector<AnnotatedMoment>,
                             std::vector<DisturbedSet>>;

// JSON mapping. Objects use nlohmann's sorted map, so keys serialize in
// alphabetical order. from_json functions validate type invariants and throw
// DatasetError with line 0; the loaders rethrow with the real line number.
nlohmann::json to_json(const MomentRecord& m);
nlohmann::json to_json(const CaptionCandidate& c);
nlohmann::json to_json(const AnnotatedMoment& a);
nlohmann::json to_json(const DisturbedSet& d);

MomentRecord moment_from_json(const nlohmann::json& j);
CaptionCandidate candidate_from_json(const nlohmann::json& j);
AnnotatedMoment annotated_from_json(const nlohmann::json& j);
DisturbedSet disturbed_from_json(const nlohmann::json& j);

// One canonical line, without the trailing newline.
std::string to_line(const nlohmann::json& j);

Dataset load_dataset(const std::filesystem::path& path, Schema schema);
std::vector<MomentRecord> load_moments(const std::filesystem::path& path);
std::vector<AnnotatedMoment> load_fig(const std::filesystem::path& path);
std::vector<DisturbedSet> load_disturbed(const std::filesystem::path& path);

std::string serialize(std::span<const MomentRecord> records);
std::string serialize(std::span<const AnnotatedMoment> records);
std::string serialize(std::span<const DisturbedSet> records);

void save_dataset(std::span<const MomentRecord> records,
                  const std::filesystem::path& path);
void save_dataset(std::span<const AnnotatedMoment> records,
                  const std::filesystem::path& path);
void save_dataset(std::span<const DisturbedSet> records,
                  const std::filesystem::path& path);

// Parses every non-empty line of a JSONL file and hands it to `fn` together
// with its 1-based line number. Parse errors become DatasetError.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn);

}  // namespace finecap

#include "finecap/io.hpp"

namespace finecap {

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  const std::string content = read_file(path);
  std::size_t line_no = 0;
  for (const auto& line : split_lines(content)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(line_no, "<json>", e.what());
    }
    fn(j, line_no);
  }
}

}  // namespace finecap
