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
#include <string>
#include <string_view>
#include <vector>

namespace finecap {

std::string read_file(const std::filesystem::path& path);

// Writes to a unique temporary sibling and renames it over `path`, so readers
// never observe a partial file and concurrent writers of the same content are
// harmless.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::vector<std::string> split_lines(std::string_view content);

}  // namespace finecap
