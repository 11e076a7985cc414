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

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace finecap {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercase, collapse whitespace, strip terminal punctuation. Shared by the
// negative de-duplication and many-to-many counting.
std::string normalize_caption(std::string_view s);

// Lowercased word tokens split on whitespace and punctuation.
std::vector<std::string> tokenize(std::string_view s);

// Items of a numbered list ("1. foo", "2) bar"), tolerating code fences,
// leading bullets and surrounding whitespace. Falls back to plain bullet
// items when no numbered item is present.
std::vector<std::string> parse_numbered_list(std::string_view response);

// Splits a response into labeled sections such as "FG: ...|BG: ...". Labels
// match case-insensitively at the start of a line or after '|', optionally
// wrapped in "**". Keys of the result are the labels as given in `labels`.
std::map<std::string, std::string> parse_labeled_sections(
    std::string_view response, const std::vector<std::string>& labels);

// Replaces "{{name}}" placeholders. Unknown placeholders throw InvalidArgument.
std::string render_template(std::string_view tpl,
                            const std::map<std::string, std::string>& vars);

}  // namespace finecap
