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
#include <map>
#include <string>
#include <string_view>

namespace finecap {

// Versioned prompt templates keyed by stage name, loaded from a JSON file.
class PromptTemplates {
 public:
  static PromptTemplates builtin();
  static PromptTemplates parse(std::string_view json_text);
  static PromptTemplates load(const std::filesystem::path& path);

  int version() const { return version_; }
  const std::string& system() const { return system_; }
  const std::string& reprompt_suffix() const { return reprompt_suffix_; }

  std::string render(std::string_view stage,
                     const std::map<std::string, std::string>& vars) const;

 private:
  int version_ = 0;
  std::string system_;
  std::string reprompt_suffix_;
  std::map<std::string, std::string, std::less<>> stages_;
};

}  // namespace finecap
