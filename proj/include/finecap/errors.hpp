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
#include <stdexcept>
#include <string>

namespace finecap {

enum class ErrorCode {
  kInvalidArgument,
  kDataset,
  kConfig,
  kIo,
  kBackend,
  kNumeric,
  kParse,
};

// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCode::kInvalidArgument, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

// A malformed or invalid line in a line-delimited dataset file.
class DatasetError : public Error {
 public:
  DatasetError(std::size_t line, std::string field, const std::string& detail)
      : Error(ErrorCode::kDataset, "line " + std::to_string(line) + ": " +
                                       field + ": " + detail),
        line_(line),
        field_(std::move(field)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key_path, const std::string& detail)
      : Error(ErrorCode::kConfig,
              (key_path.empty() ? std::string("config") : key_path) + ": " +
                  detail),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

// Raised when a model response cannot be parsed into the expected shape.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorCode::kParse, what) {}
};

// Non-finite intermediate values, degenerate pooling, zero-norm projections.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCode::kNumeric, what) {}
};

}  // namespace finecap
