// Copyright 2026 The silofl Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <stdexcept>
#include <string>

namespace silofl {

enum class ErrorKind {
  kInvalidInput,
  kIo,
  kParse,
  kConfig,
  kRuntime,
};

// Every failure inside the core is reported as an Error; the C API maps the
// kind onto a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Throw(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void Require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::kInvalidInput, what);
}

}  // namespace silofl
