/*
 * Copyright 2026 The ctxshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CTXSHAP_ERROR_H_
#define CTXSHAP_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctxshap {

enum class ErrorCode {
  kInput,
  kSchema,
  kParse,
  kSizing,
  kParameter,
  kShape,
  kState,
  kLookup,
  kPlacement,
  kGrouping,
  kNumerical,
  kDivergence,
  kBudget,
  kIntegrity,
  kDegenerate,
  kUndefined,
};

std::string_view ErrorCodeName(ErrorCode code);

// Process exit code used by the CLI for an error of the given kind:
// 3 for data problems, 4 for numerical or solver problems.
int ExitCodeFor(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + " error: " +
                           message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, ErrorCode code,
                    const std::string& message) {
  if (!condition) Fail(code, message);
}

}  // namespace ctxshap

#endif  // CTXSHAP_ERROR_H_
