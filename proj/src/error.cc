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

#include "ctxshap/error.h"

namespace ctxshap {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInput: return "input";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSizing: return "sizing";
    case ErrorCode::kParameter: return "parameter";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kState: return "state";
    case ErrorCode::kLookup: return "lookup";
    case ErrorCode::kPlacement: return "placement";
    case ErrorCode::kGrouping: return "grouping";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kBudget: return "budget";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kUndefined: return "undefined";
  }
  return "unknown";
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNumerical:
    case ErrorCode::kDivergence:
    case ErrorCode::kBudget:
    case ErrorCode::kIntegrity:
    case ErrorCode::kDegenerate:
    case ErrorCode::kUndefined:
      return 4;
    default:
      return 3;
  }
}

}  // namespace ctxshap
