// Copyright 2026 The perpot Authors
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

#include <stdexcept>
#include <string>

namespace perpot {

enum class ErrorCode {
  invalid_cell,
  unsupported_dimension,
  singular_point,
  accuracy,
  invalid_argument,
  invalid_geometry,
  invalid_diffeo,
  out_of_cell,
  resonant,
  solve_failed,
  unsupported,
  config,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_cell: return "invalid-cell";
    case ErrorCode::unsupported_dimension: return "unsupported-dimension";
    case ErrorCode::singular_point: return "singular-point";
    case ErrorCode::accuracy: return "accuracy";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_geometry: return "invalid-geometry";
    case ErrorCode::invalid_diffeo: return "invalid-diffeo";
    case ErrorCode::out_of_cell: return "out-of-cell";
    case ErrorCode::resonant: return "resonant";
    case ErrorCode::solve_failed: return "solve-failed";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace perpot
