// Copyright 2026 The mmflow Authors.
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

#include <iostream>
#include <stdexcept>
#include <string>

namespace mmflow {

/// Malformed input: bad ids, mismatched node spaces, invalid configs.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: solver non-convergence, SPD repair failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File system failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void warn(const std::string& message) {
  std::clog << "mmflow: warning: " << message << '\n';
}

}  // namespace mmflow
