// Copyright 2026 The driftlab Authors.
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

#ifndef DRIFTLAB_COMMON_HPP
#define DRIFTLAB_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftlab {

using WordId = std::uint32_t;

// Exception hierarchy. The CLI maps each class onto an exit code:
// UsageError -> 1, DataError -> 2, NumericalError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (bad files, invalid arguments to an
// operation, violated preconditions).
class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Collects non-fatal warnings so callers (and tests) can inspect them. Every
// warning is also forwarded to the log.
class Diagnostics {
 public:
  void warn(std::string message);
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool empty() const { return warnings_.empty(); }

 private:
  std::vector<std::string> warnings_;
};

// Forwards to `diag` when present, otherwise only logs.
void warn(Diagnostics* diag, std::string message);

// Configures the global logger from DRIFTLAB_LOG (error|warn|info|debug).
void init_logging();

}  // namespace driftlab

#endif  // DRIFTLAB_COMMON_HPP
