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

#include "driftlab/common.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace driftlab {

void Diagnostics::warn(std::string message) {
  spdlog::warn("{}", message);
  warnings_.push_back(std::move(message));
}

void warn(Diagnostics* diag, std::string message) {
  if (diag != nullptr) {
    diag->warn(std::move(message));
  } else {
    spdlog::warn("{}", message);
  }
}

void init_logging() {
  auto logger = spdlog::stderr_color_mt("driftlab");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("DRIFTLAB_LOG")) {
    std::string_view v(env);
    if (v == "error") level = spdlog::level::err;
    else if (v == "warn") level = spdlog::level::warn;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
  }
  spdlog::set_level(level);
}

}  // namespace driftlab
