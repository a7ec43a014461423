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

// Command-line front end: subcommand dispatch, model directories and the run
// manifest written next to every output.

#ifndef DRIFTLAB_CLI_HPP
#define DRIFTLAB_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/corpus.hpp"
#include "driftlab/trainer.hpp"

namespace driftlab {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// Runs one command line (without the program name). Help and results go to
// `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// A trained model directory: config.txt, vocab.tsv, rho.txt, alpha.txt,
// checkpoint.bin, metrics.tsv and source.txt (the corpus it was trained on).
struct Model {
  Checkpoint checkpoint;
  Vocabulary vocab;
  std::filesystem::path corpus;  // empty when unknown
};

void save_model(const std::filesystem::path& dir, const Model& model);
// The state comes from checkpoint.bin, which is exact; the text files are
// for other tools.
Model load_model(const std::filesystem::path& dir);

}  // namespace driftlab

#endif  // DRIFTLAB_CLI_HPP
