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

// Minibatch training with Adagrad: a static pass over all slices pooled,
// then dynamic training slice by slice in chronological order.

#ifndef DRIFTLAB_TRAINER_HPP
#define DRIFTLAB_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/common.hpp"
#include "driftlab/corpus.hpp"
#include "driftlab/embedding_model.hpp"
#include "driftlab/io.hpp"

namespace driftlab {

enum class InitMode : std::uint8_t { random, from_static, from_file };
std::string_view to_string(InitMode m);
InitMode parse_init_mode(std::string_view s);

struct TrainingConfig {
  PriorConfig prior;
  int window = 2;
  int dim = 100;
  int negatives = 10;
  int minibatches_per_slice = 1000;
  int batch_size = 512;
  double learning_rate = 0.1;
  // Starting value of every Adagrad accumulator. Damps the first steps of
  // rows whose gradients are small.
  double adagrad_initial = 0.0;
  int static_epochs = 5;
  int epochs = 5;
  std::uint64_t seed = 1;
  InitMode init = InitMode::from_static;
  std::string init_path;  // model directory when init = from_file
  double init_scale = 0.1;
  double clip_norm = 25.0;  // <= 0 disables clipping
  double unigram_power = 0.75;
  bool shuffle_slices = false;
  bool log_validation = true;

  // Throws UsageError on out-of-range values.
  void validate() const;
  io::KeyValues to_key_values() const;
  // Unset keys keep their defaults; unknown keys are a UsageError.
  static TrainingConfig from_key_values(const io::KeyValues& kv);
};

// Per-parameter Adagrad for gradient ascent:
//   G += g^2,  theta += lr * g / (sqrt(G) + eps),  G starting at `initial`
class Adagrad {
 public:
  Adagrad(const EmbeddingState& like, double learning_rate, double initial = 0.0,
          double eps = 1e-8);
  void apply(EmbeddingState& state, const SparseGradient& grad);

 private:
  double lr_;
  double eps_;
  std::size_t vocab_;
  std::size_t dim_;
  std::vector<double> rho_acc_;
  std::vector<double> alpha_acc_;
};

// Sum over the minibatches of one (epoch, slice) of each objective term.
// valid_l_pos is the unscaled validation log-likelihood of the slice after
// the epoch (NaN when not computed).
struct MetricRecord {
  int epoch = 0;
  std::uint32_t slice = 0;
  LossBreakdown loss;
  double valid_l_pos = std::numeric_limits<double>::quiet_NaN();
};

struct Checkpoint {
  TrainingConfig config;
  int epoch = 0;  // completed epochs
  EmbeddingState state;
  std::vector<MetricRecord> log;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

void save_metrics_tsv(const std::filesystem::path& path, const std::vector<MetricRecord>& log);

// Thrown when a loss or gradient stops being finite. Carries the last state
// that was entirely finite (the update that would break it is not applied).
class NumericalAbort : public NumericalError {
 public:
  NumericalAbort(const std::string& what, Checkpoint last)
      : NumericalError(what), last_(std::move(last)) {}
  const Checkpoint& last_finite() const { return last_; }

 private:
  Checkpoint last_;
};

// Random initialization: every slice drawn independently.
EmbeddingState initial_state(std::size_t num_slices, std::size_t vocab_size,
                             const TrainingConfig& config);

// Static model (T = 1) trained on all slices pooled. Each epoch runs
// minibatches_per_slice * T minibatches.
EmbeddingState train_static(const TimeSlicedCorpus& corpus, const Vocabulary& vocab,
                            const TrainingConfig& config, EmbeddingState init,
                            Diagnostics* diag = nullptr,
                            std::vector<MetricRecord>* log = nullptr);
EmbeddingState train_static(const TimeSlicedCorpus& corpus, const Vocabulary& vocab,
                            const TrainingConfig& config, Diagnostics* diag = nullptr,
                            std::vector<MetricRecord>* log = nullptr);

// Copies rho of a static state into every one of `num_slices` slices.
EmbeddingState init_dynamic(const EmbeddingState& static_state, std::size_t num_slices);

// Dynamic training. The prior enters each minibatch scaled by
// 1 / minibatches_per_slice so that one pass over a slice applies it once.
Checkpoint train_dynamic(const TimeSlicedCorpus& corpus, const Vocabulary& vocab,
                         const TrainingConfig& config, EmbeddingState init,
                         Diagnostics* diag = nullptr);

}  // namespace driftlab

#endif  // DRIFTLAB_TRAINER_HPP
