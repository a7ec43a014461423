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

#ifndef DRIFTLAB_EVALUATION_HPP
#define DRIFTLAB_EVALUATION_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "driftlab/corpus.hpp"
#include "driftlab/embedding_model.hpp"

namespace driftlab {

// Number of evaluated words over the number of words in one minibatch.
double scale_factor(std::uint64_t n_eval_tokens, std::uint64_t n_batch_tokens);

// Held-out positive log-likelihood per slice. Slices whose split holds no
// usable position are missing and do not enter the mean.
struct EvalCurve {
  std::vector<std::optional<double>> per_slice;
  std::vector<std::size_t> positions;  // evaluated positions per slice
  double mean = 0.0;
  Split split = Split::test;
  double scale = 1.0;
  std::string corpus_id;

  // "slice<TAB>value" rows ("NA" for missing slices) after '#' metadata lines.
  void save_tsv(const std::filesystem::path& path) const;
  static EvalCurve load_tsv(const std::filesystem::path& path);
};

// Stable identifier of a corpus' content, used to refuse comparing curves
// computed on different data.
std::string corpus_fingerprint(const TimeSlicedCorpus& corpus);

// Unscaled sum of log p over every usable position of `split` in slice
// `corpus_t`, using rho of slice `state_t`.
double slice_log_likelihood(const EmbeddingState& state, std::size_t state_t,
                            const Slice& slice, Split split, int window,
                            std::size_t* positions = nullptr);

// Evaluates every slice. The state must have T equal to the corpus or T = 1
// (a static model is applied to every slice). When `scale` is absent it is
// scale_factor(split positions in the corpus, batch_size).
EvalCurve evaluate(const EmbeddingState& state, const TimeSlicedCorpus& corpus, Split split,
                   int window, std::size_t batch_size,
                   std::optional<double> scale = std::nullopt, int threads = 1);

struct RankingRow {
  std::string name;
  double mean = 0.0;
  int rank = 0;
};

// Sorts curves by mean, best (highest) first. Throws DataError when the
// curves come from different corpora or splits.
std::vector<RankingRow> compare(const std::vector<std::pair<std::string, EvalCurve>>& curves);

std::string format_ranking_tsv(const std::vector<RankingRow>& rows);
// Aligned plain text; the best row is wrapped in ** **.
std::string format_ranking_text(const std::vector<RankingRow>& rows);

}  // namespace driftlab

#endif  // DRIFTLAB_EVALUATION_HPP
