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

// Two-language analysis: orthogonal alignment of static spaces, similarity
// drift of translation pairs across slices, behavior classes, and a 2D
// projection for plotting.

#ifndef DRIFTLAB_CROSSLINGUAL_HPP
#define DRIFTLAB_CROSSLINGUAL_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "driftlab/common.hpp"
#include "driftlab/corpus.hpp"
#include "driftlab/embedding_model.hpp"

namespace driftlab {

// "src<TAB>tgt" pairs. A source word listed twice keeps its first pairing.
struct BilingualLexicon {
  std::vector<std::pair<std::string, std::string>> pairs;

  static BilingualLexicon load(const std::filesystem::path& path);
  static BilingualLexicon parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
};

// Lexicon pairs whose words exist in both vocabularies.
struct ResolvedLexicon {
  std::vector<std::pair<WordId, WordId>> ids;
  std::vector<std::pair<std::string, std::string>> words;
  std::size_t skipped = 0;
  double coverage_src = 0.0;  // fraction of the source vocabulary paired
  double coverage_tgt = 0.0;
};

ResolvedLexicon resolve(const BilingualLexicon& lexicon, const Vocabulary& src,
                        const Vocabulary& tgt);

// Scales every rho and alpha row to unit norm. Zero rows listed in
// `required` are an error naming the word (`words` supplies names); other
// zero rows stay zero.
EmbeddingState normalize(const EmbeddingState& state, std::span<const WordId> required = {},
                         std::span<const std::string> words = {});

// Q (row-major D x D) maps source vectors into the target space: y ~ Q x.
struct AlignmentMap {
  std::size_t dim = 0;
  std::vector<double> q;
  double residual = 0.0;  // mean over pairs of |Q x - y|^2
  std::size_t pairs = 0;

  void apply(std::span<const double> x, std::span<double> out) const;
  AlignmentMap transposed() const;
  // Frobenius norm of Q^T Q - I.
  double orthogonality_error() const;

  void save(const std::filesystem::path& path) const;
  static AlignmentMap load(const std::filesystem::path& path);
};

// Orthogonal Procrustes on n row vectors: minimizes sum |Q x_i - y_i|^2.
// Throws DataError when n < D or the cross-covariance is rank-deficient.
AlignmentMap fit_procrustes(std::span<const double> x, std::span<const double> y,
                            std::size_t n, std::size_t dim);

// Fits on unit-normalized rho rows of slice 0 of the two (static) models.
AlignmentMap fit_alignment(const EmbeddingState& src, const EmbeddingState& tgt,
                           const ResolvedLexicon& lexicon,
                           std::span<const std::string> src_words = {});

// Left-multiplies every rho and alpha row by Q.
EmbeddingState apply_alignment(const AlignmentMap& map, const EmbeddingState& state);

struct CrossDriftRecord {
  std::string src_word;
  std::string tgt_word;
  double drift_src = 0.0;
  double drift_tgt = 0.0;
  double sim_first = 0.0;
  double sim_last = 0.0;
  double sim_drift = 0.0;
};

struct CrossDriftResult {
  std::vector<CrossDriftRecord> records;
  std::size_t skipped = 0;
};

// Drifts are Euclidean |rho^{t_last} - rho^{t0}| in each model; similarities
// are cosines of the unit-normalized rho vectors at t0 and t_last.
CrossDriftResult cross_drift(const EmbeddingState& src, const Vocabulary& src_vocab,
                             const EmbeddingState& tgt, const Vocabulary& tgt_vocab,
                             const BilingualLexicon& lexicon, std::size_t t0,
                             std::size_t t_last);

void write_records_tsv(const std::filesystem::path& path,
                       const std::vector<CrossDriftRecord>& records);
std::vector<CrossDriftRecord> read_records_tsv(const std::filesystem::path& path);

enum class BehaviorClass : std::uint8_t { co_drift, divergent, single_src, single_tgt, stable };
std::string_view to_string(BehaviorClass c);  // "1", "2", "3a", "3b", "4"

struct Thresholds {
  double drift_src = 0.0;
  double drift_tgt = 0.0;
  double sim_drift = 0.0;
};

// Means of each quantity over the records.
Thresholds mean_thresholds(const std::vector<CrossDriftRecord>& records);
// The q-quantile (0..1) of each quantity.
Thresholds percentile_thresholds(const std::vector<CrossDriftRecord>& records, double q);

// Both drifts above their cuts: class 2 if sim_first - sim_last exceeds the
// similarity cut, class 1 otherwise. Exactly one above: 3a/3b. Neither: 4.
BehaviorClass classify_record(const CrossDriftRecord& r, const Thresholds& cuts);

struct Classification {
  Thresholds cuts;
  std::vector<BehaviorClass> classes;
  std::array<double, 5> proportions{};  // indexed by BehaviorClass; sums to 1
};

Classification classify(const std::vector<CrossDriftRecord>& records,
                        std::optional<Thresholds> cuts = std::nullopt);

// Principal component projection of n row vectors onto the top two axes.
struct Projection {
  std::vector<std::array<double, 2>> coords;
  std::vector<double> eigenvalues;  // covariance eigenvalues, descending
};

Projection pca_2d(std::span<const double> rows, std::size_t n, std::size_t dim);

struct ProjectionModel {
  std::string label;
  const EmbeddingState* state = nullptr;
  const Vocabulary* vocab = nullptr;
};

struct ProjectedPoint {
  std::string model;
  std::string word;
  std::size_t t = 0;
  std::string focus;  // the focus word this point belongs to
  bool is_focus = false;
  double x = 0.0;
  double y = 0.0;
};

// Selects, for every model and slice, the unit-normalized rho of each focus
// word present in that model and of its m nearest neighbors, then projects
// all of them jointly. Throws DataError when no focus word is found or fewer
// than three vectors are selected.
std::vector<ProjectedPoint> project_2d(const std::vector<ProjectionModel>& models,
                                       std::span<const std::string> focus_words,
                                       std::size_t m);

void write_projection_tsv(const std::filesystem::path& path,
                          const std::vector<ProjectedPoint>& points);

}  // namespace driftlab

#endif  // DRIFTLAB_CROSSLINGUAL_HPP
