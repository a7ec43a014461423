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

#ifndef DRIFTLAB_DRIFT_ANALYSIS_HPP
#define DRIFTLAB_DRIFT_ANALYSIS_HPP

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/common.hpp"
#include "driftlab/embedding_model.hpp"

namespace driftlab {

enum class DriftMetric : std::uint8_t { euclidean, cosine };
DriftMetric parse_drift_metric(std::string_view s);

// d(v, t) is the distance between rho_v^t and rho_v^{t0}.
struct DriftReport {
  std::size_t num_slices = 0;
  std::size_t vocab_size = 0;
  std::size_t t0 = 0;
  DriftMetric metric = DriftMetric::euclidean;
  std::vector<double> d;           // vocab_size x num_slices, row-major by word
  std::vector<double> total;       // d(v, T-1)
  std::vector<double> mean;        // mean of d(v, t) over t != t0
  std::vector<double> normalized;  // mean / total; NaN when total is 0

  double at(WordId v, std::size_t t) const { return d[v * num_slices + t]; }
};

DriftReport drift_report(const EmbeddingState& state, std::size_t t0,
                         DriftMetric metric = DriftMetric::euclidean);

// Word ids by decreasing total drift, ties by increasing id.
std::vector<WordId> top_drifting(const DriftReport& report, std::size_t k);

struct NormalizedDriftSummary {
  std::size_t k = 0;
  double mean_normalized = 0.0;  // NaN if every top-k word has zero total drift
  std::size_t used = 0;
  std::size_t excluded = 0;  // top-k words with zero total drift
};

// For each k, the mean of the per-word normalized drift over the k words
// with the largest total drift. Throws DataError when every word has zero
// total drift.
std::vector<NormalizedDriftSummary> normalized_drift_summary(const DriftReport& report,
                                                             std::span<const std::size_t> ks);

enum class BinScale : std::uint8_t { linear, log };
BinScale parse_bin_scale(std::string_view s);

struct Histogram {
  std::size_t t = 0;
  std::vector<double> edges;  // bins + 1 boundaries
  std::vector<std::size_t> counts;
};

// Distribution of d(., t) over all words. Linear bins span [0, max]; log
// bins put exact zeros and values below the smallest positive drift in bin
// 0 and space the remaining edges geometrically up to the maximum.
Histogram drift_histogram(const DriftReport& report, std::size_t t, std::size_t bins = 60,
                          BinScale scale = BinScale::linear);

double median_drift(const DriftReport& report, std::size_t t);

struct Neighbor {
  WordId id = 0;
  double cosine = 0.0;
};

// The m words whose rho^t has the largest cosine with the query's, query
// excluded, ties by id. Throws DataError if the query vector is zero;
// zero-norm candidates get cosine 0.
std::vector<Neighbor> nearest_neighbors(const EmbeddingState& state, WordId word,
                                        std::size_t t, std::size_t m);

// TSV writers. `words` maps ids to strings.
void write_drift_report_tsv(const std::filesystem::path& path, const DriftReport& report,
                            std::span<const std::string> words);
void write_top_drifting_tsv(const std::filesystem::path& path, const DriftReport& report,
                            std::span<const WordId> ranked, std::span<const std::string> words);
void write_histograms_tsv(const std::filesystem::path& path,
                          const std::vector<Histogram>& histograms);

}  // namespace driftlab

#endif  // DRIFTLAB_DRIFT_ANALYSIS_HPP
