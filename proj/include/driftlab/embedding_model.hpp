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

// Dynamic Bernoulli embeddings.
//
// A center word v at slice t with context c is observed with probability
//
//   p = sigmoid(rho[t][v] . sum_{j in c} alpha[c_j])
//
// where rho holds one target vector per (slice, word) and alpha one context
// vector per word shared by all slices. Training maximizes
//
//   L = L_pos + L_neg + L_prior
//
// with L_pos the log-likelihood of observed centers, L_neg the log-likelihood
// of rejecting k sampled negative centers under the same context, and L_prior
// a Gaussian log-prior whose drift term depends on the variant:
//
//   all:    -(lambda0/2) sum_v |alpha_v|^2 - (lambda0/2) sum_v |rho_v^0|^2
//   DBE:    -(lambda/2)   sum_{v,t>=1} |rho_v^t - rho_v^{t-1}|^2
//   DBE-I:  (none)
//   DBE-NC: -(lambda/2)   sum_{v,t>=1} |rho_v^t - rho_v^0|^2
//   DBE-SC: -(lambda*t/2) sum_{v,t>=1} |rho_v^t - rho_v^0|^2

#ifndef DRIFTLAB_EMBEDDING_MODEL_HPP
#define DRIFTLAB_EMBEDDING_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "driftlab/common.hpp"
#include "driftlab/corpus.hpp"
#include "driftlab/random.hpp"

namespace driftlab {

class EmbeddingState {
 public:
  EmbeddingState() = default;
  EmbeddingState(std::size_t num_slices, std::size_t vocab_size, std::size_t dim);

  std::size_t num_slices() const { return slices_; }
  std::size_t vocab_size() const { return vocab_; }
  std::size_t dim() const { return dim_; }

  std::span<double> rho(std::size_t t, WordId v) {
    return {rho_.data() + (t * vocab_ + v) * dim_, dim_};
  }
  std::span<const double> rho(std::size_t t, WordId v) const {
    return {rho_.data() + (t * vocab_ + v) * dim_, dim_};
  }
  std::span<double> alpha(WordId v) { return {alpha_.data() + v * dim_, dim_}; }
  std::span<const double> alpha(WordId v) const { return {alpha_.data() + v * dim_, dim_}; }

  std::vector<double>& rho_data() { return rho_; }
  const std::vector<double>& rho_data() const { return rho_; }
  std::vector<double>& alpha_data() { return alpha_; }
  const std::vector<double>& alpha_data() const { return alpha_; }

  bool all_finite() const;

  bool operator==(const EmbeddingState&) const = default;

 private:
  std::size_t slices_ = 0;
  std::size_t vocab_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> rho_;
  std::vector<double> alpha_;
};

// i.i.d. N(0, scale^2) entries for rho (every slice independently) and alpha.
EmbeddingState random_state(std::size_t num_slices, std::size_t vocab_size,
                            std::size_t dim, double scale, std::uint64_t seed);

enum class Variant : std::uint8_t { dbe, dbe_i, dbe_nc, dbe_sc };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct PriorConfig {
  Variant variant = Variant::dbe;
  double lambda = 1.0;
  double lambda0 = 1e-3;
  // DBE-SC only: when false the per-slice weight t is replaced by 1, which
  // makes the variant coincide with DBE-NC.
  bool time_weighted = true;

  void validate() const;
};

struct LossBreakdown {
  double l_pos = 0.0;
  double l_neg = 0.0;
  double l_prior = 0.0;
  double total() const { return l_pos + l_neg + l_prior; }
};

double sigmoid(double x);
// log(sigmoid(x)) without overflow or cancellation.
double log_sigmoid(double x);

// Unigram counts raised to `power`, renormalized; k negatives per positive.
class NegativeSampler {
 public:
  NegativeSampler(std::span<const std::uint64_t> counts, double power, int k,
                  std::uint64_t seed);
  // Sampler with explicit (unnormalized) weights.
  static NegativeSampler from_weights(std::span<const double> weights, int k,
                                      std::uint64_t seed);

  int k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t vocab_size() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }

  WordId draw(Rng& rng) const;

 private:
  NegativeSampler(std::vector<double> weights, int k, std::uint64_t seed);

  std::vector<double> weights_;
  std::vector<double> cdf_;
  int k_;
  std::uint64_t seed_;
};

// Negative center ids, k per positive (row-major n x k). Draws equal to the
// true center are redrawn.
struct NegativeDraws {
  int k = 0;
  std::vector<WordId> ids;
  std::span<const WordId> of(std::size_t i) const {
    return {ids.data() + i * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
  }
};

NegativeDraws draw_negatives(const ContextBatch& batch, const NegativeSampler& sampler,
                             Rng& rng);
// Replayable: uses a fresh Rng seeded from sampler.seed().
NegativeDraws draw_negatives(const ContextBatch& batch, const NegativeSampler& sampler);

// Sum of alpha over the unmasked context words.
void context_sum(const EmbeddingState& state, std::span<const WordId> context,
                 std::span<const std::uint8_t> mask, std::span<double> out);

// Throws DataError when every context position is masked.
double bernoulli_param(const EmbeddingState& state, std::size_t t, WordId v,
                       std::span<const WordId> context, std::span<const std::uint8_t> mask);

// Checks ids and shape against the state; throws DataError.
void validate_batch(const EmbeddingState& state, const ContextBatch& batch);

double loss_pos(const EmbeddingState& state, const ContextBatch& batch);
double loss_neg(const EmbeddingState& state, const ContextBatch& batch,
                const NegativeDraws& negatives);
double loss_neg(const EmbeddingState& state, const ContextBatch& batch,
                const NegativeSampler& sampler);
// Exact prior over the full parameter set.
double loss_prior(const EmbeddingState& state, const PriorConfig& prior);
// The drift part of the prior alone (zero for DBE-I).
double loss_drift_prior(const EmbeddingState& state, const PriorConfig& prior);

LossBreakdown loss_breakdown(const EmbeddingState& state, const ContextBatch& batch,
                             const NegativeDraws& negatives, const PriorConfig& prior);

// Gradient rows keyed by (slice, word) for rho and by word for alpha. Rows
// that the batch does not reach are absent.
class SparseGradient {
 public:
  explicit SparseGradient(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  // Returns the row, creating it zero-filled if absent. Creating a row
  // invalidates spans previously returned.
  std::span<double> rho(std::size_t t, WordId v);
  std::span<double> alpha(WordId v);
  const double* find_rho(std::size_t t, WordId v) const;
  const double* find_alpha(WordId v) const;

  std::size_t rho_rows() const { return rho_keys_.size(); }
  std::size_t alpha_rows() const { return alpha_keys_.size(); }
  // Keys in insertion order.
  const std::vector<std::pair<std::size_t, WordId>>& rho_keys() const { return rho_keys_; }
  const std::vector<WordId>& alpha_keys() const { return alpha_keys_; }
  std::span<const double> rho_row(std::size_t index) const {
    return {rho_values_.data() + index * dim_, dim_};
  }
  std::span<const double> alpha_row(std::size_t index) const {
    return {alpha_values_.data() + index * dim_, dim_};
  }

  double squared_norm() const;
  bool all_finite() const;
  void scale(double factor);

 private:
  static std::uint64_t key(std::size_t t, WordId v) {
    return (static_cast<std::uint64_t>(t) << 32) | v;
  }

  std::size_t dim_;
  std::unordered_map<std::uint64_t, std::size_t> rho_index_;
  std::unordered_map<WordId, std::size_t> alpha_index_;
  std::vector<std::pair<std::size_t, WordId>> rho_keys_;
  std::vector<WordId> alpha_keys_;
  std::vector<double> rho_values_;
  std::vector<double> alpha_values_;
};

// Stochastic objective for one batch with fixed negatives:
//
//   L_pos(batch) + L_neg(batch) + prior_scale * L_prior|touched
//
// where L_prior|touched keeps the prior terms that contain a row touched by
// the batch: rho rows of centers and negatives at the batch slice, alpha rows
// of unmasked context words. For each touched row its derivative equals the
// derivative of the full prior.
double batch_objective(const EmbeddingState& state, const ContextBatch& batch,
                       const NegativeDraws& negatives, const PriorConfig& prior,
                       double prior_scale = 1.0);

// Prior part of batch_objective (unscaled).
double touched_prior(const EmbeddingState& state, const ContextBatch& batch,
                     const NegativeDraws& negatives, const PriorConfig& prior);

// Exact gradient of batch_objective. Rows present: touched rows, plus the
// drift-coupled rows rho^{t-1}, rho^{t+1} (DBE) or rho^0 (DBE-NC/SC; at t = 0
// every later slice of a touched word). When `values` is given it receives
// the three terms of the objective (l_prior already scaled).
SparseGradient gradients(const EmbeddingState& state, const ContextBatch& batch,
                         const NegativeDraws& negatives, const PriorConfig& prior,
                         double prior_scale = 1.0, LossBreakdown* values = nullptr);
SparseGradient gradients(const EmbeddingState& state, const ContextBatch& batch,
                         const NegativeSampler& sampler, const PriorConfig& prior,
                         double prior_scale = 1.0, LossBreakdown* values = nullptr);

// Text formats: rho as "V D T" header then "word<TAB>t<TAB>floats" rows
// (floats space-separated); alpha as "V D" header then "word<TAB>floats".
void save_embeddings_text(const EmbeddingState& state, std::span<const std::string> words,
                          const std::filesystem::path& rho_path,
                          const std::filesystem::path& alpha_path);
EmbeddingState load_embeddings_text(std::span<const std::string> words,
                                    const std::filesystem::path& rho_path,
                                    const std::filesystem::path& alpha_path);

}  // namespace driftlab

#endif  // DRIFTLAB_EMBEDDING_MODEL_HPP
