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

#include "driftlab/embedding_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "driftlab/io.hpp"

namespace driftlab {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

// Weight of the drift term anchoring slice t (t >= 1).
double drift_weight(const PriorConfig& prior, std::size_t t) {
  switch (prior.variant) {
    case Variant::dbe:
    case Variant::dbe_nc:
      return prior.lambda;
    case Variant::dbe_sc:
      return prior.time_weighted ? prior.lambda * static_cast<double>(t) : prior.lambda;
    case Variant::dbe_i:
      return 0.0;
  }
  return 0.0;
}

// Slice that rho^t is pulled towards by the drift term.
std::size_t drift_anchor(const PriorConfig& prior, std::size_t t) {
  return prior.variant == Variant::dbe ? t - 1 : 0;
}

// Adds the gradient of -(w/2)|rho^a - rho^b|^2 for word v and returns the
// term's value.
double add_pair_term(const EmbeddingState& state, SparseGradient& grad, WordId v,
                     std::size_t a, std::size_t b, double w) {
  const auto ra = state.rho(a, v);
  const auto rb = state.rho(b, v);
  grad.rho(b, v);  // insert first: inserting a row may invalidate spans
  auto ga = grad.rho(a, v);
  auto gb = grad.rho(b, v);
  double sq = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double d = ra[i] - rb[i];
    ga[i] -= w * d;
    gb[i] += w * d;
    sq += d * d;
  }
  return -0.5 * w * sq;
}

struct TouchedSets {
  std::vector<WordId> rho;    // distinct, first-seen order
  std::vector<WordId> alpha;  // distinct, first-seen order
};

TouchedSets touched_sets(const ContextBatch& batch, const NegativeDraws& negatives) {
  TouchedSets out;
  std::unordered_set<WordId> seen_rho, seen_alpha;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (seen_rho.insert(batch.centers[i]).second) out.rho.push_back(batch.centers[i]);
    if (negatives.k > 0) {
      for (WordId u : negatives.of(i)) {
        if (seen_rho.insert(u).second) out.rho.push_back(u);
      }
    }
    const auto ctx = batch.context(i);
    const auto mask = batch.context_mask(i);
    for (std::size_t j = 0; j < ctx.size(); ++j) {
      if (mask[j] && seen_alpha.insert(ctx[j]).second) out.alpha.push_back(ctx[j]);
    }
  }
  return out;
}

// Shared by touched_prior and gradients so that both evaluate the same terms
// in the same order. `grad` may be a scratch gradient when only the value is
// wanted.
double accumulate_touched_prior(const EmbeddingState& state, std::size_t t,
                                const TouchedSets& touched, const PriorConfig& prior,
                                SparseGradient& grad) {
  const std::size_t T = state.num_slices();
  double value = 0.0;
  for (WordId v : touched.alpha) {
    const auto a = state.alpha(v);
    axpy(-prior.lambda0, a, grad.alpha(v));
    value -= 0.5 * prior.lambda0 * dot(a, a);
  }
  for (WordId v : touched.rho) {
    if (t == 0) {
      const auto r = state.rho(0, v);
      axpy(-prior.lambda0, r, grad.rho(0, v));
      value -= 0.5 * prior.lambda0 * dot(r, r);
    }
    switch (prior.variant) {
      case Variant::dbe_i:
        break;
      case Variant::dbe:
        if (t >= 1) value += add_pair_term(state, grad, v, t, t - 1, drift_weight(prior, t));
        if (t + 1 < T) {
          value += add_pair_term(state, grad, v, t + 1, t, drift_weight(prior, t + 1));
        }
        break;
      case Variant::dbe_nc:
      case Variant::dbe_sc:
        if (t >= 1) {
          value += add_pair_term(state, grad, v, t, 0, drift_weight(prior, t));
        } else {
          for (std::size_t s = 1; s < T; ++s) {
            value += add_pair_term(state, grad, v, s, 0, drift_weight(prior, s));
          }
        }
        break;
    }
  }
  return value;
}

}  // namespace

// ---------------------------------------------------------------------------
// State

EmbeddingState::EmbeddingState(std::size_t num_slices, std::size_t vocab_size,
                               std::size_t dim)
    : slices_(num_slices),
      vocab_(vocab_size),
      dim_(dim),
      rho_(num_slices * vocab_size * dim, 0.0),
      alpha_(vocab_size * dim, 0.0) {}

bool EmbeddingState::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(rho_.begin(), rho_.end(), finite) &&
         std::all_of(alpha_.begin(), alpha_.end(), finite);
}

EmbeddingState random_state(std::size_t num_slices, std::size_t vocab_size,
                            std::size_t dim, double scale, std::uint64_t seed) {
  EmbeddingState state(num_slices, vocab_size, dim);
  Rng rng(seed);
  for (double& x : state.rho_data()) x = scale * rng.normal();
  for (double& x : state.alpha_data()) x = scale * rng.normal();
  return state;
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::dbe: return "dbe";
    case Variant::dbe_i: return "dbe-i";
    case Variant::dbe_nc: return "dbe-nc";
    case Variant::dbe_sc: return "dbe-sc";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  if (s == "dbe") return Variant::dbe;
  if (s == "dbe-i") return Variant::dbe_i;
  if (s == "dbe-nc") return Variant::dbe_nc;
  if (s == "dbe-sc") return Variant::dbe_sc;
  throw UsageError("unknown variant '" + std::string(s) + "' (dbe|dbe-i|dbe-nc|dbe-sc)");
}

void PriorConfig::validate() const {
  if (!(lambda0 > 0.0)) throw DataError("lambda0 must be > 0");
  if (variant != Variant::dbe_i && !(lambda > 0.0)) {
    throw DataError("lambda must be > 0 for variant " + std::string(to_string(variant)));
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// ---------------------------------------------------------------------------
// Negative sampling

NegativeSampler::NegativeSampler(std::vector<double> weights, int k, std::uint64_t seed)
    : weights_(std::move(weights)), k_(k), seed_(seed) {
  if (k < 0) throw DataError("negative count must be >= 0");
  if (weights_.size() < 2) throw DataError("negative sampling needs at least 2 words");
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("invalid sampling weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw DataError("sampling weights sum to zero");
  cdf_.resize(weights_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= sum;
    acc += weights_[i];
    cdf_[i] = acc;
  }
  cdf_.back() = 1.0;
}

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, double power, int k,
                                 std::uint64_t seed)
    : NegativeSampler(
          [&] {
            std::vector<double> w(counts.size());
            for (std::size_t i = 0; i < counts.size(); ++i) {
              w[i] = std::pow(static_cast<double>(counts[i]), power);
            }
            return w;
          }(),
          k, seed) {}

NegativeSampler NegativeSampler::from_weights(std::span<const double> weights, int k,
                                              std::uint64_t seed) {
  return NegativeSampler(std::vector<double>(weights.begin(), weights.end()), k, seed);
}

WordId NegativeSampler::draw(Rng& rng) const {
  const double u = rng.uniform();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<WordId>(it - cdf_.begin());
}

NegativeDraws draw_negatives(const ContextBatch& batch, const NegativeSampler& sampler,
                             Rng& rng) {
  NegativeDraws out;
  out.k = sampler.k();
  out.ids.reserve(batch.size() * static_cast<std::size_t>(sampler.k()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const WordId center = batch.centers[i];
    if (sampler.k() > 0 && sampler.weights().at(center) >= 1.0) {
      throw DataError("negative sampler puts all mass on a center word");
    }
    for (int j = 0; j < sampler.k(); ++j) {
      WordId u;
      do {
        u = sampler.draw(rng);
      } while (u == center);
      out.ids.push_back(u);
    }
  }
  return out;
}

NegativeDraws draw_negatives(const ContextBatch& batch, const NegativeSampler& sampler) {
  Rng rng(sampler.seed());
  return draw_negatives(batch, sampler, rng);
}

// ---------------------------------------------------------------------------
// Likelihood

void context_sum(const EmbeddingState& state, std::span<const WordId> context,
                 std::span<const std::uint8_t> mask, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < context.size(); ++j) {
    if (mask[j]) axpy(1.0, state.alpha(context[j]), out);
  }
}

double bernoulli_param(const EmbeddingState& state, std::size_t t, WordId v,
                       std::span<const WordId> context, std::span<const std::uint8_t> mask) {
  if (t >= state.num_slices() || v >= state.vocab_size()) {
    throw DataError("bernoulli_param: index out of range");
  }
  bool any = false;
  for (std::size_t j = 0; j < context.size(); ++j) {
    if (!mask[j]) continue;
    if (context[j] >= state.vocab_size()) throw DataError("bernoulli_param: context id out of range");
    any = true;
  }
  if (!any) throw DataError("bernoulli_param: every context position is masked");
  std::vector<double> s(state.dim());
  context_sum(state, context, mask, s);
  return sigmoid(dot(state.rho(t, v), s));
}

void validate_batch(const EmbeddingState& state, const ContextBatch& batch) {
  const std::size_t w = static_cast<std::size_t>(batch.width());
  if (batch.slice >= state.num_slices()) throw DataError("batch slice out of range");
  if (batch.contexts.size() != batch.size() * w || batch.mask.size() != batch.size() * w) {
    throw DataError("batch context arrays have the wrong size");
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.centers[i] >= state.vocab_size()) throw DataError("batch center id out of range");
    bool any = false;
    for (std::size_t j = 0; j < w; ++j) {
      if (!batch.mask[i * w + j]) continue;
      any = true;
      if (batch.contexts[i * w + j] >= state.vocab_size()) {
        throw DataError("batch context id out of range");
      }
    }
    if (!any) throw DataError("batch example with fully masked context");
  }
}

double loss_pos(const EmbeddingState& state, const ContextBatch& batch) {
  validate_batch(state, batch);
  std::vector<double> s(state.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    context_sum(state, batch.context(i), batch.context_mask(i), s);
    total += log_sigmoid(dot(state.rho(batch.slice, batch.centers[i]), s));
  }
  return total;
}

double loss_neg(const EmbeddingState& state, const ContextBatch& batch,
                const NegativeDraws& negatives) {
  validate_batch(state, batch);
  if (negatives.ids.size() != batch.size() * static_cast<std::size_t>(negatives.k)) {
    throw DataError("negative draws do not match the batch");
  }
  std::vector<double> s(state.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size() && negatives.k > 0; ++i) {
    context_sum(state, batch.context(i), batch.context_mask(i), s);
    for (WordId u : negatives.of(i)) {
      // log(1 - sigmoid(x)) = log_sigmoid(-x)
      total += log_sigmoid(-dot(state.rho(batch.slice, u), s));
    }
  }
  return total;
}

double loss_neg(const EmbeddingState& state, const ContextBatch& batch,
                const NegativeSampler& sampler) {
  return loss_neg(state, batch, draw_negatives(batch, sampler));
}

double loss_prior(const EmbeddingState& state, const PriorConfig& prior) {
  const std::size_t T = state.num_slices();
  const std::size_t V = state.vocab_size();
  double value = 0.0;
  for (WordId v = 0; v < V; ++v) {
    const auto a = state.alpha(v);
    value -= 0.5 * prior.lambda0 * dot(a, a);
  }
  if (T == 0) return value;
  for (WordId v = 0; v < V; ++v) {
    const auto r = state.rho(0, v);
    value -= 0.5 * prior.lambda0 * dot(r, r);
  }
  return value + loss_drift_prior(state, prior);
}

double loss_drift_prior(const EmbeddingState& state, const PriorConfig& prior) {
  if (prior.variant == Variant::dbe_i) return 0.0;
  double value = 0.0;
  for (WordId v = 0; v < state.vocab_size(); ++v) {
    for (std::size_t t = 1; t < state.num_slices(); ++t) {
      const double w = drift_weight(prior, t);
      value -= 0.5 * w *
               squared_distance(state.rho(t, v), state.rho(drift_anchor(prior, t), v));
    }
  }
  return value;
}

LossBreakdown loss_breakdown(const EmbeddingState& state, const ContextBatch& batch,
                             const NegativeDraws& negatives, const PriorConfig& prior) {
  return {loss_pos(state, batch), loss_neg(state, batch, negatives), loss_prior(state, prior)};
}

// ---------------------------------------------------------------------------
// Gradients

std::span<double> SparseGradient::rho(std::size_t t, WordId v) {
  auto [it, inserted] = rho_index_.try_emplace(key(t, v), rho_keys_.size());
  if (inserted) {
    rho_keys_.emplace_back(t, v);
    rho_values_.resize(rho_values_.size() + dim_, 0.0);
  }
  return {rho_values_.data() + it->second * dim_, dim_};
}

std::span<double> SparseGradient::alpha(WordId v) {
  auto [it, inserted] = alpha_index_.try_emplace(v, alpha_keys_.size());
  if (inserted) {
    alpha_keys_.push_back(v);
    alpha_values_.resize(alpha_values_.size() + dim_, 0.0);
  }
  return {alpha_values_.data() + it->second * dim_, dim_};
}

const double* SparseGradient::find_rho(std::size_t t, WordId v) const {
  auto it = rho_index_.find(key(t, v));
  return it == rho_index_.end() ? nullptr : rho_values_.data() + it->second * dim_;
}

const double* SparseGradient::find_alpha(WordId v) const {
  auto it = alpha_index_.find(v);
  return it == alpha_index_.end() ? nullptr : alpha_values_.data() + it->second * dim_;
}

double SparseGradient::squared_norm() const {
  double s = 0.0;
  for (double x : rho_values_) s += x * x;
  for (double x : alpha_values_) s += x * x;
  return s;
}

bool SparseGradient::all_finite() const {
  auto finite = [](double x) { return std::isfinite(x); };
  return std::all_of(rho_values_.begin(), rho_values_.end(), finite) &&
         std::all_of(alpha_values_.begin(), alpha_values_.end(), finite);
}

void SparseGradient::scale(double factor) {
  for (double& x : rho_values_) x *= factor;
  for (double& x : alpha_values_) x *= factor;
}

double touched_prior(const EmbeddingState& state, const ContextBatch& batch,
                     const NegativeDraws& negatives, const PriorConfig& prior) {
  SparseGradient scratch(state.dim());
  return accumulate_touched_prior(state, batch.slice, touched_sets(batch, negatives), prior,
                                  scratch);
}

double batch_objective(const EmbeddingState& state, const ContextBatch& batch,
                       const NegativeDraws& negatives, const PriorConfig& prior,
                       double prior_scale) {
  return loss_pos(state, batch) + loss_neg(state, batch, negatives) +
         prior_scale * touched_prior(state, batch, negatives, prior);
}

SparseGradient gradients(const EmbeddingState& state, const ContextBatch& batch,
                         const NegativeDraws& negatives, const PriorConfig& prior,
                         double prior_scale, LossBreakdown* values) {
  LossBreakdown acc;
  validate_batch(state, batch);
  if (negatives.ids.size() != batch.size() * static_cast<std::size_t>(negatives.k)) {
    throw DataError("negative draws do not match the batch");
  }
  const std::size_t D = state.dim();
  const std::size_t t = batch.slice;
  SparseGradient grad(D);
  std::vector<double> s(D), ctx_grad(D);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto ctx = batch.context(i);
    const auto mask = batch.context_mask(i);
    context_sum(state, ctx, mask, s);
    std::fill(ctx_grad.begin(), ctx_grad.end(), 0.0);

    const WordId v = batch.centers[i];
    const auto rv = state.rho(t, v);
    // d/dx log sigmoid(x) = 1 - sigmoid(x)
    const double xp = dot(rv, s);
    acc.l_pos += log_sigmoid(xp);
    const double gp = 1.0 - sigmoid(xp);
    axpy(gp, s, grad.rho(t, v));
    axpy(gp, rv, ctx_grad);

    if (negatives.k > 0) {
      for (WordId u : negatives.of(i)) {
        const auto ru = state.rho(t, u);
        // d/dx log sigmoid(-x) = -sigmoid(x)
        const double xn = dot(ru, s);
        acc.l_neg += log_sigmoid(-xn);
        const double gn = -sigmoid(xn);
        axpy(gn, s, grad.rho(t, u));
        axpy(gn, ru, ctx_grad);
      }
    }
    for (std::size_t j = 0; j < ctx.size(); ++j) {
      if (mask[j]) axpy(1.0, ctx_grad, grad.alpha(ctx[j]));
    }
  }

  if (prior_scale != 0.0) {
    SparseGradient prior_grad(D);
    acc.l_prior = prior_scale * accumulate_touched_prior(
                                    state, t, touched_sets(batch, negatives), prior, prior_grad);
    for (std::size_t r = 0; r < prior_grad.rho_rows(); ++r) {
      const auto [pt, pv] = prior_grad.rho_keys()[r];
      axpy(prior_scale, prior_grad.rho_row(r), grad.rho(pt, pv));
    }
    for (std::size_t r = 0; r < prior_grad.alpha_rows(); ++r) {
      axpy(prior_scale, prior_grad.alpha_row(r), grad.alpha(prior_grad.alpha_keys()[r]));
    }
  }
  if (values != nullptr) *values = acc;
  return grad;
}

SparseGradient gradients(const EmbeddingState& state, const ContextBatch& batch,
                         const NegativeSampler& sampler, const PriorConfig& prior,
                         double prior_scale, LossBreakdown* values) {
  return gradients(state, batch, draw_negatives(batch, sampler), prior, prior_scale, values);
}

// ---------------------------------------------------------------------------
// Text format

namespace {

void write_row(std::ostream& out, std::span<const double> row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) out << ' ';
    out << io::format_double(row[i]);
  }
  out << '\n';
}

void parse_row(std::string_view text, std::span<double> row, const std::string& where) {
  auto fields = io::split(io::trim(text), ' ');
  if (fields.size() != row.size()) {
    throw DataError(where + ": expected " + std::to_string(row.size()) + " values");
  }
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = io::parse_double(fields[i]);
}

}  // namespace

void save_embeddings_text(const EmbeddingState& state, std::span<const std::string> words,
                          const std::filesystem::path& rho_path,
                          const std::filesystem::path& alpha_path) {
  if (words.size() != state.vocab_size()) {
    throw DataError("save_embeddings_text: word list does not match V");
  }
  {
    auto out = io::open_out(rho_path);
    out << state.vocab_size() << ' ' << state.dim() << ' ' << state.num_slices() << '\n';
    for (std::size_t t = 0; t < state.num_slices(); ++t) {
      for (WordId v = 0; v < state.vocab_size(); ++v) {
        out << words[v] << '\t' << t << '\t';
        write_row(out, state.rho(t, v));
      }
    }
  }
  auto out = io::open_out(alpha_path);
  out << state.vocab_size() << ' ' << state.dim() << '\n';
  for (WordId v = 0; v < state.vocab_size(); ++v) {
    out << words[v] << '\t';
    write_row(out, state.alpha(v));
  }
}

EmbeddingState load_embeddings_text(std::span<const std::string> words,
                                    const std::filesystem::path& rho_path,
                                    const std::filesystem::path& alpha_path) {
  auto in = io::open_in(rho_path);
  std::size_t V = 0, D = 0, T = 0;
  std::string line;
  if (!std::getline(in, line) || !(std::istringstream(line) >> V >> D >> T)) {
    throw DataError(rho_path.string() + ": expected header 'V D T'");
  }
  if (V != words.size()) throw DataError(rho_path.string() + ": V does not match vocabulary");
  EmbeddingState state(T, V, D);
  for (std::size_t row = 0; row < T * V; ++row) {
    const std::string where = rho_path.string() + ":" + std::to_string(row + 2);
    if (!std::getline(in, line)) throw DataError(where + ": missing row");
    auto f = io::split(line, '\t');
    if (f.size() != 3) throw DataError(where + ": expected 'word<TAB>t<TAB>values'");
    const std::size_t t = std::stoul(std::string(f[1]));
    if (t >= T || f[0] != words[row % V]) throw DataError(where + ": unexpected word or slice");
    parse_row(f[2], state.rho(t, static_cast<WordId>(row % V)), where);
  }
  auto ain = io::open_in(alpha_path);
  std::size_t V2 = 0, D2 = 0;
  if (!std::getline(ain, line) || !(std::istringstream(line) >> V2 >> D2) || V2 != V ||
      D2 != D) {
    throw DataError(alpha_path.string() + ": header does not match " + rho_path.string());
  }
  for (WordId v = 0; v < V; ++v) {
    const std::string where = alpha_path.string() + ":" + std::to_string(v + 2);
    if (!std::getline(ain, line)) throw DataError(where + ": missing row");
    auto f = io::split(line, '\t');
    if (f.size() != 2 || f[0] != words[v]) throw DataError(where + ": unexpected row");
    parse_row(f[1], state.alpha(v), where);
  }
  return state;
}

}  // namespace driftlab
