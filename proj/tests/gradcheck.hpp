// Finite-difference oracle for the model gradients. Independent of the
// analytic path: it only evaluates objective values.

#ifndef DRIFTLAB_TESTS_GRADCHECK_HPP
#define DRIFTLAB_TESTS_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>

#include "driftlab/embedding_model.hpp"

namespace driftlab::testing {

struct RandomInstance {
  EmbeddingState state;
  ContextBatch batch;
  NegativeDraws negatives;
  PriorConfig prior;
  double prior_scale = 1.0;
};

inline RandomInstance random_instance(std::uint64_t seed, Variant variant, std::size_t V = 20,
                                      std::size_t D = 5, std::size_t T = 4, int C = 2,
                                      int k = 3, std::size_t n = 6) {
  Rng rng(seed);
  RandomInstance inst;
  inst.state = random_state(T, V, D, 0.5, rng.next());
  inst.prior.variant = variant;
  inst.prior.lambda = 0.5 + 1.5 * rng.uniform();
  inst.prior.lambda0 = 0.1 + 0.9 * rng.uniform();
  inst.prior_scale = 0.2 + 0.8 * rng.uniform();
  inst.batch.window = C;
  inst.batch.slice = static_cast<std::uint32_t>(rng.below(T));
  for (std::size_t i = 0; i < n; ++i) {
    inst.batch.centers.push_back(static_cast<WordId>(rng.below(V)));
    bool any = false;
    for (int j = 0; j < 2 * C; ++j) {
      inst.batch.contexts.push_back(static_cast<WordId>(rng.below(V)));
      const bool m = rng.uniform() < 0.75;
      inst.batch.mask.push_back(m ? 1 : 0);
      any = any || m;
    }
    if (!any) inst.batch.mask.back() = 1;
  }
  std::vector<std::uint64_t> counts(V);
  for (auto& c : counts) c = 1 + rng.below(50);
  NegativeSampler sampler(counts, 0.75, k, rng.next());
  inst.negatives = draw_negatives(inst.batch, sampler);
  return inst;
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Central difference of `f` with respect to one parameter entry.
inline double central_difference(EmbeddingState& state, double& entry, double h,
                                 const std::function<double(const EmbeddingState&)>& f) {
  const double saved = entry;
  entry = saved + h;
  const double up = f(state);
  entry = saved - h;
  const double down = f(state);
  entry = saved;
  return (up - down) / (2.0 * h);
}

struct GradCheckResult {
  std::size_t entries = 0;
  double max_rel_error = 0.0;
};

// Checks every entry of every row present in `grad` against central
// differences of `f`.
inline GradCheckResult check_rows(EmbeddingState& state, const SparseGradient& grad,
                                  const std::function<double(const EmbeddingState&)>& f,
                                  double h = 1e-5) {
  GradCheckResult r;
  const std::size_t D = state.dim();
  for (std::size_t row = 0; row < grad.rho_rows(); ++row) {
    const auto [t, v] = grad.rho_keys()[row];
    for (std::size_t d = 0; d < D; ++d) {
      const double fd = central_difference(state, state.rho(t, v)[d], h, f);
      r.max_rel_error = std::max(r.max_rel_error, relative_error(grad.rho_row(row)[d], fd));
      ++r.entries;
    }
  }
  for (std::size_t row = 0; row < grad.alpha_rows(); ++row) {
    const WordId v = grad.alpha_keys()[row];
    for (std::size_t d = 0; d < D; ++d) {
      const double fd = central_difference(state, state.alpha(v)[d], h, f);
      r.max_rel_error = std::max(r.max_rel_error, relative_error(grad.alpha_row(row)[d], fd));
      ++r.entries;
    }
  }
  return r;
}

// Largest |finite difference| over rows absent from `grad`; should be 0.
inline double max_absent_derivative(EmbeddingState& state, const SparseGradient& grad,
                                    const std::function<double(const EmbeddingState&)>& f,
                                    double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t t = 0; t < state.num_slices(); ++t) {
    for (WordId v = 0; v < state.vocab_size(); ++v) {
      if (grad.find_rho(t, v) != nullptr) continue;
      worst = std::max(worst, std::abs(central_difference(state, state.rho(t, v)[0], h, f)));
    }
  }
  for (WordId v = 0; v < state.vocab_size(); ++v) {
    if (grad.find_alpha(v) != nullptr) continue;
    worst = std::max(worst, std::abs(central_difference(state, state.alpha(v)[0], h, f)));
  }
  return worst;
}

}  // namespace driftlab::testing

#endif  // DRIFTLAB_TESTS_GRADCHECK_HPP
