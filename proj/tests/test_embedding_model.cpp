#include <cmath>
#include <set>

#include "doctest.h"
#include "driftlab/embedding_model.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace driftlab;
using driftlab::testing::random_instance;

namespace {

// Naive logistic, only used by the oracles below.
double naive_log_p(double x) { return std::log(1.0 / (1.0 + std::exp(-x))); }

double naive_context_dot(const EmbeddingState& s, std::size_t t, WordId v,
                         std::span<const WordId> ctx, std::span<const std::uint8_t> mask) {
  double total = 0.0;
  for (std::size_t d = 0; d < s.dim(); ++d) {
    double sum = 0.0;
    for (std::size_t j = 0; j < ctx.size(); ++j) {
      if (mask[j]) sum += s.alpha(ctx[j])[d];
    }
    total += s.rho(t, v)[d] * sum;
  }
  return total;
}

double norm2(std::span<const double> a) {
  double s = 0;
  for (double x : a) s += x * x;
  return s;
}

double diff2(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Term-by-term transcription of the four priors.
double prior_oracle(const EmbeddingState& s, const PriorConfig& p) {
  double out = 0.0;
  for (WordId v = 0; v < s.vocab_size(); ++v) {
    out -= p.lambda0 / 2 * norm2(s.alpha(v));
    out -= p.lambda0 / 2 * norm2(s.rho(0, v));
    for (std::size_t t = 1; t < s.num_slices(); ++t) {
      switch (p.variant) {
        case Variant::dbe: out -= p.lambda / 2 * diff2(s.rho(t, v), s.rho(t - 1, v)); break;
        case Variant::dbe_i: break;
        case Variant::dbe_nc: out -= p.lambda / 2 * diff2(s.rho(t, v), s.rho(0, v)); break;
        case Variant::dbe_sc:
          out -= p.lambda * static_cast<double>(t) / 2 * diff2(s.rho(t, v), s.rho(0, v));
          break;
      }
    }
  }
  return out;
}

ContextBatch one_example(std::uint32_t t, WordId center, std::vector<WordId> ctx) {
  ContextBatch b;
  b.slice = t;
  b.window = static_cast<int>(ctx.size() / 2);
  b.centers = {center};
  b.contexts = ctx;
  b.mask.assign(ctx.size(), 1);
  return b;
}

const Variant kVariants[] = {Variant::dbe, Variant::dbe_i, Variant::dbe_nc, Variant::dbe_sc};

}  // namespace

TEST_CASE("log_sigmoid is stable and consistent") {
  for (double x : {-800.0, -30.0, -1.0, 0.0, 0.5, 30.0, 800.0}) {
    CHECK(std::isfinite(log_sigmoid(x)));
    CHECK(log_sigmoid(x) <= 0.0);
  }
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(log_sigmoid(0.0) == doctest::Approx(std::log(0.5)));
  CHECK(sigmoid(3.0) + sigmoid(-3.0) == doctest::Approx(1.0));
}

TEST_CASE("bernoulli_param") {
  EmbeddingState zero(1, 3, 2);
  std::vector<WordId> ctx{1, 2};
  std::vector<std::uint8_t> mask{1, 1};
  CHECK(bernoulli_param(zero, 0, 0, ctx, mask) == 0.5);

  EmbeddingState s(1, 3, 1);
  s.rho(0, 0)[0] = 1.0;
  s.alpha(1)[0] = 2.0;
  s.alpha(2)[0] = 3.0;
  CHECK(bernoulli_param(s, 0, 0, ctx, mask) == doctest::Approx(0.9933071490757153).epsilon(1e-15));

  // Masked positions do not contribute.
  std::vector<std::uint8_t> half{1, 0};
  CHECK(bernoulli_param(s, 0, 0, ctx, half) == doctest::Approx(sigmoid(2.0)));

  // Negating rho maps p to 1 - p.
  auto r = random_state(1, 4, 3, 1.0, 8);
  const double p = bernoulli_param(r, 0, 1, ctx, mask);
  for (double& x : r.rho(0, 1)) x = -x;
  CHECK(bernoulli_param(r, 0, 1, ctx, mask) == doctest::Approx(1.0 - p));

  std::vector<std::uint8_t> none{0, 0};
  CHECK_THROWS_AS(bernoulli_param(s, 0, 0, ctx, none), DataError);
}

TEST_CASE("bernoulli_param bounds and monotonicity") {
  Rng rng(4);
  EmbeddingState s(1, 2, 1);
  s.alpha(1)[0] = 1.0;
  std::vector<WordId> ctx{1};
  std::vector<std::uint8_t> mask{1};
  double prev = -1.0;
  // Beyond |x| ~ 37 the logistic rounds to exactly 0 or 1 in doubles.
  for (double x = -30.0; x <= 30.0; x += 0.5) {
    s.rho(0, 0)[0] = x;
    const double p = bernoulli_param(s, 0, 0, ctx, mask);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("loss_pos") {
  EmbeddingState zero(1, 3, 2);
  auto b = one_example(0, 0, {1, 2});
  CHECK(loss_pos(zero, b) == std::log(0.5));

  ContextBatch twice = b;
  twice.centers.push_back(0);
  twice.contexts.insert(twice.contexts.end(), {1, 2});
  twice.mask.insert(twice.mask.end(), {1, 1});
  auto r = random_state(1, 3, 2, 1.0, 2);
  CHECK(loss_pos(r, twice) == 2.0 * loss_pos(r, b));

  // Direct summation oracle on a random tiny state.
  auto inst = random_instance(17, Variant::dbe, 10, 3, 2, 2, 2, 4);
  double oracle = 0.0;
  for (std::size_t i = 0; i < inst.batch.size(); ++i) {
    oracle += naive_log_p(naive_context_dot(inst.state, inst.batch.slice, inst.batch.centers[i],
                                            inst.batch.context(i), inst.batch.context_mask(i)));
  }
  CHECK(std::abs(loss_pos(inst.state, inst.batch) - oracle) <= 1e-12);
  CHECK(loss_pos(inst.state, inst.batch) < 0.0);
}

TEST_CASE("loss_neg") {
  EmbeddingState zero(1, 5, 2);
  ContextBatch b = one_example(0, 0, {1, 2});
  b.centers.push_back(3);
  b.contexts.insert(b.contexts.end(), {4, 1});
  b.mask.insert(b.mask.end(), {1, 1});
  std::vector<std::uint64_t> counts{5, 4, 3, 2, 1};
  NegativeSampler sampler(counts, 0.75, 3, 99);
  CHECK(loss_neg(zero, b, sampler) == doctest::Approx(2 * 3 * std::log(0.5)));

  NegativeSampler none(counts, 0.75, 0, 99);
  CHECK(loss_neg(zero, b, none) == 0.0);

  // Replay oracle: redraw with the same seed and collision rule.
  auto r = random_state(1, 5, 2, 1.0, 3);
  Rng replay(sampler.seed());
  double oracle = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (int j = 0; j < sampler.k(); ++j) {
      WordId u;
      do {
        u = sampler.draw(replay);
      } while (u == b.centers[i]);
      const double x = naive_context_dot(r, 0, u, b.context(i), b.context_mask(i));
      oracle += std::log(1.0 - 1.0 / (1.0 + std::exp(-x)));
    }
  }
  CHECK(std::abs(loss_neg(r, b, sampler) - oracle) <= 1e-12);
}

TEST_CASE("negative sampler weights and collision resampling") {
  std::vector<std::uint64_t> counts{16, 1, 81};
  NegativeSampler s(counts, 0.75, 4, 1);
  const double z = 8.0 + 1.0 + 27.0;
  CHECK(s.weights()[0] == doctest::Approx(8.0 / z));
  CHECK(s.weights()[2] == doctest::Approx(27.0 / z));
  double sum = 0;
  for (double w : s.weights()) sum += w;
  CHECK(sum == doctest::Approx(1.0));

  ContextBatch b = one_example(0, 2, {0, 1});
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    for (WordId u : draw_negatives(b, s, rng).ids) CHECK(u != 2);
  }
}

TEST_CASE("loss_prior matches the term-by-term oracle for every variant") {
  EmbeddingState zero(3, 4, 2);
  for (Variant v : kVariants) {
    PriorConfig p{v, 1.3, 0.2};
    CHECK(loss_prior(zero, p) == 0.0);
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto s = random_state(3, 4, 2, 1.0, seed);
    for (Variant v : kVariants) {
      PriorConfig p{v, 0.7, 0.05};
      CHECK(std::abs(loss_prior(s, p) - prior_oracle(s, p)) <= 1e-12);
      CHECK(loss_prior(s, p) < 0.0);
    }
  }
}

TEST_CASE("prior coincidences: T=2 DBE == DBE-NC, unit-weight DBE-SC == DBE-NC") {
  auto s2 = random_state(2, 5, 3, 1.0, 21);
  PriorConfig dbe{Variant::dbe, 1.1, 0.3};
  PriorConfig nc{Variant::dbe_nc, 1.1, 0.3};
  CHECK(loss_prior(s2, dbe) == loss_prior(s2, nc));

  auto s4 = random_state(4, 5, 3, 1.0, 22);
  PriorConfig sc{Variant::dbe_sc, 1.1, 0.3, false};
  CHECK(loss_prior(s4, sc) == loss_prior(s4, nc));
}

TEST_CASE("translation of every rho leaves the DBE drift term unchanged") {
  auto s = random_state(4, 6, 3, 1.0, 31);
  PriorConfig p{Variant::dbe, 2.0, 0.1};
  const double before = loss_drift_prior(s, p);
  for (std::size_t t = 0; t < 4; ++t)
    for (WordId v = 0; v < 6; ++v)
      for (std::size_t d = 0; d < 3; ++d) s.rho(t, v)[d] += 0.75 * (d + 1.0);
  CHECK(loss_drift_prior(s, p) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("gradient at rho = 0 with no prior is the hand-derived expression") {
  auto s = random_state(1, 6, 3, 1.0, 41);
  std::fill(s.rho_data().begin(), s.rho_data().end(), 0.0);
  ContextBatch b = one_example(0, 0, {1, 2});
  NegativeDraws neg{2, {3, 4}};
  PriorConfig p{Variant::dbe, 0.0, 0.0};
  auto g = gradients(s, b, neg, p);
  std::vector<double> sum(3);
  for (std::size_t d = 0; d < 3; ++d) sum[d] = s.alpha(1)[d] + s.alpha(2)[d];
  for (std::size_t d = 0; d < 3; ++d) {
    CHECK(g.find_rho(0, 0)[d] == doctest::Approx(0.5 * sum[d]));
    CHECK(g.find_rho(0, 3)[d] == doctest::Approx(-0.5 * sum[d]));
    CHECK(g.find_rho(0, 4)[d] == doctest::Approx(-0.5 * sum[d]));
    // rho = 0 so the context rows receive nothing.
    CHECK(g.find_alpha(1)[d] == 0.0);
  }
}

TEST_CASE("gradients match central finite differences for every variant") {
  for (Variant variant : kVariants) {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      auto inst = random_instance(seed, variant);
      auto g = gradients(inst.state, inst.batch, inst.negatives, inst.prior, inst.prior_scale);
      auto objective = [&](const EmbeddingState& s) {
        return batch_objective(s, inst.batch, inst.negatives, inst.prior, inst.prior_scale);
      };
      auto r = driftlab::testing::check_rows(inst.state, g, objective);
      CAPTURE(to_string(variant));
      CAPTURE(seed);
      CHECK(r.max_rel_error <= 1e-4);
      CHECK(driftlab::testing::max_absent_derivative(inst.state, g, objective) == 0.0);

      // For touched rows, the batch objective with prior_scale 1 has the
      // same derivative as data terms plus the full prior.
      auto g1 = gradients(inst.state, inst.batch, inst.negatives, inst.prior, 1.0);
      auto full = [&](const EmbeddingState& s) {
        return loss_pos(s, inst.batch) + loss_neg(s, inst.batch, inst.negatives) +
               loss_prior(s, inst.prior);
      };
      SparseGradient touched_only(g1.dim());
      for (std::size_t i = 0; i < inst.batch.size(); ++i) {
        auto row = touched_only.rho(inst.batch.slice, inst.batch.centers[i]);
        std::copy_n(g1.find_rho(inst.batch.slice, inst.batch.centers[i]), row.size(),
                    row.begin());
      }
      auto rf = driftlab::testing::check_rows(inst.state, touched_only, full);
      CHECK(rf.max_rel_error <= 1e-4);
    }
  }
}

TEST_CASE("gradient sparsity: DBE reaches t-1 and t+1 only") {
  auto inst = random_instance(7, Variant::dbe, 20, 5, 4);
  inst.batch.slice = 1;
  auto g = gradients(inst.state, inst.batch, inst.negatives, inst.prior, 1.0);
  std::set<std::size_t> slices;
  for (auto [t, v] : g.rho_keys()) slices.insert(t);
  CHECK(slices == std::set<std::size_t>{0, 1, 2});

  inst.prior.variant = Variant::dbe_i;
  auto gi = gradients(inst.state, inst.batch, inst.negatives, inst.prior, 1.0);
  slices.clear();
  for (auto [t, v] : gi.rho_keys()) slices.insert(t);
  CHECK(slices == std::set<std::size_t>{1});

  inst.prior.variant = Variant::dbe_nc;
  inst.batch.slice = 2;
  auto gn = gradients(inst.state, inst.batch, inst.negatives, inst.prior, 1.0);
  slices.clear();
  for (auto [t, v] : gn.rho_keys()) slices.insert(t);
  CHECK(slices == std::set<std::size_t>{0, 2});
}

TEST_CASE("variant identities hold exactly for gradients") {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    auto a = random_instance(seed, Variant::dbe, 20, 5, 2);
    auto b = a;
    b.prior.variant = Variant::dbe_nc;
    auto ga = gradients(a.state, a.batch, a.negatives, a.prior, a.prior_scale);
    auto gb = gradients(b.state, b.batch, b.negatives, b.prior, b.prior_scale);
    REQUIRE(ga.rho_rows() == gb.rho_rows());
    for (std::size_t r = 0; r < ga.rho_rows(); ++r) {
      const auto [t, v] = ga.rho_keys()[r];
      const double* other = gb.find_rho(t, v);
      REQUIRE(other != nullptr);
      for (std::size_t d = 0; d < ga.dim(); ++d) CHECK(ga.rho_row(r)[d] == other[d]);
    }
    CHECK(batch_objective(a.state, a.batch, a.negatives, a.prior, a.prior_scale) ==
          batch_objective(b.state, b.batch, b.negatives, b.prior, b.prior_scale));

    auto c = random_instance(seed, Variant::dbe_nc, 20, 5, 4);
    auto d = c;
    d.prior.variant = Variant::dbe_sc;
    d.prior.time_weighted = false;
    auto gc = gradients(c.state, c.batch, c.negatives, c.prior, c.prior_scale);
    auto gd = gradients(d.state, d.batch, d.negatives, d.prior, d.prior_scale);
    REQUIRE(gc.rho_rows() == gd.rho_rows());
    for (std::size_t r = 0; r < gc.rho_rows(); ++r) {
      const auto [t, v] = gc.rho_keys()[r];
      for (std::size_t k = 0; k < gc.dim(); ++k) CHECK(gc.rho_row(r)[k] == gd.find_rho(t, v)[k]);
    }
  }
}

TEST_CASE("embedding text files round trip exactly") {
  driftlab::testing::TempDir dir("emb");
  auto s = random_state(2, 3, 4, 1.0, 5);
  std::vector<std::string> words{"x", "y", "z"};
  save_embeddings_text(s, words, dir / "rho.txt", dir / "alpha.txt");
  auto back = load_embeddings_text(words, dir / "rho.txt", dir / "alpha.txt");
  CHECK(back == s);
  const auto text = driftlab::testing::read_file(dir / "rho.txt");
  CHECK(text.substr(0, 6) == "3 4 2\n");
  CHECK(text.find("z\t1\t") != std::string::npos);
}
