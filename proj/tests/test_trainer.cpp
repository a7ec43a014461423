#include <cmath>
#include <limits>

#include "doctest.h"
#include "driftlab/evaluation.hpp"
#include "driftlab/trainer.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace driftlab;
using driftlab::testing::make_fixture;
using driftlab::testing::two_topic_documents;

namespace {

TrainingConfig small_config() {
  TrainingConfig c;
  c.dim = 8;
  c.window = 2;
  c.negatives = 3;
  c.batch_size = 32;
  c.minibatches_per_slice = 30;
  c.static_epochs = 2;
  c.epochs = 2;
  c.seed = 11;
  c.log_validation = false;
  return c;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Sum over words and t >= 1 of |rho^t - rho^{t-1}|^2.
double total_squared_drift(const EmbeddingState& s) {
  double total = 0.0;
  for (std::size_t t = 1; t < s.num_slices(); ++t) {
    for (WordId v = 0; v < s.vocab_size(); ++v) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < s.dim(); ++d) {
        const double x = s.rho(t, v)[d] - s.rho(t - 1, v)[d];
        d2 += x * x;
      }
      total += d2;
    }
  }
  return total;
}

const auto& fixture() {
  static const auto f = make_fixture(two_topic_documents(4, 150, 8, 8, 3));
  return f;
}

}  // namespace

TEST_CASE("adagrad matches the hand-computed update") {
  EmbeddingState s(1, 1, 1);
  Adagrad opt(s, 0.1);
  SparseGradient g(1);
  g.rho(0, 0)[0] = 2.0;
  g.alpha(0)[0] = -1.0;
  opt.apply(s, g);
  CHECK(s.rho(0, 0)[0] == doctest::Approx(0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(s.alpha(0)[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-14));
  opt.apply(s, g);
  CHECK(s.rho(0, 0)[0] ==
        doctest::Approx(0.1 * 2.0 / (2.0 + 1e-8) + 0.1 * 2.0 / (std::sqrt(8.0) + 1e-8))
            .epsilon(1e-14));
}

TEST_CASE("adagrad with a nonzero starting accumulator") {
  EmbeddingState s(1, 1, 1);
  Adagrad opt(s, 0.1, 10.0);
  SparseGradient g(1);
  g.rho(0, 0)[0] = 2.0;
  opt.apply(s, g);
  const double first = 0.1 * 2.0 / (std::sqrt(10.0 + 4.0) + 1e-8);
  CHECK(s.rho(0, 0)[0] == doctest::Approx(first).epsilon(1e-14));
  opt.apply(s, g);
  CHECK(s.rho(0, 0)[0] ==
        doctest::Approx(first + 0.1 * 2.0 / (std::sqrt(18.0) + 1e-8)).epsilon(1e-14));
  // Untouched coordinates do not move.
  CHECK(s.alpha(0)[0] == 0.0);
}

TEST_CASE("config round trips through key=value text and rejects unknown keys") {
  TrainingConfig c = small_config();
  c.prior.variant = Variant::dbe_sc;
  c.prior.lambda = 2.5;
  c.init = InitMode::from_file;
  c.init_path = "/tmp/model";
  c.shuffle_slices = true;
  c.adagrad_initial = 10.0;
  const auto text = io::format_key_values(c.to_key_values());
  const auto back = TrainingConfig::from_key_values(io::parse_key_values(text));
  CHECK(io::format_key_values(back.to_key_values()) == text);
  CHECK(back.prior.variant == Variant::dbe_sc);
  CHECK(back.dim == 8);
  CHECK(back.adagrad_initial == 10.0);

  io::KeyValues bad{{"learnin_rate", "0.1"}};
  CHECK_THROWS_AS(TrainingConfig::from_key_values(bad), UsageError);
  io::KeyValues neg{{"dim", "0"}};
  CHECK_THROWS_AS(TrainingConfig::from_key_values(neg).validate(), UsageError);
  io::KeyValues neg_g0{{"adagrad_initial", "-1"}};
  CHECK_THROWS_AS(TrainingConfig::from_key_values(neg_g0).validate(), UsageError);
}

TEST_CASE("static training with zero epochs returns the initialization") {
  const auto& f = fixture();
  auto c = small_config();
  c.static_epochs = 0;
  const auto init = initial_state(1, f.corpus.vocab_size(), c);
  CHECK(train_static(f.corpus, f.vocab, c, init) == init);
}

TEST_CASE("static training separates the two topics") {
  const auto& f = fixture();
  auto c = small_config();
  c.static_epochs = 5;
  const auto init = initial_state(1, f.corpus.vocab_size(), c);
  const auto trained = train_static(f.corpus, f.vocab, c, init);
  CHECK(trained.all_finite());

  double within = 0.0, across = 0.0;
  std::size_t nw = 0, na = 0;
  for (WordId u = 0; u < f.vocab.size(); ++u) {
    for (WordId v = u + 1; v < f.vocab.size(); ++v) {
      const double cs = cosine(trained.rho(0, u), trained.rho(0, v));
      if (f.vocab.word(u)[0] == f.vocab.word(v)[0]) {
        within += cs;
        ++nw;
      } else {
        across += cs;
        ++na;
      }
    }
  }
  within /= static_cast<double>(nw);
  across /= static_cast<double>(na);
  CHECK(within > across + 0.5);

  // Held-out centers score higher than the same word swapped to the other topic.
  std::size_t wins = 0, total = 0;
  for (std::size_t t = 0; t < f.corpus.num_slices(); ++t) {
    const Slice& slice = f.corpus.slice(t);
    for (std::uint32_t pos : eligible_positions(slice, Split::valid)) {
      ContextBatch one;
      one.window = c.window;
      append_example(slice, pos, one);
      std::string other = f.vocab.word(one.centers[0]);
      other[0] = other[0] == 'a' ? 'b' : 'a';
      const double p_true = bernoulli_param(trained, 0, one.centers[0], one.context(0),
                                            one.context_mask(0));
      const double p_swap = bernoulli_param(trained, 0, f.vocab.id(other), one.context(0),
                                            one.context_mask(0));
      wins += p_true > p_swap ? 1 : 0;
      ++total;
    }
  }
  CHECK(total > 100);
  CHECK(static_cast<double>(wins) > 0.95 * static_cast<double>(total));
}

TEST_CASE("init_dynamic copies the static vectors into every slice") {
  const auto s = random_state(1, 5, 3, 1.0, 4);
  const auto d = init_dynamic(s, 3);
  CHECK(d.num_slices() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    for (WordId v = 0; v < 5; ++v) {
      CHECK(std::equal(d.rho(t, v).begin(), d.rho(t, v).end(), s.rho(0, v).begin()));
    }
  }
  CHECK(d.alpha_data() == s.alpha_data());
  for (Variant v : {Variant::dbe, Variant::dbe_nc, Variant::dbe_sc}) {
    CHECK(loss_drift_prior(d, PriorConfig{v, 1.0, 1e-3, true}) == 0.0);
  }
  CHECK_THROWS_AS(init_dynamic(d, 3), DataError);
}

TEST_CASE("dynamic training is deterministic for a fixed seed") {
  const auto& f = fixture();
  const auto c = small_config();
  const auto init = initial_state(f.corpus.num_slices(), f.corpus.vocab_size(), c);
  const auto a = train_dynamic(f.corpus, f.vocab, c, init);
  const auto b = train_dynamic(f.corpus, f.vocab, c, init);
  CHECK(a.state == b.state);
  CHECK(a.epoch == 2);
  CHECK(a.log.size() == 2 * f.corpus.num_slices());
  auto c2 = c;
  c2.seed = 12;
  CHECK_FALSE(train_dynamic(f.corpus, f.vocab, c2, init).state == a.state);
}

TEST_CASE("zero minibatches per slice leaves the state untouched") {
  const auto& f = fixture();
  auto c = small_config();
  c.minibatches_per_slice = 0;
  c.epochs = 1;
  const auto init = initial_state(f.corpus.num_slices(), f.corpus.vocab_size(), c);
  CHECK(train_dynamic(f.corpus, f.vocab, c, init).state == init);
}

TEST_CASE("checkpoint save, load, save is byte-identical") {
  const auto& f = fixture();
  auto c = small_config();
  c.log_validation = true;
  const auto ck = train_dynamic(f.corpus, f.vocab, c,
                                initial_state(f.corpus.num_slices(), f.corpus.vocab_size(), c));
  driftlab::testing::TempDir dir("ckpt");
  ck.save(dir / "a.bin");
  const auto back = Checkpoint::load(dir / "a.bin");
  back.save(dir / "b.bin");
  CHECK(driftlab::testing::read_file(dir / "a.bin") == driftlab::testing::read_file(dir / "b.bin"));
  CHECK(back.state == ck.state);
  CHECK(back.log.size() == ck.log.size());
  CHECK(std::isfinite(back.log.front().valid_l_pos));

  driftlab::testing::write_file(dir / "junk.bin", "XXXXabc");
  CHECK_THROWS_AS(Checkpoint::load(dir / "junk.bin"), DataError);
  const auto full = driftlab::testing::read_file(dir / "a.bin");
  driftlab::testing::write_file(dir / "short.bin", full.substr(0, full.size() / 2));
  CHECK_THROWS_AS(Checkpoint::load(dir / "short.bin"), DataError);
}

TEST_CASE("total drift does not grow with the drift weight") {
  const auto& f = fixture();
  auto c = small_config();
  c.epochs = 3;
  const auto init = init_dynamic(train_static(f.corpus, f.vocab, c), f.corpus.num_slices());
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {0.01, 1.0, 100.0, 1e6}) {
    auto run = c;
    run.prior.lambda = lambda;
    const double d = total_squared_drift(train_dynamic(f.corpus, f.vocab, run, init).state);
    CAPTURE(lambda);
    CHECK(d <= previous);
    previous = d;
  }
}

TEST_CASE("on noise the independent variant drifts at least as much as the coupled one") {
  const auto noise = make_fixture(driftlab::testing::noise_documents(4, 150, 16, 8, 5));
  auto c = small_config();
  c.epochs = 3;
  const auto init =
      init_dynamic(train_static(noise.corpus, noise.vocab, c), noise.corpus.num_slices());
  auto indep = c;
  indep.prior.variant = Variant::dbe_i;
  const double di = total_squared_drift(train_dynamic(noise.corpus, noise.vocab, indep, init).state);
  const double dc = total_squared_drift(train_dynamic(noise.corpus, noise.vocab, c, init).state);
  CHECK(di >= dc);
}

TEST_CASE("non-finite training aborts with the last finite state") {
  const auto& f = fixture();
  auto c = small_config();
  c.learning_rate = 1e200;
  c.clip_norm = 0.0;
  const auto init = initial_state(f.corpus.num_slices(), f.corpus.vocab_size(), c);
  bool aborted = false;
  try {
    train_dynamic(f.corpus, f.vocab, c, init);
  } catch (const NumericalAbort& e) {
    aborted = true;
    CHECK(e.last_finite().state.all_finite());
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
  CHECK(aborted);
}

TEST_CASE("mismatched initial state shapes are rejected") {
  const auto& f = fixture();
  const auto c = small_config();
  CHECK_THROWS_AS(train_dynamic(f.corpus, f.vocab, c, EmbeddingState(1, 3, 8)), DataError);
}
