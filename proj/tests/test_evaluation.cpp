#include <cmath>

#include "doctest.h"
#include "driftlab/evaluation.hpp"
#include "driftlab/trainer.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace driftlab;
using driftlab::testing::make_fixture;

namespace {

const auto& fixture() {
  static const auto f = make_fixture(driftlab::testing::two_topic_documents(3, 40, 6, 5, 9));
  return f;
}

// Positions of `split` whose document has at least two tokens, counted
// directly from the document offsets.
std::size_t recount(const Slice& s, Split split) {
  std::size_t n = 0;
  for (std::size_t d = 0; d < s.doc_starts.size(); ++d) {
    const std::size_t begin = s.doc_starts[d];
    const std::size_t end = d + 1 < s.doc_starts.size() ? s.doc_starts[d + 1] : s.ids.size();
    if (end - begin < 2) continue;
    for (std::size_t i = begin; i < end; ++i) n += s.split[i] == split ? 1 : 0;
  }
  return n;
}

// Direct per-position summation with explicit window walking.
double oracle_slice(const EmbeddingState& st, std::size_t state_t, const Slice& s, Split split,
                    int C) {
  double total = 0.0;
  for (std::size_t d = 0; d < s.doc_starts.size(); ++d) {
    const long begin = static_cast<long>(s.doc_starts[d]);
    const long end = d + 1 < s.doc_starts.size() ? static_cast<long>(s.doc_starts[d + 1])
                                                 : static_cast<long>(s.ids.size());
    if (end - begin < 2) continue;
    for (long i = begin; i < end; ++i) {
      if (s.split[static_cast<std::size_t>(i)] != split) continue;
      double x = 0.0;
      for (long j = i - C; j <= i + C; ++j) {
        if (j == i || j < begin || j >= end) continue;
        for (std::size_t k = 0; k < st.dim(); ++k) {
          x += st.rho(state_t, s.ids[static_cast<std::size_t>(i)])[k] *
               st.alpha(s.ids[static_cast<std::size_t>(j)])[k];
        }
      }
      total += -std::log1p(std::exp(-x));
    }
  }
  return total;
}

}  // namespace

TEST_CASE("scale factor is the exact ratio") {
  CHECK(scale_factor(1000, 1000) == 1.0);
  CHECK(scale_factor(5000, 500) == 10.0);
  CHECK_THROWS_AS(scale_factor(10, 0), DataError);
  CHECK_THROWS_AS(scale_factor(0, 10), DataError);
}

TEST_CASE("default scale equals the recounted split size over the batch size") {
  const auto& f = fixture();
  std::size_t n = 0;
  for (const Slice& s : f.corpus.slices()) n += recount(s, Split::test);
  const auto curve = evaluate(EmbeddingState(3, f.corpus.vocab_size(), 4), f.corpus, Split::test,
                              2, 64);
  CHECK(curve.scale == static_cast<double>(n) / 64.0);
  for (std::size_t t = 0; t < 3; ++t) CHECK(curve.positions[t] == recount(f.corpus.slice(t), Split::test));
}

TEST_CASE("all-zero state gives scale * N_t * log 0.5") {
  const auto& f = fixture();
  const auto curve = evaluate(EmbeddingState(3, f.corpus.vocab_size(), 4), f.corpus,
                              Split::valid, 2, 10);
  for (std::size_t t = 0; t < 3; ++t) {
    REQUIRE(curve.per_slice[t].has_value());
    const double expect = curve.scale * static_cast<double>(recount(f.corpus.slice(t), Split::valid)) *
                          std::log(0.5);
    CHECK(*curve.per_slice[t] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(*curve.per_slice[t] <= 0.0);
  }
}

TEST_CASE("evaluation matches a per-position summation oracle") {
  const auto& f = fixture();
  const auto st = random_state(3, f.corpus.vocab_size(), 5, 0.7, 21);
  for (Split split : {Split::valid, Split::test}) {
    const auto curve = evaluate(st, f.corpus, split, 2, 1, 1.0);
    double sum = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
      const double o = oracle_slice(st, t, f.corpus.slice(t), split, 2);
      CHECK(std::abs(*curve.per_slice[t] - o) <= 1e-10 * std::max(1.0, std::abs(o)));
      sum += *curve.per_slice[t];
    }
    CHECK(curve.mean == doctest::Approx(sum / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("static state and its broadcast give identical curves") {
  const auto& f = fixture();
  const auto st = random_state(1, f.corpus.vocab_size(), 5, 0.5, 3);
  const auto a = evaluate(st, f.corpus, Split::test, 2, 32);
  const auto b = evaluate(init_dynamic(st, 3), f.corpus, Split::test, 2, 32);
  CHECK(a.per_slice == b.per_slice);
  CHECK(a.mean == b.mean);
}

TEST_CASE("scale is linear and threads do not change results") {
  const auto& f = fixture();
  const auto st = random_state(3, f.corpus.vocab_size(), 5, 0.5, 8);
  const auto one = evaluate(st, f.corpus, Split::test, 2, 1, 1.0);
  const auto seven = evaluate(st, f.corpus, Split::test, 2, 1, 7.0, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(*seven.per_slice[t] == doctest::Approx(7.0 * *one.per_slice[t]).epsilon(1e-14));
  }
  CHECK(evaluate(st, f.corpus, Split::test, 2, 1, 1.0, 3).per_slice == one.per_slice);
  CHECK_THROWS_AS(evaluate(random_state(2, f.corpus.vocab_size(), 5, 0.5, 8), f.corpus,
                           Split::test, 2, 1),
                  DataError);
}

TEST_CASE("empty slices are missing and excluded from the mean") {
  auto docs = driftlab::testing::two_topic_documents(3, 40, 6, 5, 9);
  // Drop the middle year entirely.
  std::erase_if(docs, [](const DatedDocument& d) { return d.date.year() == std::chrono::year{2001}; });
  const auto f = make_fixture(docs);
  REQUIRE(f.corpus.num_slices() == 3);
  const auto st = random_state(3, f.corpus.vocab_size(), 4, 0.5, 2);
  const auto curve = evaluate(st, f.corpus, Split::test, 2, 1, 1.0);
  CHECK_FALSE(curve.per_slice[1].has_value());
  CHECK(curve.mean == (*curve.per_slice[0] + *curve.per_slice[2]) / 2.0);
}

TEST_CASE("curve TSV round trip") {
  const auto& f = fixture();
  const auto curve = evaluate(random_state(3, f.corpus.vocab_size(), 4, 0.5, 2), f.corpus,
                              Split::valid, 2, 16);
  driftlab::testing::TempDir dir("curve");
  curve.save_tsv(dir / "c.tsv");
  const auto back = EvalCurve::load_tsv(dir / "c.tsv");
  CHECK(back.per_slice == curve.per_slice);
  CHECK(back.mean == doctest::Approx(curve.mean).epsilon(1e-15));
  CHECK(back.split == Split::valid);
  CHECK(back.scale == curve.scale);
  CHECK(back.corpus_id == curve.corpus_id);
}

TEST_CASE("compare ranks by mean and refuses mixed corpora") {
  EvalCurve a, b;
  a.mean = -0.2;
  b.mean = -0.1;
  a.corpus_id = b.corpus_id = "x";
  auto rows = compare({{"a", a}, {"b", b}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].name == "b");
  CHECK(rows[0].rank == 1);
  CHECK(rows[1].name == "a");
  CHECK(compare({{"only", a}}).front().rank == 1);
  const auto text = format_ranking_text(rows);
  CHECK(text.find("**b**") != std::string::npos);
  CHECK(text.find("**a**") == std::string::npos);
  CHECK(format_ranking_tsv(rows) == "rank\tmodel\tmean\n1\tb\t-0.1\n2\ta\t-0.2\n");
  b.corpus_id = "y";
  CHECK_THROWS_AS(compare({{"a", a}, {"b", b}}), DataError);
}
