#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "driftlab/drift_analysis.hpp"
#include "driftlab/random.hpp"
#include "test_util.hpp"

using namespace driftlab;

namespace {

double direct_norm(const EmbeddingState& s, WordId v, std::size_t t, std::size_t t0) {
  long double acc = 0.0L;
  for (std::size_t d = 0; d < s.dim(); ++d) {
    const long double x = static_cast<long double>(s.rho(t, v)[d]) - s.rho(t0, v)[d];
    acc += x * x;
  }
  return static_cast<double>(std::sqrt(acc));
}

void rotate_rows(std::vector<double>& data, const std::vector<double>& q, std::size_t D) {
  std::vector<double> tmp(D);
  for (std::size_t r = 0; r < data.size() / D; ++r) {
    for (std::size_t i = 0; i < D; ++i) {
      tmp[i] = 0.0;
      for (std::size_t k = 0; k < D; ++k) tmp[i] += q[i * D + k] * data[r * D + k];
    }
    std::copy(tmp.begin(), tmp.end(), data.begin() + static_cast<std::ptrdiff_t>(r * D));
  }
}

}  // namespace

TEST_CASE("constant trajectories give an all-zero report") {
  auto s = random_state(1, 4, 3, 1.0, 1);
  EmbeddingState b(3, 4, 3);
  for (std::size_t t = 0; t < 3; ++t)
    for (WordId v = 0; v < 4; ++v) std::copy(s.rho(0, v).begin(), s.rho(0, v).end(), b.rho(t, v).begin());
  const auto r = drift_report(b, 0);
  CHECK(std::all_of(r.d.begin(), r.d.end(), [](double x) { return x == 0.0; }));
  CHECK(std::isnan(r.normalized[0]));
  const std::size_t ks[] = {2};
  CHECK_THROWS_AS(normalized_drift_summary(r, ks), DataError);
}

TEST_CASE("3-4-5 drift") {
  EmbeddingState s(2, 1, 2);
  s.rho(1, 0)[0] = 3.0;
  s.rho(1, 0)[1] = 4.0;
  const auto r = drift_report(s, 0);
  CHECK(r.at(0, 1) == 5.0);
  CHECK(r.total[0] == 5.0);
  CHECK_THROWS_AS(drift_report(s, 2), DataError);
}

TEST_CASE("report matches a direct norm oracle") {
  const auto s = random_state(5, 30, 7, 1.0, 42);
  for (std::size_t t0 : {std::size_t{0}, std::size_t{2}}) {
    const auto r = drift_report(s, t0);
    for (WordId v = 0; v < 30; ++v) {
      double sum = 0.0;
      for (std::size_t t = 0; t < 5; ++t) {
        CHECK(std::abs(r.at(v, t) - direct_norm(s, v, t, t0)) <= 1e-12);
        if (t != t0) sum += direct_norm(s, v, t, t0);
      }
      CHECK(r.at(v, t0) == 0.0);
      CHECK(r.total[v] == r.at(v, 4));
      CHECK(std::abs(r.mean[v] - sum / 4.0) <= 1e-12);
    }
  }
}

TEST_CASE("rotation invariance and scale equivariance") {
  const std::size_t D = 6;
  const auto s = random_state(4, 20, D, 1.0, 5);
  const auto base = drift_report(s, 0);
  auto rotated = s;
  const auto q = driftlab::testing::random_orthogonal(D, 77);
  rotate_rows(rotated.rho_data(), q, D);
  rotate_rows(rotated.alpha_data(), q, D);
  const auto rr = drift_report(rotated, 0);
  for (std::size_t i = 0; i < base.d.size(); ++i) CHECK(std::abs(rr.d[i] - base.d[i]) <= 1e-9);

  auto scaled = s;
  for (double& x : scaled.rho_data()) x *= 2.5;
  const auto sr = drift_report(scaled, 0);
  for (std::size_t i = 0; i < base.d.size(); ++i) {
    CHECK(sr.d[i] == doctest::Approx(2.5 * base.d[i]).epsilon(1e-12));
  }
  for (WordId v = 0; v < 20; ++v) {
    CHECK(sr.normalized[v] == doctest::Approx(base.normalized[v]).epsilon(1e-12));
  }
}

TEST_CASE("top drifting orders by total drift with id tie-break") {
  EmbeddingState s(2, 4, 1);
  s.rho(1, 0)[0] = 1.0;
  s.rho(1, 1)[0] = 3.0;
  s.rho(1, 2)[0] = 1.0;
  s.rho(1, 3)[0] = -2.0;
  const auto r = drift_report(s, 0);
  CHECK(top_drifting(r, 4) == std::vector<WordId>{1, 3, 0, 2});
  CHECK(top_drifting(r, 1) == std::vector<WordId>{1});
  CHECK_THROWS_AS(top_drifting(r, 5), DataError);
  auto perm = top_drifting(drift_report(random_state(3, 25, 2, 1.0, 3), 0), 25);
  std::sort(perm.begin(), perm.end());
  std::vector<WordId> ids(25);
  std::iota(ids.begin(), ids.end(), WordId{0});
  CHECK(perm == ids);
}

TEST_CASE("normalized drift: linear series and spike") {
  const std::size_t T = 7, D = 3;
  EmbeddingState s(T, 3, D);
  const double u[3] = {0.3, -1.2, 0.5};
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < D; ++d) s.rho(t, 0)[d] = static_cast<double>(t) * u[d];
    // word 1: spike at t = 3 that returns to the end point of the linear word
    for (std::size_t d = 0; d < D; ++d) {
      s.rho(t, 1)[d] = t == 3 ? 10.0 * u[d] : (t == T - 1 ? (T - 1) * u[d] : 0.0);
    }
  }
  const auto r = drift_report(s, 0);
  CHECK(r.normalized[0] == doctest::Approx(T / (2.0 * (T - 1))).epsilon(1e-12));
  CHECK(r.total[1] == doctest::Approx(r.total[0]).epsilon(1e-12));
  // A spike that mostly returns to base has a smaller mean than linear drift
  // of the same total; give it a large excursion to flip the order.
  for (std::size_t t = 1; t + 1 < T; ++t)
    for (std::size_t d = 0; d < D; ++d) s.rho(t, 1)[d] = (t == 3 ? 40.0 : 0.0) * u[d];
  const auto r2 = drift_report(s, 0);
  CHECK(r2.normalized[1] > r2.normalized[0]);

  const std::size_t ks[] = {1, 3};
  const auto sum = normalized_drift_summary(r2, ks);
  REQUIRE(sum.size() == 2);
  CHECK(sum[0].used == 1);
  CHECK(sum[1].excluded == 1);  // word 2 never moves
  CHECK(sum[1].mean_normalized ==
        doctest::Approx((r2.normalized[0] + r2.normalized[1]) / 2.0).epsilon(1e-12));
}

TEST_CASE("histograms conserve counts") {
  const auto s = random_state(4, 57, 3, 1.0, 6);
  const auto r = drift_report(s, 0);
  for (BinScale sc : {BinScale::linear, BinScale::log}) {
    for (std::size_t bins : {std::size_t{1}, std::size_t{7}, std::size_t{60}}) {
      const auto h = drift_histogram(r, 2, bins, sc);
      CHECK(h.counts.size() == bins);
      CHECK(h.edges.size() == bins + 1);
      CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == 57);
      CHECK(std::is_sorted(h.edges.begin(), h.edges.end()));
      // Every value falls inside its bin.
      for (WordId v = 0; v < 57; ++v) {
        const double x = r.at(v, 2);
        CHECK(x >= h.edges.front());
        CHECK(x <= h.edges.back());
      }
    }
  }
  CHECK(drift_histogram(r, 2, 1).counts[0] == 57);
  CHECK_THROWS_AS(drift_histogram(r, 0), DataError);

  EmbeddingState z(3, 10, 2);
  const auto hz = drift_histogram(drift_report(z, 0), 1, 5);
  CHECK(hz.counts[0] == 10);
}

TEST_CASE("histogram bins match a brute-force assignment") {
  const auto r = drift_report(random_state(3, 200, 4, 1.0, 9), 0);
  const auto h = drift_histogram(r, 1, 10);
  std::vector<std::size_t> oracle(10, 0);
  double hi = 0.0;
  for (WordId v = 0; v < 200; ++v) hi = std::max(hi, r.at(v, 1));
  for (WordId v = 0; v < 200; ++v) {
    std::size_t b = static_cast<std::size_t>(r.at(v, 1) / hi * 10.0);
    oracle[std::min<std::size_t>(b, 9)] += 1;
  }
  CHECK(h.counts == oracle);
}

TEST_CASE("median drift") {
  EmbeddingState s(2, 4, 1);
  const double vals[4] = {4.0, 1.0, 3.0, 2.0};
  for (WordId v = 0; v < 4; ++v) s.rho(1, v)[0] = vals[v];
  CHECK(median_drift(drift_report(s, 0), 1) == 2.5);
  EmbeddingState o(2, 3, 1);
  for (WordId v = 0; v < 3; ++v) o.rho(1, v)[0] = vals[v];
  CHECK(median_drift(drift_report(o, 0), 1) == 3.0);
}

TEST_CASE("nearest neighbors") {
  auto s = random_state(2, 50, 5, 1.0, 10);
  CHECK(nearest_neighbors(s, 3, 1, 0).empty());
  std::copy(s.rho(1, 3).begin(), s.rho(1, 3).end(), s.rho(1, 17).begin());
  const auto nn = nearest_neighbors(s, 3, 1, 5);
  REQUIRE(nn.size() == 5);
  CHECK(nn[0].id == 17);
  CHECK(nn[0].cosine == doctest::Approx(1.0).epsilon(1e-14));

  // Brute-force oracle.
  std::vector<std::pair<double, WordId>> all;
  for (WordId v = 0; v < 50; ++v) {
    if (v == 8) continue;
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t d = 0; d < 5; ++d) {
      ab += s.rho(0, 8)[d] * s.rho(0, v)[d];
      aa += s.rho(0, 8)[d] * s.rho(0, 8)[d];
      bb += s.rho(0, v)[d] * s.rho(0, v)[d];
    }
    all.push_back({-ab / std::sqrt(aa * bb), v});
  }
  std::sort(all.begin(), all.end());
  const auto got = nearest_neighbors(s, 8, 0, 49);
  for (std::size_t i = 0; i < 49; ++i) {
    CHECK(got[i].id == all[i].second);
    CHECK(got[i].cosine == doctest::Approx(-all[i].first).epsilon(1e-12));
  }

  std::fill(s.rho(0, 4).begin(), s.rho(0, 4).end(), 0.0);
  CHECK_THROWS_AS(nearest_neighbors(s, 4, 0, 3), DataError);
}

TEST_CASE("cosine metric is bounded and zero at t0") {
  const auto r = drift_report(random_state(3, 10, 4, 1.0, 2), 0, DriftMetric::cosine);
  for (double x : r.d) {
    CHECK(x >= 0.0);
    CHECK(x <= 2.0);
  }
  CHECK(parse_drift_metric("cosine") == DriftMetric::cosine);
  CHECK_THROWS_AS(parse_drift_metric("manhattan"), UsageError);
}
