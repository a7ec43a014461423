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

#include "driftlab/drift_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "driftlab/io.hpp"

namespace driftlab {

namespace {

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b, DriftMetric metric) {
  if (metric == DriftMetric::euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return na == nb ? 0.0 : 1.0;
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
  return std::max(0.0, 1.0 - ab / (na * nb));
}

}  // namespace

DriftMetric parse_drift_metric(std::string_view s) {
  if (s == "euclidean") return DriftMetric::euclidean;
  if (s == "cosine") return DriftMetric::cosine;
  throw UsageError("unknown drift metric '" + std::string(s) + "' (euclidean, cosine)");
}

BinScale parse_bin_scale(std::string_view s) {
  if (s == "linear") return BinScale::linear;
  if (s == "log") return BinScale::log;
  throw UsageError("unknown bin scale '" + std::string(s) + "' (linear, log)");
}

DriftReport drift_report(const EmbeddingState& state, std::size_t t0, DriftMetric metric) {
  const std::size_t T = state.num_slices(), V = state.vocab_size();
  if (t0 >= T) {
    throw DataError("drift_report: t0 = " + std::to_string(t0) + " but the model has " +
                    std::to_string(T) + " slices");
  }
  DriftReport r;
  r.num_slices = T;
  r.vocab_size = V;
  r.t0 = t0;
  r.metric = metric;
  r.d.assign(V * T, 0.0);
  r.total.assign(V, 0.0);
  r.mean.assign(V, 0.0);
  r.normalized.assign(V, std::numeric_limits<double>::quiet_NaN());
  for (WordId v = 0; v < V; ++v) {
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double x = t == t0 ? 0.0 : distance(state.rho(t, v), state.rho(t0, v), metric);
      r.d[v * T + t] = x;
      sum += x;
    }
    r.total[v] = r.d[v * T + T - 1];
    r.mean[v] = T > 1 ? sum / static_cast<double>(T - 1) : 0.0;
    if (r.total[v] > 0.0) r.normalized[v] = r.mean[v] / r.total[v];
  }
  return r;
}

std::vector<WordId> top_drifting(const DriftReport& report, std::size_t k) {
  if (k > report.vocab_size) {
    throw DataError("top_drifting: k = " + std::to_string(k) + " exceeds the vocabulary size " +
                    std::to_string(report.vocab_size));
  }
  std::vector<WordId> ids(report.vocab_size);
  std::iota(ids.begin(), ids.end(), WordId{0});
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](WordId a, WordId b) {
                      if (report.total[a] != report.total[b]) {
                        return report.total[a] > report.total[b];
                      }
                      return a < b;
                    });
  ids.resize(k);
  return ids;
}

std::vector<NormalizedDriftSummary> normalized_drift_summary(const DriftReport& report,
                                                             std::span<const std::size_t> ks) {
  if (std::none_of(report.total.begin(), report.total.end(), [](double x) { return x > 0.0; })) {
    throw DataError("degenerate report: every word has zero total drift");
  }
  std::vector<NormalizedDriftSummary> out;
  for (std::size_t k : ks) {
    NormalizedDriftSummary s;
    s.k = k;
    double sum = 0.0;
    for (WordId v : top_drifting(report, k)) {
      if (report.total[v] > 0.0) {
        sum += report.normalized[v];
        ++s.used;
      } else {
        ++s.excluded;
      }
    }
    s.mean_normalized =
        s.used > 0 ? sum / static_cast<double>(s.used) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(s);
  }
  return out;
}

Histogram drift_histogram(const DriftReport& report, std::size_t t, std::size_t bins,
                          BinScale scale) {
  if (t >= report.num_slices) throw DataError("drift_histogram: slice out of range");
  if (t == report.t0) throw DataError("drift_histogram: t must differ from t0");
  if (bins == 0) throw UsageError("drift_histogram: bins must be >= 1");
  std::vector<double> values(report.vocab_size);
  for (WordId v = 0; v < report.vocab_size; ++v) values[v] = report.at(v, t);
  const double hi = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());

  Histogram h;
  h.t = t;
  h.counts.assign(bins, 0);
  h.edges.resize(bins + 1);
  if (hi <= 0.0) {
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = static_cast<double>(i);
    h.counts[0] = values.size();
    return h;
  }
  if (scale == BinScale::linear || bins == 1) {
    for (std::size_t i = 0; i <= bins; ++i) {
      h.edges[i] = hi * static_cast<double>(i) / static_cast<double>(bins);
    }
  } else {
    double lo = hi;
    for (double x : values) {
      if (x > 0.0) lo = std::min(lo, x);
    }
    if (lo == hi) lo = hi / 2.0;
    h.edges[0] = 0.0;
    // Bin 0 is [0, lo); the rest are geometric from lo to hi.
    for (std::size_t i = 1; i <= bins; ++i) {
      const double f = static_cast<double>(i - 1) / static_cast<double>(bins - 1);
      h.edges[i] = lo * std::pow(hi / lo, f);
    }
    h.edges[bins] = hi;
  }
  for (double x : values) {
    // First edge strictly greater than x, so each bin is [low, high); the
    // maximum lands in the last bin.
    auto it = std::upper_bound(h.edges.begin() + 1, h.edges.end() - 1, x);
    h.counts[static_cast<std::size_t>(it - h.edges.begin()) - 1] += 1;
  }
  return h;
}

double median_drift(const DriftReport& report, std::size_t t) {
  if (t >= report.num_slices || report.vocab_size == 0) {
    throw DataError("median_drift: slice out of range or empty report");
  }
  std::vector<double> values(report.vocab_size);
  for (WordId v = 0; v < report.vocab_size; ++v) values[v] = report.at(v, t);
  const std::size_t n = values.size(), mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  if (n % 2 == 1) return values[mid];
  const double upper = values[mid];
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingState& state, WordId word,
                                        std::size_t t, std::size_t m) {
  if (word >= state.vocab_size()) throw DataError("nearest_neighbors: word id out of range");
  if (t >= state.num_slices()) throw DataError("nearest_neighbors: slice out of range");
  if (m == 0) return {};
  const auto q = state.rho(t, word);
  const double nq = norm(q);
  if (nq == 0.0) {
    throw DataError("nearest_neighbors: query vector has zero norm");
  }
  std::vector<Neighbor> all;
  all.reserve(state.vocab_size());
  for (WordId v = 0; v < state.vocab_size(); ++v) {
    if (v == word) continue;
    const auto r = state.rho(t, v);
    const double nr = norm(r);
    double c = 0.0;
    if (nr > 0.0) {
      double dot = 0.0;
      for (std::size_t d = 0; d < q.size(); ++d) dot += q[d] * r[d];
      c = dot / (nq * nr);
    }
    all.push_back({v, c});
  }
  const std::size_t k = std::min(m, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      if (a.cosine != b.cosine) return a.cosine > b.cosine;
                      return a.id < b.id;
                    });
  all.resize(k);
  return all;
}

void write_drift_report_tsv(const std::filesystem::path& path, const DriftReport& report,
                            std::span<const std::string> words) {
  if (words.size() != report.vocab_size) throw DataError("word list does not match the report");
  auto out = io::open_out(path);
  out << "word\ttotal_drift\tmean_drift\tnormalized_mean";
  for (std::size_t t = 0; t < report.num_slices; ++t) out << "\td" << t;
  out << '\n';
  for (WordId v = 0; v < report.vocab_size; ++v) {
    out << words[v] << '\t' << io::format_double(report.total[v]) << '\t'
        << io::format_double(report.mean[v]) << '\t'
        << (std::isnan(report.normalized[v]) ? std::string("NA")
                                             : io::format_double(report.normalized[v]));
    for (std::size_t t = 0; t < report.num_slices; ++t) {
      out << '\t' << io::format_double(report.at(v, t));
    }
    out << '\n';
  }
}

void write_top_drifting_tsv(const std::filesystem::path& path, const DriftReport& report,
                            std::span<const WordId> ranked, std::span<const std::string> words) {
  auto out = io::open_out(path);
  out << "rank\tword\ttotal_drift\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << i + 1 << '\t' << words[ranked[i]] << '\t' << io::format_double(report.total[ranked[i]])
        << '\n';
  }
}

void write_histograms_tsv(const std::filesystem::path& path,
                          const std::vector<Histogram>& histograms) {
  auto out = io::open_out(path);
  out << "t\tbin_low\tbin_high\tcount\n";
  for (const auto& h : histograms) {
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      out << h.t << '\t' << io::format_double(h.edges[b]) << '\t'
          << io::format_double(h.edges[b + 1]) << '\t' << h.counts[b] << '\n';
    }
  }
}

}  // namespace driftlab
