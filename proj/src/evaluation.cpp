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

#include "driftlab/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "driftlab/io.hpp"

namespace driftlab {

double scale_factor(std::uint64_t n_eval_tokens, std::uint64_t n_batch_tokens) {
  if (n_batch_tokens == 0) throw DataError("scale_factor: zero minibatch size");
  if (n_eval_tokens == 0) throw DataError("scale_factor: no evaluation tokens");
  return static_cast<double>(n_eval_tokens) / static_cast<double>(n_batch_tokens);
}

std::string corpus_fingerprint(const TimeSlicedCorpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(corpus.vocab_size());
  mix(corpus.num_slices());
  for (const Slice& s : corpus.slices()) {
    mix(s.ids.size());
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
      mix((static_cast<std::uint64_t>(s.ids[i]) << 2) | static_cast<std::uint64_t>(s.split[i]));
    }
    for (auto d : s.doc_starts) mix(d);
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double slice_log_likelihood(const EmbeddingState& state, std::size_t state_t,
                            const Slice& slice, Split split, int window,
                            std::size_t* positions) {
  const auto eligible = eligible_positions(slice, split);
  if (positions != nullptr) *positions = eligible.size();
  std::vector<double> s(state.dim());
  ContextBatch one;
  one.window = window;
  double total = 0.0;
  for (std::uint32_t p : eligible) {
    one.centers.clear();
    one.contexts.clear();
    one.mask.clear();
    append_example(slice, p, one);
    context_sum(state, one.context(0), one.context_mask(0), s);
    const auto rho = state.rho(state_t, one.centers[0]);
    double x = 0.0;
    for (std::size_t d = 0; d < s.size(); ++d) x += rho[d] * s[d];
    total += log_sigmoid(x);
  }
  return total;
}

EvalCurve evaluate(const EmbeddingState& state, const TimeSlicedCorpus& corpus, Split split,
                   int window, std::size_t batch_size, std::optional<double> scale,
                   int threads) {
  const std::size_t T = corpus.num_slices();
  if (state.num_slices() != T && state.num_slices() != 1) {
    throw DataError("evaluate: model has " + std::to_string(state.num_slices()) +
                    " slices but the corpus has " + std::to_string(T));
  }
  if (state.vocab_size() != corpus.vocab_size()) {
    throw DataError("evaluate: model and corpus vocabularies differ in size");
  }
  std::vector<double> sums(T, 0.0);
  std::vector<std::size_t> counts(T, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < T; t = next++) {
      const std::size_t st = state.num_slices() == 1 ? 0 : t;
      sums[t] = slice_log_likelihood(state, st, corpus.slice(t), split, window, &counts[t]);
    }
  };
  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(T)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  EvalCurve curve;
  curve.split = split;
  curve.corpus_id = corpus_fingerprint(corpus);
  curve.positions = counts;
  std::size_t total = 0;
  for (auto c : counts) total += c;
  curve.scale = scale ? *scale : (total > 0 ? scale_factor(total, batch_size) : 1.0);
  curve.per_slice.resize(T);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t t = 0; t < T; ++t) {
    if (counts[t] == 0) continue;
    curve.per_slice[t] = curve.scale * sums[t];
    sum += *curve.per_slice[t];
    ++present;
  }
  curve.mean = present > 0 ? sum / static_cast<double>(present) : 0.0;
  return curve;
}

void EvalCurve::save_tsv(const std::filesystem::path& path) const {
  auto out = io::open_out(path);
  out << "# split=" << to_string(split) << " scale=" << io::format_double(scale)
      << " corpus=" << corpus_id << " mean=" << io::format_double(mean) << '\n';
  for (std::size_t t = 0; t < per_slice.size(); ++t) {
    out << t << '\t' << (per_slice[t] ? io::format_double(*per_slice[t]) : "NA") << '\n';
  }
}

EvalCurve EvalCurve::load_tsv(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  EvalCurve curve;
  std::string line;
  double sum = 0.0;
  std::size_t present = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream ss(line.substr(1));
      std::string field;
      while (ss >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "split") curve.split = parse_split(value);
        else if (key == "scale") curve.scale = io::parse_double(value);
        else if (key == "corpus") curve.corpus_id = value;
      }
      continue;
    }
    auto f = io::split(line, '\t');
    if (f.size() != 2) throw DataError(path.string() + ": expected 'slice<TAB>value'");
    if (f[1] == "NA") {
      curve.per_slice.emplace_back(std::nullopt);
    } else {
      curve.per_slice.emplace_back(io::parse_double(f[1]));
      sum += *curve.per_slice.back();
      ++present;
    }
  }
  curve.mean = present > 0 ? sum / static_cast<double>(present) : 0.0;
  return curve;
}

std::vector<RankingRow> compare(const std::vector<std::pair<std::string, EvalCurve>>& curves) {
  for (const auto& [name, c] : curves) {
    if (c.corpus_id != curves.front().second.corpus_id) {
      throw DataError("compare: curve '" + name + "' was computed on a different corpus");
    }
    if (c.split != curves.front().second.split) {
      throw DataError("compare: curve '" + name + "' uses a different split");
    }
  }
  std::vector<RankingRow> rows;
  for (const auto& [name, c] : curves) rows.push_back({name, c.mean, 0});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RankingRow& a, const RankingRow& b) { return a.mean > b.mean; });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = static_cast<int>(i + 1);
  return rows;
}

std::string format_ranking_tsv(const std::vector<RankingRow>& rows) {
  std::string out = "rank\tmodel\tmean\n";
  for (const auto& r : rows) {
    out += std::to_string(r.rank) + '\t' + r.name + '\t' + io::format_double(r.mean) + '\n';
  }
  return out;
}

std::string format_ranking_text(const std::vector<RankingRow>& rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size() + 4);
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-4s  %-*s  %s\n", "rank", static_cast<int>(width), "model",
                "mean");
  out += buf;
  for (const auto& r : rows) {
    const std::string name = r.rank == 1 ? "**" + r.name + "**" : r.name;
    std::snprintf(buf, sizeof(buf), "%-4d  %-*s  %.6g\n", r.rank, static_cast<int>(width),
                  name.c_str(), r.mean);
    out += buf;
  }
  return out;
}

}  // namespace driftlab
