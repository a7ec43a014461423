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

// Corpus ingestion: dated documents, vocabulary, frequent-word subsampling,
// chronological slicing with train/valid/test splits, and context-window
// batches for training and evaluation.

#ifndef DRIFTLAB_CORPUS_HPP
#define DRIFTLAB_CORPUS_HPP

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "driftlab/common.hpp"
#include "driftlab/random.hpp"

namespace driftlab {

struct DatedDocument {
  std::chrono::year_month_day date;
  std::vector<std::string> tokens;
};

// Lowercases ASCII, splits on whitespace and strips punctuation at token
// edges. Bytes >= 0x80 are passed through untouched.
std::vector<std::string> tokenize(std::string_view text);

// Parses "YYYY-MM-DD<TAB>text". Returns nullopt for malformed records
// (no tab, invalid date, or no tokens).
std::optional<DatedDocument> parse_record(std::string_view line);

std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view s);
std::string format_iso_date(std::chrono::year_month_day d);

struct IngestStats {
  std::size_t lines = 0;
  std::size_t malformed = 0;
};

// Streams documents from a line-delimited "ISO-date<TAB>text" file in file
// order, skipping malformed lines.
class DocumentReader {
 public:
  explicit DocumentReader(const std::filesystem::path& path);

  std::optional<DatedDocument> next();
  const IngestStats& stats() const { return stats_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  IngestStats stats_;
};

// Reads the whole file. Throws DataError when the file cannot be read or when
// more than half of its lines are malformed.
std::vector<DatedDocument> ingest(const std::filesystem::path& path,
                                  IngestStats* stats = nullptr);

using Stoplist = std::unordered_set<std::string>;

// Built-in stoplists: "en" and "fr". Anything else is read as a file with one
// word per line.
Stoplist load_stoplist(std::string_view name_or_path);

class Vocabulary {
 public:
  Vocabulary() = default;
  // `counts[i]` is the corpus count of `words[i]`; `total_tokens` is the size
  // of the corpus the counts were taken from (including dropped words).
  Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts,
             std::uint64_t total_tokens);

  std::size_t size() const { return words_.size(); }
  const std::string& word(WordId id) const { return words_.at(id); }
  std::optional<WordId> find(std::string_view word) const;
  WordId id(std::string_view word) const;  // throws DataError if absent
  std::uint64_t count(WordId id) const { return counts_.at(id); }
  double freq(WordId id) const;
  std::uint64_t total_tokens() const { return total_tokens_; }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  // "word<TAB>count" per line in rank order.
  void save(const std::filesystem::path& path) const;
  // When total_tokens is absent the sum of the counts is used.
  static Vocabulary load(const std::filesystem::path& path,
                         std::optional<std::uint64_t> total_tokens = std::nullopt);

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, WordId> index_;
  std::uint64_t total_tokens_ = 0;
};

// The v_max most frequent non-stoplist words, ties broken lexicographically.
Vocabulary build_vocabulary(std::span<const DatedDocument> docs, std::size_t v_max,
                            const Stoplist& stoplist, Diagnostics* diag = nullptr);

// Probability of keeping a token of relative frequency `freq`:
// min(1, sqrt(threshold / freq)).
double subsample_keep_probability(double freq, double threshold = 1e-5);

enum class Split : std::uint8_t { train = 0, valid = 1, test = 2 };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

enum class Granularity : std::uint8_t { annual = 0, monthly = 1, custom = 2 };
std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view s);

struct Slice {
  std::string label;
  std::vector<WordId> ids;
  std::vector<Split> split;
  // Start offsets of the documents in `ids`, ascending, first entry 0.
  std::vector<std::uint32_t> doc_starts;

  std::size_t size() const { return ids.size(); }
  // Half-open [begin, end) of the document containing `pos`.
  std::pair<std::size_t, std::size_t> document_range(std::size_t pos) const;
};

struct SliceOptions {
  Granularity granularity = Granularity::annual;
  int period_days = 30;              // custom granularity only
  double subsample_threshold = 1e-5;  // <= 0 disables subsampling
  double valid_fraction = 0.1;
  double test_fraction = 0.1;
};

class TimeSlicedCorpus {
 public:
  TimeSlicedCorpus() = default;
  TimeSlicedCorpus(std::uint32_t vocab_size, Granularity granularity,
                   std::vector<Slice> slices);

  std::uint32_t vocab_size() const { return vocab_size_; }
  Granularity granularity() const { return granularity_; }
  std::size_t num_slices() const { return slices_.size(); }
  const Slice& slice(std::size_t t) const { return slices_.at(t); }
  const std::vector<Slice>& slices() const { return slices_; }

  std::size_t count(Split s) const;
  std::size_t count(std::size_t t, Split s) const;

  // Binary cache: "DLC1", u32 V, u32 T, then per slice a u32-length-prefixed
  // id array, one u8 split tag per position, and a u32-length-prefixed array
  // of document start offsets. Slice labels and granularity are not part of
  // the cache; they are kept in the corpus metadata file.
  void save(const std::filesystem::path& path) const;
  static TimeSlicedCorpus load(const std::filesystem::path& path);

  // Restores metadata that lives outside the binary cache.
  void set_labels(const std::vector<std::string>& labels);
  void set_granularity(Granularity g) { granularity_ = g; }

 private:
  std::uint32_t vocab_size_ = 0;
  Granularity granularity_ = Granularity::annual;
  std::vector<Slice> slices_;
};

TimeSlicedCorpus slice_corpus(std::span<const DatedDocument> docs, const Vocabulary& vocab,
                              const SliceOptions& options, std::uint64_t seed,
                              Diagnostics* diag = nullptr);

// A corpus directory bundles the binary cache (corpus.dlc), the vocabulary
// (vocab.tsv) and metadata (corpus.meta: labels, granularity, token totals).
struct CorpusBundle {
  TimeSlicedCorpus corpus;
  Vocabulary vocab;
};

void save_bundle(const std::filesystem::path& dir, const CorpusBundle& bundle,
                 std::uint64_t seed, const SliceOptions& options);
// Accepts either the directory or the path of its corpus.dlc file.
CorpusBundle load_bundle(const std::filesystem::path& dir_or_cache);

// C context words on each side of each center. Context position j < C holds
// offset j - C; position j >= C holds offset j - C + 1.
struct ContextBatch {
  std::uint32_t slice = 0;
  int window = 1;
  std::vector<WordId> centers;
  std::vector<WordId> contexts;    // size() * 2C
  std::vector<std::uint8_t> mask;  // 1 where the context position is valid

  std::size_t size() const { return centers.size(); }
  int width() const { return 2 * window; }
  std::span<const WordId> context(std::size_t i) const {
    return {contexts.data() + i * width(), static_cast<std::size_t>(width())};
  }
  std::span<const std::uint8_t> context_mask(std::size_t i) const {
    return {mask.data() + i * width(), static_cast<std::size_t>(width())};
  }
};

// Appends the example centered at `pos` of `slice` to `batch`.
void append_example(const Slice& slice, std::size_t pos, ContextBatch& batch);

// Positions of `split` in `slice` that have at least one in-document
// neighbor (and so can be used as a positive example).
std::vector<std::uint32_t> eligible_positions(const Slice& slice, Split split);

// Draws batches whose centers are sampled uniformly with replacement from the
// eligible positions of one split in one slice, or pooled across all slices
// (used for static training; batches then carry slice index 0).
class BatchSampler {
 public:
  BatchSampler(const TimeSlicedCorpus& corpus, std::size_t t, int window,
               std::size_t batch_size, Split split, std::uint64_t seed,
               Diagnostics* diag = nullptr);

  static BatchSampler pooled(const TimeSlicedCorpus& corpus, int window,
                             std::size_t batch_size, Split split, std::uint64_t seed,
                             Diagnostics* diag = nullptr);

  bool empty() const { return total_ == 0; }
  std::size_t population() const { return total_; }
  ContextBatch next();

 private:
  BatchSampler(const TimeSlicedCorpus& corpus, int window, std::size_t batch_size,
               std::uint64_t seed);

  const TimeSlicedCorpus* corpus_;
  int window_;
  std::size_t batch_size_;
  std::uint32_t batch_slice_ = 0;
  std::vector<std::size_t> slice_ids_;
  std::vector<std::vector<std::uint32_t>> positions_;
  std::vector<std::size_t> offsets_;  // cumulative sizes of positions_
  std::size_t total_ = 0;
  Rng rng_;
};

}  // namespace driftlab

#endif  // DRIFTLAB_CORPUS_HPP
