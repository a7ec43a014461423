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

// Synthetic time-sliced corpora with planted semantic behaviors.
//
// Words w0..w{V-1} are partitioned into clusters. Each sentence has 2C+1
// tokens: an anchor word drawn uniformly from the vocabulary at the center,
// surrounded by 2C fillers. The anchor picks the cluster it currently
// belongs to; each filler comes from that cluster's members with probability
// `affinity` and uniformly from the whole vocabulary otherwise.
//
// A monotone word belongs to its target cluster at slice t with probability
// t / (T - 1) and to its source cluster otherwise; a spike word belongs to
// its target cluster only at slice t*. Membership applies both when the word
// anchors a sentence and when it is drawn as a filler.

#ifndef DRIFTLAB_SYNTH_HPP
#define DRIFTLAB_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/corpus.hpp"
#include "driftlab/io.hpp"

namespace driftlab {

enum class Behavior : std::uint8_t { stable, monotone, spike };

struct PlantedWord {
  std::size_t word = 0;  // index into w0..w{V-1}
  Behavior behavior = Behavior::stable;
  std::size_t source = 0;
  std::size_t target = 0;
  std::size_t spike_slice = 0;  // spike only
};

struct SynthSpec {
  std::size_t vocab_size = 500;
  std::size_t num_slices = 10;
  std::size_t tokens_per_slice = 200000;
  int window = 2;
  std::size_t clusters = 10;
  double affinity = 0.9;
  std::vector<PlantedWord> planted;
  std::uint64_t seed = 1;
  int start_year = 2000;
  // Mirrored second language: same clusters and behaviors, words carry
  // `mirror_prefix`, sentences are sampled independently. Overrides replace
  // a planted word's behavior in the mirror.
  bool bilingual = false;
  std::string mirror_prefix = "x_";
  std::vector<PlantedWord> mirror_overrides;

  // Throws UsageError for an impossible spec.
  void validate() const;

  // Text form: one "key = value" per line. Planted words are written as
  // "planted = <word>:<behavior>:<source>:<target>" with behavior "monotone",
  // "stable" or "spike@<t>", several entries separated by commas.
  io::KeyValues to_key_values() const;
  static SynthSpec from_key_values(const io::KeyValues& kv);
};

std::string word_name(std::size_t index, std::size_t vocab_size);
std::string to_string(const PlantedWord& p, std::size_t vocab_size);

// Cluster a word belongs to when not planted.
std::size_t home_cluster(std::size_t word, std::size_t clusters);

struct TruthRow {
  std::string word;
  std::string behavior;  // "stable", "monotone" or "spike@t"
  std::size_t source = 0;
  std::size_t target = 0;
};

struct SynthLanguage {
  std::vector<DatedDocument> documents;
  std::vector<TruthRow> truth;
};

struct SynthOutput {
  SynthLanguage primary;
  std::optional<SynthLanguage> mirror;
  std::vector<std::pair<std::string, std::string>> lexicon;  // bilingual only
};

SynthOutput generate(const SynthSpec& spec);

// Writes corpus.tsv and truth.tsv; for bilingual specs also corpus_mirror.tsv,
// truth_mirror.tsv and lexicon.tsv.
void write_synth(const std::filesystem::path& dir, const SynthOutput& out);

void write_documents(const std::filesystem::path& path, const std::vector<DatedDocument>& docs);

}  // namespace driftlab

#endif  // DRIFTLAB_SYNTH_HPP
