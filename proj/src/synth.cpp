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

#include "driftlab/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "driftlab/random.hpp"

namespace driftlab {

namespace {

std::string behavior_name(const PlantedWord& p) {
  switch (p.behavior) {
    case Behavior::stable: return "stable";
    case Behavior::monotone: return "monotone";
    case Behavior::spike: return "spike@" + std::to_string(p.spike_slice);
  }
  return "?";
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const std::string s(value);
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw UsageError("synth spec: '" + std::string(key) + "' expects a count, got '" +
                     std::string(value) + "'");
  }
}

std::vector<PlantedWord> parse_planted(std::string_view key, std::string_view value) {
  std::vector<PlantedWord> out;
  for (std::string_view item : io::split(value, ',')) {
    item = io::trim(item);
    if (item.empty()) continue;
    const auto f = io::split(item, ':');
    if (f.size() != 4) {
      throw UsageError("synth spec: '" + std::string(key) +
                       "' entries are word:behavior:source:target, got '" + std::string(item) +
                       "'");
    }
    PlantedWord p;
    std::string_view w = io::trim(f[0]);
    if (!w.empty() && w.front() == 'w') w.remove_prefix(1);
    p.word = parse_count(key, w);
    const std::string_view b = io::trim(f[1]);
    if (b == "stable") {
      p.behavior = Behavior::stable;
    } else if (b == "monotone") {
      p.behavior = Behavior::monotone;
    } else if (b.rfind("spike@", 0) == 0) {
      p.behavior = Behavior::spike;
      p.spike_slice = parse_count(key, b.substr(6));
    } else {
      throw UsageError("synth spec: unknown behavior '" + std::string(b) + "'");
    }
    p.source = parse_count(key, io::trim(f[2]));
    p.target = parse_count(key, io::trim(f[3]));
    out.push_back(p);
  }
  return out;
}

std::string format_planted(const std::vector<PlantedWord>& planted, std::size_t vocab_size) {
  std::string s;
  for (const auto& p : planted) {
    if (!s.empty()) s += ", ";
    s += to_string(p, vocab_size);
  }
  return s;
}

// Probability that planted word p belongs to cluster c at slice t.
double membership(const PlantedWord& p, std::size_t c, std::size_t t, std::size_t T) {
  double w = 0.0;
  switch (p.behavior) {
    case Behavior::stable:
      w = c == p.source ? 1.0 : 0.0;
      break;
    case Behavior::monotone: {
      const double mix = T < 2 ? 0.0 : static_cast<double>(t) / static_cast<double>(T - 1);
      if (c == p.source) w += 1.0 - mix;
      if (c == p.target) w += mix;
      break;
    }
    case Behavior::spike:
      w = c == (t == p.spike_slice ? p.target : p.source) ? 1.0 : 0.0;
      break;
  }
  return w;
}

// Cluster used by an anchor at slice t.
std::size_t anchor_cluster(const PlantedWord* p, std::size_t word, std::size_t t,
                           std::size_t T, std::size_t clusters, Rng& rng) {
  if (p == nullptr) return home_cluster(word, clusters);
  switch (p->behavior) {
    case Behavior::stable:
      return p->source;
    case Behavior::monotone: {
      if (T < 2) return p->source;
      const double mix = static_cast<double>(t) / static_cast<double>(T - 1);
      if (mix >= 1.0) return p->target;
      if (mix <= 0.0) return p->source;
      return rng.uniform() < mix ? p->target : p->source;
    }
    case Behavior::spike:
      return t == p->spike_slice ? p->target : p->source;
  }
  return p->source;
}

// Words with cumulative weights, sampled by inverting the running sum.
struct WeightedPool {
  std::vector<std::size_t> words;
  std::vector<double> cumulative;

  void add(std::size_t w, double weight) {
    if (weight <= 0.0) return;
    words.push_back(w);
    cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + weight);
  }
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return words[std::min(static_cast<std::size_t>(it - cumulative.begin()), words.size() - 1)];
  }
};

SynthLanguage generate_language(const SynthSpec& spec, const std::vector<PlantedWord>& planted,
                                const std::string& prefix, std::uint64_t seed) {
  const std::size_t V = spec.vocab_size, K = spec.clusters;
  std::vector<const PlantedWord*> plant(V, nullptr);
  for (const auto& p : planted) plant[p.word] = &p;

  WeightedPool everyone;
  for (std::size_t w = 0; w < V; ++w) everyone.add(w, 1.0);

  std::vector<std::string> names(V);
  for (std::size_t w = 0; w < V; ++w) names[w] = prefix + word_name(w, V);

  SynthLanguage lang;
  const std::size_t width = 2 * static_cast<std::size_t>(spec.window);
  const std::size_t per_sentence = width + 1;
  const std::size_t sentences =
      (spec.tokens_per_slice + per_sentence / 2) / per_sentence;
  for (std::size_t t = 0; t < spec.num_slices; ++t) {
    Rng rng(derive_seed(seed, "synth-slice", t));
    // Stable words fill their home cluster; planted words fill each cluster
    // in proportion to their current membership.
    std::vector<WeightedPool> members(K);
    for (std::size_t w = 0; w < V; ++w) {
      if (plant[w] == nullptr) {
        members[home_cluster(w, K)].add(w, 1.0);
      } else {
        for (std::size_t c = 0; c < K; ++c) {
          members[c].add(w, membership(*plant[w], c, t, spec.num_slices));
        }
      }
    }
    const std::chrono::year_month_day base{std::chrono::year{spec.start_year + static_cast<int>(t)},
                                           std::chrono::January, std::chrono::day{1}};
    for (std::size_t s = 0; s < sentences; ++s) {
      const std::size_t anchor = rng.below(V);
      const std::size_t c = anchor_cluster(plant[anchor], anchor, t, spec.num_slices, K, rng);
      DatedDocument doc;
      // Spread sentences over the year; the slice only depends on the year.
      doc.date = std::chrono::year_month_day{std::chrono::sys_days{base} +
                                             std::chrono::days{static_cast<int>(s % 365)}};
      doc.tokens.reserve(per_sentence);
      for (std::size_t j = 0; j < per_sentence; ++j) {
        if (j == width / 2) {
          doc.tokens.push_back(names[anchor]);
          continue;
        }
        const auto& pool = rng.uniform() < spec.affinity ? members[c] : everyone;
        doc.tokens.push_back(names[pool.draw(rng)]);
      }
      lang.documents.push_back(std::move(doc));
    }
  }
  for (std::size_t w = 0; w < V; ++w) {
    TruthRow row;
    row.word = names[w];
    if (plant[w] != nullptr) {
      row.behavior = behavior_name(*plant[w]);
      row.source = plant[w]->source;
      row.target = plant[w]->target;
    } else {
      row.behavior = "stable";
      row.source = row.target = home_cluster(w, K);
    }
    lang.truth.push_back(std::move(row));
  }
  return lang;
}

}  // namespace

std::string word_name(std::size_t index, std::size_t vocab_size) {
  const std::size_t digits = std::to_string(vocab_size > 0 ? vocab_size - 1 : 0).size();
  std::string n = std::to_string(index);
  return "w" + std::string(digits > n.size() ? digits - n.size() : 0, '0') + n;
}

std::string to_string(const PlantedWord& p, std::size_t vocab_size) {
  return word_name(p.word, vocab_size) + ":" + behavior_name(p) + ":" + std::to_string(p.source) +
         ":" + std::to_string(p.target);
}

std::size_t home_cluster(std::size_t word, std::size_t clusters) { return word % clusters; }

void SynthSpec::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw UsageError("synth spec: " + msg);
  };
  require(vocab_size >= 2, "V must be >= 2");
  require(num_slices >= 1, "T must be >= 1");
  require(window >= 1, "window must be >= 1");
  require(clusters >= 1 && clusters <= vocab_size, "clusters must be within [1, V]");
  require(affinity >= 0.0 && affinity <= 1.0, "affinity must be within [0, 1]");
  require(tokens_per_slice >= static_cast<std::size_t>(2 * window + 1),
          "tokens_per_slice is smaller than one sentence");
  auto check_planted = [&](const std::vector<PlantedWord>& list, const char* what) {
    std::set<std::size_t> seen;
    for (const auto& p : list) {
      require(p.word < vocab_size, std::string(what) + " word index out of range");
      require(seen.insert(p.word).second, std::string(what) + " word listed twice");
      require(p.source < clusters && p.target < clusters,
              std::string(what) + " cluster index out of range");
      require(p.behavior != Behavior::spike || p.spike_slice < num_slices,
              std::string(what) + " spike slice out of range");
    }
  };
  check_planted(planted, "planted");
  check_planted(mirror_overrides, "mirror override");
  // Every cluster must offer enough distinct stable fillers for one sentence.
  std::vector<std::size_t> stable(clusters, 0);
  std::set<std::size_t> planted_ids;
  for (const auto& p : planted) planted_ids.insert(p.word);
  for (std::size_t w = 0; w < vocab_size; ++w) {
    if (!planted_ids.count(w)) ++stable[home_cluster(w, clusters)];
  }
  for (std::size_t k = 0; k < clusters; ++k) {
    if (stable[k] < static_cast<std::size_t>(2 * window)) {
      throw UsageError("synth spec: cluster " + std::to_string(k) + " has " +
                       std::to_string(stable[k]) + " stable words, fewer than the " +
                       std::to_string(2 * window) + " context positions of a sentence");
    }
  }
}

io::KeyValues SynthSpec::to_key_values() const {
  io::KeyValues kv;
  kv["V"] = std::to_string(vocab_size);
  kv["T"] = std::to_string(num_slices);
  kv["tokens_per_slice"] = std::to_string(tokens_per_slice);
  kv["window"] = std::to_string(window);
  kv["clusters"] = std::to_string(clusters);
  kv["affinity"] = io::format_double(affinity);
  kv["planted"] = format_planted(planted, vocab_size);
  kv["seed"] = std::to_string(seed);
  kv["start_year"] = std::to_string(start_year);
  kv["bilingual"] = bilingual ? "true" : "false";
  kv["mirror_prefix"] = mirror_prefix;
  kv["mirror_overrides"] = format_planted(mirror_overrides, vocab_size);
  return kv;
}

SynthSpec SynthSpec::from_key_values(const io::KeyValues& kv) {
  SynthSpec s;
  for (const auto& [key, value] : kv) {
    if (key == "V") s.vocab_size = parse_count(key, value);
    else if (key == "T") s.num_slices = parse_count(key, value);
    else if (key == "tokens_per_slice") s.tokens_per_slice = parse_count(key, value);
    else if (key == "window") s.window = static_cast<int>(parse_count(key, value));
    else if (key == "clusters") s.clusters = parse_count(key, value);
    else if (key == "affinity") {
      try {
        s.affinity = io::parse_double(value);
      } catch (const std::exception&) {
        throw UsageError("synth spec: 'affinity' expects a number");
      }
    } else if (key == "planted") s.planted = parse_planted(key, value);
    else if (key == "seed") s.seed = parse_count(key, value);
    else if (key == "start_year") s.start_year = static_cast<int>(parse_count(key, value));
    else if (key == "bilingual") {
      if (value != "true" && value != "false") {
        throw UsageError("synth spec: 'bilingual' expects true or false");
      }
      s.bilingual = value == "true";
    } else if (key == "mirror_prefix") s.mirror_prefix = value;
    else if (key == "mirror_overrides") s.mirror_overrides = parse_planted(key, value);
    else throw UsageError("synth spec: unknown key '" + key + "'");
  }
  return s;
}

SynthOutput generate(const SynthSpec& spec) {
  spec.validate();
  SynthOutput out;
  out.primary = generate_language(spec, spec.planted, "", derive_seed(spec.seed, "primary"));
  if (spec.bilingual) {
    std::vector<PlantedWord> mirrored = spec.planted;
    for (const auto& o : spec.mirror_overrides) {
      bool replaced = false;
      for (auto& p : mirrored) {
        if (p.word == o.word) {
          p = o;
          replaced = true;
        }
      }
      if (!replaced) mirrored.push_back(o);
    }
    // Overrides must not shrink a cluster below sentence size either.
    SynthSpec check = spec;
    check.planted = mirrored;
    check.mirror_overrides.clear();
    check.validate();
    out.mirror = generate_language(spec, mirrored, spec.mirror_prefix,
                                   derive_seed(spec.seed, "mirror"));
    for (std::size_t w = 0; w < spec.vocab_size; ++w) {
      out.lexicon.emplace_back(word_name(w, spec.vocab_size),
                               spec.mirror_prefix + word_name(w, spec.vocab_size));
    }
  }
  return out;
}

void write_documents(const std::filesystem::path& path, const std::vector<DatedDocument>& docs) {
  auto out = io::open_out(path);
  for (const auto& d : docs) {
    out << format_iso_date(d.date) << '\t';
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      if (i > 0) out << ' ';
      out << d.tokens[i];
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

namespace {

void write_truth(const std::filesystem::path& path, const std::vector<TruthRow>& truth) {
  auto out = io::open_out(path);
  out << "word\tbehavior\tsource\ttarget\n";
  for (const auto& r : truth) {
    out << r.word << '\t' << r.behavior << '\t' << r.source << '\t' << r.target << '\n';
  }
}

}  // namespace

void write_synth(const std::filesystem::path& dir, const SynthOutput& out) {
  std::filesystem::create_directories(dir);
  write_documents(dir / "corpus.tsv", out.primary.documents);
  write_truth(dir / "truth.tsv", out.primary.truth);
  if (out.mirror) {
    write_documents(dir / "corpus_mirror.tsv", out.mirror->documents);
    write_truth(dir / "truth_mirror.tsv", out.mirror->truth);
    auto lex = io::open_out(dir / "lexicon.tsv");
    for (const auto& [a, b] : out.lexicon) lex << a << '\t' << b << '\n';
  }
}

}  // namespace driftlab
