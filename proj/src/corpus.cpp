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

#include "driftlab/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numeric>

#include <spdlog/spdlog.h>

#include "driftlab/io.hpp"

namespace driftlab {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_edge_punct(unsigned char c) {
  return c < 0x80 && std::ispunct(c) != 0;
}

const char* const kEnglishStopwords[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
    "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most",
    "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "s", "said", "same",
    "she", "should", "so", "some", "such", "t", "than", "that", "the", "their",
    "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
    "would", "you", "your", "yours", "yourself", "yourselves"};

const char* const kFrenchStopwords[] = {
    "a", "ai", "au", "aux", "avec", "c", "ce", "ces", "cet", "cette", "d", "dans",
    "de", "des", "du", "elle", "elles", "en", "est", "et", "eu", "il", "ils", "j",
    "je", "l", "la", "le", "les", "leur", "leurs", "lui", "m", "ma", "mais", "me",
    "mes", "moi", "mon", "n", "ne", "nos", "notre", "nous", "on", "ont", "ou", "par",
    "pas", "pour", "qu", "que", "qui", "s", "sa", "se", "ses", "son", "sont", "sur",
    "t", "ta", "te", "tes", "toi", "ton", "tu", "un", "une", "vos", "votre", "vous",
    "y", "été", "être", "était", "fait", "plus", "comme", "si", "tout", "aussi"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_edge_punct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_edge_punct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (char& c : tok) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80) c = static_cast<char>(std::tolower(u));
      }
      tokens.push_back(std::move(tok));
    }
    i = j;
  }
  return tokens;
}

std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto field = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || ptr != s.data() + pos + len) return std::nullopt;
    return v;
  };
  auto y = field(0, 4), m = field(5, 2), d = field(8, 2);
  if (!y || !m || !d) return std::nullopt;
  std::chrono::year_month_day date{std::chrono::year{*y},
                                   std::chrono::month{static_cast<unsigned>(*m)},
                                   std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_iso_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::optional<DatedDocument> parse_record(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto tab = line.find('\t');
  if (tab == std::string_view::npos) return std::nullopt;
  auto date = parse_iso_date(io::trim(line.substr(0, tab)));
  if (!date) return std::nullopt;
  auto tokens = tokenize(line.substr(tab + 1));
  if (tokens.empty()) return std::nullopt;
  return DatedDocument{*date, std::move(tokens)};
}

DocumentReader::DocumentReader(const std::filesystem::path& path)
    : path_(path), in_(path) {
  if (!in_) throw DataError("cannot read corpus source: " + path.string());
}

std::optional<DatedDocument> DocumentReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++stats_.lines;
    if (auto doc = parse_record(line)) return doc;
    ++stats_.malformed;
  }
  return std::nullopt;
}

std::vector<DatedDocument> ingest(const std::filesystem::path& path, IngestStats* stats) {
  DocumentReader reader(path);
  std::vector<DatedDocument> docs;
  while (auto doc = reader.next()) docs.push_back(std::move(*doc));
  const IngestStats& s = reader.stats();
  if (stats != nullptr) *stats = s;
  if (s.malformed * 2 > s.lines) {
    throw DataError(path.string() + ": " + std::to_string(s.malformed) + " of " +
                    std::to_string(s.lines) +
                    " lines are malformed (expected 'YYYY-MM-DD<TAB>text')");
  }
  if (s.malformed > 0) {
    spdlog::info("{}: skipped {} malformed lines", path.string(), s.malformed);
  }
  return docs;
}

Stoplist load_stoplist(std::string_view name_or_path) {
  Stoplist out;
  if (name_or_path.empty() || name_or_path == "none") return out;
  if (name_or_path == "en") {
    for (const char* w : kEnglishStopwords) out.insert(w);
    return out;
  }
  if (name_or_path == "fr") {
    for (const char* w : kFrenchStopwords) out.insert(w);
    return out;
  }
  auto in = io::open_in(std::filesystem::path(name_or_path));
  std::string line;
  while (std::getline(in, line)) {
    auto w = io::trim(line);
    if (!w.empty() && w.front() != '#') out.insert(std::string(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts,
                       std::uint64_t total_tokens)
    : words_(std::move(words)), counts_(std::move(counts)), total_tokens_(total_tokens) {
  if (words_.size() != counts_.size()) {
    throw DataError("vocabulary: words and counts differ in length");
  }
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (counts_[i] == 0 || counts_[i] > total_tokens_) {
      throw DataError("vocabulary: count of '" + words_[i] + "' out of range");
    }
    if (!index_.emplace(words_[i], static_cast<WordId>(i)).second) {
      throw DataError("vocabulary: duplicate word '" + words_[i] + "'");
    }
  }
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordId Vocabulary::id(std::string_view word) const {
  if (auto v = find(word)) return *v;
  throw DataError("word not in vocabulary: '" + std::string(word) + "'");
}

double Vocabulary::freq(WordId id) const {
  return static_cast<double>(counts_.at(id)) / static_cast<double>(total_tokens_);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  auto out = io::open_out(path);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out << words_[i] << '\t' << counts_[i] << '\n';
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path,
                            std::optional<std::uint64_t> total_tokens) {
  auto in = io::open_in(path);
  std::vector<std::string> words;
  std::vector<std::uint64_t> counts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = io::split(line, '\t');
    std::uint64_t c = 0;
    if (fields.size() != 2 ||
        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), c).ec !=
            std::errc()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected 'word<TAB>count'");
    }
    words.emplace_back(fields[0]);
    counts.push_back(c);
  }
  const std::uint64_t total =
      total_tokens.value_or(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  return Vocabulary(std::move(words), std::move(counts), total);
}

Vocabulary build_vocabulary(std::span<const DatedDocument> docs, std::size_t v_max,
                            const Stoplist& stoplist, Diagnostics* diag) {
  if (v_max < 1) throw DataError("build_vocabulary: v_max must be >= 1");
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const auto& doc : docs) {
    for (const auto& tok : doc.tokens) {
      ++counts[tok];
      ++total;
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> eligible;
  eligible.reserve(counts.size());
  for (auto& [w, c] : counts) {
    if (!stoplist.contains(w)) eligible.emplace_back(w, c);
  }
  std::sort(eligible.begin(), eligible.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (eligible.size() < v_max) {
    warn(diag, "vocabulary: only " + std::to_string(eligible.size()) +
                   " eligible words, fewer than the requested " + std::to_string(v_max));
  } else {
    eligible.resize(v_max);
  }
  std::vector<std::string> words;
  std::vector<std::uint64_t> freqs;
  words.reserve(eligible.size());
  freqs.reserve(eligible.size());
  for (auto& [w, c] : eligible) {
    words.push_back(std::move(w));
    freqs.push_back(c);
  }
  return Vocabulary(std::move(words), std::move(freqs), total);
}

double subsample_keep_probability(double freq, double threshold) {
  if (!(freq > 0.0)) throw DataError("subsample_keep_probability: freq must be > 0");
  if (!(threshold > 0.0)) {
    throw DataError("subsample_keep_probability: threshold must be > 0");
  }
  return std::min(1.0, std::sqrt(threshold / freq));
}

// ---------------------------------------------------------------------------
// Enums

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw UsageError("unknown split '" + std::string(s) + "' (train|valid|test)");
}

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::annual: return "annual";
    case Granularity::monthly: return "monthly";
    case Granularity::custom: return "custom";
  }
  return "?";
}

Granularity parse_granularity(std::string_view s) {
  if (s == "annual") return Granularity::annual;
  if (s == "monthly") return Granularity::monthly;
  if (s == "custom") return Granularity::custom;
  throw UsageError("unknown granularity '" + std::string(s) + "' (annual|monthly|custom)");
}

// ---------------------------------------------------------------------------
// Slicing

std::pair<std::size_t, std::size_t> Slice::document_range(std::size_t pos) const {
  auto it = std::upper_bound(doc_starts.begin(), doc_starts.end(),
                             static_cast<std::uint32_t>(pos));
  const std::size_t begin = *(it - 1);
  const std::size_t end = it == doc_starts.end() ? ids.size() : *it;
  return {begin, end};
}

TimeSlicedCorpus::TimeSlicedCorpus(std::uint32_t vocab_size, Granularity granularity,
                                   std::vector<Slice> slices)
    : vocab_size_(vocab_size), granularity_(granularity), slices_(std::move(slices)) {
  for (std::size_t t = 0; t < slices_.size(); ++t) {
    const Slice& s = slices_[t];
    if (s.split.size() != s.ids.size()) {
      throw DataError("slice " + std::to_string(t) + ": split tags do not match ids");
    }
    for (WordId id : s.ids) {
      if (id >= vocab_size_) {
        throw DataError("slice " + std::to_string(t) + ": word id out of range");
      }
    }
    if (!s.ids.empty() && (s.doc_starts.empty() || s.doc_starts.front() != 0)) {
      throw DataError("slice " + std::to_string(t) + ": document offsets must start at 0");
    }
    for (std::size_t i = 0; i < s.doc_starts.size(); ++i) {
      if (s.doc_starts[i] >= s.ids.size() ||
          (i > 0 && s.doc_starts[i] <= s.doc_starts[i - 1])) {
        throw DataError("slice " + std::to_string(t) + ": invalid document offsets");
      }
    }
  }
}

std::size_t TimeSlicedCorpus::count(Split s) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < slices_.size(); ++t) n += count(t, s);
  return n;
}

std::size_t TimeSlicedCorpus::count(std::size_t t, Split s) const {
  const auto& tags = slices_.at(t).split;
  return static_cast<std::size_t>(std::count(tags.begin(), tags.end(), s));
}

void TimeSlicedCorpus::set_labels(const std::vector<std::string>& labels) {
  if (labels.size() != slices_.size()) {
    throw DataError("corpus metadata lists " + std::to_string(labels.size()) +
                    " slice labels for " + std::to_string(slices_.size()) + " slices");
  }
  for (std::size_t t = 0; t < labels.size(); ++t) slices_[t].label = labels[t];
}

void TimeSlicedCorpus::save(const std::filesystem::path& path) const {
  auto out = io::open_out(path, true);
  out.write("DLC1", 4);
  io::write_u32(out, vocab_size_);
  io::write_u32(out, static_cast<std::uint32_t>(slices_.size()));
  for (const Slice& s : slices_) {
    io::write_u32(out, static_cast<std::uint32_t>(s.ids.size()));
    out.write(reinterpret_cast<const char*>(s.ids.data()),
              static_cast<std::streamsize>(s.ids.size() * sizeof(WordId)));
    out.write(reinterpret_cast<const char*>(s.split.data()),
              static_cast<std::streamsize>(s.split.size()));
    io::write_u32(out, static_cast<std::uint32_t>(s.doc_starts.size()));
    out.write(reinterpret_cast<const char*>(s.doc_starts.data()),
              static_cast<std::streamsize>(s.doc_starts.size() * sizeof(std::uint32_t)));
  }
  if (!out) throw DataError("failed writing corpus cache " + path.string());
}

TimeSlicedCorpus TimeSlicedCorpus::load(const std::filesystem::path& path) {
  auto in = io::open_in(path, true);
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, "DLC1", 4) != 0) {
    throw DataError(path.string() + ": not a corpus cache (bad magic)");
  }
  const std::string what = path.string();
  const std::uint32_t v = io::read_u32(in, what);
  const std::uint32_t t = io::read_u32(in, what);
  std::vector<Slice> slices(t);
  auto read_block = [&](void* dst, std::size_t bytes) {
    if (bytes > 0 && !in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes))) {
      throw DataError("truncated file while reading " + what);
    }
  };
  for (std::uint32_t i = 0; i < t; ++i) {
    Slice& s = slices[i];
    const std::uint32_t n = io::read_u32(in, what);
    s.ids.resize(n);
    s.split.resize(n);
    read_block(s.ids.data(), n * sizeof(WordId));
    read_block(s.split.data(), n);
    for (Split tag : s.split) {
      if (static_cast<std::uint8_t>(tag) > 2) throw DataError(what + ": invalid split tag");
    }
    const std::uint32_t nd = io::read_u32(in, what);
    s.doc_starts.resize(nd);
    read_block(s.doc_starts.data(), nd * sizeof(std::uint32_t));
    s.label = std::to_string(i);
  }
  try {
    return TimeSlicedCorpus(v, Granularity::annual, std::move(slices));
  } catch (const DataError& e) {
    throw DataError(what + ": " + e.what());
  }
}

TimeSlicedCorpus slice_corpus(std::span<const DatedDocument> docs, const Vocabulary& vocab,
                              const SliceOptions& options, std::uint64_t seed,
                              Diagnostics* diag) {
  using namespace std::chrono;
  if (options.granularity == Granularity::custom && options.period_days < 1) {
    throw DataError("custom granularity needs period_days >= 1");
  }
  if (docs.empty()) return TimeSlicedCorpus(static_cast<std::uint32_t>(vocab.size()),
                                            options.granularity, {});
  year_month_day first = docs.front().date;
  for (const auto& d : docs) {
    if (sys_days{d.date} < sys_days{first}) first = d.date;
  }
  auto bucket = [&](const year_month_day& d) -> std::size_t {
    switch (options.granularity) {
      case Granularity::annual:
        return static_cast<std::size_t>(static_cast<int>(d.year()) -
                                        static_cast<int>(first.year()));
      case Granularity::monthly:
        return static_cast<std::size_t>(
            (static_cast<int>(d.year()) - static_cast<int>(first.year())) * 12 +
            static_cast<int>(static_cast<unsigned>(d.month())) -
            static_cast<int>(static_cast<unsigned>(first.month())));
      case Granularity::custom:
        return static_cast<std::size_t>((sys_days{d} - sys_days{first}).count() /
                                        options.period_days);
    }
    return 0;
  };
  std::size_t num_slices = 0;
  for (const auto& d : docs) num_slices = std::max(num_slices, bucket(d.date) + 1);

  std::vector<Slice> slices(num_slices);
  for (std::size_t t = 0; t < num_slices; ++t) {
    switch (options.granularity) {
      case Granularity::annual:
        slices[t].label = std::to_string(static_cast<int>(first.year()) + static_cast<int>(t));
        break;
      case Granularity::monthly: {
        const int m0 = static_cast<int>(first.year()) * 12 +
                       static_cast<int>(static_cast<unsigned>(first.month())) - 1 +
                       static_cast<int>(t);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d", m0 / 12, m0 % 12 + 1);
        slices[t].label = buf;
        break;
      }
      case Granularity::custom:
        slices[t].label = format_iso_date(
            year_month_day{sys_days{first} + days{static_cast<int>(t) * options.period_days}});
        break;
    }
  }

  const bool subsample = options.subsample_threshold > 0.0;
  std::vector<double> keep(vocab.size(), 1.0);
  if (subsample) {
    for (WordId v = 0; v < vocab.size(); ++v) {
      keep[v] = subsample_keep_probability(vocab.freq(v), options.subsample_threshold);
    }
  }
  Rng sub_rng(derive_seed(seed, "subsample"));
  for (const auto& doc : docs) {
    Slice& s = slices[bucket(doc.date)];
    const std::size_t start = s.ids.size();
    for (const auto& tok : doc.tokens) {
      auto id = vocab.find(tok);
      if (!id) continue;
      if (subsample && keep[*id] < 1.0 && sub_rng.uniform() >= keep[*id]) continue;
      s.ids.push_back(*id);
    }
    if (s.ids.size() > start) s.doc_starts.push_back(static_cast<std::uint32_t>(start));
  }

  for (std::size_t t = 0; t < num_slices; ++t) {
    Slice& s = slices[t];
    const std::size_t n = s.ids.size();
    s.split.assign(n, Split::train);
    if (n == 0) {
      warn(diag, "slice " + std::to_string(t) + " (" + s.label + ") is empty");
      continue;
    }
    const auto n_valid = static_cast<std::size_t>(std::llround(options.valid_fraction * n));
    const auto n_test = std::min(
        n - n_valid, static_cast<std::size_t>(std::llround(options.test_fraction * n)));
    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    Rng split_rng(derive_seed(seed, "split", t));
    // Partial Fisher-Yates: only the first n_valid + n_test entries are needed.
    for (std::size_t i = 0; i < n_valid + n_test; ++i) {
      const std::size_t j = i + split_rng.below(n - i);
      std::swap(perm[i], perm[j]);
    }
    for (std::size_t i = 0; i < n_valid; ++i) s.split[perm[i]] = Split::valid;
    for (std::size_t i = n_valid; i < n_valid + n_test; ++i) s.split[perm[i]] = Split::test;
  }
  return TimeSlicedCorpus(static_cast<std::uint32_t>(vocab.size()), options.granularity,
                          std::move(slices));
}

void save_bundle(const std::filesystem::path& dir, const CorpusBundle& bundle,
                 std::uint64_t seed, const SliceOptions& options) {
  std::filesystem::create_directories(dir);
  bundle.corpus.save(dir / "corpus.dlc");
  bundle.vocab.save(dir / "vocab.tsv");
  io::KeyValues meta;
  meta["granularity"] = std::string(to_string(bundle.corpus.granularity()));
  meta["period_days"] = std::to_string(options.period_days);
  meta["subsample_threshold"] = io::format_double(options.subsample_threshold);
  meta["total_tokens"] = std::to_string(bundle.vocab.total_tokens());
  meta["seed"] = std::to_string(seed);
  meta["slices"] = std::to_string(bundle.corpus.num_slices());
  std::string labels;
  for (const auto& s : bundle.corpus.slices()) {
    if (!labels.empty()) labels += ',';
    labels += s.label;
  }
  meta["labels"] = labels;
  auto out = io::open_out(dir / "corpus.meta");
  out << io::format_key_values(meta);
}

CorpusBundle load_bundle(const std::filesystem::path& dir_or_cache) {
  std::filesystem::path dir = dir_or_cache;
  std::filesystem::path cache = dir / "corpus.dlc";
  if (!std::filesystem::is_directory(dir_or_cache)) {
    cache = dir_or_cache;
    dir = dir_or_cache.parent_path();
  }
  CorpusBundle bundle;
  bundle.corpus = TimeSlicedCorpus::load(cache);
  std::optional<std::uint64_t> total;
  if (std::filesystem::exists(dir / "corpus.meta")) {
    auto meta = io::read_key_values(dir / "corpus.meta");
    if (meta.contains("total_tokens")) total = std::stoull(meta["total_tokens"]);
    if (meta.contains("granularity")) {
      bundle.corpus.set_granularity(parse_granularity(meta["granularity"]));
    }
    if (meta.contains("labels") && bundle.corpus.num_slices() > 0) {
      std::vector<std::string> labels;
      for (auto l : io::split(meta["labels"], ',')) labels.emplace_back(l);
      bundle.corpus.set_labels(labels);
    }
  }
  bundle.vocab = Vocabulary::load(dir / "vocab.tsv", total);
  if (bundle.vocab.size() != bundle.corpus.vocab_size()) {
    throw DataError(cache.string() + ": vocabulary size " +
                    std::to_string(bundle.vocab.size()) + " does not match cache V=" +
                    std::to_string(bundle.corpus.vocab_size()));
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Batches

void append_example(const Slice& slice, std::size_t pos, ContextBatch& batch) {
  const auto [begin, end] = slice.document_range(pos);
  const int c = batch.window;
  batch.centers.push_back(slice.ids[pos]);
  for (int j = 0; j < 2 * c; ++j) {
    const long offset = j < c ? j - c : j - c + 1;
    const long p = static_cast<long>(pos) + offset;
    if (p >= static_cast<long>(begin) && p < static_cast<long>(end)) {
      batch.contexts.push_back(slice.ids[static_cast<std::size_t>(p)]);
      batch.mask.push_back(1);
    } else {
      batch.contexts.push_back(0);
      batch.mask.push_back(0);
    }
  }
}

std::vector<std::uint32_t> eligible_positions(const Slice& slice, Split split) {
  std::vector<std::uint32_t> out;
  for (std::size_t d = 0; d < slice.doc_starts.size(); ++d) {
    const std::size_t begin = slice.doc_starts[d];
    const std::size_t end =
        d + 1 < slice.doc_starts.size() ? slice.doc_starts[d + 1] : slice.ids.size();
    if (end - begin < 2) continue;
    for (std::size_t p = begin; p < end; ++p) {
      if (slice.split[p] == split) out.push_back(static_cast<std::uint32_t>(p));
    }
  }
  return out;
}

BatchSampler::BatchSampler(const TimeSlicedCorpus& corpus, int window,
                           std::size_t batch_size, std::uint64_t seed)
    : corpus_(&corpus), window_(window), batch_size_(batch_size), rng_(seed) {
  if (window < 1) throw DataError("context window must be >= 1");
  if (batch_size < 1) throw DataError("batch size must be >= 1");
}

BatchSampler::BatchSampler(const TimeSlicedCorpus& corpus, std::size_t t, int window,
                           std::size_t batch_size, Split split, std::uint64_t seed,
                           Diagnostics* diag)
    : BatchSampler(corpus, window, batch_size, seed) {
  if (t >= corpus.num_slices()) {
    throw DataError("slice index " + std::to_string(t) + " out of range (T=" +
                    std::to_string(corpus.num_slices()) + ")");
  }
  batch_slice_ = static_cast<std::uint32_t>(t);
  slice_ids_.push_back(t);
  positions_.push_back(eligible_positions(corpus.slice(t), split));
  offsets_.push_back(0);
  total_ = positions_.back().size();
  if (total_ == 0) {
    warn(diag, "slice " + std::to_string(t) + " has no usable " +
                   std::string(to_string(split)) + " positions; no batches");
  }
}

BatchSampler BatchSampler::pooled(const TimeSlicedCorpus& corpus, int window,
                                  std::size_t batch_size, Split split, std::uint64_t seed,
                                  Diagnostics* diag) {
  BatchSampler s(corpus, window, batch_size, seed);
  for (std::size_t t = 0; t < corpus.num_slices(); ++t) {
    auto pos = eligible_positions(corpus.slice(t), split);
    if (pos.empty()) continue;
    s.slice_ids_.push_back(t);
    s.offsets_.push_back(s.total_);
    s.total_ += pos.size();
    s.positions_.push_back(std::move(pos));
  }
  if (s.total_ == 0) {
    warn(diag, "corpus has no usable " + std::string(to_string(split)) +
                   " positions; no batches");
  }
  return s;
}

ContextBatch BatchSampler::next() {
  ContextBatch batch;
  batch.slice = batch_slice_;
  batch.window = window_;
  if (total_ == 0) return batch;
  batch.centers.reserve(batch_size_);
  batch.contexts.reserve(batch_size_ * 2 * window_);
  batch.mask.reserve(batch_size_ * 2 * window_);
  for (std::size_t i = 0; i < batch_size_; ++i) {
    const std::size_t g = rng_.below(total_);
    const std::size_t k = static_cast<std::size_t>(
        std::upper_bound(offsets_.begin(), offsets_.end(), g) - offsets_.begin() - 1);
    const std::size_t pos = positions_[k][g - offsets_[k]];
    append_example(corpus_->slice(slice_ids_[k]), pos, batch);
  }
  return batch;
}

}  // namespace driftlab
