#ifndef DRIFTLAB_TEST_FIXTURES_HPP
#define DRIFTLAB_TEST_FIXTURES_HPP

#include <chrono>
#include <string>
#include <vector>

#include "driftlab/corpus.hpp"
#include "driftlab/random.hpp"

namespace driftlab::testing {

// Two disjoint topics: documents of `length` words drawn from one of them.
// Words "a0".."a{n-1}" and "b0".."b{n-1}"; one slice per year.
inline std::vector<DatedDocument> two_topic_documents(std::size_t slices, std::size_t docs,
                                                      std::size_t words_per_topic,
                                                      std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DatedDocument> out;
  for (std::size_t t = 0; t < slices; ++t) {
    for (std::size_t d = 0; d < docs; ++d) {
      DatedDocument doc;
      doc.date = std::chrono::year{2000 + static_cast<int>(t)} / std::chrono::January /
                 std::chrono::day{1 + static_cast<unsigned>(d % 28)};
      const char topic = rng.below(2) == 0 ? 'a' : 'b';
      for (std::size_t i = 0; i < length; ++i) {
        doc.tokens.push_back(std::string(1, topic) + std::to_string(rng.below(words_per_topic)));
      }
      out.push_back(std::move(doc));
    }
  }
  return out;
}

// Documents of words drawn uniformly from "w0".."w{n-1}"; no structure.
inline std::vector<DatedDocument> noise_documents(std::size_t slices, std::size_t docs,
                                                  std::size_t words, std::size_t length,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DatedDocument> out;
  for (std::size_t t = 0; t < slices; ++t) {
    for (std::size_t d = 0; d < docs; ++d) {
      DatedDocument doc;
      doc.date = std::chrono::year{2000 + static_cast<int>(t)} / std::chrono::March /
                 std::chrono::day{1 + static_cast<unsigned>(d % 28)};
      for (std::size_t i = 0; i < length; ++i) {
        doc.tokens.push_back("w" + std::to_string(rng.below(words)));
      }
      out.push_back(std::move(doc));
    }
  }
  return out;
}

struct Fixture {
  Vocabulary vocab;
  TimeSlicedCorpus corpus;
};

inline Fixture make_fixture(const std::vector<DatedDocument>& docs, std::uint64_t seed = 7) {
  Vocabulary vocab = build_vocabulary(docs, 10000, Stoplist{});
  SliceOptions opts;
  opts.subsample_threshold = 0.0;
  TimeSlicedCorpus corpus = slice_corpus(docs, vocab, opts, seed);
  return {std::move(vocab), std::move(corpus)};
}

}  // namespace driftlab::testing

#endif  // DRIFTLAB_TEST_FIXTURES_HPP
