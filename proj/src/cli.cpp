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

#include "driftlab/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "driftlab/common.hpp"
#include "driftlab/crosslingual.hpp"
#include "driftlab/drift_analysis.hpp"
#include "driftlab/evaluation.hpp"
#include "driftlab/io.hpp"
#include "driftlab/synth.hpp"

namespace driftlab {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest initialization failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), n) != 1) {
      throw Error("sha256: digest update failed");
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw Error("sha256: digest finalization failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

void save_model(const fs::path& dir, const Model& model) {
  fs::create_directories(dir);
  {
    auto out = io::open_out(dir / "config.txt");
    out << io::format_key_values(model.checkpoint.config.to_key_values());
  }
  model.vocab.save(dir / "vocab.tsv");
  save_embeddings_text(model.checkpoint.state, model.vocab.words(), dir / "rho.txt",
                       dir / "alpha.txt");
  model.checkpoint.save(dir / "checkpoint.bin");
  save_metrics_tsv(dir / "metrics.tsv", model.checkpoint.log);
  if (!model.corpus.empty()) {
    auto out = io::open_out(dir / "source.txt");
    out << model.corpus.string() << '\n';
  }
}

Model load_model(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + ": not a model directory");
  Model m;
  m.checkpoint = Checkpoint::load(dir / "checkpoint.bin");
  m.vocab = Vocabulary::load(dir / "vocab.tsv");
  if (m.vocab.size() != m.checkpoint.state.vocab_size()) {
    throw DataError(dir.string() + ": vocab.tsv has " + std::to_string(m.vocab.size()) +
                    " words but the checkpoint has " +
                    std::to_string(m.checkpoint.state.vocab_size()));
  }
  if (fs::exists(dir / "source.txt")) {
    auto in = io::open_in(dir / "source.txt");
    std::string line;
    std::getline(in, line);
    m.corpus = std::string(io::trim(line));
  }
  return m;
}

namespace {

using Json = nlohmann::ordered_json;

// One manifest per invocation, written next to the outputs.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : start_(std::chrono::steady_clock::now()) {
    j_["command"] = std::move(command);
    j_["argv"] = args;
    j_["version"] = std::string(kVersion);
    j_["config"] = Json::object();
    j_["seeds"] = Json::object();
    j_["inputs"] = Json::object();
    j_["outputs"] = Json::object();
  }

  void config(const io::KeyValues& kv) {
    for (const auto& [k, v] : kv) j_["config"][k] = v;
  }
  void config(const std::string& key, const std::string& value) { j_["config"][key] = value; }
  void seed(const std::string& name, std::uint64_t value) { j_["seeds"][name] = value; }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void status(const std::string& s) { j_["status"] = s; }

  void write(const fs::path& path) {
    for (const auto& p : inputs_) add_digests(j_["inputs"], p);
    for (const auto& p : outputs_) add_digests(j_["outputs"], p);
    j_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (!j_.contains("status")) j_["status"] = "ok";
    auto out = io::open_out(path);
    out << j_.dump(2) << '\n';
  }

 private:
  static void add_digests(Json& into, const fs::path& p) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() != "manifest.json") {
          files.push_back(e.path());
        }
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) into[f.string()] = sha256_file(f);
    } else if (fs::is_regular_file(p)) {
      into[p.string()] = sha256_file(p);
    }
  }

  Json j_;
  std::chrono::steady_clock::time_point start_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

fs::path manifest_for_dir(const fs::path& dir) { return dir / "manifest.json"; }
fs::path manifest_for_file(const fs::path& file) {
  return fs::path(file.string() + ".manifest.json");
}

// "report.tsv" -> "report.<tag>.tsv"
fs::path sibling(const fs::path& out, const std::string& tag) {
  fs::path p = out;
  const std::string ext = p.has_extension() ? p.extension().string() : std::string(".tsv");
  p.replace_extension();
  return fs::path(p.string() + "." + tag + ext);
}

void make_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto item : io::split(s, ',')) {
    item = io::trim(item);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

std::string dashes(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

// Removes "--config FILE" from the arguments and appends every key of FILE
// as "--key=value" unless that flag was given explicitly.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      file = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!file) return args;
  const io::KeyValues kv = io::read_key_values(*file);
  for (const auto& [key, value] : kv) {
    const std::string flag = "--" + dashes(key);
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

void require_same_vocab(const Vocabulary& a, const Vocabulary& b, const std::string& what) {
  if (a.words() != b.words()) {
    throw DataError(what + ": vocabulary differs from the corpus vocabulary");
  }
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a, Manifest& man, std::ostream& out) {
  SynthSpec spec = SynthSpec::from_key_values(io::read_key_values(a.spec));
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  const SynthOutput result = generate(spec);
  write_synth(a.out, result);
  {
    auto f = io::open_out(fs::path(a.out) / "spec.txt");
    f << io::format_key_values(spec.to_key_values());
  }
  man.config(spec.to_key_values());
  man.seed("seed", spec.seed);
  man.input(a.spec);
  man.output(a.out);
  man.write(manifest_for_dir(a.out));
  out << "wrote " << result.primary.documents.size() << " sentences over " << spec.num_slices
      << " slices to " << a.out << (result.mirror ? " (bilingual)" : "") << '\n';
  return kOk;
}

// ---------------------------------------------------------------- slice

struct SliceArgs {
  std::string input, out, granularity = "annual", stoplist = "none";
  std::size_t vocab_size = 10000;
  int period_days = 30;
  double subsample = 1e-5, valid_fraction = 0.1, test_fraction = 0.1;
  std::uint64_t seed = 1;
};

int run_slice(const SliceArgs& a, Manifest& man, std::ostream& out) {
  SliceOptions opt;
  opt.granularity = parse_granularity(a.granularity);
  opt.period_days = a.period_days;
  opt.subsample_threshold = a.subsample;
  opt.valid_fraction = a.valid_fraction;
  opt.test_fraction = a.test_fraction;
  Diagnostics diag;
  IngestStats stats;
  const auto docs = ingest(a.input, &stats);
  const Stoplist stop = a.stoplist == "none" ? Stoplist{} : load_stoplist(a.stoplist);
  CorpusBundle bundle;
  bundle.vocab = build_vocabulary(docs, a.vocab_size, stop, &diag);
  bundle.corpus = slice_corpus(docs, bundle.vocab, opt, a.seed, &diag);
  save_bundle(a.out, bundle, a.seed, opt);

  man.config("vocab_size", std::to_string(a.vocab_size));
  man.config("granularity", a.granularity);
  man.config("period_days", std::to_string(a.period_days));
  man.config("subsample", io::format_double(a.subsample));
  man.config("valid_fraction", io::format_double(a.valid_fraction));
  man.config("test_fraction", io::format_double(a.test_fraction));
  man.config("stoplist", a.stoplist);
  man.seed("seed", a.seed);
  man.input(a.input);
  man.output(a.out);
  man.write(manifest_for_dir(a.out));
  out << "sliced " << docs.size() << " documents (" << stats.malformed << " malformed lines"
      << ") into " << bundle.corpus.num_slices() << " slices, V=" << bundle.vocab.size()
      << ", train/valid/test positions " << bundle.corpus.count(Split::train) << '/'
      << bundle.corpus.count(Split::valid) << '/' << bundle.corpus.count(Split::test) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, out, granularity;
  bool static_only = false;
  std::map<std::string, std::string> values;  // config key -> flag value
};

int run_train(const TrainArgs& a, Manifest& man, std::ostream& out) {
  const CorpusBundle bundle = load_bundle(a.corpus);
  const TimeSlicedCorpus& corpus = bundle.corpus;
  if (!a.granularity.empty() && parse_granularity(a.granularity) != corpus.granularity()) {
    throw DataError(a.corpus + ": corpus was sliced " +
                    std::string(to_string(corpus.granularity())) + ", not " + a.granularity);
  }

  io::KeyValues kv = TrainingConfig{}.to_key_values();
  if (corpus.granularity() == Granularity::monthly) kv["minibatches_per_slice"] = "100";
  for (const auto& [key, value] : a.values) {
    if (!value.empty() && key != "init") kv[key] = value;
  }
  // --init <dir> names the model directly and beats any init_path.
  if (const std::string& init = a.values.at("init"); !init.empty()) {
    if (init == "static" || init == "random" || init == "file") {
      kv["init"] = init;
    } else {
      kv["init"] = "file";
      kv["init_path"] = init;
    }
  }
  if (kv["init"] != "file") kv["init_path"] = "";
  TrainingConfig config = TrainingConfig::from_key_values(kv);
  config.validate();

  man.config(config.to_key_values());
  man.config("static_only", a.static_only ? "true" : "false");
  man.seed("seed", config.seed);
  man.input(a.corpus);

  Diagnostics diag;
  Model model;
  model.vocab = bundle.vocab;
  model.corpus = fs::absolute(a.corpus).lexically_normal();
  const std::size_t T = corpus.num_slices(), V = corpus.vocab_size();

  if (a.static_only) {
    std::vector<MetricRecord> log;
    model.checkpoint.state = train_static(corpus, bundle.vocab, config, &diag, &log);
    model.checkpoint.config = config;
    model.checkpoint.epoch = config.static_epochs;
    model.checkpoint.log = std::move(log);
  } else {
    EmbeddingState init;
    switch (config.init) {
      case InitMode::from_static:
        init = init_dynamic(train_static(corpus, bundle.vocab, config, &diag), T);
        break;
      case InitMode::random:
        init = initial_state(T, V, config);
        break;
      case InitMode::from_file: {
        Model from = load_model(config.init_path);
        require_same_vocab(from.vocab, bundle.vocab, config.init_path);
        man.input(config.init_path);
        if (from.checkpoint.state.num_slices() == 1) {
          init = init_dynamic(from.checkpoint.state, T);
        } else if (from.checkpoint.state.num_slices() == T) {
          init = std::move(from.checkpoint.state);
        } else {
          throw DataError(config.init_path + ": model has " +
                          std::to_string(from.checkpoint.state.num_slices()) +
                          " slices, corpus has " + std::to_string(T));
        }
        if (init.dim() != static_cast<std::size_t>(config.dim)) {
          throw DataError(config.init_path + ": dimension " + std::to_string(init.dim()) +
                          " does not match dim = " + std::to_string(config.dim));
        }
        break;
      }
    }
    try {
      model.checkpoint = train_dynamic(corpus, bundle.vocab, config, std::move(init), &diag);
    } catch (const NumericalAbort& e) {
      model.checkpoint = e.last_finite();
      save_model(a.out, model);
      man.status(std::string("aborted: ") + e.what());
      man.output(a.out);
      man.write(manifest_for_dir(a.out));
      throw;
    }
  }
  save_model(a.out, model);
  man.output(a.out);
  man.write(manifest_for_dir(a.out));
  out << "trained " << (a.static_only ? "static" : std::string(to_string(config.prior.variant)))
      << " model: T=" << model.checkpoint.state.num_slices() << " V=" << V
      << " D=" << config.dim << " -> " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model, corpus, split = "test", out;
  std::optional<std::size_t> batch_size;
  std::optional<double> scale;
};

fs::path corpus_of(const Model& m, const std::string& override_path, const std::string& model) {
  if (!override_path.empty()) return override_path;
  if (m.corpus.empty()) {
    throw UsageError(model + " does not record its corpus; pass --corpus");
  }
  return m.corpus;
}

int run_eval(const EvalArgs& a, int threads, Manifest& man, std::ostream& out) {
  const Model m = load_model(a.model);
  const fs::path corpus_path = corpus_of(m, a.corpus, a.model);
  const CorpusBundle bundle = load_bundle(corpus_path);
  require_same_vocab(m.vocab, bundle.vocab, a.model);
  const Split split = parse_split(a.split);
  const std::size_t batch =
      a.batch_size.value_or(static_cast<std::size_t>(m.checkpoint.config.batch_size));
  const EvalCurve curve = evaluate(m.checkpoint.state, bundle.corpus, split,
                                   m.checkpoint.config.window, batch, a.scale, threads);
  make_parent(a.out);
  curve.save_tsv(a.out);

  man.config("split", a.split);
  man.config("batch_size", std::to_string(batch));
  man.config("scale", io::format_double(curve.scale));
  man.input(a.model);
  man.input(corpus_path);
  man.output(a.out);
  man.write(manifest_for_file(a.out));
  out << "mean " << to_string(split) << " scaled l_pos = " << io::format_double(curve.mean)
      << " (scale " << io::format_double(curve.scale) << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::vector<std::string> curves;
  std::string names, out;
};

int run_compare(const CompareArgs& a, Manifest& man, std::ostream& out) {
  std::vector<std::string> names = split_list(a.names);
  if (!names.empty() && names.size() != a.curves.size()) {
    throw UsageError("--names lists " + std::to_string(names.size()) + " names for " +
                     std::to_string(a.curves.size()) + " curves");
  }
  std::vector<std::pair<std::string, EvalCurve>> curves;
  for (std::size_t i = 0; i < a.curves.size(); ++i) {
    const std::string name = names.empty() ? fs::path(a.curves[i]).stem().string() : names[i];
    curves.emplace_back(name, EvalCurve::load_tsv(a.curves[i]));
    man.input(a.curves[i]);
  }
  const auto rows = compare(curves);
  out << format_ranking_text(rows);
  if (!a.out.empty()) {
    make_parent(a.out);
    auto f = io::open_out(a.out);
    f << format_ranking_tsv(rows);
    man.output(a.out);
    man.write(manifest_for_file(a.out));
  }
  return kOk;
}

// ---------------------------------------------------------------- drift

struct DriftArgs {
  std::string model, out, metric = "euclidean", bin_scale = "linear", ks = "10,500";
  std::size_t t0 = 0, top = 10, bins = 60;
};

int run_drift(const DriftArgs& a, Manifest& man, std::ostream& out) {
  const Model m = load_model(a.model);
  const EmbeddingState& state = m.checkpoint.state;
  const DriftReport report = drift_report(state, a.t0, parse_drift_metric(a.metric));
  const auto& words = m.vocab.words();
  const std::size_t k = std::min(a.top, report.vocab_size);
  const auto ranked = top_drifting(report, k);

  make_parent(a.out);
  write_drift_report_tsv(a.out, report, words);
  const fs::path top_path = sibling(a.out, "top");
  write_top_drifting_tsv(top_path, report, ranked, words);

  const BinScale scale = parse_bin_scale(a.bin_scale);
  std::vector<Histogram> hist;
  const fs::path med_path = sibling(a.out, "median");
  {
    auto f = io::open_out(med_path);
    f << "t\tmedian_drift\n";
    for (std::size_t t = 0; t < report.num_slices; ++t) {
      f << t << '\t' << io::format_double(median_drift(report, t)) << '\n';
      if (t != a.t0) hist.push_back(drift_histogram(report, t, a.bins, scale));
    }
  }
  const fs::path hist_path = sibling(a.out, "hist");
  write_histograms_tsv(hist_path, hist);

  std::vector<std::size_t> ks;
  for (const auto& s : split_list(a.ks)) {
    try {
      ks.push_back(std::min<std::size_t>(std::stoul(s), report.vocab_size));
    } catch (const std::exception&) {
      throw UsageError("--ks expects comma-separated counts, got '" + s + "'");
    }
  }
  const fs::path sum_path = sibling(a.out, "normalized");
  {
    auto f = io::open_out(sum_path);
    f << "k\tmean_normalized\tused\texcluded\n";
    const bool any = std::any_of(report.total.begin(), report.total.end(),
                                 [](double x) { return x > 0.0; });
    if (any) {
      for (const auto& s : normalized_drift_summary(report, ks)) {
        f << s.k << '\t'
          << (std::isnan(s.mean_normalized) ? std::string("NA")
                                            : io::format_double(s.mean_normalized))
          << '\t' << s.used << '\t' << s.excluded << '\n';
      }
    }
  }

  man.config("t0", std::to_string(a.t0));
  man.config("top", std::to_string(a.top));
  man.config("metric", a.metric);
  man.config("bins", std::to_string(a.bins));
  man.config("bin_scale", a.bin_scale);
  man.config("ks", a.ks);
  man.input(a.model);
  for (const auto& p : {fs::path(a.out), top_path, med_path, hist_path, sum_path}) man.output(p);
  man.write(manifest_for_file(a.out));

  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << i + 1 << '\t' << words[ranked[i]] << '\t' << io::format_double(report.total[ranked[i]])
        << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- align

struct AlignArgs {
  std::string src, tgt, lexicon, out, aligned_out;
};

int run_align(const AlignArgs& a, Manifest& man, std::ostream& out) {
  const Model src = load_model(a.src);
  const Model tgt = load_model(a.tgt);
  for (const auto* m : {&src, &tgt}) {
    if (m->checkpoint.state.num_slices() != 1) {
      throw DataError((m == &src ? a.src : a.tgt) +
                      ": alignment needs a static model (train --static-only)");
    }
  }
  const BilingualLexicon lex = BilingualLexicon::load(a.lexicon);
  const ResolvedLexicon res = resolve(lex, src.vocab, tgt.vocab);
  const AlignmentMap map =
      fit_alignment(src.checkpoint.state, tgt.checkpoint.state, res, src.vocab.words());
  make_parent(a.out);
  map.save(a.out);
  man.input(a.src);
  man.input(a.tgt);
  man.input(a.lexicon);
  man.output(a.out);
  if (!a.aligned_out.empty()) {
    Model aligned = src;
    aligned.checkpoint.state = apply_alignment(map, src.checkpoint.state);
    save_model(a.aligned_out, aligned);
    man.output(a.aligned_out);
  }
  man.write(manifest_for_file(a.out));
  out << "aligned on " << map.pairs << " pairs (" << res.skipped << " skipped), residual "
      << io::format_double(map.residual) << ", orthogonality error "
      << io::format_double(map.orthogonality_error()) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- xdrift

struct XdriftArgs {
  std::string src, tgt, lexicon, out;
  std::size_t t0 = 0;
  std::optional<std::size_t> t_last;
};

int run_xdrift(const XdriftArgs& a, Manifest& man, std::ostream& out) {
  const Model src = load_model(a.src);
  const Model tgt = load_model(a.tgt);
  const BilingualLexicon lex = BilingualLexicon::load(a.lexicon);
  const std::size_t T = src.checkpoint.state.num_slices();
  const std::size_t t_last = a.t_last.value_or(T > 0 ? T - 1 : 0);
  const CrossDriftResult r = cross_drift(src.checkpoint.state, src.vocab, tgt.checkpoint.state,
                                         tgt.vocab, lex, a.t0, t_last);
  make_parent(a.out);
  write_records_tsv(a.out, r.records);
  man.config("t0", std::to_string(a.t0));
  man.config("t_last", std::to_string(t_last));
  man.input(a.src);
  man.input(a.tgt);
  man.input(a.lexicon);
  man.output(a.out);
  man.write(manifest_for_file(a.out));
  out << r.records.size() << " pairs, " << r.skipped << " skipped\n";
  return kOk;
}

// ---------------------------------------------------------------- classify

struct ClassifyArgs {
  std::string records, out;
  std::optional<double> percentile;
};

int run_classify(const ClassifyArgs& a, Manifest& man, std::ostream& out) {
  const auto records = read_records_tsv(a.records);
  if (records.empty()) throw DataError(a.records + ": no records");
  std::optional<Thresholds> cuts;
  if (a.percentile) {
    if (!(*a.percentile > 0.0 && *a.percentile < 1.0)) {
      throw UsageError("--percentile must be within (0, 1)");
    }
    cuts = percentile_thresholds(records, *a.percentile);
  }
  const Classification cl = classify(records, cuts);
  make_parent(a.out);
  {
    auto f = io::open_out(a.out);
    f << "src_word\ttgt_word\tclass\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      f << records[i].src_word << '\t' << records[i].tgt_word << '\t'
        << to_string(cl.classes[i]) << '\n';
    }
  }
  const fs::path prop_path = sibling(a.out, "proportions");
  {
    auto f = io::open_out(prop_path);
    f << "# drift_src_cut=" << io::format_double(cl.cuts.drift_src)
      << " drift_tgt_cut=" << io::format_double(cl.cuts.drift_tgt)
      << " sim_drift_cut=" << io::format_double(cl.cuts.sim_drift) << '\n';
    f << "class\tproportion\n";
    for (std::size_t c = 0; c < cl.proportions.size(); ++c) {
      f << to_string(static_cast<BehaviorClass>(c)) << '\t'
        << io::format_double(cl.proportions[c]) << '\n';
    }
  }
  man.config("cuts", a.percentile ? "percentile " + io::format_double(*a.percentile) : "mean");
  man.input(a.records);
  man.output(a.out);
  man.output(prop_path);
  man.write(manifest_for_file(a.out));
  for (std::size_t c = 0; c < cl.proportions.size(); ++c) {
    out << "class " << to_string(static_cast<BehaviorClass>(c)) << '\t'
        << io::format_double(cl.proportions[c]) << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- project

struct ProjectArgs {
  std::string models, labels, words, out;
  std::size_t m = 5;
};

int run_project(const ProjectArgs& a, Manifest& man, std::ostream& out) {
  const auto dirs = split_list(a.models);
  auto labels = split_list(a.labels);
  if (dirs.empty()) throw UsageError("--models needs at least one model directory");
  if (!labels.empty() && labels.size() != dirs.size()) {
    throw UsageError("--labels must name every model");
  }
  std::vector<Model> loaded;
  loaded.reserve(dirs.size());
  for (const auto& d : dirs) {
    loaded.push_back(load_model(d));
    man.input(d);
  }
  std::vector<ProjectionModel> models;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    models.push_back({labels.empty() ? fs::path(dirs[i]).filename().string() : labels[i],
                      &loaded[i].checkpoint.state, &loaded[i].vocab});
  }
  const auto words = split_list(a.words);
  const auto points = project_2d(models, words, a.m);
  make_parent(a.out);
  write_projection_tsv(a.out, points);
  man.config("words", a.words);
  man.config("m", std::to_string(a.m));
  man.output(a.out);
  man.write(manifest_for_file(a.out));
  out << points.size() << " points projected\n";
  return kOk;
}

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  CLI::App app{"driftlab: dynamic word embeddings and semantic drift analysis", "driftlab"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  int threads = 1;
  app.add_option("--threads", threads, "Parallel readers for evaluation")
      ->check(CLI::PositiveNumber);
  std::string config_file;
  app.add_option("--config", config_file, "File of \"key = value\" lines mirroring the flags");
  app.set_version_flag("--version", std::string(kVersion));

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted drift");
  synth->add_option("--spec", sy.spec, "Spec file (key = value)")->required();
  synth->add_option("--out", sy.out, "Output directory")->required();
  synth->add_option("--seed", sy.seed, "Override the spec's seed");

  SliceArgs sl;
  auto* slice = app.add_subcommand("slice", "Ingest dated documents into a sliced corpus");
  slice->add_option("--input", sl.input, "Lines of \"YYYY-MM-DD<TAB>text\"")->required();
  slice->add_option("--out", sl.out, "Corpus directory")->required();
  slice->add_option("--vocab-size", sl.vocab_size, "Vocabulary size")->capture_default_str();
  slice->add_option("--granularity", sl.granularity, "annual|monthly|custom")
      ->capture_default_str();
  slice->add_option("--period-days", sl.period_days, "Slice length for custom granularity")
      ->capture_default_str();
  slice->add_option("--subsample", sl.subsample, "Subsampling threshold (<= 0 disables)")
      ->capture_default_str();
  slice->add_option("--valid-fraction", sl.valid_fraction)->capture_default_str();
  slice->add_option("--test-fraction", sl.test_fraction)->capture_default_str();
  slice->add_option("--stoplist", sl.stoplist, "en|fr|none|<file>")->capture_default_str();
  slice->add_option("--seed", sl.seed)->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a static or dynamic embedding model");
  train->add_option("--corpus", tr.corpus, "Corpus directory or its corpus.dlc")->required();
  train->add_option("--out", tr.out, "Model directory")->required();
  train->add_flag("--static-only", tr.static_only, "Train only the static (single-slice) model");
  train->add_option("--granularity", tr.granularity, "Expected corpus granularity");
  const io::KeyValues defaults = TrainingConfig{}.to_key_values();
  for (const auto& [key, value] : defaults) {
    std::string help = "default " + (value.empty() ? std::string("none") : value);
    if (key == "init") help = "static|random|<model dir>, default static";
    if (key == "variant") help = "dbe|dbe-i|dbe-nc|dbe-sc, default dbe";
    train->add_option("--" + dashes(key), tr.values[key], help);
  }

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Held-out scaled log-likelihood of the positives");
  eval->add_option("--model", ev.model)->required();
  eval->add_option("--corpus", ev.corpus, "Defaults to the model's training corpus");
  eval->add_option("--split", ev.split, "test|valid")->capture_default_str();
  eval->add_option("--out", ev.out, "Curve TSV")->required();
  eval->add_option("--batch-size", ev.batch_size, "Scale denominator (default: model's)");
  eval->add_option("--scale", ev.scale, "Explicit scale factor");

  CompareArgs cm;
  auto* cmp = app.add_subcommand("compare", "Rank evaluation curves by mean");
  cmp->add_option("curves", cm.curves, "Curve TSV files")->required();
  cmp->add_option("--names", cm.names, "Comma-separated row names");
  cmp->add_option("--out", cm.out, "Ranking TSV");

  DriftArgs dr;
  auto* drift = app.add_subcommand("drift", "Per-word drift report, rankings, histograms");
  drift->add_option("--model", dr.model)->required();
  drift->add_option("--out", dr.out, "Report TSV; siblings get .top/.median/.hist/.normalized")
      ->required();
  drift->add_option("--t0", dr.t0)->capture_default_str();
  drift->add_option("--top", dr.top)->capture_default_str();
  drift->add_option("--metric", dr.metric, "euclidean|cosine")->capture_default_str();
  drift->add_option("--bins", dr.bins)->capture_default_str()->check(CLI::PositiveNumber);
  drift->add_option("--bin-scale", dr.bin_scale, "linear|log")->capture_default_str();
  drift->add_option("--ks", dr.ks, "Top-k sizes for normalized drift")->capture_default_str();

  AlignArgs al;
  auto* align = app.add_subcommand("align", "Orthogonal map between two static models");
  align->add_option("--src", al.src)->required();
  align->add_option("--tgt", al.tgt)->required();
  align->add_option("--lexicon", al.lexicon)->required();
  align->add_option("--out", al.out, "Binary map file")->required();
  align->add_option("--aligned-out", al.aligned_out, "Write the mapped source model here");

  XdriftArgs xd;
  auto* xdrift = app.add_subcommand("xdrift", "Cross-lingual drift records for a lexicon");
  xdrift->add_option("--src", xd.src)->required();
  xdrift->add_option("--tgt", xd.tgt)->required();
  xdrift->add_option("--lexicon", xd.lexicon)->required();
  xdrift->add_option("--out", xd.out)->required();
  xdrift->add_option("--t0", xd.t0)->capture_default_str();
  xdrift->add_option("--t-last", xd.t_last, "Defaults to the last slice");

  ClassifyArgs cl;
  auto* classify_cmd = app.add_subcommand("classify", "Assign behavior classes to records");
  classify_cmd->add_option("--records", cl.records)->required();
  classify_cmd->add_option("--out", cl.out)->required();
  classify_cmd->add_option("--percentile", cl.percentile, "Quantile cuts instead of means");

  ProjectArgs pr;
  auto* project = app.add_subcommand("project", "2D projection of focus words and neighbors");
  project->add_option("--models", pr.models, "Comma-separated model directories")->required();
  project->add_option("--labels", pr.labels, "Comma-separated model labels");
  project->add_option("--words", pr.words, "Comma-separated focus words")->required();
  project->add_option("--m", pr.m, "Neighbors per focus word and slice")->capture_default_str();
  project->add_option("--out", pr.out)->required();

  std::vector<std::string> args;
  try {
    args = expand_config(raw);
  } catch (const UsageError& e) {
    err << "driftlab: " << e.what() << '\n';
    return kUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "driftlab: " << e.what() << "\n\n"
        << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsage;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest man(sub->get_name(), raw);
  man.config("threads", std::to_string(threads));
  if (sub == synth) return run_synth(sy, man, out);
  if (sub == slice) return run_slice(sl, man, out);
  if (sub == train) return run_train(tr, man, out);
  if (sub == eval) return run_eval(ev, threads, man, out);
  if (sub == cmp) return run_compare(cm, man, out);
  if (sub == drift) return run_drift(dr, man, out);
  if (sub == align) return run_align(al, man, out);
  if (sub == xdrift) return run_xdrift(xd, man, out);
  if (sub == classify_cmd) return run_classify(cl, man, out);
  return run_project(pr, man, out);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(args, out, err);
  } catch (const NumericalError& e) {
    err << "driftlab: numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const UsageError& e) {
    err << "driftlab: " << e.what() << "\n(see driftlab --help)\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "driftlab: data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "driftlab: data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "driftlab: error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace driftlab
