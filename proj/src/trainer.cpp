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

#include "driftlab/trainer.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>
#include <utility>

#include "driftlab/evaluation.hpp"
#include "driftlab/random.hpp"

namespace driftlab {

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'L', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("config: '" + key + "' expects an integer, got '" + value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    return io::parse_double(value);
  } catch (const std::exception&) {
    throw UsageError("config: '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config: '" + key + "' expects true or false, got '" + value + "'");
}

bool finite_step(const LossBreakdown& values, const SparseGradient& grad) {
  return std::isfinite(values.l_pos) && std::isfinite(values.l_neg) &&
         std::isfinite(values.l_prior) && grad.all_finite();
}

void clip(SparseGradient& grad, double limit) {
  if (limit <= 0.0) return;
  const double norm = std::sqrt(grad.squared_norm());
  if (norm > limit) grad.scale(limit / norm);
}

void add(LossBreakdown& acc, const LossBreakdown& x) {
  acc.l_pos += x.l_pos;
  acc.l_neg += x.l_neg;
  acc.l_prior += x.l_prior;
}

void check_shape(const EmbeddingState& state, std::size_t T, std::size_t V,
                 const TrainingConfig& config) {
  if (state.num_slices() != T || state.vocab_size() != V ||
      state.dim() != static_cast<std::size_t>(config.dim)) {
    throw DataError("initial state has shape T=" + std::to_string(state.num_slices()) +
                    " V=" + std::to_string(state.vocab_size()) +
                    " D=" + std::to_string(state.dim()) + ", expected T=" + std::to_string(T) +
                    " V=" + std::to_string(V) + " D=" + std::to_string(config.dim));
  }
}

}  // namespace

std::string_view to_string(InitMode m) {
  switch (m) {
    case InitMode::random: return "random";
    case InitMode::from_static: return "static";
    case InitMode::from_file: return "file";
  }
  return "?";
}

InitMode parse_init_mode(std::string_view s) {
  if (s == "random") return InitMode::random;
  if (s == "static") return InitMode::from_static;
  if (s == "file") return InitMode::from_file;
  throw UsageError("unknown init mode '" + std::string(s) + "' (random, static, file)");
}

void TrainingConfig::validate() const {
  prior.validate();
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw UsageError(std::string("config: ") + msg);
  };
  require(window >= 1, "window must be >= 1");
  require(dim >= 1, "dim must be >= 1");
  require(negatives >= 0, "negatives must be >= 0");
  require(minibatches_per_slice >= 0, "minibatches_per_slice must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be > 0");
  require(adagrad_initial >= 0.0 && std::isfinite(adagrad_initial), "adagrad_initial must be >= 0");
  require(static_epochs >= 0, "static_epochs must be >= 0");
  require(epochs >= 0, "epochs must be >= 0");
  require(init_scale >= 0.0, "init_scale must be >= 0");
  require(unigram_power >= 0.0, "unigram_power must be >= 0");
  require(init != InitMode::from_file || !init_path.empty(),
          "init = file needs init_path");
}

io::KeyValues TrainingConfig::to_key_values() const {
  io::KeyValues kv;
  kv["variant"] = std::string(to_string(prior.variant));
  kv["lambda"] = io::format_double(prior.lambda);
  kv["lambda0"] = io::format_double(prior.lambda0);
  kv["time_weighted"] = prior.time_weighted ? "true" : "false";
  kv["window"] = std::to_string(window);
  kv["dim"] = std::to_string(dim);
  kv["negatives"] = std::to_string(negatives);
  kv["minibatches_per_slice"] = std::to_string(minibatches_per_slice);
  kv["batch_size"] = std::to_string(batch_size);
  kv["learning_rate"] = io::format_double(learning_rate);
  kv["adagrad_initial"] = io::format_double(adagrad_initial);
  kv["static_epochs"] = std::to_string(static_epochs);
  kv["epochs"] = std::to_string(epochs);
  kv["seed"] = std::to_string(seed);
  kv["init"] = std::string(to_string(init));
  kv["init_path"] = init_path;
  kv["init_scale"] = io::format_double(init_scale);
  kv["clip_norm"] = io::format_double(clip_norm);
  kv["unigram_power"] = io::format_double(unigram_power);
  kv["shuffle_slices"] = shuffle_slices ? "true" : "false";
  kv["log_validation"] = log_validation ? "true" : "false";
  return kv;
}

TrainingConfig TrainingConfig::from_key_values(const io::KeyValues& kv) {
  TrainingConfig c;
  for (const auto& [key, value] : kv) {
    if (key == "variant") c.prior.variant = parse_variant(value);
    else if (key == "lambda") c.prior.lambda = parse_real(key, value);
    else if (key == "lambda0") c.prior.lambda0 = parse_real(key, value);
    else if (key == "time_weighted") c.prior.time_weighted = parse_bool(key, value);
    else if (key == "window") c.window = static_cast<int>(parse_int(key, value));
    else if (key == "dim") c.dim = static_cast<int>(parse_int(key, value));
    else if (key == "negatives") c.negatives = static_cast<int>(parse_int(key, value));
    else if (key == "minibatches_per_slice")
      c.minibatches_per_slice = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "learning_rate") c.learning_rate = parse_real(key, value);
    else if (key == "adagrad_initial") c.adagrad_initial = parse_real(key, value);
    else if (key == "static_epochs") c.static_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "seed") {
      try {
        c.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw UsageError("config: 'seed' expects an unsigned integer, got '" + value + "'");
      }
    } else if (key == "init") c.init = parse_init_mode(value);
    else if (key == "init_path") c.init_path = value;
    else if (key == "init_scale") c.init_scale = parse_real(key, value);
    else if (key == "clip_norm") c.clip_norm = parse_real(key, value);
    else if (key == "unigram_power") c.unigram_power = parse_real(key, value);
    else if (key == "shuffle_slices") c.shuffle_slices = parse_bool(key, value);
    else if (key == "log_validation") c.log_validation = parse_bool(key, value);
    else throw UsageError("config: unknown key '" + key + "'");
  }
  return c;
}

Adagrad::Adagrad(const EmbeddingState& like, double learning_rate, double initial, double eps)
    : lr_(learning_rate),
      eps_(eps),
      vocab_(like.vocab_size()),
      dim_(like.dim()),
      rho_acc_(like.rho_data().size(), initial),
      alpha_acc_(like.alpha_data().size(), initial) {}

void Adagrad::apply(EmbeddingState& state, const SparseGradient& grad) {
  auto step = [&](std::span<double> theta, double* acc, std::span<const double> g) {
    for (std::size_t d = 0; d < dim_; ++d) {
      acc[d] += g[d] * g[d];
      theta[d] += lr_ * g[d] / (std::sqrt(acc[d]) + eps_);
    }
  };
  for (std::size_t r = 0; r < grad.rho_rows(); ++r) {
    const auto [t, v] = grad.rho_keys()[r];
    step(state.rho(t, v), rho_acc_.data() + (t * vocab_ + v) * dim_, grad.rho_row(r));
  }
  for (std::size_t r = 0; r < grad.alpha_rows(); ++r) {
    const WordId v = grad.alpha_keys()[r];
    step(state.alpha(v), alpha_acc_.data() + v * dim_, grad.alpha_row(r));
  }
}

void Checkpoint::save(const std::filesystem::path& path) const {
  auto out = io::open_out(path, true);
  out.write(kCheckpointMagic, 4);
  io::write_u32(out, kCheckpointVersion);
  io::write_string(out, io::format_key_values(config.to_key_values()));
  io::write_u32(out, static_cast<std::uint32_t>(epoch));
  io::write_u64(out, state.num_slices());
  io::write_u64(out, state.vocab_size());
  io::write_u64(out, state.dim());
  io::write_f64s(out, state.rho_data());
  io::write_f64s(out, state.alpha_data());
  io::write_u64(out, log.size());
  for (const auto& r : log) {
    io::write_u32(out, static_cast<std::uint32_t>(r.epoch));
    io::write_u32(out, r.slice);
    io::write_f64(out, r.loss.l_pos);
    io::write_f64(out, r.loss.l_neg);
    io::write_f64(out, r.loss.l_prior);
    io::write_f64(out, r.valid_l_pos);
  }
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  auto in = io::open_in(path, true);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kCheckpointMagic)) {
    throw DataError(path.string() + ": not a checkpoint file");
  }
  const std::string where = path.string();
  if (io::read_u32(in, where) != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version");
  }
  Checkpoint c;
  c.config = TrainingConfig::from_key_values(io::parse_key_values(io::read_string(in, where)));
  c.epoch = static_cast<int>(io::read_u32(in, where));
  const auto T = io::read_u64(in, where);
  const auto V = io::read_u64(in, where);
  const auto D = io::read_u64(in, where);
  if (T > (1u << 20) || V > (1u << 28) || D > (1u << 16)) {
    throw DataError(path.string() + ": implausible state shape");
  }
  c.state = EmbeddingState(T, V, D);
  io::read_f64s(in, c.state.rho_data(), where);
  io::read_f64s(in, c.state.alpha_data(), where);
  const auto n = io::read_u64(in, where);
  for (std::uint64_t i = 0; i < n; ++i) {
    MetricRecord r;
    r.epoch = static_cast<int>(io::read_u32(in, where));
    r.slice = io::read_u32(in, where);
    r.loss.l_pos = io::read_f64(in, where);
    r.loss.l_neg = io::read_f64(in, where);
    r.loss.l_prior = io::read_f64(in, where);
    r.valid_l_pos = io::read_f64(in, where);
    c.log.push_back(r);
  }
  return c;
}

void save_metrics_tsv(const std::filesystem::path& path, const std::vector<MetricRecord>& log) {
  auto out = io::open_out(path);
  out << "epoch\tslice\tl_pos\tl_neg\tl_prior\tvalid_l_pos\n";
  for (const auto& r : log) {
    out << r.epoch << '\t' << r.slice << '\t' << io::format_double(r.loss.l_pos) << '\t'
        << io::format_double(r.loss.l_neg) << '\t' << io::format_double(r.loss.l_prior) << '\t'
        << (std::isnan(r.valid_l_pos) ? std::string("NA") : io::format_double(r.valid_l_pos))
        << '\n';
  }
}

EmbeddingState initial_state(std::size_t num_slices, std::size_t vocab_size,
                             const TrainingConfig& config) {
  return random_state(num_slices, vocab_size, static_cast<std::size_t>(config.dim),
                      config.init_scale, derive_seed(config.seed, "init", num_slices));
}

EmbeddingState train_static(const TimeSlicedCorpus& corpus, const Vocabulary& vocab,
                            const TrainingConfig& config, EmbeddingState init,
                            Diagnostics* diag, std::vector<MetricRecord>* log) {
  config.validate();
  const std::size_t V = corpus.vocab_size();
  if (vocab.size() != V) throw DataError("vocabulary and corpus sizes differ");
  check_shape(init, 1, V, config);
  EmbeddingState state = std::move(init);
  if (config.static_epochs == 0) return state;

  const NegativeSampler sampler(vocab.counts(), config.unigram_power, config.negatives,
                                derive_seed(config.seed, "static-negatives"));
  Adagrad opt(state, config.learning_rate, config.adagrad_initial);
  const std::size_t T = corpus.num_slices();
  const std::size_t per_epoch = static_cast<std::size_t>(config.minibatches_per_slice) * T;
  const double prior_scale = per_epoch > 0 ? 1.0 / static_cast<double>(per_epoch) : 0.0;

  for (int epoch = 0; epoch < config.static_epochs; ++epoch) {
    auto batches = BatchSampler::pooled(corpus, config.window,
                                        static_cast<std::size_t>(config.batch_size),
                                        Split::train,
                                        derive_seed(config.seed, "static-batches", epoch),
                                        epoch == 0 ? diag : nullptr);
    if (batches.empty()) {
      warn(diag, "static training: no training positions");
      break;
    }
    Rng neg_rng(derive_seed(config.seed, "static-draws", epoch));
    LossBreakdown sum;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const ContextBatch batch = batches.next();
      const NegativeDraws draws = draw_negatives(batch, sampler, neg_rng);
      LossBreakdown values;
      SparseGradient grad = gradients(state, batch, draws, config.prior, prior_scale, &values);
      if (!finite_step(values, grad)) {
        throw NumericalError("static training: non-finite loss or gradient at epoch " +
                             std::to_string(epoch) + ", minibatch " + std::to_string(b));
      }
      clip(grad, config.clip_norm);
      opt.apply(state, grad);
      add(sum, values);
    }
    spdlog::info("static epoch {}: l_pos={:.6g} l_neg={:.6g} l_prior={:.6g}",
                 epoch, sum.l_pos, sum.l_neg, sum.l_prior);
    if (log != nullptr) {
      MetricRecord r{epoch, 0, sum, std::numeric_limits<double>::quiet_NaN()};
      if (config.log_validation) {
        r.valid_l_pos = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
          r.valid_l_pos +=
              slice_log_likelihood(state, 0, corpus.slice(t), Split::valid, config.window);
        }
      }
      log->push_back(r);
    }
  }
  return state;
}

EmbeddingState train_static(const TimeSlicedCorpus& corpus, const Vocabulary& vocab,
                            const TrainingConfig& config, Diagnostics* diag,
                            std::vector<MetricRecord>* log) {
  return train_static(corpus, vocab, config, initial_state(1, corpus.vocab_size(), config),
                      diag, log);
}

EmbeddingState init_dynamic(const EmbeddingState& static_state, std::size_t num_slices) {
  if (static_state.num_slices() != 1) {
    throw DataError("init_dynamic expects a static (single-slice) state");
  }
  if (num_slices == 0) throw DataError("init_dynamic: zero slices");
  const std::size_t V = static_state.vocab_size(), D = static_state.dim();
  EmbeddingState out(num_slices, V, D);
  auto& rho = out.rho_data();
  const auto& src = static_state.rho_data();
  for (std::size_t t = 0; t < num_slices; ++t) {
    std::copy(src.begin(), src.end(), rho.begin() + static_cast<std::ptrdiff_t>(t * V * D));
  }
  out.alpha_data() = static_state.alpha_data();
  return out;
}

Checkpoint train_dynamic(const TimeSlicedCorpus& corpus, const Vocabulary& vocab,
                         const TrainingConfig& config, EmbeddingState init, Diagnostics* diag) {
  config.validate();
  const std::size_t T = corpus.num_slices();
  const std::size_t V = corpus.vocab_size();
  if (vocab.size() != V) throw DataError("vocabulary and corpus sizes differ");
  check_shape(init, T, V, config);

  Checkpoint ck;
  ck.config = config;
  ck.state = std::move(init);
  if (!ck.state.all_finite()) throw NumericalError("initial state is not finite");

  const NegativeSampler sampler(vocab.counts(), config.unigram_power, config.negatives,
                                derive_seed(config.seed, "negatives"));
  Adagrad opt(ck.state, config.learning_rate, config.adagrad_initial);
  const auto B = static_cast<std::size_t>(config.minibatches_per_slice);
  const double prior_scale = B > 0 ? 1.0 / static_cast<double>(B) : 0.0;

  std::vector<std::size_t> order(T);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle_slices) {
      Rng rng(derive_seed(config.seed, "order", epoch));
      for (std::size_t i = T; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    for (std::size_t t : order) {
      const std::uint64_t stream = static_cast<std::uint64_t>(epoch) * T + t;
      BatchSampler batches(corpus, t, config.window, static_cast<std::size_t>(config.batch_size),
                           Split::train, derive_seed(config.seed, "batches", stream),
                           epoch == 0 ? diag : nullptr);
      MetricRecord record;
      record.epoch = epoch;
      record.slice = static_cast<std::uint32_t>(t);
      if (!batches.empty()) {
        Rng neg_rng(derive_seed(config.seed, "draws", stream));
        for (std::size_t b = 0; b < B; ++b) {
          const ContextBatch batch = batches.next();
          const NegativeDraws draws = draw_negatives(batch, sampler, neg_rng);
          LossBreakdown values;
          SparseGradient grad =
              gradients(ck.state, batch, draws, config.prior, prior_scale, &values);
          if (!finite_step(values, grad)) {
            Checkpoint last = ck;
            throw NumericalAbort("non-finite loss or gradient at epoch " +
                                     std::to_string(epoch) + ", slice " + std::to_string(t) +
                                     ", minibatch " + std::to_string(b),
                                 std::move(last));
          }
          clip(grad, config.clip_norm);
          opt.apply(ck.state, grad);
          add(record.loss, values);
        }
      }
      if (config.log_validation) {
        record.valid_l_pos =
            slice_log_likelihood(ck.state, t, corpus.slice(t), Split::valid, config.window);
      }
      ck.log.push_back(record);
    }
    ck.epoch = epoch + 1;
    LossBreakdown sum;
    for (std::size_t i = ck.log.size() - T; i < ck.log.size(); ++i) add(sum, ck.log[i].loss);
    spdlog::info("epoch {}: l_pos={:.6g} l_neg={:.6g} l_prior={:.6g}", epoch, sum.l_pos,
                 sum.l_neg, sum.l_prior);
  }
  return ck;
}

}  // namespace driftlab
