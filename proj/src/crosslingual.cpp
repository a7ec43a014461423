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

#include "driftlab/crosslingual.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "driftlab/drift_analysis.hpp"
#include "driftlab/io.hpp"

namespace driftlab {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kMapMagic[4] = {'D', 'L', 'A', 'M'};

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
  return std::clamp(ab / (na * nb), -1.0, 1.0);
}

void normalize_row(std::span<double> row) {
  const double n = norm(row);
  if (n == 0.0) return;
  for (double& x : row) x /= n;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BilingualLexicon BilingualLexicon::parse(std::string_view text) {
  BilingualLexicon lex;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  for (std::string_view line : io::split(text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto f = io::split(line, '\t');
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": expected 'src<TAB>tgt'");
    }
    std::string src(io::trim(f[0])), tgt(io::trim(f[1]));
    if (seen.insert(src).second) lex.pairs.emplace_back(std::move(src), std::move(tgt));
  }
  return lex;
}

BilingualLexicon BilingualLexicon::load(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void BilingualLexicon::save(const std::filesystem::path& path) const {
  auto out = io::open_out(path);
  for (const auto& [s, t] : pairs) out << s << '\t' << t << '\n';
}

ResolvedLexicon resolve(const BilingualLexicon& lexicon, const Vocabulary& src,
                        const Vocabulary& tgt) {
  ResolvedLexicon r;
  std::set<WordId> src_used, tgt_used;
  for (const auto& [s, t] : lexicon.pairs) {
    const auto a = src.find(s);
    const auto b = tgt.find(t);
    if (!a || !b) {
      ++r.skipped;
      continue;
    }
    r.ids.emplace_back(*a, *b);
    r.words.emplace_back(s, t);
    src_used.insert(*a);
    tgt_used.insert(*b);
  }
  if (src.size() > 0) r.coverage_src = static_cast<double>(src_used.size()) / src.size();
  if (tgt.size() > 0) r.coverage_tgt = static_cast<double>(tgt_used.size()) / tgt.size();
  return r;
}

EmbeddingState normalize(const EmbeddingState& state, std::span<const WordId> required,
                         std::span<const std::string> words) {
  for (WordId v : required) {
    for (std::size_t t = 0; t < state.num_slices(); ++t) {
      if (norm(state.rho(t, v)) == 0.0) {
        const std::string name = v < words.size() ? words[v] : "#" + std::to_string(v);
        throw DataError("normalize: word '" + name + "' has a zero vector at slice " +
                        std::to_string(t));
      }
    }
  }
  EmbeddingState out = state;
  for (std::size_t t = 0; t < out.num_slices(); ++t) {
    for (WordId v = 0; v < out.vocab_size(); ++v) normalize_row(out.rho(t, v));
  }
  for (WordId v = 0; v < out.vocab_size(); ++v) normalize_row(out.alpha(v));
  return out;
}

void AlignmentMap::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t i = 0; i < dim; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += q[i * dim + k] * x[k];
    out[i] = s;
  }
}

AlignmentMap AlignmentMap::transposed() const {
  AlignmentMap t = *this;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) t.q[i * dim + j] = q[j * dim + i];
  }
  return t;
}

double AlignmentMap::orthogonality_error() const {
  Eigen::Map<const RowMatrix> m(q.data(), static_cast<Eigen::Index>(dim),
                                static_cast<Eigen::Index>(dim));
  return (m.transpose() * m - RowMatrix::Identity(m.rows(), m.cols())).norm();
}

void AlignmentMap::save(const std::filesystem::path& path) const {
  auto out = io::open_out(path, true);
  out.write(kMapMagic, 4);
  io::write_u64(out, dim);
  io::write_f64s(out, q);
  io::write_f64(out, residual);
  io::write_u64(out, pairs);
  if (!out) throw DataError("failed writing " + path.string());
}

AlignmentMap AlignmentMap::load(const std::filesystem::path& path) {
  auto in = io::open_in(path, true);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMapMagic)) {
    throw DataError(path.string() + ": not an alignment map");
  }
  const std::string where = path.string();
  AlignmentMap m;
  m.dim = io::read_u64(in, where);
  if (m.dim == 0 || m.dim > (1u << 14)) throw DataError(where + ": implausible dimension");
  m.q.resize(m.dim * m.dim);
  io::read_f64s(in, m.q, where);
  m.residual = io::read_f64(in, where);
  m.pairs = io::read_u64(in, where);
  return m;
}

AlignmentMap fit_procrustes(std::span<const double> x, std::span<const double> y,
                            std::size_t n, std::size_t dim) {
  if (x.size() != n * dim || y.size() != n * dim) {
    throw DataError("fit_procrustes: input sizes do not match n x dim");
  }
  if (n < dim) {
    throw DataError("alignment is underdetermined: " + std::to_string(n) + " pairs for " +
                    std::to_string(dim) + " dimensions");
  }
  const auto N = static_cast<Eigen::Index>(n), D = static_cast<Eigen::Index>(dim);
  Eigen::Map<const RowMatrix> X(x.data(), N, D), Y(y.data(), N, D);
  // Cross-covariance sum_i y_i x_i^T = U S V^T; the optimum is Q = U V^T.
  const Eigen::MatrixXd M = Y.transpose() * X;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0 || s(D - 1) <= 1e-10 * s(0)) {
    throw DataError("alignment cross-covariance is rank-deficient");
  }
  const Eigen::MatrixXd Q = svd.matrixU() * svd.matrixV().transpose();

  AlignmentMap map;
  map.dim = dim;
  map.pairs = n;
  map.q.resize(dim * dim);
  for (Eigen::Index i = 0; i < D; ++i) {
    for (Eigen::Index j = 0; j < D; ++j) map.q[static_cast<std::size_t>(i * D + j)] = Q(i, j);
  }
  map.residual = (X * Q.transpose() - Y).rowwise().squaredNorm().mean();
  return map;
}

AlignmentMap fit_alignment(const EmbeddingState& src, const EmbeddingState& tgt,
                           const ResolvedLexicon& lexicon, std::span<const std::string> src_words) {
  if (src.dim() != tgt.dim()) throw DataError("fit_alignment: dimensions differ");
  const std::size_t D = src.dim(), n = lexicon.ids.size();
  std::vector<double> x(n * D), y(n * D);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] = lexicon.ids[i];
    const auto xs = src.rho(0, a), ys = tgt.rho(0, b);
    if (norm(xs) == 0.0 || norm(ys) == 0.0) {
      const std::string name = a < src_words.size() ? src_words[a] : lexicon.words[i].first;
      throw DataError("fit_alignment: word '" + name + "' has a zero vector");
    }
    std::copy(xs.begin(), xs.end(), x.begin() + static_cast<std::ptrdiff_t>(i * D));
    std::copy(ys.begin(), ys.end(), y.begin() + static_cast<std::ptrdiff_t>(i * D));
    normalize_row({x.data() + i * D, D});
    normalize_row({y.data() + i * D, D});
  }
  return fit_procrustes(x, y, n, D);
}

EmbeddingState apply_alignment(const AlignmentMap& map, const EmbeddingState& state) {
  if (map.dim != state.dim()) {
    throw DataError("apply_alignment: map has dimension " + std::to_string(map.dim) +
                    " but the model has " + std::to_string(state.dim()));
  }
  EmbeddingState out(state.num_slices(), state.vocab_size(), state.dim());
  for (std::size_t t = 0; t < state.num_slices(); ++t) {
    for (WordId v = 0; v < state.vocab_size(); ++v) map.apply(state.rho(t, v), out.rho(t, v));
  }
  for (WordId v = 0; v < state.vocab_size(); ++v) map.apply(state.alpha(v), out.alpha(v));
  return out;
}

CrossDriftResult cross_drift(const EmbeddingState& src, const Vocabulary& src_vocab,
                             const EmbeddingState& tgt, const Vocabulary& tgt_vocab,
                             const BilingualLexicon& lexicon, std::size_t t0,
                             std::size_t t_last) {
  if (src.dim() != tgt.dim()) throw DataError("cross_drift: dimensions differ");
  if (t0 >= src.num_slices() || t_last >= src.num_slices() || t0 >= tgt.num_slices() ||
      t_last >= tgt.num_slices()) {
    throw DataError("cross_drift: slice out of range");
  }
  if (src.vocab_size() != src_vocab.size() || tgt.vocab_size() != tgt_vocab.size()) {
    throw DataError("cross_drift: model and vocabulary sizes differ");
  }
  CrossDriftResult out;
  for (const auto& [s, t] : lexicon.pairs) {
    const auto a = src_vocab.find(s);
    const auto b = tgt_vocab.find(t);
    if (!a || !b) {
      ++out.skipped;
      continue;
    }
    CrossDriftRecord r;
    r.src_word = s;
    r.tgt_word = t;
    auto euclid = [](std::span<const double> p, std::span<const double> q) {
      double acc = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - q[i]) * (p[i] - q[i]);
      return std::sqrt(acc);
    };
    r.drift_src = euclid(src.rho(t_last, *a), src.rho(t0, *a));
    r.drift_tgt = euclid(tgt.rho(t_last, *b), tgt.rho(t0, *b));
    r.sim_first = cosine(src.rho(t0, *a), tgt.rho(t0, *b));
    r.sim_last = cosine(src.rho(t_last, *a), tgt.rho(t_last, *b));
    r.sim_drift = std::abs(r.sim_last - r.sim_first);
    out.records.push_back(std::move(r));
  }
  return out;
}

void write_records_tsv(const std::filesystem::path& path,
                       const std::vector<CrossDriftRecord>& records) {
  auto out = io::open_out(path);
  out << "src_word\ttgt_word\tdrift_src\tdrift_tgt\tsim_first\tsim_last\tsim_drift\n";
  for (const auto& r : records) {
    out << r.src_word << '\t' << r.tgt_word << '\t' << io::format_double(r.drift_src) << '\t'
        << io::format_double(r.drift_tgt) << '\t' << io::format_double(r.sim_first) << '\t'
        << io::format_double(r.sim_last) << '\t' << io::format_double(r.sim_drift) << '\n';
  }
}

std::vector<CrossDriftRecord> read_records_tsv(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::vector<CrossDriftRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("src_word\t", 0) == 0) continue;
    const auto f = io::split(line, '\t');
    if (f.size() != 7) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 7 columns");
    }
    CrossDriftRecord r;
    r.src_word = std::string(f[0]);
    r.tgt_word = std::string(f[1]);
    try {
      r.drift_src = io::parse_double(f[2]);
      r.drift_tgt = io::parse_double(f[3]);
      r.sim_first = io::parse_double(f[4]);
      r.sim_last = io::parse_double(f[5]);
      r.sim_drift = io::parse_double(f[6]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string_view to_string(BehaviorClass c) {
  switch (c) {
    case BehaviorClass::co_drift: return "1";
    case BehaviorClass::divergent: return "2";
    case BehaviorClass::single_src: return "3a";
    case BehaviorClass::single_tgt: return "3b";
    case BehaviorClass::stable: return "4";
  }
  return "?";
}

Thresholds mean_thresholds(const std::vector<CrossDriftRecord>& records) {
  Thresholds t;
  if (records.empty()) return t;
  for (const auto& r : records) {
    t.drift_src += r.drift_src;
    t.drift_tgt += r.drift_tgt;
    t.sim_drift += r.sim_drift;
  }
  const auto n = static_cast<double>(records.size());
  t.drift_src /= n;
  t.drift_tgt /= n;
  t.sim_drift /= n;
  return t;
}

Thresholds percentile_thresholds(const std::vector<CrossDriftRecord>& records, double q) {
  if (records.empty()) throw DataError("percentile_thresholds: no records");
  if (!(q >= 0.0 && q <= 1.0)) throw UsageError("percentile must be within [0, 1]");
  std::vector<double> a, b, c;
  for (const auto& r : records) {
    a.push_back(r.drift_src);
    b.push_back(r.drift_tgt);
    c.push_back(r.sim_drift);
  }
  return {quantile(a, q), quantile(b, q), quantile(c, q)};
}

BehaviorClass classify_record(const CrossDriftRecord& r, const Thresholds& cuts) {
  const bool src = r.drift_src > cuts.drift_src;
  const bool tgt = r.drift_tgt > cuts.drift_tgt;
  if (src && tgt) {
    return r.sim_first - r.sim_last > cuts.sim_drift ? BehaviorClass::divergent
                                                     : BehaviorClass::co_drift;
  }
  if (src) return BehaviorClass::single_src;
  if (tgt) return BehaviorClass::single_tgt;
  return BehaviorClass::stable;
}

Classification classify(const std::vector<CrossDriftRecord>& records,
                        std::optional<Thresholds> cuts) {
  if (records.empty()) throw DataError("classify: no records");
  Classification out;
  out.cuts = cuts ? *cuts : mean_thresholds(records);
  std::array<std::size_t, 5> counts{};
  for (const auto& r : records) {
    out.classes.push_back(classify_record(r, out.cuts));
    ++counts[static_cast<std::size_t>(out.classes.back())];
  }
  const auto n = static_cast<double>(records.size());
  std::size_t last = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    out.proportions[i] = static_cast<double>(counts[i]) / n;
    if (counts[i] > 0) last = i;
  }
  // Nudge the last non-empty class so the left-to-right sum is exactly 1.
  auto total = [&] {
    double s = 0.0;
    for (double p : out.proportions) s += p;
    return s;
  };
  for (int guard = 0; guard < 64 && total() != 1.0; ++guard) {
    out.proportions[last] =
        std::nextafter(out.proportions[last], total() < 1.0 ? 2.0 : -1.0);
  }
  return out;
}

Projection pca_2d(std::span<const double> rows, std::size_t n, std::size_t dim) {
  if (n < 3) throw DataError("projection needs at least 3 vectors, got " + std::to_string(n));
  if (rows.size() != n * dim || dim < 1) throw DataError("pca_2d: input size mismatch");
  const auto N = static_cast<Eigen::Index>(n), D = static_cast<Eigen::Index>(dim);
  Eigen::Map<const RowMatrix> X(rows.data(), N, D);
  const Eigen::RowVectorXd mu = X.colwise().mean();
  const Eigen::MatrixXd C = X.rowwise() - mu;
  const Eigen::MatrixXd cov = (C.transpose() * C) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");

  Projection p;
  for (Eigen::Index i = D - 1; i >= 0; --i) p.eigenvalues.push_back(std::max(0.0, eig.eigenvalues()(i)));
  Eigen::MatrixXd axes(D, 2);
  for (int k = 0; k < 2; ++k) {
    if (k >= D) {
      axes.col(k).setZero();
      continue;
    }
    Eigen::VectorXd a = eig.eigenvectors().col(D - 1 - k);
    // Fix the sign so the largest-magnitude entry is positive.
    Eigen::Index idx = 0;
    a.cwiseAbs().maxCoeff(&idx);
    if (a(idx) < 0) a = -a;
    axes.col(k) = a;
  }
  const Eigen::MatrixXd Z = C * axes;
  p.coords.resize(n);
  for (Eigen::Index i = 0; i < N; ++i) p.coords[static_cast<std::size_t>(i)] = {Z(i, 0), Z(i, 1)};
  return p;
}

std::vector<ProjectedPoint> project_2d(const std::vector<ProjectionModel>& models,
                                       std::span<const std::string> focus_words,
                                       std::size_t m) {
  std::vector<ProjectedPoint> points;
  std::vector<double> rows;
  std::size_t dim = 0;
  bool any_focus = false;
  for (const auto& model : models) {
    const EmbeddingState& st = *model.state;
    if (dim == 0) dim = st.dim();
    if (st.dim() != dim) throw DataError("project_2d: models have different dimensions");
    for (const std::string& w : focus_words) {
      const auto id = model.vocab->find(w);
      if (!id) continue;
      any_focus = true;
      for (std::size_t t = 0; t < st.num_slices(); ++t) {
        auto add = [&](WordId v, bool is_focus) {
          points.push_back({model.label, model.vocab->word(v), t, w, is_focus, 0.0, 0.0});
          const auto r = st.rho(t, v);
          const std::size_t off = rows.size();
          rows.insert(rows.end(), r.begin(), r.end());
          normalize_row({rows.data() + off, dim});
        };
        add(*id, true);
        for (const auto& nb : nearest_neighbors(st, *id, t, m)) add(nb.id, false);
      }
    }
  }
  if (!any_focus) throw DataError("project_2d: none of the focus words is in any vocabulary");
  const auto proj = pca_2d(rows, points.size(), dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i].x = proj.coords[i][0];
    points[i].y = proj.coords[i][1];
  }
  return points;
}

void write_projection_tsv(const std::filesystem::path& path,
                          const std::vector<ProjectedPoint>& points) {
  auto out = io::open_out(path);
  out << "model\tfocus\tword\tt\tkind\tx\ty\n";
  for (const auto& p : points) {
    out << p.model << '\t' << p.focus << '\t' << p.word << '\t' << p.t << '\t'
        << (p.is_focus ? "focus" : "neighbor") << '\t' << io::format_double(p.x) << '\t'
        << io::format_double(p.y) << '\n';
  }
}

}  // namespace driftlab
