#pragma once

// Learned candidate retrieval for the ground fact database.
//
// A one-hidden-layer perceptron is trained to reproduce the constant index:
// input row k is the one-hot code of the k-th constant, its target the
// multi-hot code of the facts containing that constant. At query time the
// query's constants are encoded multi-hot and outputs above the threshold
// become candidate fact ids. The engine's ground unification filters any
// wrong candidates, so answers stay sound whatever the model predicts.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "natlog/error.hpp"
#include "natlog/ground_db.hpp"
#include "natlog/term.hpp"

namespace natlog {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct TrainConfig {
  std::size_t hidden_size = 0;  // 0 selects max(16, number of facts)
  std::size_t epochs = 2000;
  double learning_rate = 2.0;
  std::uint64_t seed = 42;
  double threshold = 0.5;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw error("threshold must lie strictly between 0 and 1");
    if (!(learning_rate > 0.0)) throw error("learning rate must be positive");
  }
  std::size_t hidden_for(std::size_t nfacts) const {
    return hidden_size ? hidden_size : std::max<std::size_t>(16, nfacts);
  }
};

/// The database's distinct constants in Constant order; position = feature.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<Constant> constants) : constants_(std::move(constants)) {
    for (std::size_t i = 0; i < constants_.size(); ++i) index_.emplace(constants_[i], i);
  }
  static Vocab from_db(const FactDb& db) { return Vocab(db.constants()); }

  std::size_t size() const noexcept { return constants_.size(); }
  const Constant& operator[](std::size_t i) const { return constants_[i]; }
  const std::vector<Constant>& constants() const noexcept { return constants_; }
  const std::size_t* position(const Constant& c) const {
    auto it = index_.find(c);
    return it == index_.end() ? nullptr : &it->second;
  }

  /// FNV-1a over the rendered constants; ties a saved model to its vocabulary.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const Constant& c : constants_) {
      for (unsigned char ch : to_string(c.term())) {
        h ^= ch;
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  std::vector<Constant> constants_;
  std::unordered_map<Constant, std::size_t, ConstantHash> index_;
};

/// Multi-hot code of `cs`; constants outside the vocabulary contribute nothing.
inline std::vector<double> encode_constants(const Vocab& vocab, std::span<const Constant> cs) {
  std::vector<double> x(vocab.size(), 0.0);
  for (const Constant& c : cs)
    if (const std::size_t* p = vocab.position(c)) x[*p] = 1.0;
  return x;
}

struct TrainingSet {
  Matrix x;  // nconst x nconst, the identity
  Matrix y;  // nconst x nfacts, row k = facts containing vocab[k]
};

inline TrainingSet build_training_set(const FactDb& db, const Vocab& vocab) {
  if (db.empty()) throw EmptyDb("cannot build a training set from an empty database");
  const std::size_t n = vocab.size();
  TrainingSet ts{Matrix(n, n), Matrix(n, db.size())};
  for (std::size_t k = 0; k < n; ++k) {
    ts.x(k, k) = 1.0;
    if (const IdSet* ids = db.const_ids(vocab[k]))
      for (FactId id : *ids) ts.y(k, id) = 1.0;
  }
  return ts;
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy of sigmoid(z) against y, computed from the logit.
inline double bce_from_logit(double z, double y) {
  double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
  return softplus - y * z;
}

// Uniform in [0, 1) from the top 53 bits; mt19937_64 output is fixed by the
// standard, so weights are reproducible across platforms.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// One hidden layer, logistic activations on both layers.
class Mlp {
 public:
  Matrix w1;               // hidden x inputs
  std::vector<double> b1;  // hidden
  Matrix w2;               // outputs x hidden
  std::vector<double> b2;  // outputs

  Mlp() = default;

  /// Glorot-uniform weights from `seed`, zero biases.
  Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs, std::uint64_t seed)
      : w1(hidden, inputs), b1(hidden, 0.0), w2(outputs, hidden), b2(outputs, 0.0) {
    std::mt19937_64 rng(seed);
    double r1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
    double r2 = std::sqrt(6.0 / static_cast<double>(hidden + outputs));
    for (double& w : w1.data) w = (2.0 * detail::unit_uniform(rng) - 1.0) * r1;
    for (double& w : w2.data) w = (2.0 * detail::unit_uniform(rng) - 1.0) * r2;
  }

  std::size_t inputs() const noexcept { return w1.cols; }
  std::size_t hidden() const noexcept { return w1.rows; }
  std::size_t outputs() const noexcept { return w2.rows; }

  /// logistic(w2 · logistic(w1 · x + b1) + b2)
  std::vector<double> predict(std::span<const double> x) const {
    if (x.size() != inputs()) throw error("predict: input has wrong length");
    std::vector<double> h(hidden());
    for (std::size_t j = 0; j < hidden(); ++j) {
      double z = b1[j];
      auto w = w1.row(j);
      for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] != 0.0) z += w[k] * x[k];
      h[j] = detail::sigmoid(z);
    }
    std::vector<double> out(outputs());
    for (std::size_t o = 0; o < outputs(); ++o) {
      double z = b2[o];
      auto w = w2.row(o);
      for (std::size_t j = 0; j < h.size(); ++j) z += w[j] * h[j];
      out[o] = detail::sigmoid(z);
    }
    return out;
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

struct MlpGradients {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

namespace detail {

// Full-batch forward pass, optionally followed by the backward pass.
// Objective: mean over rows of the summed per-output cross-entropy.
class BatchPass {
 public:
  BatchPass(const Matrix& x, const Matrix& y) : x_(x), y_(y) {
    if (x.rows != y.rows) throw error("training set: X and y row counts differ");
    nonzeros_.resize(x.rows);
    for (std::size_t s = 0; s < x.rows; ++s)
      for (std::size_t k = 0; k < x.cols; ++k)
        if (x(s, k) != 0.0) nonzeros_[s].push_back(k);
  }

  double objective(const Mlp& m) {
    forward(m);
    return objective_;
  }

  MlpGradients gradients(const Mlp& m) {
    forward(m);
    const std::size_t n = x_.rows, hid = m.hidden(), out = m.outputs();
    const double scale = 1.0 / static_cast<double>(n);
    MlpGradients g{Matrix(hid, m.inputs()), std::vector<double>(hid, 0.0), Matrix(out, hid),
                   std::vector<double>(out, 0.0)};
    std::vector<double> d2(out), da(hid);
    for (std::size_t s = 0; s < n; ++s) {
      auto a = act_.row(s);
      auto p = prob_.row(s);
      auto t = y_.row(s);
      std::fill(da.begin(), da.end(), 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        double d = (p[o] - t[o]) * scale;
        d2[o] = d;
        g.b2[o] += d;
        auto gw = g.w2.row(o);
        auto w = m.w2.row(o);
        for (std::size_t j = 0; j < hid; ++j) {
          gw[j] += d * a[j];
          da[j] += d * w[j];
        }
      }
      for (std::size_t j = 0; j < hid; ++j) {
        double d1 = da[j] * a[j] * (1.0 - a[j]);
        g.b1[j] += d1;
        auto gw = g.w1.row(j);
        for (std::size_t k : nonzeros_[s]) gw[k] += d1 * x_(s, k);
      }
    }
    return g;
  }

 private:
  void forward(const Mlp& m) {
    if (x_.cols != m.inputs() || y_.cols != m.outputs()) throw error("training set does not match network shape");
    const std::size_t n = x_.rows, hid = m.hidden(), out = m.outputs();
    act_ = Matrix(n, hid);
    prob_ = Matrix(n, out);
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      auto a = act_.row(s);
      for (std::size_t j = 0; j < hid; ++j) {
        double z = m.b1[j];
        for (std::size_t k : nonzeros_[s]) z += m.w1(j, k) * x_(s, k);
        a[j] = sigmoid(z);
      }
      auto p = prob_.row(s);
      auto t = y_.row(s);
      for (std::size_t o = 0; o < out; ++o) {
        double z = m.b2[o];
        auto w = m.w2.row(o);
        for (std::size_t j = 0; j < hid; ++j) z += w[j] * a[j];
        p[o] = sigmoid(z);
        total += bce_from_logit(z, t[o]);
      }
    }
    objective_ = total / static_cast<double>(n);
  }

  const Matrix& x_;
  const Matrix& y_;
  std::vector<std::vector<std::size_t>> nonzeros_;
  Matrix act_, prob_;
  double objective_ = 0.0;
};

}  // namespace detail

/// Training objective: mean over rows of summed per-output cross-entropy.
inline double training_objective(const Mlp& m, const Matrix& x, const Matrix& y) {
  return detail::BatchPass(x, y).objective(m);
}

/// Mean binary cross-entropy per (row, output) entry.
inline double mean_bce(const Mlp& m, const Matrix& x, const Matrix& y) {
  return training_objective(m, x, y) / static_cast<double>(y.cols);
}

/// Analytic gradient of training_objective.
inline MlpGradients gradients(const Mlp& m, const Matrix& x, const Matrix& y) {
  return detail::BatchPass(x, y).gradients(m);
}

/// Full-batch gradient descent for cfg.epochs epochs. Returns the final mean
/// binary cross-entropy. Throws DivergedLoss if the loss stops being finite.
inline double fit(Mlp& m, const Matrix& x, const Matrix& y, const TrainConfig& cfg) {
  cfg.validate();
  detail::BatchPass pass(x, y);
  const double lr = cfg.learning_rate;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    MlpGradients g = pass.gradients(m);
    for (std::size_t i = 0; i < m.w1.data.size(); ++i) m.w1.data[i] -= lr * g.w1.data[i];
    for (std::size_t i = 0; i < m.b1.size(); ++i) m.b1[i] -= lr * g.b1[i];
    for (std::size_t i = 0; i < m.w2.data.size(); ++i) m.w2.data[i] -= lr * g.w2.data[i];
    for (std::size_t i = 0; i < m.b2.size(); ++i) m.b2[i] -= lr * g.b2[i];
  }
  double loss = pass.objective(m) / static_cast<double>(y.cols);
  if (!std::isfinite(loss)) throw DivergedLoss("training loss is not finite");
  return loss;
}

// ---------------------------------------------------------------------------

/// Pluggable learner behind the neural indexer: fit on (X, y), then predict
/// per-fact scores in [0, 1] for an encoded query.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual double fit(const Matrix& x, const Matrix& y) = 0;
  virtual std::vector<double> predict(std::span<const double> x) const = 0;
  virtual bool ready() const = 0;
};

class MlpLearner : public Learner {
 public:
  explicit MlpLearner(TrainConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  double fit(const Matrix& x, const Matrix& y) override {
    Mlp m(x.cols, cfg_.hidden_for(y.cols), y.cols, cfg_.seed);
    double loss = natlog::fit(m, x, y, cfg_);
    model_ = std::move(m);
    ready_ = true;
    return loss;
  }
  std::vector<double> predict(std::span<const double> x) const override {
    if (!ready_) throw ModelNotTrained("neural indexer used before training");
    return model_.predict(x);
  }
  bool ready() const override { return ready_; }

  /// Uses `m` as-is, trained or not.
  void set_model(Mlp m) {
    model_ = std::move(m);
    ready_ = true;
  }
  const Mlp& model() const {
    if (!ready_) throw ModelNotTrained("no model");
    return model_;
  }
  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  TrainConfig cfg_;
  Mlp model_;
  bool ready_ = false;
};

namespace detail {

inline void write_doubles(std::ostream& os, const char* tag, std::span<const double> v) {
  os << tag;
  char buf[64];
  for (double d : v) {
    auto r = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::hex);
    os << ' ' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
  }
  os << '\n';
}

inline std::vector<double> read_doubles(std::istream& is, const char* tag, std::size_t n) {
  std::string word;
  if (!(is >> word) || word != tag) throw ModelFormatError(std::string("model file: expected section ") + tag);
  std::vector<double> v(n);
  for (auto& d : v) {
    if (!(is >> word)) throw ModelFormatError(std::string("model file: truncated section ") + tag);
    const char* b = word.data();
    bool neg = !word.empty() && word[0] == '-';
    if (neg) ++b;
    auto r = std::from_chars(b, word.data() + word.size(), d, std::chars_format::hex);
    if (r.ec != std::errc() || r.ptr != word.data() + word.size())
      throw ModelFormatError("model file: bad number '" + word + "'");
    if (neg) d = -d;
    if (!std::isfinite(d)) throw ModelFormatError("model file: non-finite weight");
  }
  return v;
}

}  // namespace detail

inline constexpr const char* kModelMagic = "natlog-mlp";
inline constexpr int kModelVersion = 1;

/// Text weight file: a versioned header (dimensions, seed, threshold,
/// vocabulary fingerprint) followed by hex-float weights, exact on reload.
inline void save_model(std::ostream& os, const Mlp& m, const TrainConfig& cfg, std::uint64_t vocab_fingerprint) {
  os << kModelMagic << ' ' << kModelVersion << '\n';
  os << "dims " << m.inputs() << ' ' << m.hidden() << ' ' << m.outputs() << '\n';
  os << "seed " << cfg.seed << '\n';
  os << "threshold " << cfg.threshold << '\n';
  os << "vocab " << vocab_fingerprint << '\n';
  detail::write_doubles(os, "w1", m.w1.data);
  detail::write_doubles(os, "b1", m.b1);
  detail::write_doubles(os, "w2", m.w2.data);
  detail::write_doubles(os, "b2", m.b2);
}

struct LoadedModel {
  Mlp mlp;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::uint64_t vocab_fingerprint = 0;
};

inline LoadedModel load_model(std::istream& is) {
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != kModelMagic) throw ModelFormatError("not a natlog model file");
  if (version != kModelVersion) throw ModelFormatError("unsupported model version " + std::to_string(version));
  std::size_t in = 0, hid = 0, out = 0;
  LoadedModel lm;
  if (!(is >> word >> in >> hid >> out) || word != "dims") throw ModelFormatError("model file: bad dims");
  if (!(is >> word >> lm.seed) || word != "seed") throw ModelFormatError("model file: bad seed");
  if (!(is >> word >> lm.threshold) || word != "threshold") throw ModelFormatError("model file: bad threshold");
  if (!(is >> word >> lm.vocab_fingerprint) || word != "vocab") throw ModelFormatError("model file: bad vocab");
  lm.mlp.w1 = Matrix(hid, in);
  lm.mlp.w1.data = detail::read_doubles(is, "w1", hid * in);
  lm.mlp.b1 = detail::read_doubles(is, "b1", hid);
  lm.mlp.w2 = Matrix(out, hid);
  lm.mlp.w2.data = detail::read_doubles(is, "w2", out * hid);
  lm.mlp.b2 = detail::read_doubles(is, "b2", out);
  return lm;
}

/// Indexer backed by a learner trained on the database's constant index.
class NeuralIndexer : public Indexer {
 public:
  NeuralIndexer(std::shared_ptr<const FactDb> db, TrainConfig cfg = {})
      : NeuralIndexer(std::move(db), std::make_unique<MlpLearner>(cfg), cfg.threshold) {}

  NeuralIndexer(std::shared_ptr<const FactDb> db, std::unique_ptr<Learner> learner, double threshold)
      : db_(std::move(db)), vocab_(Vocab::from_db(*db_)), learner_(std::move(learner)), threshold_(threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw error("threshold must lie strictly between 0 and 1");
  }

  /// Fits the learner on the training set derived from the database and
  /// returns the final loss.
  double train() {
    TrainingSet ts = build_training_set(*db_, vocab_);
    return learner_->fit(ts.x, ts.y);
  }

  bool ready() const { return learner_->ready(); }
  const Vocab& vocab() const noexcept { return vocab_; }
  const FactDb& db() const override { return *db_; }
  Learner& learner() noexcept { return *learner_; }
  double threshold() const noexcept { return threshold_; }

  /// Raw per-fact scores for a constant set.
  std::vector<double> scores(std::span<const Constant> cs) const {
    return learner_->predict(encode_constants(vocab_, cs));
  }

  IdSet ground_match_of(const Term& query) const override {
    if (!learner_->ready()) throw ModelNotTrained("neural indexer used before training");
    auto cs = const_of(query);
    if (cs.empty()) return all_ids(db_->size());
    for (const Constant& c : cs)
      if (!vocab_.position(c)) return {};
    auto p = scores(cs);
    IdSet out;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] > threshold_) out.push_back(static_cast<FactId>(i));
    return out;
  }

  /// Only for the built-in MLP learner.
  void save(const std::string& path) const {
    const auto& ml = mlp_learner();
    std::ofstream os(path);
    if (!os) throw error("cannot write model file: " + path);
    TrainConfig cfg = ml.config();
    cfg.threshold = threshold_;
    save_model(os, ml.model(), cfg, vocab_.fingerprint());
  }

  void load(const std::string& path) {
    auto& ml = mlp_learner();
    std::ifstream is(path);
    if (!is) throw error("cannot open model file: " + path);
    LoadedModel lm = load_model(is);
    if (lm.vocab_fingerprint != vocab_.fingerprint() || lm.mlp.inputs() != vocab_.size() ||
        lm.mlp.outputs() != db_->size())
      throw ModelFormatError("model file " + path + " was trained on a different database");
    ml.set_model(std::move(lm.mlp));
    threshold_ = lm.threshold;
  }

 private:
  MlpLearner& mlp_learner() const {
    auto* ml = dynamic_cast<MlpLearner*>(learner_.get());
    if (!ml) throw error("model files are supported only for the built-in MLP learner");
    return *ml;
  }

  std::shared_ptr<const FactDb> db_;
  Vocab vocab_;
  std::unique_ptr<Learner> learner_;
  double threshold_;
};

}  // namespace natlog
