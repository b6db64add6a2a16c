#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/random.hpp"

namespace nids {

struct ConvBlock {
  int n_filters = 8;
  int kernel_size = 3;
  int pool_size = 2;
  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

struct CnnParams {
  std::vector<ConvBlock> conv_blocks{ConvBlock{}};
  int dense_units = 32;
  double dropout_rate = 0.2;
  double learning_rate = 1e-2;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (conv_blocks.empty()) throw ConfigError("CnnParams: at least one conv block is required");
    for (const auto& b : conv_blocks) {
      if (b.n_filters < 1) throw ConfigError("CnnParams: n_filters must be >= 1");
      if (b.kernel_size < 1 || b.kernel_size % 2 == 0) throw ConfigError("CnnParams: kernel_size must be odd");
      if (b.pool_size < 1) throw ConfigError("CnnParams: pool_size must be >= 1");
    }
    if (dense_units < 1) throw ConfigError("CnnParams: dense_units must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("CnnParams: dropout_rate must be in [0,1)");
    if (!(learning_rate >= 0.0)) throw ConfigError("CnnParams: learning_rate must be >= 0");
    if (batch_size < 1) throw ConfigError("CnnParams: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("CnnParams: epochs must be >= 1");
  }
  friend bool operator==(const CnnParams&, const CnnParams&) = default;
};

inline void to_json(nlohmann::json& j, const CnnParams& p) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : p.conv_blocks)
    blocks.push_back({{"n_filters", b.n_filters}, {"kernel_size", b.kernel_size}, {"pool_size", b.pool_size}});
  j = {{"conv_blocks", blocks},     {"dense_units", p.dense_units}, {"dropout_rate", p.dropout_rate},
       {"learning_rate", p.learning_rate}, {"batch_size", p.batch_size},   {"epochs", p.epochs},
       {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, CnnParams& p) {
  p = {};
  if (j.contains("conv_blocks")) {
    p.conv_blocks.clear();
    for (const auto& b : j.at("conv_blocks"))
      p.conv_blocks.push_back({b.value("n_filters", 8), b.value("kernel_size", 3), b.value("pool_size", 2)});
  }
  p.dense_units = j.value("dense_units", p.dense_units);
  p.dropout_rate = j.value("dropout_rate", p.dropout_rate);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.epochs = j.value("epochs", p.epochs);
  p.seed = j.value("seed", p.seed);
}

struct PoolResult {
  std::vector<double> values;
  std::vector<std::size_t> argmax;  // flat input index that produced each output
};

// Non-overlapping max pooling over `channels` equal-length rows of `in`; the
// trailing len % pool positions are dropped. Ties go to the lowest index.
inline PoolResult maxpool1d(std::span<const double> in, std::size_t channels, std::size_t pool) {
  const std::size_t len = in.size() / channels, out_len = len / pool;
  PoolResult r{std::vector<double>(channels * out_len), std::vector<std::size_t>(channels * out_len)};
  for (std::size_t ch = 0; ch < channels; ++ch)
    for (std::size_t u = 0; u < out_len; ++u) {
      std::size_t best = ch * len + u * pool;
      for (std::size_t q = 1; q < pool; ++q)
        if (in[ch * len + u * pool + q] > in[best]) best = ch * len + u * pool + q;
      r.values[ch * out_len + u] = in[best];
      r.argmax[ch * out_len + u] = best;
    }
  return r;
}

// Routes each output gradient back to the input position that won the max.
inline std::vector<double> maxpool1d_backward(std::span<const std::size_t> argmax, std::span<const double> d_out,
                                              std::size_t in_size) {
  std::vector<double> d_in(in_size, 0.0);
  for (std::size_t i = 0; i < d_out.size(); ++i) d_in[argmax[i]] += d_out[i];
  return d_in;
}

// conv1d(same, stride 1) -> ReLU -> maxpool, repeated; flatten; dense -> ReLU ->
// dropout; dense -> softmax. All weights live in one flat vector.
class CnnModel {
public:
  struct ConvLayout {
    std::size_t in_channels, in_len, filters, kernel, pool, out_len;
    std::size_t w_offset, b_offset;
  };
  struct DenseLayout {
    std::size_t in, out, w_offset, b_offset;
  };

  CnnModel() = default;

  CnnModel(CnnParams p, std::size_t input_len, std::size_t n_classes) : params_(std::move(p)) {
    params_.validate();
    if (n_classes < 1) throw ConfigError("build_cnn: n_classes must be >= 1");
    input_len_ = input_len;
    n_classes_ = n_classes;
    std::size_t offset = 0, channels = 1, len = input_len;
    for (const auto& b : params_.conv_blocks) {
      ConvLayout c{channels, len, static_cast<std::size_t>(b.n_filters), static_cast<std::size_t>(b.kernel_size),
                   static_cast<std::size_t>(b.pool_size), len / static_cast<std::size_t>(b.pool_size), 0, 0};
      if (c.out_len == 0)
        throw ConfigError("build_cnn: input length " + std::to_string(input_len) + " too short for the pooling chain");
      c.w_offset = offset;
      offset += c.filters * c.in_channels * c.kernel;
      c.b_offset = offset;
      offset += c.filters;
      conv_.push_back(c);
      channels = c.filters;
      len = c.out_len;
    }
    flat_ = channels * len;
    hidden_ = {flat_, static_cast<std::size_t>(params_.dense_units), offset, 0};
    offset += hidden_.in * hidden_.out;
    hidden_.b_offset = offset;
    offset += hidden_.out;
    output_ = {hidden_.out, n_classes, offset, 0};
    offset += output_.in * output_.out;
    output_.b_offset = offset;
    offset += output_.out;
    weights_.assign(offset, 0.0);
  }

  // He-uniform weights, zero biases.
  void initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "cnn-init"));
    std::fill(weights_.begin(), weights_.end(), 0.0);
    auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < count; ++i) weights_[off + i] = rng.uniform(-limit, limit);
    };
    for (const auto& c : conv_) fill(c.w_offset, c.filters * c.in_channels * c.kernel, c.in_channels * c.kernel);
    fill(hidden_.w_offset, hidden_.in * hidden_.out, hidden_.in);
    fill(output_.w_offset, output_.in * output_.out, output_.in);
  }

  std::size_t input_len() const noexcept { return input_len_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t flatten_size() const noexcept { return flat_; }
  std::size_t parameter_count() const noexcept { return weights_.size(); }
  const CnnParams& params() const noexcept { return params_; }
  const std::vector<ConvLayout>& conv_layers() const noexcept { return conv_; }
  const DenseLayout& hidden_layer() const noexcept { return hidden_; }
  const DenseLayout& output_layer() const noexcept { return output_; }

  std::vector<double>& weights() noexcept { return weights_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  // Forward/backward state for one sample.
  struct Trace {
    std::vector<std::vector<double>> inputs;  // per conv block: input activations
    std::vector<std::vector<double>> pre;     // per conv block: pre-ReLU conv output
    std::vector<std::vector<std::size_t>> argmax;
    std::vector<double> flat, hidden_pre, hidden_out, logits, probs;
  };

  // mask: per hidden unit multiplier (0 or 1/(1-rate)); empty means no dropout.
  void forward(std::span<const double> x, std::span<const double> mask, Trace& t) const {
    t.inputs.resize(conv_.size());
    t.pre.resize(conv_.size());
    t.argmax.resize(conv_.size());
    std::vector<double> act(x.begin(), x.end());
    for (std::size_t l = 0; l < conv_.size(); ++l) {
      const auto& c = conv_[l];
      const std::size_t pad = (c.kernel - 1) / 2;
      t.inputs[l] = act;
      auto& z = t.pre[l];
      z.assign(c.filters * c.in_len, 0.0);
      for (std::size_t f = 0; f < c.filters; ++f)
        for (std::size_t p = 0; p < c.in_len; ++p) {
          double s = weights_[c.b_offset + f];
          for (std::size_t ch = 0; ch < c.in_channels; ++ch)
            for (std::size_t k = 0; k < c.kernel; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + k) - static_cast<std::ptrdiff_t>(pad);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(c.in_len)) continue;
              s += weights_[c.w_offset + (f * c.in_channels + ch) * c.kernel + k] *
                   act[ch * c.in_len + static_cast<std::size_t>(src)];
            }
          z[f * c.in_len + p] = s;
        }
      std::vector<double> relu(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) relu[i] = std::max(z[i], 0.0);
      auto pooled = maxpool1d(relu, c.filters, c.pool);
      act = std::move(pooled.values);
      t.argmax[l] = std::move(pooled.argmax);
    }
    t.flat = act;
    dense(hidden_, t.flat, t.hidden_pre);
    t.hidden_out.resize(hidden_.out);
    for (std::size_t i = 0; i < hidden_.out; ++i) {
      t.hidden_out[i] = std::max(t.hidden_pre[i], 0.0);
      if (!mask.empty()) t.hidden_out[i] *= mask[i];
    }
    dense(output_, t.hidden_out, t.logits);
    t.probs = softmax(t.logits);
  }

  // Accumulates scale * dLoss/dweights for one sample with target distribution y.
  void backward(const Trace& t, std::span<const double> y, std::span<const double> mask, double scale,
                std::vector<double>& grad) const {
    std::vector<double> d_logits(n_classes_);
    for (std::size_t j = 0; j < n_classes_; ++j) d_logits[j] = scale * (t.probs[j] - y[j]);
    std::vector<double> d_hidden(hidden_.out, 0.0);
    dense_backward(output_, t.hidden_out, d_logits, grad, d_hidden);
    for (std::size_t i = 0; i < hidden_.out; ++i) {
      if (!mask.empty()) d_hidden[i] *= mask[i];
      if (t.hidden_pre[i] <= 0.0) d_hidden[i] = 0.0;
    }
    std::vector<double> d_act(flat_, 0.0);
    dense_backward(hidden_, t.flat, d_hidden, grad, d_act);
    for (std::size_t l = conv_.size(); l-- > 0;) {
      const auto& c = conv_[l];
      const std::size_t pad = (c.kernel - 1) / 2;
      const auto& z = t.pre[l];
      auto dz = maxpool1d_backward(t.argmax[l], d_act, z.size());
      for (std::size_t i = 0; i < dz.size(); ++i)
        if (z[i] <= 0.0) dz[i] = 0.0;
      const auto& in = t.inputs[l];
      std::vector<double> d_in(c.in_channels * c.in_len, 0.0);
      for (std::size_t f = 0; f < c.filters; ++f)
        for (std::size_t p = 0; p < c.in_len; ++p) {
          const double g = dz[f * c.in_len + p];
          if (g == 0.0) continue;
          grad[c.b_offset + f] += g;
          for (std::size_t ch = 0; ch < c.in_channels; ++ch)
            for (std::size_t k = 0; k < c.kernel; ++k) {
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(p + k) - static_cast<std::ptrdiff_t>(pad);
              if (src < 0 || src >= static_cast<std::ptrdiff_t>(c.in_len)) continue;
              const std::size_t wi = c.w_offset + (f * c.in_channels + ch) * c.kernel + k;
              const std::size_t ai = ch * c.in_len + static_cast<std::size_t>(src);
              grad[wi] += g * in[ai];
              d_in[ai] += g * weights_[wi];
            }
        }
      d_act = std::move(d_in);
    }
  }

  static std::vector<double> softmax(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] - m);
    for (auto& v : p) v /= s;
    return p;
  }

  // Cross-entropy -sum y log softmax(z), via log-sum-exp.
  static double cross_entropy(std::span<const double> z, std::span<const double> y) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    const double lse = m + std::log(s);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      if (y[i] != 0.0) loss += y[i] * (lse - z[i]);
    return loss;
  }

private:
  void dense(const DenseLayout& L, std::span<const double> in, std::vector<double>& out) const {
    out.assign(L.out, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = weights_[L.b_offset + o];
      const double* w = weights_.data() + L.w_offset + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) s += w[i] * in[i];
      out[o] = s;
    }
  }

  void dense_backward(const DenseLayout& L, std::span<const double> in, std::span<const double> d_out,
                      std::vector<double>& grad, std::vector<double>& d_in) const {
    for (std::size_t o = 0; o < L.out; ++o) {
      const double g = d_out[o];
      if (g == 0.0) continue;
      grad[L.b_offset + o] += g;
      const double* w = weights_.data() + L.w_offset + o * L.in;
      double* gw = grad.data() + L.w_offset + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) {
        gw[i] += g * in[i];
        d_in[i] += g * w[i];
      }
    }
  }

  CnnParams params_;
  std::size_t input_len_ = 0, n_classes_ = 0, flat_ = 0;
  std::vector<ConvLayout> conv_;
  DenseLayout hidden_{}, output_{};
  std::vector<double> weights_;
};

inline CnnModel build_cnn(const CnnParams& p, std::size_t input_len, std::size_t n_classes) {
  CnnModel m(p, input_len, n_classes);
  m.initialize(p.seed);
  return m;
}

struct LossAndGradients {
  double loss = 0.0;
  std::vector<double> gradients;  // same layout as CnnModel::weights()
};

// Mean cross-entropy over the batch and its gradient. dropout_mask, when given,
// is batch x dense_units of multipliers; otherwise dropout is inactive.
inline LossAndGradients loss_and_gradients(const CnnModel& m, const Matrix& x, const Matrix& targets,
                                           const Matrix* dropout_mask = nullptr) {
  if (x.rows() == 0) throw DataError("loss_and_gradients: empty batch");
  if (x.cols() != m.input_len() || targets.rows() != x.rows() || targets.cols() != m.n_classes())
    throw DataError("loss_and_gradients: shape mismatch");
  if (dropout_mask && (dropout_mask->rows() != x.rows() || dropout_mask->cols() != m.hidden_layer().out))
    throw DataError("loss_and_gradients: dropout mask shape mismatch");
  LossAndGradients res;
  res.gradients.assign(m.parameter_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(x.rows());
  CnnModel::Trace trace;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::span<const double> mask;
    if (dropout_mask) mask = dropout_mask->row(r);
    m.forward(x.row(r), mask, trace);
    res.loss += CnnModel::cross_entropy(trace.logits, targets.row(r));
    m.backward(trace, targets.row(r), mask, scale, res.gradients);
  }
  res.loss *= scale;
  return res;
}

inline Matrix predict_proba(const CnnModel& m, const Matrix& x) {
  if (x.cols() != m.input_len())
    throw DataError("cnn expects " + std::to_string(m.input_len()) + " features, got " + std::to_string(x.cols()));
  Matrix out(x.rows(), m.n_classes());
  CnnModel::Trace t;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    m.forward(x.row(r), {}, t);
    std::copy(t.probs.begin(), t.probs.end(), out.row(r).begin());
  }
  return out;
}

inline std::vector<int> argmax_rows(const Matrix& p) {
  std::vector<int> out(p.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

struct CnnHistory {
  std::vector<double> epoch_loss;
  std::vector<double> validation_accuracy;
  std::vector<double> epoch_seconds;
  double final_train_loss = 0.0;
};

namespace detail {

// Rows ordered by (label, features) so training does not depend on input row order.
inline std::vector<std::size_t> canonical_row_order(const Dataset& d) {
  std::vector<std::size_t> idx(d.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    if (d.labels[a] != d.labels[b]) return d.labels[a] < d.labels[b];
    auto ra = d.features.row(a), rb = d.features.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return idx;
}

}  // namespace detail

// Minibatch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on categorical cross-entropy
// with inverted dropout. Each epoch shuffles a canonical row order with a seeded
// generator; runs are deterministic for a fixed seed.
inline CnnHistory train_cnn(CnnModel& m, const Dataset& train, const Dataset& validation, const CnnParams& p) {
  p.validate();
  if (train.rows() == 0) throw DataError("train_cnn: empty training set");
  if (train.cols() != m.input_len()) throw DataError("train_cnn: feature count does not match model input");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  auto& w = m.weights();
  std::vector<double> m1(w.size(), 0.0), m2(w.size(), 0.0);
  const auto order0 = detail::canonical_row_order(train);
  const std::size_t hidden = m.hidden_layer().out;
  const double keep_scale = 1.0 / (1.0 - p.dropout_rate);
  CnnHistory hist;
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = order0;
    Rng rng(derive_seed(p.seed, "cnn-epoch", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(p.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(p.batch_size));
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Matrix xb = train.features.select_rows(rows);
      Matrix yb(rows.size(), m.n_classes(), 0.0);
      for (std::size_t i = 0; i < rows.size(); ++i) yb(i, static_cast<std::size_t>(train.labels[rows[i]])) = 1.0;
      Matrix mask(rows.size(), hidden, 1.0);
      if (p.dropout_rate > 0.0)
        for (auto& v : mask.data()) v = rng.uniform() < p.dropout_rate ? 0.0 : keep_scale;
      auto lg = loss_and_gradients(m, xb, yb, &mask);
      if (!std::isfinite(lg.loss))
        throw TrainingDiverged("train_cnn: non-finite loss at epoch " + std::to_string(epoch + 1) +
                               " (learning_rate " + std::to_string(p.learning_rate) + ")");
      loss_sum += lg.loss * static_cast<double>(rows.size());
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = lg.gradients[i];
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
        w[i] -= p.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
        if (!std::isfinite(w[i]))
          throw TrainingDiverged("train_cnn: non-finite weight at epoch " + std::to_string(epoch + 1) +
                                 " (learning_rate " + std::to_string(p.learning_rate) + ")");
      }
    }
    hist.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    if (validation.rows() > 0) {
      const auto pred = argmax_rows(predict_proba(m, validation.features));
      std::size_t ok = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == validation.labels[i];
      hist.validation_accuracy.push_back(static_cast<double>(ok) / static_cast<double>(pred.size()));
    }
    hist.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  hist.final_train_loss = hist.epoch_loss.back();
  return hist;
}

}  // namespace nids
