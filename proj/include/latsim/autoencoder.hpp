#ifndef LATSIM_AUTOENCODER_HPP_
#define LATSIM_AUTOENCODER_HPP_

// Sequence-to-sequence LSTM autoencoder.
//
//   encoder: x (L x d) -> LSTM(H) -> LSTM(H) -> last hidden -> ReLU dense -> z (k)
//   decoder: z -> dense (H) -> repeated L times -> LSTM(H) -> LSTM(H)
//            -> per-step linear head -> reconstruction (L x d)
//
// Trained on mean squared reconstruction error with Adam. Everything is
// templated on the floating-point type; double is used for gradient checks.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latsim/error.hpp"
#include "latsim/lstm.hpp"
#include "latsim/windowing.hpp"

namespace latsim {

struct ModelShape {
  Eigen::Index input_dim = kOhlcChannels;  // d
  Eigen::Index hidden = 256;               // H, every LSTM and the decoder expansion
  Eigen::Index latent = 64;                // k

  bool operator==(const ModelShape&) const = default;
};

template <typename Scalar>
struct ModelParams {
  ModelShape shape;
  LstmLayerParams<Scalar> enc1, enc2;
  MatrixX<Scalar> latent_W;  // k x H
  VectorX<Scalar> latent_b;
  MatrixX<Scalar> expand_W;  // H x k
  VectorX<Scalar> expand_b;
  LstmLayerParams<Scalar> dec1, dec2;
  MatrixX<Scalar> head_W;  // d x H
  VectorX<Scalar> head_b;

  static ModelParams zeros(const ModelShape& s) {
    ModelParams p;
    p.shape = s;
    p.enc1 = LstmLayerParams<Scalar>::zeros(s.input_dim, s.hidden);
    p.enc2 = LstmLayerParams<Scalar>::zeros(s.hidden, s.hidden);
    p.latent_W = MatrixX<Scalar>::Zero(s.latent, s.hidden);
    p.latent_b = VectorX<Scalar>::Zero(s.latent);
    p.expand_W = MatrixX<Scalar>::Zero(s.hidden, s.latent);
    p.expand_b = VectorX<Scalar>::Zero(s.hidden);
    p.dec1 = LstmLayerParams<Scalar>::zeros(s.hidden, s.hidden);
    p.dec2 = LstmLayerParams<Scalar>::zeros(s.hidden, s.hidden);
    p.head_W = MatrixX<Scalar>::Zero(s.input_dim, s.hidden);
    p.head_b = VectorX<Scalar>::Zero(s.input_dim);
    return p;
  }

  // f(name, tensor-of-each-model...) over every parameter tensor, in
  // checkpoint order.
  template <typename F, typename... Models>
  static void zip(F&& f, Models&... m) {
    LstmLayerParams<Scalar>::zip("enc1", f, m.enc1...);
    LstmLayerParams<Scalar>::zip("enc2", f, m.enc2...);
    f(std::string("latent.W"), m.latent_W...);
    f(std::string("latent.b"), m.latent_b...);
    f(std::string("expand.W"), m.expand_W...);
    f(std::string("expand.b"), m.expand_b...);
    LstmLayerParams<Scalar>::zip("dec1", f, m.dec1...);
    LstmLayerParams<Scalar>::zip("dec2", f, m.dec2...);
    f(std::string("head.W"), m.head_W...);
    f(std::string("head.b"), m.head_b...);
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    zip([&](const std::string&, const auto& t) { n += t.size(); }, *this);
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    zip([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); }, *this);
    return ok;
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out = ModelParams<Other>::zeros(shape);
    ModelParams<Other>::zip(
        [](const std::string&, auto& dst, const auto& src) {
          dst = src.template cast<Other>();
        },
        out, *this);
    return out;
  }
};

// Glorot-uniform weights, zero biases except forget-gate bias = 1.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelShape& shape, std::uint64_t seed) {
  if (shape.input_dim < 1 || shape.hidden < 1 || shape.latent < 1)
    fail(ErrorCode::ConfigInvalid, "model dimensions must be positive");
  std::mt19937_64 rng(seed);
  auto glorot = [&rng](auto& m) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<Scalar>(dist(rng));
  };
  auto p = ModelParams<Scalar>::zeros(shape);
  for (auto* layer : {&p.enc1, &p.enc2, &p.dec1, &p.dec2}) {
    glorot(layer->W);
    glorot(layer->U);
    layer->b.segment(layer->hidden_size(), layer->hidden_size()).setOnes();
  }
  glorot(p.latent_W);
  glorot(p.expand_W);
  glorot(p.head_W);
  return p;
}

// Packs windows (each L x d) into the d x (L * B) sequence layout.
template <typename Scalar, typename WindowRange>
MatrixX<Scalar> pack_windows(const WindowRange& windows, Eigen::Index L, Eigen::Index d) {
  const auto B = static_cast<Eigen::Index>(std::size(windows));
  MatrixX<Scalar> X(d, L * B);
  Eigen::Index b = 0;
  for (const Eigen::MatrixXd& w : windows) {
    if (w.rows() != L || w.cols() != d)
      fail(ErrorCode::ShapeMismatch, "window is " + std::to_string(w.rows()) + "x" +
                                         std::to_string(w.cols()) + ", expected " +
                                         std::to_string(L) + "x" + std::to_string(d));
    for (Eigen::Index t = 0; t < L; ++t) X.col(t * B + b) = w.row(t).transpose().template cast<Scalar>();
    ++b;
  }
  return X;
}

template <typename Scalar>
struct ForwardCache {
  Eigen::Index steps = 0, batch = 0;
  MatrixX<Scalar> X;
  LstmSequenceCache<Scalar> enc1, enc2, dec1, dec2;
  MatrixX<Scalar> h1;       // enc1 output
  MatrixX<Scalar> last;     // enc2 final hidden, H x B
  MatrixX<Scalar> pre_latent;  // k x B
  MatrixX<Scalar> latent;   // ReLU(pre_latent)
  MatrixX<Scalar> expanded;  // H x B, fed to dec1 at every step
  MatrixX<Scalar> g1, g2;   // decoder LSTM outputs
  MatrixX<Scalar> Y;        // d x (L*B)
};

namespace detail {

template <typename Scalar>
void check_model(const ModelParams<Scalar>& p) {
  const auto& s = p.shape;
  const bool ok = p.enc1.shape_ok() && p.enc2.shape_ok() && p.dec1.shape_ok() &&
                  p.dec2.shape_ok() && p.enc1.input_size() == s.input_dim &&
                  p.enc1.hidden_size() == s.hidden && p.enc2.input_size() == s.hidden &&
                  p.enc2.hidden_size() == s.hidden && p.latent_W.rows() == s.latent &&
                  p.latent_W.cols() == s.hidden && p.latent_b.size() == s.latent &&
                  p.expand_W.rows() == s.hidden && p.expand_W.cols() == s.latent &&
                  p.expand_b.size() == s.hidden && p.dec1.input_size() == s.hidden &&
                  p.dec1.hidden_size() == s.hidden && p.dec2.input_size() == s.hidden &&
                  p.dec2.hidden_size() == s.hidden && p.head_W.rows() == s.input_dim &&
                  p.head_W.cols() == s.hidden && p.head_b.size() == s.input_dim;
  if (!ok) fail(ErrorCode::ShapeMismatch, "model parameters are inconsistent with their shape");
}

template <typename Scalar>
MatrixX<Scalar> encode_packed(const ModelParams<Scalar>& p, const MatrixX<Scalar>& X,
                              Eigen::Index L, Eigen::Index B, ForwardCache<Scalar>* c) {
  MatrixX<Scalar> h1 = lstm_forward(p.enc1, X, L, B, c ? &c->enc1 : nullptr);
  MatrixX<Scalar> h2 = lstm_forward(p.enc2, h1, L, B, c ? &c->enc2 : nullptr);
  MatrixX<Scalar> last = h2.rightCols(B);
  MatrixX<Scalar> pre = p.latent_W * last;
  pre.colwise() += p.latent_b;
  MatrixX<Scalar> z = pre.cwiseMax(Scalar(0));
  if (c) {
    c->h1 = std::move(h1);
    c->last = std::move(last);
    c->pre_latent = std::move(pre);
    c->latent = z;
  }
  return z;
}

template <typename Scalar>
MatrixX<Scalar> decode_packed(const ModelParams<Scalar>& p, const MatrixX<Scalar>& Z,
                              Eigen::Index L, ForwardCache<Scalar>* c) {
  const auto B = Z.cols();
  MatrixX<Scalar> e = p.expand_W * Z;
  e.colwise() += p.expand_b;
  MatrixX<Scalar> g1 = lstm_forward(p.dec1, e, L, B, c ? &c->dec1 : nullptr);
  MatrixX<Scalar> g2 = lstm_forward(p.dec2, g1, L, B, c ? &c->dec2 : nullptr);
  MatrixX<Scalar> Y = p.head_W * g2;
  Y.colwise() += p.head_b;
  if (c) {
    c->expanded = std::move(e);
    c->g1 = std::move(g1);
    c->g2 = std::move(g2);
  }
  return Y;
}

}  // namespace detail

// Latent codes (k x B) for a packed batch.
template <typename Scalar>
MatrixX<Scalar> encode_batch(const ModelParams<Scalar>& p, const MatrixX<Scalar>& X,
                             Eigen::Index L, Eigen::Index B) {
  detail::check_model(p);
  if (X.rows() != p.shape.input_dim || X.cols() != L * B)
    fail(ErrorCode::ShapeMismatch, "encode: packed batch does not match model input size");
  return detail::encode_packed<Scalar>(p, X, L, B, nullptr);
}

template <typename Scalar>
VectorX<Scalar> encode(const Eigen::MatrixXd& window, const ModelParams<Scalar>& p) {
  detail::check_model(p);
  std::vector<Eigen::MatrixXd> one{window};
  return encode_batch(p, pack_windows<Scalar>(one, window.rows(), p.shape.input_dim),
                      window.rows(), 1)
      .col(0);
}

// Latent codes for many windows as an N x k matrix (row n = window n).
template <typename Scalar>
Eigen::MatrixXd encode_all(const ModelParams<Scalar>& p, std::span<const Window> windows,
                           Eigen::Index chunk = 256) {
  detail::check_model(p);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), p.shape.latent);
  if (windows.empty()) return out;
  const Eigen::Index L = windows.front().values.rows();
  std::vector<Eigen::MatrixXd> buf;
  for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(chunk)) {
    const auto end = std::min(windows.size(), start + static_cast<std::size_t>(chunk));
    buf.clear();
    for (auto i = start; i < end; ++i) buf.push_back(windows[i].values);
    const auto B = static_cast<Eigen::Index>(buf.size());
    MatrixX<Scalar> z = detail::encode_packed<Scalar>(
        p, pack_windows<Scalar>(buf, L, p.shape.input_dim), L, B, nullptr);
    out.middleRows(static_cast<Eigen::Index>(start), B) = z.transpose().template cast<double>();
  }
  return out;
}

// Reconstruction (L x d) of one latent vector.
template <typename Scalar>
Eigen::MatrixXd decode(const VectorX<Scalar>& latent, const ModelParams<Scalar>& p, Eigen::Index L) {
  detail::check_model(p);
  if (latent.size() != p.shape.latent)
    fail(ErrorCode::ShapeMismatch, "decode: latent has size " + std::to_string(latent.size()) +
                                       ", model expects " + std::to_string(p.shape.latent));
  if (L < 1) fail(ErrorCode::ShapeMismatch, "decode: sequence length must be positive");
  MatrixX<Scalar> Z = latent;
  MatrixX<Scalar> Y = detail::decode_packed<Scalar>(p, Z, L, nullptr);
  return Y.transpose().template cast<double>();  // row t is step t
}

// Full forward pass on a packed batch, filling `cache` for backward().
template <typename Scalar>
Scalar forward_loss(const ModelParams<Scalar>& p, MatrixX<Scalar> X, Eigen::Index L,
                    Eigen::Index B, ForwardCache<Scalar>& cache) {
  detail::check_model(p);
  if (B < 1) fail(ErrorCode::EmptyBatch, "forward: empty batch");
  if (X.rows() != p.shape.input_dim || X.cols() != L * B)
    fail(ErrorCode::ShapeMismatch, "forward: packed batch does not match model input size");
  cache.steps = L;
  cache.batch = B;
  cache.X = std::move(X);
  MatrixX<Scalar> Z = detail::encode_packed<Scalar>(p, cache.X, L, B, &cache);
  cache.Y = detail::decode_packed<Scalar>(p, Z, L, &cache);
  return (cache.Y - cache.X).squaredNorm() / static_cast<Scalar>(cache.Y.size());
}

// Gradient of the mean squared reconstruction error for the batch held in
// `cache`.
template <typename Scalar>
ModelParams<Scalar> backward(const ModelParams<Scalar>& p, const ForwardCache<Scalar>& c) {
  const auto L = c.steps, B = c.batch;
  auto g = ModelParams<Scalar>::zeros(p.shape);

  MatrixX<Scalar> dY = (c.Y - c.X) * (Scalar(2) / static_cast<Scalar>(c.Y.size()));
  g.head_W.noalias() = dY * c.g2.transpose();
  g.head_b = dY.rowwise().sum();
  MatrixX<Scalar> dG2 = p.head_W.transpose() * dY;
  MatrixX<Scalar> dG1 = lstm_backward(p.dec2, c.g1, c.dec2, dG2, g.dec2);
  MatrixX<Scalar> dE = lstm_backward(p.dec1, c.expanded, c.dec1, dG1, g.dec1);
  g.expand_W.noalias() = dE * c.latent.transpose();
  g.expand_b = dE.rowwise().sum();
  MatrixX<Scalar> dZ = p.expand_W.transpose() * dE;

  MatrixX<Scalar> dPre =
      (c.pre_latent.array() > Scalar(0)).select(dZ, MatrixX<Scalar>::Zero(dZ.rows(), dZ.cols()));
  g.latent_W.noalias() = dPre * c.last.transpose();
  g.latent_b = dPre.rowwise().sum();
  MatrixX<Scalar> dLast = p.latent_W.transpose() * dPre;

  MatrixX<Scalar> dH2 = MatrixX<Scalar>::Zero(p.shape.hidden, L * B);
  dH2.rightCols(B) = dLast;
  MatrixX<Scalar> dH1 = lstm_backward(p.enc2, c.h1, c.enc2, dH2, g.enc2);
  lstm_backward(p.enc1, c.X, c.enc1, dH1, g.enc1);
  return g;
}

template <typename Scalar>
struct LossGrad {
  Scalar loss;
  ModelParams<Scalar> grad;
};

// Mean squared error of decode(encode(w)) against w over the batch.
template <typename Scalar>
Scalar reconstruction_loss(std::span<const Eigen::MatrixXd> windows, const ModelParams<Scalar>& p) {
  if (windows.empty()) fail(ErrorCode::EmptyBatch, "reconstruction_loss: empty batch");
  const auto L = windows.front().rows();
  const auto B = static_cast<Eigen::Index>(windows.size());
  ForwardCache<Scalar> cache;
  return forward_loss(p, pack_windows<Scalar>(windows, L, p.shape.input_dim), L, B, cache);
}

template <typename Scalar>
LossGrad<Scalar> loss_and_gradient(std::span<const Eigen::MatrixXd> windows,
                                   const ModelParams<Scalar>& p) {
  if (windows.empty()) fail(ErrorCode::EmptyBatch, "backward: empty batch");
  const auto L = windows.front().rows();
  const auto B = static_cast<Eigen::Index>(windows.size());
  ForwardCache<Scalar> cache;
  Scalar loss = forward_loss(p, pack_windows<Scalar>(windows, L, p.shape.input_dim), L, B, cache);
  return {loss, backward(p, cache)};
}

struct TrainConfig {
  int batch_size = 64;
  int epochs = 20;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;  // global gradient max-norm; 0 disables
  std::uint64_t seed = 42;

  void validate() const {
    if (batch_size < 1) fail(ErrorCode::ConfigInvalid, "train.batch_size must be >= 1");
    if (epochs < 1) fail(ErrorCode::ConfigInvalid, "train.epochs must be >= 1");
    if (!(learning_rate >= 0.0)) fail(ErrorCode::ConfigInvalid, "train.learning_rate must be >= 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
      fail(ErrorCode::ConfigInvalid, "adam betas must lie in (0, 1)");
    if (!(adam_eps > 0.0)) fail(ErrorCode::ConfigInvalid, "train.adam_eps must be > 0");
    if (!(clip_norm >= 0.0)) fail(ErrorCode::ConfigInvalid, "train.clip_norm must be >= 0");
  }
};

template <typename Scalar>
class Adam {
 public:
  Adam(const ModelShape& shape, const TrainConfig& cfg)
      : cfg_(cfg), m_(ModelParams<Scalar>::zeros(shape)), v_(ModelParams<Scalar>::zeros(shape)) {}

  void step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grad) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(cfg_.adam_beta1);
    const Scalar b2 = static_cast<Scalar>(cfg_.adam_beta2);
    const Scalar lr = static_cast<Scalar>(cfg_.learning_rate);
    const Scalar eps = static_cast<Scalar>(cfg_.adam_eps);
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg_.adam_beta1, t_));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg_.adam_beta2, t_));
    ModelParams<Scalar>::zip(
        [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
          m = b1 * m + (Scalar(1) - b1) * g;
          v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
          p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        },
        params, grad, m_, v_);
  }

  long steps() const { return t_; }

 private:
  TrainConfig cfg_;
  ModelParams<Scalar> m_, v_;
  long t_ = 0;
};

template <typename Scalar>
double gradient_norm(const ModelParams<Scalar>& g) {
  double sq = 0;
  ModelParams<Scalar>::zip(
      [&](const std::string&, const auto& t) { sq += static_cast<double>(t.squaredNorm()); }, g);
  return std::sqrt(sq);
}

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> params;
  std::vector<double> epoch_loss;  // mean mini-batch loss of each epoch, weighted by batch size
};

// Called after every epoch with (epoch index from 1, mean loss).
using EpochCallback = std::function<void(int, double)>;

// Seeded Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

// Continues training `params` in place. Deterministic given cfg.seed.
template <typename Scalar>
std::vector<double> train_in_place(ModelParams<Scalar>& params,
                                   std::span<const Eigen::MatrixXd> windows,
                                   const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (windows.empty()) fail(ErrorCode::EmptyBatch, "train: no windows");
  const auto L = windows.front().rows();
  const auto d = params.shape.input_dim;
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam<Scalar> opt(params.shape, cfg);
  ForwardCache<Scalar> cache;
  std::vector<double> trace;
  std::vector<Eigen::MatrixXd> mb;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(windows.size(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto end = std::min(order.size(), start + bs);
      mb.clear();
      for (auto i = start; i < end; ++i) mb.push_back(windows[order[i]]);
      const auto B = static_cast<Eigen::Index>(mb.size());
      const Scalar loss = forward_loss(params, pack_windows<Scalar>(mb, L, d), L, B, cache);
      if (!std::isfinite(static_cast<double>(loss)))
        fail(ErrorCode::NonFiniteLoss, "training diverged in epoch " + std::to_string(epoch));
      auto grad = backward(params, cache);
      if (cfg.clip_norm > 0.0) {
        const double norm = gradient_norm(grad);
        if (norm > cfg.clip_norm) {
          const auto scale = static_cast<Scalar>(cfg.clip_norm / norm);
          ModelParams<Scalar>::zip([&](const std::string&, auto& t) { t *= scale; }, grad);
        }
      }
      opt.step(params, grad);
      total += static_cast<double>(loss) * static_cast<double>(B);
    }
    const double mean = total / static_cast<double>(windows.size());
    if (!std::isfinite(mean) || !params.all_finite())
      fail(ErrorCode::NonFiniteLoss, "training diverged in epoch " + std::to_string(epoch));
    trace.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return trace;
}

template <typename Scalar>
TrainResult<Scalar> train(std::span<const Eigen::MatrixXd> windows, const ModelShape& shape,
                          const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  TrainResult<Scalar> r{init_params<Scalar>(shape, cfg.seed), {}};
  r.epoch_loss = train_in_place(r.params, windows, cfg, on_epoch);
  return r;
}

template <typename Scalar>
TrainResult<Scalar> train(const WindowBatch& batch, const ModelShape& shape, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
  if (batch.empty()) fail(ErrorCode::EmptyBatch, "train: empty window batch");
  std::vector<Eigen::MatrixXd> values;
  values.reserve(batch.size());
  for (const auto& w : batch.windows) values.push_back(w.values);
  return train<Scalar>(std::span<const Eigen::MatrixXd>(values), shape, cfg, on_epoch);
}

}  // namespace latsim

#endif  // LATSIM_AUTOENCODER_HPP_
