#ifndef LATSIM_LSTM_HPP_
#define LATSIM_LSTM_HPP_

// LSTM layer: parameters, a single-step cell and a batched sequence
// forward/backward (backpropagation through time).
//
// Gate blocks are stacked in the order [input, forget, cell-candidate,
// output], each H rows tall:
//
//   z_t = W x_t + U h_{t-1} + b
//   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
//   c_t = f * c_{t-1} + i * g
//   h_t = o * tanh(c_t)
//
// Sequences of a mini-batch are laid out as one D x (steps * batch) matrix;
// columns [t * batch, (t + 1) * batch) hold time step t. An input of only
// `batch` columns is held constant over all steps.

#include <Eigen/Dense>

#include <string>
#include <string_view>

#include "latsim/error.hpp"

namespace latsim {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct LstmLayerParams {
  MatrixX<Scalar> W;  // 4H x D
  MatrixX<Scalar> U;  // 4H x H
  VectorX<Scalar> b;  // 4H

  static LstmLayerParams zeros(Eigen::Index input_size, Eigen::Index hidden) {
    return {MatrixX<Scalar>::Zero(4 * hidden, input_size),
            MatrixX<Scalar>::Zero(4 * hidden, hidden), VectorX<Scalar>::Zero(4 * hidden)};
  }

  Eigen::Index input_size() const { return W.cols(); }
  Eigen::Index hidden_size() const { return U.cols(); }

  bool shape_ok() const {
    const auto h = U.cols();
    return U.rows() == 4 * h && W.rows() == 4 * h && b.size() == 4 * h;
  }

  // Calls f(name, tensor...) for every tensor of the given layers in a fixed
  // order; used to zip parameters with gradients and optimizer moments.
  template <typename F, typename... Layers>
  static void zip(std::string_view prefix, F&& f, Layers&... layers) {
    const std::string p(prefix);
    f(p + ".W", layers.W...);
    f(p + ".U", layers.U...);
    f(p + ".b", layers.b...);
  }
};

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-z).exp()).inverse();
}

}  // namespace detail

template <typename Scalar>
struct LstmCellCache {
  VectorX<Scalar> x, h_prev, c_prev;
  VectorX<Scalar> preact;  // z, 4H
  VectorX<Scalar> i, f, g, o, tanh_c;
};

template <typename Scalar>
struct LstmCellOutput {
  VectorX<Scalar> h, c;
  LstmCellCache<Scalar> cache;
};

template <typename Scalar>
LstmCellOutput<Scalar> lstm_cell_forward(const VectorX<Scalar>& x, const VectorX<Scalar>& h_prev,
                                         const VectorX<Scalar>& c_prev,
                                         const LstmLayerParams<Scalar>& p) {
  const auto H = p.hidden_size();
  if (!p.shape_ok() || x.size() != p.input_size() || h_prev.size() != H || c_prev.size() != H)
    fail(ErrorCode::ShapeMismatch, "lstm_cell_forward: input/state sizes do not match layer");
  LstmCellOutput<Scalar> out;
  auto& k = out.cache;
  k.x = x;
  k.h_prev = h_prev;
  k.c_prev = c_prev;
  k.preact = p.W * x + p.U * h_prev + p.b;
  k.i = detail::sigmoid(k.preact.segment(0, H).array()).matrix();
  k.f = detail::sigmoid(k.preact.segment(H, H).array()).matrix();
  k.g = k.preact.segment(2 * H, H).array().tanh().matrix();
  k.o = detail::sigmoid(k.preact.segment(3 * H, H).array()).matrix();
  out.c = (k.f.array() * c_prev.array() + k.i.array() * k.g.array()).matrix();
  k.tanh_c = out.c.array().tanh().matrix();
  out.h = (k.o.array() * k.tanh_c.array()).matrix();
  return out;
}

template <typename Scalar>
struct LstmSequenceCache {
  Eigen::Index steps = 0, batch = 0;
  MatrixX<Scalar> gates;  // 4H x (steps*batch): activated i, f, g, o
  MatrixX<Scalar> cells;  // H x (steps*batch)
  MatrixX<Scalar> hidden;  // H x (steps*batch)
};

// Runs the layer over a batch of sequences from zero initial state. Returns
// the hidden sequence (H x steps*batch). `cache` may be null for inference.
template <typename Scalar>
MatrixX<Scalar> lstm_forward(const LstmLayerParams<Scalar>& p, const MatrixX<Scalar>& X,
                             Eigen::Index steps, Eigen::Index batch,
                             LstmSequenceCache<Scalar>* cache = nullptr) {
  const auto H = p.hidden_size();
  if (!p.shape_ok() || X.rows() != p.input_size() || (X.cols() != steps * batch && X.cols() != batch))
    fail(ErrorCode::ShapeMismatch, "lstm_forward: input shape does not match layer");

  MatrixX<Scalar> Z(4 * H, steps * batch);
  if (X.cols() == steps * batch) {
    Z.noalias() = p.W * X;
    Z.colwise() += p.b;
  } else {
    MatrixX<Scalar> z0 = p.W * X;
    z0.colwise() += p.b;
    for (Eigen::Index t = 0; t < steps; ++t) Z.middleCols(t * batch, batch) = z0;
  }
  MatrixX<Scalar> C(H, steps * batch);
  MatrixX<Scalar> Hs(H, steps * batch);

  for (Eigen::Index t = 0; t < steps; ++t) {
    auto z = Z.middleCols(t * batch, batch);
    if (t > 0) z.noalias() += p.U * Hs.middleCols((t - 1) * batch, batch);
    z.topRows(H) = detail::sigmoid(z.topRows(H).array()).matrix();
    z.middleRows(H, H) = detail::sigmoid(z.middleRows(H, H).array()).matrix();
    z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
    z.bottomRows(H) = detail::sigmoid(z.bottomRows(H).array()).matrix();

    auto c = C.middleCols(t * batch, batch);
    if (t > 0)
      c = (z.middleRows(H, H).array() * C.middleCols((t - 1) * batch, batch).array() +
           z.topRows(H).array() * z.middleRows(2 * H, H).array())
              .matrix();
    else
      c = (z.topRows(H).array() * z.middleRows(2 * H, H).array()).matrix();
    Hs.middleCols(t * batch, batch) = (z.bottomRows(H).array() * c.array().tanh()).matrix();
  }

  if (cache) {
    cache->steps = steps;
    cache->batch = batch;
    cache->gates = std::move(Z);
    cache->cells = std::move(C);
    cache->hidden = Hs;
  }
  return Hs;
}

// Backpropagation through time. `dH` is the loss gradient with respect to
// every emitted hidden state (zero where a state is unused). Parameter
// gradients are accumulated into `grad`; the input gradient is returned, with
// the same shape as X (summed over steps for a constant input).
template <typename Scalar>
MatrixX<Scalar> lstm_backward(const LstmLayerParams<Scalar>& p, const MatrixX<Scalar>& X,
                              const LstmSequenceCache<Scalar>& cache, const MatrixX<Scalar>& dH,
                              LstmLayerParams<Scalar>& grad) {
  const auto H = p.hidden_size();
  const auto steps = cache.steps, batch = cache.batch;
  const bool constant_input = X.cols() != steps * batch;
  if (dH.rows() != H || dH.cols() != steps * batch || (constant_input && X.cols() != batch))
    fail(ErrorCode::ShapeMismatch, "lstm_backward: gradient shape does not match cache");

  MatrixX<Scalar> dZ(4 * H, steps * batch);
  MatrixX<Scalar> dh_next = MatrixX<Scalar>::Zero(H, batch);
  MatrixX<Scalar> dc_next = MatrixX<Scalar>::Zero(H, batch);

  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto g = cache.gates.middleCols(t * batch, batch);
    const auto gi = g.topRows(H).array();
    const auto gf = g.middleRows(H, H).array();
    const auto gg = g.middleRows(2 * H, H).array();
    const auto go = g.bottomRows(H).array();
    const auto tc = cache.cells.middleCols(t * batch, batch).array().tanh().eval();

    const auto dh = (dH.middleCols(t * batch, batch) + dh_next).array().eval();
    const auto dc = (dh * go * (Scalar(1) - tc.square()) + dc_next.array()).eval();

    auto dz = dZ.middleCols(t * batch, batch);
    dz.topRows(H) = (dc * gg * gi * (Scalar(1) - gi)).matrix();
    if (t > 0)
      dz.middleRows(H, H) = (dc * cache.cells.middleCols((t - 1) * batch, batch).array() * gf *
                             (Scalar(1) - gf))
                                .matrix();
    else
      dz.middleRows(H, H).setZero();
    dz.middleRows(2 * H, H) = (dc * gi * (Scalar(1) - gg.square())).matrix();
    dz.bottomRows(H) = (dh * tc * go * (Scalar(1) - go)).matrix();

    dc_next = (dc * gf).matrix();
    if (t > 0) dh_next.noalias() = p.U.transpose() * dz;
  }

  if (steps > 1) {
    grad.U.noalias() += dZ.rightCols((steps - 1) * batch) *
                        cache.hidden.leftCols((steps - 1) * batch).transpose();
  }
  grad.b += dZ.rowwise().sum();
  if (!constant_input) {
    grad.W.noalias() += dZ * X.transpose();
    return p.W.transpose() * dZ;
  }
  MatrixX<Scalar> dZ_sum = dZ.leftCols(batch);
  for (Eigen::Index t = 1; t < steps; ++t) dZ_sum += dZ.middleCols(t * batch, batch);
  grad.W.noalias() += dZ_sum * X.transpose();
  return p.W.transpose() * dZ_sum;
}

}  // namespace latsim

#endif  // LATSIM_LSTM_HPP_
