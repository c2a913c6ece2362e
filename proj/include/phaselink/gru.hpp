#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phaselink/error.hpp"
#include "phaselink/rng.hpp"

namespace phaselink {

/// Parameters of one GRU direction. Gate rows are stacked [update z; reset r; candidate n].
template <class Scalar>
struct GruCell {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix W;  // 3H x input
  Matrix U;  // 3H x H
  Vector b;  // 3H
};

template <class Scalar>
struct BiGruLayer {
  GruCell<Scalar> fwd;
  GruCell<Scalar> bwd;
};

/// Two stacked bidirectional GRU layers followed by a per-step dense sigmoid unit.
///
/// Cell update (reset gate applied to the previous state before the candidate):
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r * h) + bn)
///   h' = z * h + (1 - z) * n
template <class Scalar>
struct BasicLinkerModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::size_t input = 5;
  std::size_t hidden = 0;
  std::array<BiGruLayer<Scalar>, 2> layers;
  Vector head_w;  // 2H
  Vector head_b;  // 1

  static BasicLinkerModel zeros(std::size_t hidden, std::size_t input = 5) {
    BasicLinkerModel m;
    m.input = input;
    m.hidden = hidden;
    const auto H = static_cast<Eigen::Index>(hidden);
    for (std::size_t l = 0; l < 2; ++l) {
      const auto in = static_cast<Eigen::Index>(l == 0 ? input : 2 * hidden);
      for (GruCell<Scalar>* c : {&m.layers[l].fwd, &m.layers[l].bwd}) {
        c->W = Matrix::Zero(3 * H, in);
        c->U = Matrix::Zero(3 * H, H);
        c->b = Vector::Zero(3 * H);
      }
    }
    m.head_w = Vector::Zero(2 * H);
    m.head_b = Vector::Zero(1);
    return m;
  }

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static BasicLinkerModel initialized(std::size_t hidden, std::uint64_t seed,
                                      std::size_t input = 5) {
    BasicLinkerModel m = zeros(hidden, input);
    Rng rng(seed);
    auto fill = [&](Matrix& w) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
          w(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    };
    for (auto& layer : m.layers)
      for (GruCell<Scalar>* c : {&layer.fwd, &layer.bwd}) {
        fill(c->W);
        fill(c->U);
      }
    const double bound = 1.0 / std::sqrt(static_cast<double>(2 * hidden));
    for (Eigen::Index i = 0; i < m.head_w.size(); ++i)
      m.head_w(i) = static_cast<Scalar>(rng.uniform(-bound, bound));
    return m;
  }

  /// Every parameter tensor in a fixed order (checkpoint and optimizer order).
  std::vector<std::span<Scalar>> tensors() {
    std::vector<std::span<Scalar>> out;
    auto add = [&](auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); };
    for (auto& layer : layers)
      for (GruCell<Scalar>* c : {&layer.fwd, &layer.bwd}) {
        add(c->W);
        add(c->U);
        add(c->b);
      }
    add(head_w);
    add(head_b);
    return out;
  }

  std::vector<std::span<const Scalar>> tensors() const {
    std::vector<std::span<const Scalar>> out;
    for (auto s : const_cast<BasicLinkerModel*>(this)->tensors()) out.emplace_back(s.data(), s.size());
    return out;
  }

  static std::vector<std::string> tensor_names() {
    std::vector<std::string> out;
    for (int l = 1; l <= 2; ++l)
      for (const char* dir : {"fwd", "bwd"})
        for (const char* t : {"W", "U", "b"})
          out.push_back("gru" + std::to_string(l) + "." + dir + "." + t);
    out.emplace_back("dense.w");
    out.emplace_back("dense.b");
    return out;
  }

  /// (rows, cols) of every tensor, in tensors() order.
  std::vector<std::pair<std::size_t, std::size_t>> tensor_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    auto add = [&](const auto& t) {
      out.emplace_back(static_cast<std::size_t>(t.rows()), static_cast<std::size_t>(t.cols()));
    };
    for (const auto& layer : layers)
      for (const GruCell<Scalar>* c : {&layer.fwd, &layer.bwd}) {
        add(c->W);
        add(c->U);
        add(c->b);
      }
    add(head_w);
    add(head_b);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto s : tensors()) n += s.size();
    return n;
  }

  /// Throws InvariantError naming the first tensor whose shape is inconsistent.
  void validate() const {
    const auto H = static_cast<Eigen::Index>(hidden);
    for (std::size_t l = 0; l < 2; ++l) {
      const auto in = static_cast<Eigen::Index>(l == 0 ? input : 2 * hidden);
      for (const char* dir : {"fwd", "bwd"}) {
        const GruCell<Scalar>& c = dir[0] == 'f' ? layers[l].fwd : layers[l].bwd;
        const std::string name = "gru" + std::to_string(l + 1) + "." + dir;
        if (c.W.rows() != 3 * H || c.W.cols() != in)
          throw InvariantError(name + ".W has shape " + std::to_string(c.W.rows()) + "x" +
                               std::to_string(c.W.cols()) + ", expected " +
                               std::to_string(3 * H) + "x" + std::to_string(in));
        if (c.U.rows() != 3 * H || c.U.cols() != H)
          throw InvariantError(name + ".U has wrong shape");
        if (c.b.size() != 3 * H) throw InvariantError(name + ".b has wrong shape");
      }
    }
    if (head_w.size() != 2 * H) throw InvariantError("dense.w has wrong shape");
    if (head_b.size() != 1) throw InvariantError("dense.b has wrong shape");
  }

  template <class Other>
  BasicLinkerModel<Other> cast() const {
    BasicLinkerModel<Other> m;
    m.input = input;
    m.hidden = hidden;
    for (std::size_t l = 0; l < 2; ++l) {
      m.layers[l].fwd = {layers[l].fwd.W.template cast<Other>(),
                         layers[l].fwd.U.template cast<Other>(),
                         layers[l].fwd.b.template cast<Other>()};
      m.layers[l].bwd = {layers[l].bwd.W.template cast<Other>(),
                         layers[l].bwd.U.template cast<Other>(),
                         layers[l].bwd.b.template cast<Other>()};
    }
    m.head_w = head_w.template cast<Other>();
    m.head_b = head_b.template cast<Other>();
    return m;
  }

  /// The model that computes the same function on time-reversed input, with
  /// reversed output: directions swapped in both layers, together with the
  /// matching halves of the second layer input and the dense weights.
  BasicLinkerModel mirrored() const {
    BasicLinkerModel m = *this;
    const auto H = static_cast<Eigen::Index>(hidden);
    for (auto& layer : m.layers) std::swap(layer.fwd, layer.bwd);
    for (GruCell<Scalar>* c : {&m.layers[1].fwd, &m.layers[1].bwd}) {
      Matrix w = c->W;
      c->W.leftCols(H) = w.rightCols(H);
      c->W.rightCols(H) = w.leftCols(H);
    }
    Vector hw = head_w;
    m.head_w.head(H) = hw.tail(H);
    m.head_w.tail(H) = hw.head(H);
    return m;
  }
};

namespace detail {

template <class Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  using S = typename Derived::Scalar;
  return (S(1) + (-a).exp()).inverse();
}

}  // namespace detail

/// Activations of one GRU direction over a batch, kept for backpropagation.
/// Column block t (width B) holds time step t.
template <class Scalar>
struct GruTrace {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix h_prev, z, r, n, rh, out;  // each H x (T*B)
};

/// Runs one direction over input X (in x T*B). Returns outputs H x T*B in time order.
template <class Scalar>
void gru_direction_forward(const GruCell<Scalar>& cell, const Eigen::Matrix<Scalar, -1, -1>& X,
                           Eigen::Index steps, Eigen::Index batch, bool reverse,
                           GruTrace<Scalar>& trace) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index H = cell.U.cols();
  const Eigen::Index cols = steps * batch;
  Matrix A = cell.W * X;
  A.colwise() += cell.b;
  trace.h_prev.resize(H, cols);
  trace.z.resize(H, cols);
  trace.r.resize(H, cols);
  trace.n.resize(H, cols);
  trace.rh.resize(H, cols);
  trace.out.resize(H, cols);
  Matrix h = Matrix::Zero(H, batch);
  Matrix zr(2 * H, batch), cand(H, batch);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index t = reverse ? steps - 1 - s : s;
    const Eigen::Index c0 = t * batch;
    zr.noalias() = cell.U.topRows(2 * H) * h;
    zr += A.block(0, c0, 2 * H, batch);
    auto z = trace.z.middleCols(c0, batch);
    auto r = trace.r.middleCols(c0, batch);
    z = detail::sigmoid(zr.topRows(H).array()).matrix();
    r = detail::sigmoid(zr.bottomRows(H).array()).matrix();
    auto rh = trace.rh.middleCols(c0, batch);
    rh = (r.array() * h.array()).matrix();
    cand.noalias() = cell.U.bottomRows(H) * rh;
    cand += A.block(2 * H, c0, H, batch);
    auto n = trace.n.middleCols(c0, batch);
    n = cand.array().tanh().matrix();
    trace.h_prev.middleCols(c0, batch) = h;
    h = (z.array() * h.array() + (Scalar(1) - z.array()) * n.array()).matrix();
    trace.out.middleCols(c0, batch) = h;
  }
}

/// Backpropagates d_out (H x T*B) through one direction. Accumulates parameter
/// gradients into `grad` and returns the gradient with respect to X.
template <class Scalar>
Eigen::Matrix<Scalar, -1, -1> gru_direction_backward(const GruCell<Scalar>& cell,
                                                     const Eigen::Matrix<Scalar, -1, -1>& X,
                                                     const GruTrace<Scalar>& tr,
                                                     const Eigen::Matrix<Scalar, -1, -1>& d_out,
                                                     Eigen::Index steps, Eigen::Index batch,
                                                     bool reverse, GruCell<Scalar>& grad) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index H = cell.U.cols();
  Matrix DA(3 * H, steps * batch);
  Matrix dh = Matrix::Zero(H, batch);
  Matrix dh_prev(H, batch), drh(H, batch);
  for (Eigen::Index s = steps - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? steps - 1 - s : s;
    const Eigen::Index c0 = t * batch;
    dh += d_out.middleCols(c0, batch);
    const auto z = tr.z.middleCols(c0, batch).array();
    const auto r = tr.r.middleCols(c0, batch).array();
    const auto n = tr.n.middleCols(c0, batch).array();
    const auto hp = tr.h_prev.middleCols(c0, batch).array();
    auto da_z = DA.block(0, c0, H, batch);
    auto da_r = DA.block(H, c0, H, batch);
    auto da_n = DA.block(2 * H, c0, H, batch);
    da_n = (dh.array() * (Scalar(1) - z) * (Scalar(1) - n * n)).matrix();
    drh.noalias() = cell.U.bottomRows(H).transpose() * da_n;
    da_z = (dh.array() * (hp - n) * z * (Scalar(1) - z)).matrix();
    da_r = (drh.array() * hp * r * (Scalar(1) - r)).matrix();
    dh_prev = (dh.array() * z + drh.array() * r).matrix();
    dh_prev.noalias() += cell.U.topRows(2 * H).transpose() * DA.block(0, c0, 2 * H, batch);
    dh.swap(dh_prev);
  }
  grad.W.noalias() += DA * X.transpose();
  grad.b += DA.rowwise().sum();
  grad.U.topRows(2 * H).noalias() += DA.topRows(2 * H) * tr.h_prev.transpose();
  grad.U.bottomRows(H).noalias() += DA.bottomRows(H) * tr.rh.transpose();
  return cell.W.transpose() * DA;
}

/// Forward activations of the full network for one batch.
template <class Scalar>
struct LinkerTrace {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::Index steps = 0;
  Eigen::Index batch = 0;
  Matrix x;                       // input, 5 x T*B
  std::array<GruTrace<Scalar>, 2> fwd, bwd;
  std::array<Matrix, 2> layer_out;  // 2H x T*B
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> probs;  // 1 x T*B
};

/// Runs the network on X (5 x T*B, column t*B + b is step t of sequence b).
template <class Scalar>
void linker_forward(const BasicLinkerModel<Scalar>& model, Eigen::Index steps, Eigen::Index batch,
                    LinkerTrace<Scalar>& tr) {
  const Eigen::Index H = static_cast<Eigen::Index>(model.hidden);
  if (tr.x.rows() != static_cast<Eigen::Index>(model.input) || tr.x.cols() != steps * batch)
    throw InvariantError("gru1: input is " + std::to_string(tr.x.rows()) + "x" +
                         std::to_string(tr.x.cols()) + ", expected " +
                         std::to_string(model.input) + "x" + std::to_string(steps * batch));
  tr.steps = steps;
  tr.batch = batch;
  const Eigen::Matrix<Scalar, -1, -1>* input = &tr.x;
  for (std::size_t l = 0; l < 2; ++l) {
    gru_direction_forward(model.layers[l].fwd, *input, steps, batch, false, tr.fwd[l]);
    gru_direction_forward(model.layers[l].bwd, *input, steps, batch, true, tr.bwd[l]);
    tr.layer_out[l].resize(2 * H, steps * batch);
    tr.layer_out[l].topRows(H) = tr.fwd[l].out;
    tr.layer_out[l].bottomRows(H) = tr.bwd[l].out;
    input = &tr.layer_out[l];
  }
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> logits = model.head_w.transpose() * tr.layer_out[1];
  logits.array() += model.head_b(0);
  tr.probs = detail::sigmoid(logits.array()).matrix();
}

/// Gradient of the mean loss given d_logits (1 x T*B); accumulates into `grad`.
template <class Scalar>
void linker_backward(const BasicLinkerModel<Scalar>& model, const LinkerTrace<Scalar>& tr,
                     const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>& d_logits,
                     BasicLinkerModel<Scalar>& grad) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index H = static_cast<Eigen::Index>(model.hidden);
  grad.head_w.noalias() += tr.layer_out[1] * d_logits.transpose();
  grad.head_b(0) += d_logits.sum();
  Matrix d_out = model.head_w * d_logits;  // 2H x T*B
  for (int l = 1; l >= 0; --l) {
    const Matrix& in = l == 0 ? tr.x : tr.layer_out[0];
    const Matrix df = d_out.topRows(H);
    const Matrix db = d_out.bottomRows(H);
    Matrix d_in = gru_direction_backward(model.layers[l].fwd, in, tr.fwd[l], df, tr.steps,
                                         tr.batch, false, grad.layers[l].fwd);
    d_in += gru_direction_backward(model.layers[l].bwd, in, tr.bwd[l], db, tr.steps, tr.batch,
                                   true, grad.layers[l].bwd);
    if (l == 1) d_out = std::move(d_in);
  }
}

/// Clipping bound applied to probabilities inside the loss.
inline constexpr double kProbEpsilon = 1e-7;

/// Mean binary cross-entropy with probabilities clipped to [eps, 1 - eps].
template <class Labels, class Probs>
double bce_loss(const Labels& labels, const Probs& probs, double eps = kProbEpsilon) {
  if (std::size(labels) != std::size(probs)) throw InvariantError("bce_loss: length mismatch");
  const std::size_t n = std::size(labels);
  if (n == 0) return 0.0;
  double sum = 0.0;
  auto p_it = std::begin(probs);
  for (auto y_it = std::begin(labels); y_it != std::end(labels); ++y_it, ++p_it) {
    const double p = std::clamp(static_cast<double>(*p_it), eps, 1.0 - eps);
    const double y = static_cast<double>(*y_it);
    sum += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(n);
}

}  // namespace phaselink
