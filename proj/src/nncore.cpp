#include "resqos/nncore.hpp"

#include <cmath>
#include <stdexcept>

#include "resqos/errors.hpp"

namespace resqos {

namespace {

double uniform_sym(std::mt19937_64& rng, double bound) {
  // [0,1) from the top 53 bits, mapped to [-bound, bound).
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * bound;
}

}  // namespace

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }
Vector relu(const Vector& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& grad_out, const Matrix& cached_x) {
  return (cached_x.array() > 0.0).select(grad_out, 0.0);
}

Vector relu_backward(const Vector& grad_out, const Vector& cached_x) {
  return (cached_x.array() > 0.0).select(grad_out, 0.0);
}

DenseLayer::DenseLayer(int in_dim, int out_dim, std::mt19937_64& rng) {
  if (in_dim < 1 || out_dim < 1) {
    throw ConfigError("dense layer dimensions must be positive");
  }
  w.resize(in_dim, out_dim);
  const double bound = std::sqrt(6.0 / (in_dim + out_dim));
  for (int i = 0; i < in_dim; ++i) {
    for (int j = 0; j < out_dim; ++j) {
      w(i, j) = uniform_sym(rng, bound);
    }
  }
  b = Vector::Zero(out_dim);
  grad_w = Matrix::Zero(in_dim, out_dim);
  grad_b = Vector::Zero(out_dim);
}

Matrix DenseLayer::forward(const Matrix& x) {
  if (x.cols() != w.rows()) {
    throw ConfigError("dense forward: input width " + std::to_string(x.cols()) +
                      " != layer in_dim " + std::to_string(w.rows()));
  }
  cached_x_ = x;
  Matrix y = x * w;
  y.rowwise() += b.transpose();
  return y;
}

Vector DenseLayer::forward(const Vector& x) {
  Matrix out = forward(Matrix(x.transpose()));
  return out.row(0).transpose();
}

Matrix DenseLayer::backward(const Matrix& grad_out) {
  if (cached_x_.rows() == 0) {
    throw std::logic_error("dense backward called before forward");
  }
  if (grad_out.rows() != cached_x_.rows() || grad_out.cols() != w.cols()) {
    throw ConfigError("dense backward: gradient shape mismatch");
  }
  grad_w.noalias() += cached_x_.transpose() * grad_out;
  grad_b.noalias() += grad_out.colwise().sum().transpose();
  Matrix grad_in = grad_out * w.transpose();
  cached_x_.resize(0, 0);
  return grad_in;
}

void DenseLayer::zero_grad() {
  grad_w.setZero();
  grad_b.setZero();
}

EmbeddingTable::EmbeddingTable(int vocab_size, int dim, std::mt19937_64& rng) {
  if (vocab_size < 1 || dim < 1) {
    throw ConfigError("embedding table dimensions must be positive");
  }
  table.resize(vocab_size, dim);
  for (int i = 0; i < vocab_size; ++i) {
    for (int j = 0; j < dim; ++j) {
      table(i, j) = uniform_sym(rng, 0.05);
    }
  }
  grad = Matrix::Zero(vocab_size, dim);
}

Vector EmbeddingTable::embed(int index) const {
  if (index < 0 || index >= vocab_size()) {
    throw std::out_of_range("embedding index " + std::to_string(index) +
                            " out of range [0, " +
                            std::to_string(vocab_size()) + ")");
  }
  return table.row(index).transpose();
}

void EmbeddingTable::embed_batch(const std::vector<int>& indices, Matrix& out,
                                 int col_offset) const {
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || idx >= vocab_size()) {
      throw std::out_of_range("embedding index " + std::to_string(idx) +
                              " out of range [0, " +
                              std::to_string(vocab_size()) + ")");
    }
    out.block(static_cast<Eigen::Index>(r), col_offset, 1, dim()) =
        table.row(idx);
  }
}

void EmbeddingTable::backward_batch(const std::vector<int>& indices,
                                    const Matrix& grad_x0, int col_offset) {
  for (std::size_t r = 0; r < indices.size(); ++r) {
    grad.row(indices[r]) +=
        grad_x0.block(static_cast<Eigen::Index>(r), col_offset, 1, dim());
  }
}

void EmbeddingTable::zero_grad() { grad.setZero(); }

std::pair<double, Vector> mae_loss(const Vector& pred, const Vector& target) {
  if (pred.size() == 0) throw ConfigError("loss over empty input");
  if (pred.size() != target.size()) {
    throw ConfigError("loss: prediction/target length mismatch");
  }
  const double n = static_cast<double>(pred.size());
  const Vector diff = pred - target;
  const double loss = diff.cwiseAbs().sum() / n;
  Vector grad(pred.size());
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    grad[i] = diff[i] > 0.0 ? 1.0 / n : (diff[i] < 0.0 ? -1.0 / n : 0.0);
  }
  return {loss, std::move(grad)};
}

std::pair<double, Vector> mse_loss(const Vector& pred, const Vector& target) {
  if (pred.size() == 0) throw ConfigError("loss over empty input");
  if (pred.size() != target.size()) {
    throw ConfigError("loss: prediction/target length mismatch");
  }
  const double n = static_cast<double>(pred.size());
  const Vector diff = pred - target;
  const double loss = diff.squaredNorm() / n;
  Vector grad = (2.0 / n) * diff;
  return {loss, std::move(grad)};
}

void adam_step(Eigen::Map<Vector> params, const Eigen::Map<const Vector> grads,
               AdamState& state, const AdamParams& hp) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ConfigError("adam: size mismatch between params, grads and state");
  }
  state.t += 1;
  state.m = hp.beta1 * state.m + (1.0 - hp.beta1) * grads;
  state.v = hp.beta2 * state.v +
            (1.0 - hp.beta2) * grads.array().square().matrix();
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.t));
  params.array() -= hp.lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + hp.eps);
}

}  // namespace resqos
