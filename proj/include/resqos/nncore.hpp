#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace resqos {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Row-major flat tensor used by checkpoints and parameter snapshots.
struct NamedTensor {
  std::string name;
  std::vector<long> shape;
  std::vector<double> data;
};

// Elementwise max(0, x).
Matrix relu(const Matrix& x);
Vector relu(const Vector& x);

// grad_in_i = grad_out_i * 1[x_i > 0]; the derivative at exactly 0 is 0.
Matrix relu_backward(const Matrix& grad_out, const Matrix& cached_x);
Vector relu_backward(const Vector& grad_out, const Vector& cached_x);

// Fully-connected layer, y = W^T x + b. Batched calls treat each row of the
// input as one sample. Gradients accumulate until zero_grad().
class DenseLayer {
 public:
  DenseLayer() = default;
  // Glorot-uniform weights in +-sqrt(6/(in+out)), zero bias.
  DenseLayer(int in_dim, int out_dim, std::mt19937_64& rng);

  int in_dim() const { return static_cast<int>(w.rows()); }
  int out_dim() const { return static_cast<int>(w.cols()); }

  Matrix forward(const Matrix& x);  // (B, in) -> (B, out); caches x
  Vector forward(const Vector& x);  // single-sample convenience

  // Consumes the cached input; returns grad wrt the input, (B, in).
  Matrix backward(const Matrix& grad_out);

  void zero_grad();

  Matrix w;       // (in, out)
  Vector b;       // (out)
  Matrix grad_w;
  Vector grad_b;

 private:
  Matrix cached_x_;
};

// Row-lookup embedding; equivalent to one-hot times the table.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Uniform init in +-0.05.
  EmbeddingTable(int vocab_size, int dim, std::mt19937_64& rng);

  int vocab_size() const { return static_cast<int>(table.rows()); }
  int dim() const { return static_cast<int>(table.cols()); }

  Vector embed(int index) const;  // bounds-checked row copy
  // Writes looked-up rows into out.block(0, col_offset, B, dim).
  void embed_batch(const std::vector<int>& indices, Matrix& out,
                   int col_offset) const;
  // Adds grad rows from grad_x0.block(0, col_offset, B, dim) into grad.
  void backward_batch(const std::vector<int>& indices, const Matrix& grad_x0,
                      int col_offset);

  void zero_grad();

  Matrix table;  // (vocab, dim)
  Matrix grad;
};

// loss and per-component gradient; MAE grad = sign(diff)/N, MSE = 2 diff/N.
std::pair<double, Vector> mae_loss(const Vector& pred, const Vector& target);
std::pair<double, Vector> mse_loss(const Vector& pred, const Vector& target);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-tensor moments over the flattened parameter storage.
struct AdamState {
  Vector m;
  Vector v;
  long t = 0;

  explicit AdamState(Eigen::Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

// One Adam update: m,v moment tracking, bias correction, then
// theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(Eigen::Map<Vector> params, const Eigen::Map<const Vector> grads,
               AdamState& state, const AdamParams& hp);

}  // namespace resqos
