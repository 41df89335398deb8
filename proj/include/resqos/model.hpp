#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "resqos/features.hpp"
#include "resqos/nncore.hpp"

namespace resqos {

struct PlresConfig {
  int n_blocks = 2;
  int id_embed_dim = 16;
  int loc_embed_dim = 16;
  int k_intervals = 10;
  bool use_probability = true;
  bool use_location = true;
  bool use_shortcuts = true;
  std::uint64_t seed = 42;
};

struct VocabSizes {
  int n_users = 0;
  int n_services = 0;
  int user_countries = 0;
  int user_as = 0;
  int service_countries = 0;
  int service_as = 0;
};

// Hidden widths per block: geometric schedule ending at 64,
// [64*2^(n-1), ..., 64].
std::vector<int> block_widths(int n_blocks);

// Main road: fc1 -> relu -> fc2; shortcut: one learned projection. The two
// paths sum before the block's final relu. With shortcuts disabled the block
// degenerates to two plain dense+relu layers of the same widths.
struct ResidualBlock {
  DenseLayer main_fc1;
  DenseLayer main_fc2;
  DenseLayer shortcut_fc;

  // forward caches, consumed by backward
  Matrix pre1;  // fc1 output before relu
  Matrix sum;   // main + shortcut before the final relu
};

// Embeddings + distribution vectors -> concatenation -> residual stack ->
// single linear output neuron.
class PlresModel {
 public:
  PlresModel(const PlresConfig& config, const VocabSizes& vocabs);

  const PlresConfig& config() const { return config_; }
  const VocabSizes& vocab_sizes() const { return vocabs_; }
  int input_dim() const { return input_dim_; }

  // Predicted QoS values, one per record. Caches activations for backward.
  Vector forward(std::span<const InvocationRecord> batch,
                 const DistributionSet& distributions);
  double forward(const RawInput& input);

  // Exact reverse-mode gradients for every parameter on the active paths.
  void backward(const Vector& grad_pred);

  void zero_grad();

  // Visits every parameter tensor as flat (params, grads) views.
  using ParamVisitor = std::function<void(
      const std::string& name, Eigen::Map<Vector> params,
      Eigen::Map<Vector> grads)>;
  void visit_params(const ParamVisitor& visit);

  std::vector<NamedTensor> snapshot() const;
  void restore(const std::vector<NamedTensor>& tensors);

  EmbeddingTable user_id_embed;
  EmbeddingTable service_id_embed;
  EmbeddingTable user_country_embed;
  EmbeddingTable user_as_embed;
  EmbeddingTable service_country_embed;
  EmbeddingTable service_as_embed;
  std::vector<ResidualBlock> blocks;
  DenseLayer output;

 private:
  Matrix assemble_input(std::span<const InvocationRecord> batch,
                        const DistributionSet& distributions);
  Vector run_forward(Matrix x0);

  PlresConfig config_;
  VocabSizes vocabs_;
  int input_dim_ = 0;

  // per-batch caches for the embedding scatter in backward
  std::vector<int> batch_users_;
  std::vector<int> batch_services_;
  std::vector<int> batch_user_countries_;
  std::vector<int> batch_user_as_;
  std::vector<int> batch_service_countries_;
  std::vector<int> batch_service_as_;
  bool forward_done_ = false;
};

// Validates the config (at least one of probability/location enabled) and
// builds the corresponding architecture.
PlresModel make_variant(const PlresConfig& config, const VocabSizes& vocabs);

}  // namespace resqos
