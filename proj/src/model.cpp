#include "resqos/model.hpp"

#include <stdexcept>

#include "resqos/errors.hpp"
#include "resqos/rng.hpp"

namespace resqos {

std::vector<int> block_widths(int n_blocks) {
  if (n_blocks < 1) throw ConfigError("n_blocks must be >= 1");
  std::vector<int> widths(n_blocks);
  for (int i = 0; i < n_blocks; ++i) {
    widths[i] = 64 << (n_blocks - 1 - i);
  }
  return widths;
}

namespace {

std::mt19937_64 tensor_rng(std::uint64_t seed, const std::string& name) {
  // Per-tensor streams keep shared tensors identical across ablation
  // variants with the same seed.
  return std::mt19937_64(sub_seed(seed, name));
}

DenseLayer make_dense(int in, int out, std::uint64_t seed,
                      const std::string& name) {
  auto rng = tensor_rng(seed, name);
  return DenseLayer(in, out, rng);
}

EmbeddingTable make_embed(int vocab, int dim, std::uint64_t seed,
                          const std::string& name) {
  auto rng = tensor_rng(seed, name);
  return EmbeddingTable(vocab, dim, rng);
}

}  // namespace

PlresModel::PlresModel(const PlresConfig& config, const VocabSizes& vocabs)
    : config_(config), vocabs_(vocabs) {
  if (!config.use_probability && !config.use_location) {
    throw ConfigError(
        "at least one of the probability/location feature families must stay "
        "enabled");
  }
  if (config.n_blocks < 1) throw ConfigError("n_blocks must be >= 1");
  if (config.id_embed_dim < 1 || config.loc_embed_dim < 1) {
    throw ConfigError("embedding dimensions must be >= 1");
  }
  if (config.k_intervals < 1) throw ConfigError("k_intervals must be >= 1");
  if (vocabs.n_users < 1 || vocabs.n_services < 1 || vocabs.user_countries < 1 ||
      vocabs.user_as < 1 || vocabs.service_countries < 1 ||
      vocabs.service_as < 1) {
    throw ConfigError("all vocabulary sizes must be >= 1");
  }

  const std::uint64_t seed = config.seed;
  user_id_embed = make_embed(vocabs.n_users, config.id_embed_dim, seed,
                             "embed.user_id");
  service_id_embed = make_embed(vocabs.n_services, config.id_embed_dim, seed,
                                "embed.service_id");
  user_country_embed = make_embed(vocabs.user_countries, config.loc_embed_dim,
                                  seed, "embed.user_country");
  user_as_embed =
      make_embed(vocabs.user_as, config.loc_embed_dim, seed, "embed.user_as");
  service_country_embed = make_embed(
      vocabs.service_countries, config.loc_embed_dim, seed,
      "embed.service_country");
  service_as_embed = make_embed(vocabs.service_as, config.loc_embed_dim, seed,
                                "embed.service_as");

  input_dim_ = 2 * config.id_embed_dim;
  if (config.use_location) input_dim_ += 4 * config.loc_embed_dim;
  if (config.use_probability) input_dim_ += 2 * config.k_intervals;

  const auto widths = block_widths(config.n_blocks);
  int in_dim = input_dim_;
  blocks.reserve(widths.size());
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int m = widths[i];
    const std::string prefix = "block" + std::to_string(i) + ".";
    ResidualBlock block;
    block.main_fc1 = make_dense(in_dim, m, seed, prefix + "fc1");
    block.main_fc2 = make_dense(m, m, seed, prefix + "fc2");
    if (config.use_shortcuts) {
      block.shortcut_fc = make_dense(in_dim, m, seed, prefix + "shortcut");
    }
    blocks.push_back(std::move(block));
    in_dim = m;
  }
  output = make_dense(in_dim, 1, seed, "output");
}

Matrix PlresModel::assemble_input(std::span<const InvocationRecord> batch,
                                  const DistributionSet& distributions) {
  if (distributions.k() != config_.k_intervals) {
    throw ConfigError("distribution K does not match the model config");
  }
  const auto b = static_cast<Eigen::Index>(batch.size());
  Matrix x0(b, input_dim_);

  batch_users_.resize(batch.size());
  batch_services_.resize(batch.size());
  batch_user_countries_.resize(batch.size());
  batch_user_as_.resize(batch.size());
  batch_service_countries_.resize(batch.size());
  batch_service_as_.resize(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    batch_users_[r] = batch[r].user_id;
    batch_services_[r] = batch[r].service_id;
    batch_user_countries_[r] = batch[r].user_country_code;
    batch_user_as_[r] = batch[r].user_as_code;
    batch_service_countries_[r] = batch[r].service_country_code;
    batch_service_as_[r] = batch[r].service_as_code;
  }

  int off = 0;
  user_id_embed.embed_batch(batch_users_, x0, off);
  off += config_.id_embed_dim;
  service_id_embed.embed_batch(batch_services_, x0, off);
  off += config_.id_embed_dim;
  if (config_.use_location) {
    user_country_embed.embed_batch(batch_user_countries_, x0, off);
    off += config_.loc_embed_dim;
    user_as_embed.embed_batch(batch_user_as_, x0, off);
    off += config_.loc_embed_dim;
    service_country_embed.embed_batch(batch_service_countries_, x0, off);
    off += config_.loc_embed_dim;
    service_as_embed.embed_batch(batch_service_as_, x0, off);
    off += config_.loc_embed_dim;
  }
  if (config_.use_probability) {
    const int k = config_.k_intervals;
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const auto pu = distributions.user(batch[r].user_id);
      const auto ps = distributions.service(batch[r].service_id);
      for (int j = 0; j < k; ++j) {
        x0(static_cast<Eigen::Index>(r), off + j) = pu[j];
        x0(static_cast<Eigen::Index>(r), off + k + j) = ps[j];
      }
    }
  }
  return x0;
}

Vector PlresModel::run_forward(Matrix x0) {
  Matrix x = std::move(x0);
  for (auto& block : blocks) {
    block.pre1 = block.main_fc1.forward(x);
    Matrix main = block.main_fc2.forward(relu(block.pre1));
    if (config_.use_shortcuts) {
      block.sum = main + block.shortcut_fc.forward(x);
    } else {
      block.sum = std::move(main);
    }
    x = relu(block.sum);
  }
  forward_done_ = true;
  return output.forward(x).col(0);
}

Vector PlresModel::forward(std::span<const InvocationRecord> batch,
                           const DistributionSet& distributions) {
  if (batch.empty()) throw ConfigError("forward over an empty batch");
  return run_forward(assemble_input(batch, distributions));
}

double PlresModel::forward(const RawInput& input) {
  if (static_cast<int>(input.p_user.size()) != config_.k_intervals ||
      static_cast<int>(input.p_service.size()) != config_.k_intervals) {
    throw ConfigError("raw input distribution length does not match K");
  }
  InvocationRecord rec;
  rec.user_id = input.user_id;
  rec.service_id = input.service_id;
  rec.user_country_code = input.user_country_code;
  rec.user_as_code = input.user_as_code;
  rec.service_country_code = input.service_country_code;
  rec.service_as_code = input.service_as_code;

  // Route the explicit distribution vectors through a one-row x0 so the
  // single-record path shares the batched code exactly.
  Matrix x0(1, input_dim_);
  batch_users_ = {rec.user_id};
  batch_services_ = {rec.service_id};
  batch_user_countries_ = {rec.user_country_code};
  batch_user_as_ = {rec.user_as_code};
  batch_service_countries_ = {rec.service_country_code};
  batch_service_as_ = {rec.service_as_code};

  int off = 0;
  user_id_embed.embed_batch(batch_users_, x0, off);
  off += config_.id_embed_dim;
  service_id_embed.embed_batch(batch_services_, x0, off);
  off += config_.id_embed_dim;
  if (config_.use_location) {
    user_country_embed.embed_batch(batch_user_countries_, x0, off);
    off += config_.loc_embed_dim;
    user_as_embed.embed_batch(batch_user_as_, x0, off);
    off += config_.loc_embed_dim;
    service_country_embed.embed_batch(batch_service_countries_, x0, off);
    off += config_.loc_embed_dim;
    service_as_embed.embed_batch(batch_service_as_, x0, off);
    off += config_.loc_embed_dim;
  }
  if (config_.use_probability) {
    const int k = config_.k_intervals;
    for (int j = 0; j < k; ++j) {
      x0(0, off + j) = input.p_user[j];
      x0(0, off + k + j) = input.p_service[j];
    }
  }
  return run_forward(std::move(x0))[0];
}

void PlresModel::backward(const Vector& grad_pred) {
  if (!forward_done_) {
    throw std::logic_error("backward called before forward");
  }
  forward_done_ = false;

  Matrix grad = output.backward(Matrix(grad_pred));
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    auto& block = *it;
    const Matrix grad_sum = relu_backward(grad, block.sum);
    Matrix grad_h1 = block.main_fc2.backward(grad_sum);
    grad = block.main_fc1.backward(relu_backward(grad_h1, block.pre1));
    if (config_.use_shortcuts) {
      grad += block.shortcut_fc.backward(grad_sum);  // paths sum at the join
    }
    block.pre1.resize(0, 0);
    block.sum.resize(0, 0);
  }

  int off = 0;
  user_id_embed.backward_batch(batch_users_, grad, off);
  off += config_.id_embed_dim;
  service_id_embed.backward_batch(batch_services_, grad, off);
  off += config_.id_embed_dim;
  if (config_.use_location) {
    user_country_embed.backward_batch(batch_user_countries_, grad, off);
    off += config_.loc_embed_dim;
    user_as_embed.backward_batch(batch_user_as_, grad, off);
    off += config_.loc_embed_dim;
    service_country_embed.backward_batch(batch_service_countries_, grad, off);
    off += config_.loc_embed_dim;
    service_as_embed.backward_batch(batch_service_as_, grad, off);
    off += config_.loc_embed_dim;
  }
  // probability segments carry no trainable parameters
}

void PlresModel::zero_grad() {
  user_id_embed.zero_grad();
  service_id_embed.zero_grad();
  user_country_embed.zero_grad();
  user_as_embed.zero_grad();
  service_country_embed.zero_grad();
  service_as_embed.zero_grad();
  for (auto& block : blocks) {
    block.main_fc1.zero_grad();
    block.main_fc2.zero_grad();
    if (config_.use_shortcuts) block.shortcut_fc.zero_grad();
  }
  output.zero_grad();
}

void PlresModel::visit_params(const ParamVisitor& visit) {
  auto flat = [](Matrix& m) {
    return Eigen::Map<Vector>(m.data(), m.size());
  };
  auto flat_v = [](Vector& v) {
    return Eigen::Map<Vector>(v.data(), v.size());
  };
  auto visit_embed = [&](const std::string& name, EmbeddingTable& e) {
    visit(name, flat(e.table), flat(e.grad));
  };
  auto visit_dense = [&](const std::string& name, DenseLayer& d) {
    visit(name + ".w", flat(d.w), flat(d.grad_w));
    visit(name + ".b", flat_v(d.b), flat_v(d.grad_b));
  };

  visit_embed("embed.user_id", user_id_embed);
  visit_embed("embed.service_id", service_id_embed);
  visit_embed("embed.user_country", user_country_embed);
  visit_embed("embed.user_as", user_as_embed);
  visit_embed("embed.service_country", service_country_embed);
  visit_embed("embed.service_as", service_as_embed);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string prefix = "block" + std::to_string(i) + ".";
    visit_dense(prefix + "fc1", blocks[i].main_fc1);
    visit_dense(prefix + "fc2", blocks[i].main_fc2);
    if (config_.use_shortcuts) {
      visit_dense(prefix + "shortcut", blocks[i].shortcut_fc);
    }
  }
  visit_dense("output", output);
}

std::vector<NamedTensor> PlresModel::snapshot() const {
  std::vector<NamedTensor> tensors;
  auto& self = const_cast<PlresModel&>(*this);
  self.visit_params([&](const std::string& name, Eigen::Map<Vector> params,
                        Eigen::Map<Vector>) {
    NamedTensor t;
    t.name = name;
    t.shape = {static_cast<long>(params.size())};
    t.data.assign(params.data(), params.data() + params.size());
    tensors.push_back(std::move(t));
  });
  return tensors;
}

void PlresModel::restore(const std::vector<NamedTensor>& tensors) {
  std::size_t cursor = 0;
  visit_params([&](const std::string& name, Eigen::Map<Vector> params,
                   Eigen::Map<Vector>) {
    if (cursor >= tensors.size()) {
      throw ConfigError("parameter snapshot has too few tensors");
    }
    const NamedTensor& t = tensors[cursor++];
    if (t.name != name ||
        t.data.size() != static_cast<std::size_t>(params.size())) {
      throw ConfigError("parameter snapshot mismatch at tensor '" + t.name +
                        "' (expected '" + name + "')");
    }
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      params[i] = t.data[static_cast<std::size_t>(i)];
    }
  });
  if (cursor != tensors.size()) {
    throw ConfigError("parameter snapshot has extra tensors");
  }
}

PlresModel make_variant(const PlresConfig& config, const VocabSizes& vocabs) {
  return PlresModel(config, vocabs);
}

}  // namespace resqos
