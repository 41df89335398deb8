#include "resqos/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "resqos/errors.hpp"
#include "resqos/nncore.hpp"
#include "resqos/rng.hpp"

namespace resqos {

const char* loss_name(LossKind kind) {
  return kind == LossKind::mae ? "mae" : "mse";
}

LossKind loss_from_name(const std::string& name) {
  if (name == "mae") return LossKind::mae;
  if (name == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + name + "' (expected mae or mse)");
}

std::uint64_t split_seed(std::uint64_t cell_seed) {
  return sub_seed(cell_seed, "split");
}
std::uint64_t init_seed(std::uint64_t cell_seed) {
  return sub_seed(cell_seed, "init");
}
std::uint64_t train_seed(std::uint64_t cell_seed) {
  return sub_seed(cell_seed, "train");
}

namespace {

constexpr int kEvalChunk = 8192;

std::pair<double, double> evaluate_records(
    PlresModel& model, std::span<const InvocationRecord> records,
    const DistributionSet& distributions, bool clamp_negative) {
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t start = 0; start < records.size(); start += kEvalChunk) {
    const std::size_t len = std::min<std::size_t>(kEvalChunk,
                                                  records.size() - start);
    const auto chunk = records.subspan(start, len);
    Vector pred = model.forward(chunk, distributions);
    for (std::size_t i = 0; i < len; ++i) {
      double p = pred[static_cast<Eigen::Index>(i)];
      if (clamp_negative && p < 0.0) p = 0.0;
      const double err = chunk[i].qos - p;
      abs_sum += std::abs(err);
      sq_sum += err * err;
    }
  }
  const double n = static_cast<double>(records.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

}  // namespace

std::pair<double, double> evaluate(PlresModel& model,
                                   std::span<const InvocationRecord> records,
                                   const DistributionSet& distributions,
                                   bool clamp_negative) {
  if (records.empty()) throw ConfigError("evaluate called on an empty set");
  return evaluate_records(model, records, distributions, clamp_negative);
}

ExperimentResult train(PlresModel& model, const DatasetSplit& split,
                       const DistributionSet& distributions,
                       const TrainConfig& config) {
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(config.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (split.train.empty()) throw ConfigError("training set is empty");
  if (config.validation_fraction < 0.0 || config.validation_fraction >= 1.0) {
    throw ConfigError("validation_fraction must be in [0, 1)");
  }

  Rng shuffle_rng(sub_seed(config.seed, "shuffle"));

  // Optional held-out slice of train for honest model selection.
  std::vector<InvocationRecord> fit_set(split.train.begin(), split.train.end());
  std::vector<InvocationRecord> val_set;
  if (config.validation_fraction > 0.0) {
    Rng val_rng(sub_seed(config.seed, "validation"));
    val_rng.shuffle(fit_set);
    const auto n_val = static_cast<std::size_t>(
        std::floor(config.validation_fraction * fit_set.size()));
    if (n_val == 0 || n_val >= fit_set.size()) {
      throw ConfigError("validation_fraction leaves an empty partition");
    }
    val_set.assign(fit_set.end() - n_val, fit_set.end());
    fit_set.resize(fit_set.size() - n_val);
  }

  // Fixed seeded subsample of test for the per-epoch score.
  std::span<const InvocationRecord> test_view(split.test);
  std::vector<InvocationRecord> test_subsample;
  if (config.eval_subsample > 0 &&
      static_cast<std::size_t>(config.eval_subsample) < split.test.size()) {
    std::vector<std::size_t> idx(split.test.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng sub_rng(sub_seed(config.seed, "evalsub"));
    for (int i = 0; i < config.eval_subsample; ++i) {
      const std::size_t j =
          i + sub_rng.below(idx.size() - static_cast<std::size_t>(i));
      std::swap(idx[i], idx[j]);
    }
    test_subsample.reserve(config.eval_subsample);
    for (int i = 0; i < config.eval_subsample; ++i) {
      test_subsample.push_back(split.test[idx[i]]);
    }
    test_view = test_subsample;
  }

  auto loss_fn = config.loss == LossKind::mae ? mae_loss : mse_loss;

  // Per-tensor Adam moments, keyed in visit order.
  AdamParams adam{config.lr, 0.9, 0.999, 1e-8};
  std::vector<AdamState> states;
  model.visit_params([&](const std::string&, Eigen::Map<Vector> params,
                         Eigen::Map<Vector>) {
    states.emplace_back(params.size());
  });

  std::vector<std::size_t> order(fit_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ExperimentResult result;
  result.config = config;
  double best_selection_mae = std::numeric_limits<double>::infinity();

  std::vector<InvocationRecord> batch;
  batch.reserve(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len = std::min<std::size_t>(config.batch_size,
                                                    order.size() - start);
      batch.clear();
      Vector target(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        const auto& rec = fit_set[order[start + i]];
        batch.push_back(rec);
        target[static_cast<Eigen::Index>(i)] = rec.qos;
      }

      model.zero_grad();
      Vector pred = model.forward(batch, distributions);
      auto [loss, grad] = loss_fn(pred, target);
      if (!std::isfinite(loss)) {
        throw NumericError(
            "non-finite training loss at epoch " + std::to_string(epoch) +
            "; the learning rate is likely too high");
      }
      loss_sum += loss * static_cast<double>(len);
      model.backward(grad);

      std::size_t tensor_index = 0;
      model.visit_params([&](const std::string&, Eigen::Map<Vector> params,
                             Eigen::Map<Vector> grads) {
        adam_step(params, Eigen::Map<const Vector>(grads.data(), grads.size()),
                  states[tensor_index++], adam);
      });
    }

    EvalReport report;
    report.epoch = epoch;
    report.train_loss = loss_sum / static_cast<double>(fit_set.size());
    std::tie(report.test_mae, report.test_rmse) = evaluate_records(
        model, test_view, distributions, config.clamp_negative);

    double selection_mae = report.test_mae;
    if (!val_set.empty()) {
      selection_mae =
          evaluate_records(model, val_set, distributions, config.clamp_negative)
              .first;
    }

    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.reports.push_back(report);

    if (selection_mae < best_selection_mae) {
      best_selection_mae = selection_mae;
      result.best_epoch_index = epoch - 1;
      result.best_params = model.snapshot();
    }
  }
  return result;
}

namespace {

SweepCell run_cell(const std::vector<InvocationRecord>& records,
                   const VocabSizes& vocabs, const Variant& variant,
                   double density, std::uint64_t seed) {
  TrainConfig config = variant.config;
  config.density = density;
  config.seed = train_seed(seed);
  config.model.seed = init_seed(seed);

  const DatasetSplit split =
      split_by_density(records, density, split_seed(seed));
  const BinningScheme scheme(config.model.k_intervals, config.qos_max);
  const DistributionSet distributions = compute_distributions(
      split.train, scheme, vocabs.n_users, vocabs.n_services);

  PlresModel model = make_variant(config.model, vocabs);
  SweepCell cell;
  cell.variant = variant.name;
  cell.density = density;
  cell.seed = seed;
  cell.result = train(model, split, distributions, config);

  if (config.eval_subsample > 0) {
    model.restore(cell.result.best_params);
    std::tie(cell.best_full_mae, cell.best_full_rmse) =
        evaluate(model, split.test, distributions, config.clamp_negative);
  } else {
    cell.best_full_mae = cell.result.best().test_mae;
    cell.best_full_rmse = cell.result.best().test_rmse;
  }
  return cell;
}

}  // namespace

std::vector<SweepCell> run_density_sweep(
    const std::vector<InvocationRecord>& records, const VocabSizes& vocabs,
    std::span<const Variant> variants, std::span<const double> densities,
    std::span<const std::uint64_t> seeds, int n_threads) {
  struct CellSpec {
    const Variant* variant;
    double density;
    std::uint64_t seed;
  };
  std::vector<CellSpec> specs;
  for (const auto& variant : variants) {
    for (double density : densities) {
      for (std::uint64_t seed : seeds) {
        specs.push_back({&variant, density, seed});
      }
    }
  }

  std::vector<SweepCell> cells(specs.size());
  if (n_threads <= 1 || specs.size() <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      cells[i] = run_cell(records, vocabs, *specs[i].variant, specs[i].density,
                          specs[i].seed);
    }
    return cells;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const int n = std::min<int>(n_threads, static_cast<int>(specs.size()));
  std::mutex error_mutex;
  std::exception_ptr first_error;
  for (int t = 0; t < n; ++t) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= specs.size()) break;
        try {
          cells[i] = run_cell(records, vocabs, *specs[i].variant,
                              specs[i].density, specs[i].seed);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
  return cells;
}

}  // namespace resqos
