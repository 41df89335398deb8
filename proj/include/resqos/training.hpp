#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resqos/dataset.hpp"
#include "resqos/features.hpp"
#include "resqos/model.hpp"

namespace resqos {

enum class LossKind { mae, mse };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 256;
  int max_epochs = 50;
  LossKind loss = LossKind::mae;
  double density = 0.05;
  double qos_max = 20.0;  // binning upper bound, seconds
  std::uint64_t seed = 42;
  PlresConfig model;

  // 0 = score the full test set every epoch (paper protocol). A positive
  // value scores a fixed seeded subsample instead; the final numbers for the
  // selected epoch should then be recomputed on the full set.
  int eval_subsample = 0;
  // Carve this fraction out of train and select the best epoch on it instead
  // of the test set. 0 = paper protocol (test-set minimum).
  double validation_fraction = 0.0;
  bool clamp_negative = false;  // clamp predictions at 0 before metrics
};

struct EvalReport {
  int epoch = 0;
  double train_loss = 0.0;
  double test_mae = 0.0;
  double test_rmse = 0.0;
  double wall_time = 0.0;  // seconds spent in this epoch
};

struct ExperimentResult {
  TrainConfig config;
  std::vector<EvalReport> reports;
  int best_epoch_index = -1;  // position in reports
  std::vector<NamedTensor> best_params;
  std::string split_ref;  // split manifest path or description

  const EvalReport& best() const { return reports.at(best_epoch_index); }
};

// MAE and RMSE of the model over the records.
std::pair<double, double> evaluate(PlresModel& model,
                                   std::span<const InvocationRecord> records,
                                   const DistributionSet& distributions,
                                   bool clamp_negative = false);

// Mini-batch training: seeded shuffle each epoch, per-batch averaged loss,
// evaluation after every epoch, best checkpoint by minimum MAE retained.
ExperimentResult train(PlresModel& model, const DatasetSplit& split,
                       const DistributionSet& distributions,
                       const TrainConfig& config);

// One named arm of an experiment suite.
struct Variant {
  std::string name;
  TrainConfig config;
};

struct SweepCell {
  std::string variant;
  double density = 0.0;
  std::uint64_t seed = 0;
  ExperimentResult result;
  // Full-test metrics of the selected best epoch (recomputed when per-epoch
  // evaluation ran on a subsample).
  double best_full_mae = 0.0;
  double best_full_rmse = 0.0;
};

// Runs every variant x density x seed cell: fresh split, distributions
// recomputed from that split's train partition, fresh model. Cells are
// independent; n_threads > 1 runs them concurrently (results keep the
// deterministic cell order regardless).
std::vector<SweepCell> run_density_sweep(
    const std::vector<InvocationRecord>& records, const VocabSizes& vocabs,
    std::span<const Variant> variants, std::span<const double> densities,
    std::span<const std::uint64_t> seeds, int n_threads = 1);

// Derived sub-seeds so split/init/shuffle streams are independent.
std::uint64_t split_seed(std::uint64_t cell_seed);
std::uint64_t init_seed(std::uint64_t cell_seed);
std::uint64_t train_seed(std::uint64_t cell_seed);

}  // namespace resqos
