// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "scawave/model.hpp"

namespace scawave {

struct TrainConfig {
  Index batch_size = 512;
  Index max_epochs = 75;
  Index patience = 15;
  double lr = 1.4e-4;
  double weight_decay = 1e-5;
  double delta = 2.0;  ///< Huber transition
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;  ///< shuffling and dropout

  /// Throws ConfigError on non-positive sizes, rates outside range or
  /// patience > max_epochs.
  void validate() const;
};

/// Model inputs with their four reference SWH values (meters).
struct Dataset {
  std::vector<ModelInput> inputs;
  Eigen::MatrixXd targets;  ///< [n×4]

  Index size() const { return static_cast<Index>(inputs.size()); }
};

/// First and second moments per parameter, plus the step counter.
struct AdamWState {
  std::vector<Eigen::VectorXd> m, v;
  Index step = 0;
};

/// One decoupled-weight-decay Adam update of every parameter from its
/// accumulated gradient. Throws ContractError when a gradient is missing.
void adamw_step(const ParameterSet& params, AdamWState& state, const TrainConfig& config);

/// Tracks the best (lowest) validation score and the epochs since it.
class EarlyStopping {
 public:
  explicit EarlyStopping(Index patience);

  /// Records an epoch's score. Returns true when it is a strict improvement.
  bool update(Index epoch, double score);
  bool should_stop() const { return since_best_ >= patience_; }
  Index best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  Index patience_;
  Index best_epoch_ = -1;
  double best_score_ = 0.0;
  Index since_best_ = 0;
};

struct EpochRecord {
  Index epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  std::array<double, 4> val_rmse{};
  double val_rmse_avg = 0.0;
};

struct CheckpointMeta {
  Index epoch = 0;
  std::array<double, 4> val_rmse{};
  double val_rmse_avg = 0.0;
  std::string config_hash;
};

struct TrainResult {
  CheckpointMeta best;
  std::vector<EpochRecord> history;
  std::vector<double> step_losses;  ///< batch loss before each update
  bool stopped_early = false;
};

/// Mini-batch optimizer bound to one model.
class Trainer {
 public:
  Trainer(ScaWaveNet& model, TrainConfig config);

  /// Forward, backward and one AdamW update on the given sample indices.
  /// Returns the batch loss before the update.
  double step(const Dataset& data, std::span<const Index> batch);
  /// One pass over `data` in a seeded shuffled order, last partial batch
  /// kept. Returns the sample-weighted mean batch loss.
  double epoch(const Dataset& data);

  const AdamWState& state() const { return state_; }
  const std::vector<double>& step_losses() const { return step_losses_; }

 private:
  ScaWaveNet& model_;
  TrainConfig config_;
  AdamWState state_;
  ad::Rng shuffle_rng_;
  ad::Rng dropout_rng_;
  std::vector<double> step_losses_;
};

/// Per-channel RMSE of eval-mode predictions on `data`.
std::array<double, 4> validation_rmse(const ScaWaveNet& model, const Dataset& data);

/// Eval-mode predictions, [n×4], computed in chunks of `chunk` samples.
Eigen::MatrixXd predict(const ScaWaveNet& model, const Dataset& data, Index chunk = 256);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains with early stopping on the average validation RMSE and leaves the
/// model holding the best epoch's weights. Throws ContractError on an empty
/// training or validation set.
TrainResult train(ScaWaveNet& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Total element count of all learnable tensors.
Index count_params(const ScaWaveNet& model);

/// CSV text: epoch,train_loss,val_rmse_ch1..4,val_rmse_avg.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace scawave
