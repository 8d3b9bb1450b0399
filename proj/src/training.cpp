// SPDX-License-Identifier: Apache-2.0
#include "scawave/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scawave/error.hpp"
#include "scawave/fusion_head.hpp"
#include "scawave/metrics.hpp"
#include "scawave/text_io.hpp"

namespace scawave {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (patience < 1) throw ConfigError("patience must be positive");
  if (patience > max_epochs) throw ConfigError("patience must not exceed max_epochs");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
}

void adamw_step(const ParameterSet& params, AdamWState& state, const TrainConfig& config) {
  const auto& items = params.items();
  if (state.m.empty()) {
    for (const Parameter& p : items) {
      state.m.push_back(Eigen::VectorXd::Zero(p.tensor.numel()));
      state.v.push_back(Eigen::VectorXd::Zero(p.tensor.numel()));
    }
  }
  if (state.m.size() != items.size()) throw ContractError("adamw_step: optimizer state does not match parameters");
  for (const Parameter& p : items) {
    if (!p.tensor.has_grad()) throw ContractError("adamw_step: missing gradient for " + p.name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.adam_beta1, t);
  const double c2 = 1.0 - std::pow(config.adam_beta2, t);
  for (size_t i = 0; i < items.size(); ++i) {
    const Eigen::VectorXd& g = items[i].tensor.grad();
    Eigen::VectorXd& m = state.m[i];
    Eigen::VectorXd& v = state.v[i];
    Eigen::VectorXd& w = items[i].tensor.data_mut();
    m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
    v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXd m_hat = m.array() / c1;
    const Eigen::ArrayXd v_hat = v.array() / c2;
    w.array() -= config.lr * (m_hat / (v_hat.sqrt() + config.adam_eps) + config.weight_decay * w.array());
  }
}

EarlyStopping::EarlyStopping(Index patience) : patience_(patience) {
  if (patience < 1) throw ConfigError("early stopping patience must be positive");
}

bool EarlyStopping::update(Index epoch, double score) {
  if (best_epoch_ < 0 || score < best_score_) {
    best_epoch_ = epoch;
    best_score_ = score;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

Trainer::Trainer(ScaWaveNet& model, TrainConfig config)
    : model_(model), config_(config), shuffle_rng_(config.seed), dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
}

double Trainer::step(const Dataset& data, std::span<const Index> batch) {
  if (batch.empty()) throw ContractError("Trainer::step: empty batch");
  std::vector<ModelInput> inputs;
  Eigen::MatrixXd targets(static_cast<Index>(batch.size()), kChannels);
  for (size_t i = 0; i < batch.size(); ++i) {
    inputs.push_back(data.inputs[static_cast<size_t>(batch[i])]);
    targets.row(static_cast<Index>(i)) = data.targets.row(batch[i]);
  }
  model_.parameters().zero_grad();
  const Tensor pred = model_.forward(inputs, true, dropout_rng_);
  const Tensor loss = batch_loss(pred, Tensor::from_matrix(targets), config_.delta);
  ad::backward(loss);
  adamw_step(model_.parameters(), state_, config_);
  step_losses_.push_back(loss.item());
  return loss.item();
}

double Trainer::epoch(const Dataset& data) {
  if (data.size() == 0) throw ContractError("Trainer::epoch: empty dataset");
  std::vector<Index> order(static_cast<size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng_);
  double total = 0.0;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config_.batch_size)) {
    const size_t len = std::min(order.size() - start, static_cast<size_t>(config_.batch_size));
    total += step(data, std::span(order).subspan(start, len)) * static_cast<double>(len);
  }
  return total / static_cast<double>(order.size());
}

Eigen::MatrixXd predict(const ScaWaveNet& model, const Dataset& data, Index chunk) {
  Eigen::MatrixXd out(data.size(), kChannels);
  for (Index start = 0; start < data.size(); start += chunk) {
    const Index len = std::min(chunk, data.size() - start);
    out.middleRows(start, len) =
        model.predict(std::span(data.inputs).subspan(static_cast<size_t>(start), static_cast<size_t>(len)));
  }
  return out;
}

std::array<double, 4> validation_rmse(const ScaWaveNet& model, const Dataset& data) {
  if (data.size() == 0) throw ContractError("validation_rmse: empty dataset");
  const Eigen::MatrixXd pred = predict(model, data);
  std::array<double, 4> out{};
  for (Index c = 0; c < kChannels; ++c) out[static_cast<size_t>(c)] = metrics::rmse(pred.col(c), data.targets.col(c));
  return out;
}

TrainResult train(ScaWaveNet& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw ContractError("train: empty training set");
  if (val_set.size() == 0) throw ContractError("train: empty validation set");
  Trainer trainer(model, config);
  EarlyStopping stopper(config.patience);
  TrainResult result;
  std::vector<Eigen::VectorXd> best_weights;
  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = trainer.epoch(train_set);
    rec.val_rmse = validation_rmse(model, val_set);
    rec.val_rmse_avg = std::accumulate(rec.val_rmse.begin(), rec.val_rmse.end(), 0.0) / 4.0;
    result.history.push_back(rec);
    if (stopper.update(epoch, rec.val_rmse_avg)) {
      best_weights = model.parameters().snapshot();
      result.best.epoch = epoch;
      result.best.val_rmse = rec.val_rmse;
      result.best.val_rmse_avg = rec.val_rmse_avg;
    }
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  model.parameters().restore(best_weights);
  result.step_losses = trainer.step_losses();
  return result;
}

Index count_params(const ScaWaveNet& model) { return model.parameters().count(); }

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string text = "epoch,train_loss,val_rmse_ch1,val_rmse_ch2,val_rmse_ch3,val_rmse_ch4,val_rmse_avg\n";
  for (const EpochRecord& r : history) {
    text += std::to_string(r.epoch) + "," + io::format_double(r.train_loss);
    for (double v : r.val_rmse) text += "," + io::format_double(v);
    text += "," + io::format_double(r.val_rmse_avg) + "\n";
  }
  return text;
}

}  // namespace scawave
