// SPDX-License-Identifier: Apache-2.0
#include "scawave/checkpoint.hpp"

#include <json.hpp>

#include "scawave/error.hpp"
#include "scawave/text_io.hpp"

namespace scawave {

using Json = nlohmann::ordered_json;

void save_checkpoint(const std::string& path, const ScaWaveNet& model, const AppConfig& config,
                     const CheckpointMeta& meta, const data::Standardization& stats) {
  Json cfg = Json::object();
  for (const ConfigKey& k : config_schema()) cfg[k.key] = config.get(k.key);
  Json params = Json::array();
  for (const Parameter& p : model.parameters().items()) {
    const Eigen::VectorXd& v = p.tensor.data();
    params.push_back(Json{{"name", p.name},
                          {"shape", p.tensor.shape()},
                          {"values", std::vector<double>(v.data(), v.data() + v.size())}});
  }
  const Json doc{{"format", "scawave-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"config_hash", config.hash()},
                 {"config", std::move(cfg)},
                 {"meta",
                  {{"epoch", meta.epoch},
                   {"val_rmse", meta.val_rmse},
                   {"val_rmse_avg", meta.val_rmse_avg},
                   {"config_hash", meta.config_hash}}},
                 {"standardization",
                  {{"ap_mean", stats.ap_mean}, {"ap_sd", stats.ap_sd}, {"ddm_mean", stats.ddm_mean}, {"ddm_sd", stats.ddm_sd}}},
                 {"params", std::move(params)}};
  io::write_file(path, doc.dump() + "\n");
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string text = io::read_file(path);
  Checkpoint ck;
  try {
    const Json doc = Json::parse(text);
    if (doc.value("format", "") != "scawave-checkpoint") throw FormatError(path + ": not a checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    for (const auto& [key, value] : doc.at("config").items()) ck.config.set(key, value.get<std::string>());
    const Json& m = doc.at("meta");
    ck.meta.epoch = m.at("epoch").get<Index>();
    ck.meta.val_rmse = m.at("val_rmse").get<std::array<double, 4>>();
    ck.meta.val_rmse_avg = m.at("val_rmse_avg").get<double>();
    ck.meta.config_hash = m.at("config_hash").get<std::string>();
    const Json& s = doc.at("standardization");
    ck.stats.ap_mean = s.at("ap_mean").get<std::vector<double>>();
    ck.stats.ap_sd = s.at("ap_sd").get<std::vector<double>>();
    ck.stats.ddm_mean = s.at("ddm_mean").get<std::array<double, 3>>();
    ck.stats.ddm_sd = s.at("ddm_sd").get<std::array<double, 3>>();
    for (const Json& p : doc.at("params")) {
      const auto values = p.at("values").get<std::vector<double>>();
      ck.params.emplace_back(p.at("name").get<std::string>(),
                             Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ck;
}

ScaWaveNet load_model(const Checkpoint& ckpt) {
  ScaWaveNet model(ckpt.config.model);
  const auto& items = model.parameters().items();
  if (items.size() != ckpt.params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(ckpt.params.size()) + " tensors, model has " +
                      std::to_string(items.size()));
  }
  std::vector<Eigen::VectorXd> values;
  for (size_t i = 0; i < items.size(); ++i) {
    const auto& [name, v] = ckpt.params[i];
    if (name != items[i].name || v.size() != items[i].tensor.numel()) {
      throw FormatError("checkpoint tensor '" + name + "' does not fit model tensor '" + items[i].name + "'");
    }
    values.push_back(v);
  }
  model.parameters().restore(values);
  return model;
}

}  // namespace scawave
