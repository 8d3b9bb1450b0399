// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>

#include "scawave/checkpoint.hpp"
#include "scawave/config.hpp"
#include "scawave/error.hpp"
#include "scawave/metrics.hpp"
#include "scawave/synth.hpp"
#include "scawave/text_io.hpp"
#include "support/model_oracle.hpp"
#include "support/records.hpp"

using namespace scawave;
using scawave::testing::scratch_dir;

namespace {

Eigen::MatrixXd refs(const std::vector<data::FourChannelSample>& samples) {
  Eigen::MatrixXd r(static_cast<Index>(samples.size()), 4);
  for (size_t i = 0; i < samples.size(); ++i) {
    for (size_t c = 0; c < 4; ++c) r(static_cast<Index>(i), static_cast<Index>(c)) = samples[i].channels[c].swh_ref;
  }
  return r;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("identical channels when fully correlated and noiseless") {
  synth::SynthSpec spec;
  spec.n_samples = 200;
  spec.channel_corr = 1.0;
  spec.noise_sd = 0.0;
  const auto s = synth::generate(spec);
  const Eigen::MatrixXd r = refs(s);
  for (Index i = 0; i < r.rows(); ++i) {
    for (Index c = 1; c < 4; ++c) CHECK(r(i, c) == r(i, 0));
  }
  CHECK(metrics::channel_sd_percentile(r, 0.95) == 0.0);
}

TEST_CASE("planted signal is invertible from nbrcs without noise") {
  synth::SynthSpec spec;
  spec.n_samples = 100;
  spec.noise_sd = 0.0;
  spec.channel_corr = 0.5;
  double worst = 0.0;
  for (const auto& s : synth::generate(spec)) {
    for (const auto& c : s.channels) worst = std::max(worst, std::abs(synth::swh_from_nbrcs(c.aps[0]) - c.swh_ref));
  }
  CHECK(worst < 1e-12);
  for (double h = 0.0; h < 8.0; h += 0.25) {
    CHECK(synth::planted_nbrcs(h + 0.25) < synth::planted_nbrcs(h));
    CHECK(synth::planted_les(h + 0.25) < synth::planted_les(h));
  }
}

TEST_CASE("ranges, timestamps and the long-tailed base distribution") {
  synth::SynthSpec spec;
  spec.n_samples = 3000;
  spec.seed = 4;
  const auto s = synth::generate(spec);
  const Eigen::MatrixXd r = refs(s);
  CHECK(r.minCoeff() >= spec.swh_lo);
  CHECK(r.maxCoeff() <= spec.swh_hi);
  for (size_t i = 1; i < s.size(); ++i) CHECK(s[i].timestamp > s[i - 1].timestamp);
  CHECK(s.front().timestamp >= spec.start);
  CHECK(s.back().timestamp < spec.end);
  std::mt19937_64 rng(1);
  int inside = 0;
  for (int i = 0; i < 20000; ++i) {
    const double h = synth::draw_base_swh(rng);
    inside += (h >= 1.0 && h <= 3.0) ? 1 : 0;
  }
  MESSAGE("fraction of base SWH in [1, 3] m: " << inside / 20000.0);
  CHECK(inside > 14000);
  for (const auto& c : s[0].channels) CHECK(c.aps.size() == 9);
  spec.use_wind = true;
  spec.n_samples = 3;
  CHECK(synth::generate(spec)[0].channels[0].aps.size() == 10);
}

TEST_CASE("fixed seed gives a byte-identical canonical file") {
  const auto dir = scratch_dir("synth");
  synth::SynthSpec spec;
  spec.n_samples = 40;
  spec.seed = 17;
  data::Manifest m;
  m.ddm_width = spec.ddm_width;
  m.ddm_height = spec.ddm_height;
  m.seed = spec.seed;
  data::write_samples((dir / "a.jsonl").string(), synth::generate(spec), m);
  data::write_samples((dir / "b.jsonl").string(), synth::generate(spec), m);
  CHECK(io::read_file((dir / "a.jsonl").string()) == io::read_file((dir / "b.jsonl").string()));
  CHECK(io::read_file((dir / "a.jsonl.manifest.json").string()) == io::read_file((dir / "b.jsonl.manifest.json").string()));
  spec.seed = 18;
  data::write_samples((dir / "c.jsonl").string(), synth::generate(spec), m);
  CHECK(io::read_file((dir / "a.jsonl").string()) != io::read_file((dir / "c.jsonl").string()));
}

TEST_CASE("raw bundle exercises QC, alignment and both collocations") {
  synth::SynthSpec spec;
  spec.n_samples = 120;
  spec.start = data::parse_iso8601("2020-03-01");
  spec.use_wind = true;
  const synth::RawBundle raw = synth::generate_raw(spec);
  CHECK_NOTHROW(raw.grid.validate());
  const data::QcResult qc = data::quality_control(raw.records);
  CHECK(qc.tally.total() == static_cast<Index>(raw.records.size()));
  CHECK(qc.tally.kept < qc.tally.total());
  CHECK(qc.tally[data::QcRule::AttitudeAngles] > 0);
  CHECK(qc.tally[data::QcRule::NearLand] > 0);
  CHECK(qc.tally[data::QcRule::QualityFlags] > 0);
  CHECK(qc.tally[data::QcRule::LowRcg] > 0);
  CHECK(qc.tally[data::QcRule::NanInf] > 0);
  const data::AlignResult al = data::align_channels(qc.kept);
  CHECK(al.incomplete > 0);
  CHECK(al.groups.size() > 60);
  const data::CollocationResult era5 = data::collocate_era5(al.groups, raw.grid, true);
  CHECK(era5.samples.size() > 40);
  for (const auto& s : era5.samples) {
    for (const auto& c : s.channels) {
      CHECK(c.swh_ref > 0.0);
      CHECK(c.aps.size() == 10);
    }
  }
  const data::BuoyMatchResult buoy = data::match_buoy(al.groups, raw.buoys);
  CHECK(buoy.samples.size() > 10);
  CHECK(buoy.dropped_groups > 0);
}

TEST_CASE("spec validation") {
  synth::SynthSpec s;
  s.swh_hi = 9.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.channel_corr = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.noise_sd = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.n_samples = 0;
  CHECK_THROWS_AS(synth::generate(s), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("config") {

TEST_CASE("defaults match the documented values") {
  const AppConfig c;
  CHECK(c.get("train.batch_size") == "512");
  CHECK(c.get("train.max_epochs") == "75");
  CHECK(c.get("train.patience") == "15");
  CHECK(c.get("train.lr") == "0.00014");
  CHECK(c.get("train.weight_decay") == "1e-05");
  CHECK(c.get("train.delta") == "2");
  CHECK(c.get("train.adam_beta1") == "0.9");
  CHECK(c.get("train.adam_beta2") == "0.999");
  CHECK(c.get("train.adam_eps") == "1e-08");
  CHECK(c.get("model.strategy") == "CD");
  CHECK(c.get("model.ddm_width") == "11");
  CHECK(c.get("model.ddm_height") == "17");
  CHECK(c.get("qc.min_rcg") == "3");
  CHECK(c.get("qc.flag_mask") == "0x0FFFFFFF");
  CHECK(c.get("match.buoy_max_distance_km") == "25");
  CHECK(c.get("match.buoy_max_dt_s") == "1800");
  CHECK(c.get("match.swh_cap") == "8");
  CHECK(c.get("split.train_start") == "2019-08-01T00:00:00Z");
  CHECK(c.get("split.val_start") == "2020-08-01T00:00:00Z");
  CHECK(c.get("split.test_end") == "2022-08-01T00:00:00Z");
  CHECK(c.get("eval.bin_edges") == "0,1,2,3,4,5,6,7,8");
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("text round trip and stable hash") {
  AppConfig a;
  a.set("train.lr", "0.001");
  a.set("model.strategy", "CI");
  a.set("model.d_ff", "64");
  a.set("qc.flag_mask", "0x00000FF0");
  a.set("eval.bin_edges", "0, 2.5, 8");
  AppConfig b;
  b.apply_text(a.to_text());
  CHECK(b.to_text() == a.to_text());
  CHECK(b.hash() == a.hash());
  CHECK(a.hash().size() == 16);
  CHECK(a.hash() != AppConfig{}.hash());
  CHECK(b.qc.flag_mask == 0xFF0u);
  CHECK(b.eval.bin_edges == std::vector<double>{0.0, 2.5, 8.0});
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("comments, blank lines and geometry propagation") {
  AppConfig c;
  c.apply_text("# toy\n\nmodel.ddm_width = 6   # W\n  model.ddm_height=6\nmodel.use_wind = true\n");
  CHECK(c.model.ddm_width == 6);
  CHECK(c.qc.ddm_width == 6);
  CHECK(c.synth.ddm_height == 6);
  CHECK(c.synth.use_wind);
  CHECK(c.model.ap_columns() == 10);
}

TEST_CASE("unknown keys and bad values are reported") {
  AppConfig c;
  CHECK_THROWS_WITH_AS(c.apply_text("train.lr = 0.1\ntrain.learning_rate = 0.1\n", "run.cfg"),
                       doctest::Contains("run.cfg:2: unknown config key 'train.learning_rate'"), ConfigError);
  CHECK_THROWS_WITH_AS(c.set("train.batch_size", "big"), doctest::Contains("train.batch_size"), ConfigError);
  CHECK_THROWS_AS(c.set("model.strategy", "CP"), ConfigError);
  CHECK_THROWS_AS(c.set("split.train_start", "2019-02-30"), ConfigError);
  CHECK_THROWS_AS(c.set("model.use_wind", "maybe"), ConfigError);
  CHECK_THROWS_AS(c.apply_text("no equals sign"), ConfigError);
  AppConfig bad;
  bad.set("eval.bin_edges", "0,3,2");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("schema lists every key once") {
  const auto& schema = config_schema();
  std::set<std::string> names;
  for (const ConfigKey& k : schema) {
    CHECK_FALSE(k.help.empty());
    CHECK(names.insert(k.key).second);
  }
  const AppConfig c;
  size_t lines = 0;
  for (char ch : c.to_text()) lines += ch == '\n' ? 1 : 0;
  CHECK(lines == schema.size());
}

}  // TEST_SUITE

TEST_SUITE("checkpoint") {

TEST_CASE("save and load reproduce predictions bit for bit") {
  const auto dir = scratch_dir("ckpt");
  AppConfig cfg;
  cfg.model = testing::toy_config(Strategy::CD, 5);
  const ScaWaveNet model(cfg.model);
  data::Standardization stats;
  stats.ap_mean.assign(9, 0.5);
  stats.ap_sd.assign(9, 2.0);
  stats.ddm_mean = {1, 2, 3};
  stats.ddm_sd = {4, 5, 6};
  CheckpointMeta meta{7, {0.1, 0.2, 0.3, 0.4}, 0.25, cfg.hash()};
  const std::string path = (dir / "m.ckpt.json").string();
  save_checkpoint(path, model, cfg, meta, stats);
  const Checkpoint ck = read_checkpoint(path);
  CHECK(ck.config.hash() == cfg.hash());
  CHECK(ck.meta.epoch == 7);
  CHECK(ck.meta.val_rmse[3] == 0.4);
  CHECK(ck.stats.ddm_sd[2] == 6.0);
  const ScaWaveNet loaded = load_model(ck);
  ad::Rng rng(3);
  std::vector<ModelInput> batch{testing::random_input(cfg.model, rng), testing::random_input(cfg.model, rng)};
  CHECK((loaded.predict(batch).array() == model.predict(batch).array()).all());
  save_checkpoint((dir / "again.json").string(), loaded, ck.config, ck.meta, ck.stats);
  CHECK(io::read_file((dir / "again.json").string()) == io::read_file(path));

  SUBCASE("architecture mismatch") {
    Checkpoint other = ck;
    other.config.set("model.strategy", "CI");
    CHECK_THROWS_AS(load_model(other), FormatError);
  }
  SUBCASE("version mismatch") {
    std::string text = io::read_file(path);
    text.replace(text.find("\"version\":1"), 11, "\"version\":9");
    io::write_file(path, text);
    CHECK_THROWS_WITH_AS(read_checkpoint(path), doctest::Contains("version"), FormatError);
  }
  SUBCASE("truncated") {
    const std::string text = io::read_file(path);
    io::write_file(path, text.substr(0, text.size() / 3));
    CHECK_THROWS_AS(read_checkpoint(path), FormatError);
  }
}

}  // TEST_SUITE
