// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <filesystem>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scawave/checkpoint.hpp"
#include "scawave/config.hpp"
#include "scawave/data_pipeline.hpp"
#include "scawave/error.hpp"
#include "scawave/metrics.hpp"
#include "scawave/synth.hpp"
#include "scawave/text_io.hpp"
#include "scawave/training.hpp"

namespace scawave::cli {

namespace {

using Json = nlohmann::ordered_json;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

struct Options {
  Common common;
  std::string in, out, grid, buoys, data, ckpt, history, csv, scatter, bias_grid, raw_dir, strategy;
  std::string split = "test";
  std::optional<Index> n;
  bool bins = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override one key, e.g. --set train.lr=0.001")->take_all();
  cmd->add_option("--seed", c.seed, "seed for model, training, split and synth");
}

AppConfig resolve_config(const Common& c) {
  AppConfig cfg;
  if (!c.config_path.empty()) cfg.apply_text(io::read_file(c.config_path), c.config_path);
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) {
    for (const char* key : {"model.seed", "train.seed", "split.seed", "synth.seed"}) cfg.set(key, std::to_string(*c.seed));
  }
  cfg.validate();
  return cfg;
}

std::string tallies_json(const data::QcTally& t) {
  Json j;
  j["total"] = t.total();
  j["kept"] = t.kept;
  for (size_t i = 0; i < data::kQcRuleCount; ++i) j[std::string(data::to_string(static_cast<data::QcRule>(i)))] = t.rejected[i];
  return j.dump();
}

std::string split_json(const data::SplitSpec& s) {
  Json j;
  const char* names[3] = {"train", "val", "test"};
  for (size_t i = 0; i < 3; ++i) {
    j[names[i]] = {{"start", data::format_iso8601(s.ranges[i].start)},
                   {"end", data::format_iso8601(s.ranges[i].end)},
                   {"max", s.max_counts[i]}};
  }
  j["seed"] = s.seed;
  return j.dump();
}

data::Manifest base_manifest(const AppConfig& cfg) {
  data::Manifest m;
  m.ddm_width = cfg.model.ddm_width;
  m.ddm_height = cfg.model.ddm_height;
  m.k_ap = cfg.model.ap_columns();
  m.seed = cfg.split.seed;
  m.config_hash = cfg.hash();
  m.split_json = split_json(cfg.split);
  return m;
}

std::vector<data::FourChannelSample> select_split(std::vector<data::FourChannelSample> samples,
                                                  const data::SplitSpec& spec, const std::string& name) {
  if (name == "all") return samples;
  const std::array<std::string, 3> names{"train", "val", "test"};
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError("unknown split '" + name + "' (expected train, val, test or all)");
  data::SplitResult parts = data::split_dataset(std::move(samples), spec);
  return std::move(parts.parts[static_cast<size_t>(it - names.begin())]);
}

void require_nonempty(const std::vector<data::FourChannelSample>& s, const std::string& what) {
  if (s.empty()) throw ContractError("no samples in the " + what + " split");
}

/// Flattens per-channel columns into one vector, channel-major.
Eigen::VectorXd flat(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  for (Index c = 0; c < m.cols(); ++c) v.segment(c * m.rows(), m.rows()) = m.col(c);
  return v;
}

void log_tally(std::ostream& log, const data::QcTally& t) {
  log << "qc: total=" << t.total() << " kept=" << t.kept;
  for (size_t i = 0; i < data::kQcRuleCount; ++i) {
    log << ' ' << data::to_string(static_cast<data::QcRule>(i)) << '=' << t.rejected[i];
  }
  log << '\n';
}

// ---- commands --------------------------------------------------------------

void cmd_synth(const Options& o, std::ostream& log) {
  AppConfig cfg = resolve_config(o.common);
  if (o.n) cfg.set("synth.n_samples", std::to_string(*o.n));
  log << "config_hash=" << cfg.hash() << '\n';
  if (!o.raw_dir.empty()) {
    const synth::RawBundle raw = synth::generate_raw(cfg.synth);
    const std::filesystem::path dir(o.raw_dir);
    data::write_l1_records((dir / "l1.jsonl").string(), raw.records);
    data::write_era5_grid((dir / "era5.json").string(), raw.grid);
    data::write_buoy_csv((dir / "buoys.csv").string(), raw.buoys);
    log << "synth: " << raw.records.size() << " L1 records, " << raw.buoys.size() << " buoy rows -> " << o.raw_dir
        << '\n';
    return;
  }
  if (o.out.empty()) throw ConfigError("synth: --out or --raw-dir is required");
  const auto samples = synth::generate(cfg.synth);
  data::Manifest m = base_manifest(cfg);
  m.seed = cfg.synth.seed;
  write_samples(o.out, samples, m);
  log << "synth: " << samples.size() << " samples -> " << o.out << '\n';
}

void cmd_preprocess(const Options& o, std::ostream& log) {
  const AppConfig cfg = resolve_config(o.common);
  log << "config_hash=" << cfg.hash() << '\n';
  const auto records = data::read_l1_records(o.in);
  const data::QcResult qc = data::quality_control(records, cfg.qc);
  log_tally(log, qc.tally);
  const data::AlignResult al = data::align_channels(qc.kept);
  log << "align: groups=" << al.groups.size() << " incomplete=" << al.incomplete << " duplicate=" << al.duplicate
      << '\n';
  std::vector<data::L1Record> kept;
  for (const auto& g : al.groups) kept.insert(kept.end(), g.begin(), g.end());
  data::write_l1_records(o.out, kept);
  Json report = Json::parse(tallies_json(qc.tally));
  report["aligned_groups"] = al.groups.size();
  report["incomplete"] = al.incomplete;
  report["duplicate"] = al.duplicate;
  report["config_hash"] = cfg.hash();
  io::write_file(o.out + ".qc.json", report.dump(2) + "\n");
}

std::string upstream_tallies(const std::string& in) {
  const std::string path = in + ".qc.json";
  if (!std::filesystem::exists(path)) return "{}";
  return io::read_file(path);
}

void finish_collocation(const AppConfig& cfg, const Options& o, std::vector<data::FourChannelSample> samples,
                        Json tallies, std::ostream& log) {
  data::CapResult cap = data::cap_and_filter(std::move(samples), cfg.swh_cap);
  tallies["cap_dropped"] = cap.dropped;
  log << "cap: kept=" << cap.kept.size() << " dropped=" << cap.dropped << '\n';
  data::Manifest m = base_manifest(cfg);
  m.qc_tallies_json = tallies.dump();
  write_samples(o.out, cap.kept, m);
  log << "wrote " << cap.kept.size() << " samples -> " << o.out << '\n';
}

void cmd_match_era5(const Options& o, std::ostream& log) {
  const AppConfig cfg = resolve_config(o.common);
  log << "config_hash=" << cfg.hash() << '\n';
  const data::Era5Grid grid = data::read_era5_grid(o.grid);
  const auto records = data::read_l1_records(o.in);
  const data::AlignResult al = data::align_channels(records);
  const data::CollocationResult col = data::collocate_era5(al.groups, grid, cfg.model.use_wind);
  log << "era5: matched=" << col.samples.size() << " dropped=" << col.dropped << '\n';
  Json t;
  t["preprocess"] = Json::parse(upstream_tallies(o.in));
  t["era5_dropped"] = col.dropped;
  finish_collocation(cfg, o, col.samples, t, log);
}

void cmd_match_buoy(const Options& o, std::ostream& log) {
  const AppConfig cfg = resolve_config(o.common);
  log << "config_hash=" << cfg.hash() << '\n';
  if (cfg.model.use_wind) throw ConfigError("match-buoy: buoy samples carry no wind column; unset model.use_wind");
  Index skipped = 0;
  const auto buoys = data::read_buoy_csv(o.buoys, &skipped);
  const auto records = data::read_l1_records(o.in);
  const data::AlignResult al = data::align_channels(records);
  const data::BuoyMatchResult res = data::match_buoy(al.groups, buoys, cfg.buoy);
  log << "buoy: rows=" << buoys.size() << " skipped_rows=" << skipped << " matched=" << res.samples.size()
      << " unmatched_channels=" << res.unmatched_channels << " dropped_groups=" << res.dropped_groups << '\n';
  Json t;
  t["preprocess"] = Json::parse(upstream_tallies(o.in));
  t["buoy_rows_skipped"] = skipped;
  t["buoy_unmatched_channels"] = res.unmatched_channels;
  t["buoy_dropped_groups"] = res.dropped_groups;
  finish_collocation(cfg, o, res.samples, t, log);
}

void cmd_train(const Options& o, std::ostream& log) {
  AppConfig cfg = resolve_config(o.common);
  if (!o.strategy.empty()) {
    cfg.set("model.strategy", o.strategy);
    cfg.validate();
  }
  const std::string hash = cfg.hash();
  log << "config_hash=" << hash << '\n';
  data::SampleFile file = data::read_samples(o.data);
  data::SplitResult parts = data::split_dataset(std::move(file.samples), cfg.split);
  require_nonempty(parts.parts[0], "train");
  require_nonempty(parts.parts[1], "val");
  log << "split: train=" << parts.parts[0].size() << " val=" << parts.parts[1].size()
      << " test=" << parts.parts[2].size() << " excluded=" << parts.excluded << '\n';
  const data::Standardization stats = data::Standardization::fit(parts.parts[0]);
  const Dataset train_set = data::make_dataset(parts.parts[0], stats, cfg.model);
  const Dataset val_set = data::make_dataset(parts.parts[1], stats, cfg.model);
  ScaWaveNet model(cfg.model);
  log << "model: strategy=" << to_string(cfg.model.strategy) << " params=" << count_params(model) << '\n';
  TrainResult result = train(model, train_set, val_set, cfg.train, [&](const EpochRecord& r) {
    log << "epoch " << r.epoch << " train_loss=" << io::format_double(r.train_loss)
        << " val_rmse_avg=" << io::format_double(r.val_rmse_avg) << '\n';
  });
  result.best.config_hash = hash;
  save_checkpoint(o.out, model, cfg, result.best, stats);
  log << "best epoch " << result.best.epoch << " val_rmse_avg=" << io::format_double(result.best.val_rmse_avg)
      << " -> " << o.out << '\n';
  if (!o.history.empty()) io::write_file(o.history, "# config_hash=" + hash + "\n" + history_csv(result.history));
}

struct Evaluated {
  Checkpoint ckpt;
  std::vector<data::FourChannelSample> samples;
  Eigen::MatrixXd pred, ref;
};

Evaluated run_model(const Options& o) {
  Evaluated e;
  e.ckpt = read_checkpoint(o.ckpt);
  if (!o.strategy.empty()) {
    const Strategy requested = parse_strategy(o.strategy);
    if (requested != e.ckpt.config.model.strategy) {
      throw ConfigError("checkpoint was trained with strategy " + to_string(e.ckpt.config.model.strategy) +
                        ", requested " + to_string(requested));
    }
  }
  const ScaWaveNet model = load_model(e.ckpt);
  e.samples = select_split(data::read_samples(o.data).samples, e.ckpt.config.split, o.split);
  require_nonempty(e.samples, o.split);
  const Dataset d = data::make_dataset(e.samples, e.ckpt.stats, e.ckpt.config.model);
  e.pred = predict(model, d);
  e.ref = d.targets;
  return e;
}

void export_extras(const Options& o, const AppConfig& cfg, const std::string& hash, const Eigen::MatrixXd& lat,
                   const Eigen::MatrixXd& lon, const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref) {
  if (!o.scatter.empty()) metrics::export_scatter(o.scatter, flat(ref), flat(pred), cfg.eval.scatter_bin_width, hash);
  if (!o.bias_grid.empty()) {
    const auto cells = metrics::bias_grid(flat(lat), flat(lon), flat(pred), flat(ref), cfg.eval.bias_cell_deg);
    metrics::export_bias_grid(o.bias_grid, cells, hash);
  }
}

void positions(const std::vector<data::FourChannelSample>& s, Eigen::MatrixXd& lat, Eigen::MatrixXd& lon) {
  lat.resize(static_cast<Index>(s.size()), 4);
  lon.resize(static_cast<Index>(s.size()), 4);
  for (size_t i = 0; i < s.size(); ++i) {
    for (size_t c = 0; c < 4; ++c) {
      lat(static_cast<Index>(i), static_cast<Index>(c)) = s[i].channels[c].sp_lat;
      lon(static_cast<Index>(i), static_cast<Index>(c)) = s[i].channels[c].sp_lon;
    }
  }
}

void cmd_evaluate(const Options& o, std::ostream& log) {
  const Evaluated e = run_model(o);
  const AppConfig& cfg = e.ckpt.config;
  const std::string hash = cfg.hash();
  log << "config_hash=" << hash << '\n';
  const metrics::MetricsReport rep = metrics::report(e.pred, e.ref, cfg.eval.bin_edges);
  metrics::write_report_json(o.out, rep, hash);
  if (!o.csv.empty()) metrics::write_report_csv(o.csv, rep, hash);
  Eigen::MatrixXd lat, lon;
  positions(e.samples, lat, lon);
  export_extras(o, cfg, hash, lat, lon, e.pred, e.ref);
  log << "evaluate: n=" << e.samples.size() << " rmse_avg=" << io::format_double(rep.average.rmse) << " -> " << o.out
      << '\n';
}

void cmd_predict(const Options& o, std::ostream& log) {
  const Evaluated e = run_model(o);
  const std::string hash = e.ckpt.config.hash();
  log << "config_hash=" << hash << '\n';
  std::string text = "# config_hash=" + hash + "\nid,timestamp";
  for (int c = 1; c <= 4; ++c) {
    const std::string s = std::to_string(c);
    text += ",lat_" + s + ",lon_" + s + ",ref_" + s + ",pred_" + s;
  }
  text += "\n";
  for (size_t i = 0; i < e.samples.size(); ++i) {
    const auto& smp = e.samples[i];
    text += smp.id + "," + std::to_string(smp.timestamp);
    for (size_t c = 0; c < 4; ++c) {
      text += "," + io::format_double(smp.channels[c].sp_lat) + "," + io::format_double(smp.channels[c].sp_lon) + "," +
              io::format_double(e.ref(static_cast<Index>(i), static_cast<Index>(c))) + "," +
              io::format_double(e.pred(static_cast<Index>(i), static_cast<Index>(c)));
    }
    text += "\n";
  }
  io::write_file(o.out, text);
  log << "predict: " << e.samples.size() << " samples -> " << o.out << '\n';
}

void cmd_report(const Options& o, std::ostream& log) {
  const AppConfig cfg = resolve_config(o.common);
  std::istringstream in(io::read_file(o.in));
  std::string line, hash;
  std::vector<std::array<double, 16>> rows;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("# config_hash=", 0) == 0) {
      hash = line.substr(14);
      continue;
    }
    if (line.empty() || line.rfind("id,", 0) == 0) continue;
    std::vector<std::string> f;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) f.push_back(cell);
    if (f.size() != 18) throw FormatError(o.in + ":" + std::to_string(line_no) + ": expected 18 columns");
    std::array<double, 16> v{};
    try {
      for (size_t k = 0; k < 16; ++k) v[k] = std::stod(f[k + 2]);
    } catch (const std::exception&) {
      throw FormatError(o.in + ":" + std::to_string(line_no) + ": bad number");
    }
    rows.push_back(v);
  }
  if (hash.empty()) throw FormatError(o.in + ": missing config_hash header");
  if (rows.empty()) throw FormatError(o.in + ": no predictions");
  const auto n = static_cast<Index>(rows.size());
  Eigen::MatrixXd lat(n, 4), lon(n, 4), ref(n, 4), pred(n, 4);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < 4; ++c) {
      const auto& r = rows[static_cast<size_t>(i)];
      lat(i, c) = r[static_cast<size_t>(4 * c)];
      lon(i, c) = r[static_cast<size_t>(4 * c + 1)];
      ref(i, c) = r[static_cast<size_t>(4 * c + 2)];
      pred(i, c) = r[static_cast<size_t>(4 * c + 3)];
    }
  }
  log << "config_hash=" << hash << '\n';
  const metrics::MetricsReport rep = metrics::report(pred, ref, cfg.eval.bin_edges);
  if (o.bins) {
    metrics::write_bins_csv(o.out, rep, cfg.eval.bin_edges, hash);
  } else {
    metrics::write_report_csv(o.out, rep, hash);
  }
  export_extras(o, cfg, hash, lat, lon, pred, ref);
  log << "report: n=" << n << " -> " << o.out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
  CLI::App app{"SWH retrieval from four-channel GNSS-R observations", "scawave"};
  app.require_subcommand(1);
  Options o;

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic samples or raw inputs");
  add_common(synth_cmd, o.common);
  synth_cmd->add_option("--out", o.out, "canonical sample file");
  synth_cmd->add_option("--raw-dir", o.raw_dir, "write l1.jsonl, era5.json and buoys.csv here instead");
  synth_cmd->add_option("--n", o.n, "override synth.n_samples");

  auto* pre = app.add_subcommand("preprocess", "quality control and channel alignment of L1 records");
  add_common(pre, o.common);
  pre->add_option("--in", o.in, "L1 JSON-lines file")->required();
  pre->add_option("--out", o.out, "aligned L1 JSON-lines file")->required();

  auto* era5 = app.add_subcommand("match-era5", "collocate aligned records with an ERA5 grid");
  add_common(era5, o.common);
  era5->add_option("--in", o.in, "aligned L1 file from preprocess")->required();
  era5->add_option("--grid", o.grid, "ERA5 grid JSON")->required();
  era5->add_option("--out", o.out, "canonical sample file")->required();

  auto* buoy = app.add_subcommand("match-buoy", "collocate aligned records with buoy observations");
  add_common(buoy, o.common);
  buoy->add_option("--in", o.in, "aligned L1 file from preprocess")->required();
  buoy->add_option("--buoys", o.buoys, "buoy CSV")->required();
  buoy->add_option("--out", o.out, "canonical sample file")->required();

  auto* tr = app.add_subcommand("train", "train a model on the train split, select on the val split");
  add_common(tr, o.common);
  tr->add_option("--data", o.data, "canonical sample file")->required();
  tr->add_option("--out", o.out, "checkpoint path")->required();
  tr->add_option("--history", o.history, "per-epoch CSV");
  tr->add_option("--strategy", o.strategy, "CI or CD (overrides model.strategy)");

  auto* ev = app.add_subcommand("evaluate", "metrics report of a checkpoint on one split");
  add_common(ev, o.common);
  ev->add_option("--ckpt", o.ckpt, "checkpoint")->required();
  ev->add_option("--data", o.data, "canonical sample file")->required();
  ev->add_option("--out", o.out, "report JSON")->required();
  ev->add_option("--csv", o.csv, "report CSV");
  ev->add_option("--split", o.split, "train, val, test or all")->capture_default_str();
  ev->add_option("--strategy", o.strategy, "expected strategy; mismatch is an error");
  ev->add_option("--scatter", o.scatter, "prefix for density-scatter exports");
  ev->add_option("--bias-grid", o.bias_grid, "bias map CSV");

  auto* pr = app.add_subcommand("predict", "write per-sample predictions");
  add_common(pr, o.common);
  pr->add_option("--ckpt", o.ckpt, "checkpoint")->required();
  pr->add_option("--data", o.data, "canonical sample file")->required();
  pr->add_option("--out", o.out, "predictions CSV")->required();
  pr->add_option("--split", o.split, "train, val, test or all")->capture_default_str();
  pr->add_option("--strategy", o.strategy, "expected strategy; mismatch is an error");

  auto* rp = app.add_subcommand("report", "metric tables and plot data from a predictions CSV");
  add_common(rp, o.common);
  rp->add_option("--in", o.in, "predictions CSV")->required();
  rp->add_option("--out", o.out, "report CSV")->required();
  rp->add_flag("--bins", o.bins, "one channel-averaged row per SWH bin");
  rp->add_option("--scatter", o.scatter, "prefix for density-scatter exports");
  rp->add_option("--bias-grid", o.bias_grid, "bias map CSV");

  std::vector<std::string> argv_store{"scawave"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, log);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth_cmd) cmd_synth(o, log);
    else if (*pre) cmd_preprocess(o, log);
    else if (*era5) cmd_match_era5(o, log);
    else if (*buoy) cmd_match_buoy(o, log);
    else if (*tr) cmd_train(o, log);
    else if (*ev) cmd_evaluate(o, log);
    else if (*pr) cmd_predict(o, log);
    else if (*rp) cmd_report(o, log);
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace scawave::cli
