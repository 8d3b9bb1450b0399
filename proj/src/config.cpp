// SPDX-License-Identifier: Apache-2.0
#include "scawave/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>

#include "scawave/error.hpp"
#include "scawave/text_io.hpp"

namespace scawave {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view value, const char* what) {
  throw ConfigError("invalid " + std::string(what) + " '" + std::string(value) + "'");
}

template <typename T>
T parse_number(std::string_view v, const char* what, int base = 10) {
  T out{};
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(v.data(), v.data() + v.size(), out);
  } else {
    r = std::from_chars(v.data(), v.data() + v.size(), out, base);
  }
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(v, what);
  return out;
}

// Value codecs, one per stored type.
std::string show(double v) { return io::format_double(v); }
std::string show(Index v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(Strategy v) { return to_string(v); }
std::string show(HeadInput v) { return to_string(v); }
std::string show(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

void read(std::string_view v, double& out) { out = parse_number<double>(v, "number"); }
void read(std::string_view v, Index& out) { out = parse_number<Index>(v, "integer"); }
void read(std::string_view v, std::uint64_t& out) { out = parse_number<std::uint64_t>(v, "unsigned integer"); }
void read(std::string_view v, Strategy& out) { out = parse_strategy(v); }
void read(std::string_view v, HeadInput& out) { out = parse_head_input(v); }
void read(std::string_view v, bool& out) {
  if (v == "true" || v == "1") out = true;
  else if (v == "false" || v == "0") out = false;
  else bad_value(v, "boolean");
}
void read(std::string_view v, std::uint32_t& out) {
  if (v.starts_with("0x") || v.starts_with("0X")) out = parse_number<std::uint32_t>(v.substr(2), "bit mask", 16);
  else out = parse_number<std::uint32_t>(v, "bit mask");
}

struct Field {
  ConfigKey key;
  std::function<std::string(const AppConfig&)> get;
  std::function<void(AppConfig&, std::string_view)> set;
};

template <typename T>
Field field(std::string key, std::string help, T& (*ref)(AppConfig&)) {
  return Field{{std::move(key), std::move(help)},
               [ref](const AppConfig& c) { return show(ref(const_cast<AppConfig&>(c))); },
               [ref](AppConfig& c, std::string_view v) { read(v, ref(c)); }};
}

Field time_field(std::string key, std::string help, data::Timestamp& (*ref)(AppConfig&)) {
  return Field{{std::move(key), std::move(help)},
               [ref](const AppConfig& c) { return data::format_iso8601(ref(const_cast<AppConfig&>(c))); },
               [ref](AppConfig& c, std::string_view v) {
                 try {
                   ref(c) = data::parse_iso8601(v);
                 } catch (const FormatError&) {
                   bad_value(v, "ISO-8601 time");
                 }
               }};
}

std::vector<Field> make_fields() {
  std::vector<Field> f;
  // model
  f.push_back(field<Index>("model.ddm_width", "DDM Doppler bins (W)", [](AppConfig& c) -> Index& { return c.model.ddm_width; }));
  f.push_back(field<Index>("model.ddm_height", "DDM delay bins (H)", [](AppConfig& c) -> Index& { return c.model.ddm_height; }));
  f.push_back(field<Index>("model.patch_size", "patch side P", [](AppConfig& c) -> Index& { return c.model.patch_size; }));
  f.push_back(field<Index>("model.embed_dim", "patch embedding width D_e", [](AppConfig& c) -> Index& { return c.model.embed_dim; }));
  f.push_back(field<Index>("model.n_layers", "encoder layers", [](AppConfig& c) -> Index& { return c.model.n_layers; }));
  f.push_back(field<Index>("model.d_ff", "feed-forward hidden width", [](AppConfig& c) -> Index& { return c.model.d_ff; }));
  f.push_back(field<double>("model.dropout", "dropout probability", [](AppConfig& c) -> double& { return c.model.dropout; }));
  f.push_back(field<double>("model.ln_eps", "layer-norm epsilon", [](AppConfig& c) -> double& { return c.model.ln_eps; }));
  f.push_back(field<Strategy>("model.strategy", "CI or CD", [](AppConfig& c) -> Strategy& { return c.model.strategy; }));
  f.push_back(field<bool>("model.standard_residual", "use LN(x + sublayer) instead of x + LN(sublayer)",
                          [](AppConfig& c) -> bool& { return c.model.standard_residual; }));
  f.push_back(field<HeadInput>("model.head_input", "full or global_only", [](AppConfig& c) -> HeadInput& { return c.model.head_input; }));
  f.push_back(field<Index>("model.head_hidden_layers", "hidden layers in the regression head",
                           [](AppConfig& c) -> Index& { return c.model.head_hidden_layers; }));
  f.push_back(field<Index>("model.head_min_width", "narrowest head layer", [](AppConfig& c) -> Index& { return c.model.head_min_width; }));
  f.push_back(field<Index>("model.head_max_width", "widest head layer, 0 = no cap", [](AppConfig& c) -> Index& { return c.model.head_max_width; }));
  f.push_back(field<Index>("model.ap_up_factor", "channel-gate expansion factor", [](AppConfig& c) -> Index& { return c.model.ap_up_factor; }));
  f.push_back(field<bool>("model.use_wind", "append wind speed to the auxiliary inputs", [](AppConfig& c) -> bool& { return c.model.use_wind; }));
  f.push_back(field<std::uint64_t>("model.seed", "weight initialization seed", [](AppConfig& c) -> std::uint64_t& { return c.model.seed; }));
  // train
  f.push_back(field<Index>("train.batch_size", "mini-batch size", [](AppConfig& c) -> Index& { return c.train.batch_size; }));
  f.push_back(field<Index>("train.max_epochs", "epoch limit", [](AppConfig& c) -> Index& { return c.train.max_epochs; }));
  f.push_back(field<Index>("train.patience", "early-stopping patience in epochs", [](AppConfig& c) -> Index& { return c.train.patience; }));
  f.push_back(field<double>("train.lr", "AdamW learning rate", [](AppConfig& c) -> double& { return c.train.lr; }));
  f.push_back(field<double>("train.weight_decay", "AdamW decoupled weight decay", [](AppConfig& c) -> double& { return c.train.weight_decay; }));
  f.push_back(field<double>("train.delta", "Huber transition", [](AppConfig& c) -> double& { return c.train.delta; }));
  f.push_back(field<double>("train.adam_beta1", "first-moment decay", [](AppConfig& c) -> double& { return c.train.adam_beta1; }));
  f.push_back(field<double>("train.adam_beta2", "second-moment decay", [](AppConfig& c) -> double& { return c.train.adam_beta2; }));
  f.push_back(field<double>("train.adam_eps", "AdamW epsilon", [](AppConfig& c) -> double& { return c.train.adam_eps; }));
  f.push_back(field<std::uint64_t>("train.seed", "shuffle and dropout seed", [](AppConfig& c) -> std::uint64_t& { return c.train.seed; }));
  // qc
  f.push_back(field<double>("qc.min_rcg", "reject RCG below this", [](AppConfig& c) -> double& { return c.qc.min_rcg; }));
  f.push_back(field<double>("qc.max_abs_roll", "reject |roll| above this (deg)", [](AppConfig& c) -> double& { return c.qc.max_abs_roll; }));
  f.push_back(field<double>("qc.max_abs_yaw", "reject |yaw| above this (deg)", [](AppConfig& c) -> double& { return c.qc.max_abs_yaw; }));
  f.push_back(field<double>("qc.max_abs_pitch", "reject |pitch| above this (deg)", [](AppConfig& c) -> double& { return c.qc.max_abs_pitch; }));
  f.push_back(field<double>("qc.min_land_distance_km", "reject closer to land than this",
                            [](AppConfig& c) -> double& { return c.qc.min_land_distance_km; }));
  f.push_back(field<std::uint32_t>("qc.flag_mask", "reject when quality_flags & mask != 0",
                                   [](AppConfig& c) -> std::uint32_t& { return c.qc.flag_mask; }));
  // matching and filtering
  f.push_back(field<double>("match.buoy_max_distance_km", "buoy spatial window",
                            [](AppConfig& c) -> double& { return c.buoy.max_distance_km; }));
  f.push_back(field<Index>("match.buoy_max_dt_s", "buoy temporal window (s)", [](AppConfig& c) -> Index& { return c.buoy.max_dt_s; }));
  f.push_back(field<double>("match.swh_cap", "drop samples with any reference above this (m)",
                            [](AppConfig& c) -> double& { return c.swh_cap; }));
  // split
  const char* parts[3] = {"train", "val", "test"};
  static data::Timestamp& (*starts[3])(AppConfig&) = {[](AppConfig& c) -> data::Timestamp& { return c.split.ranges[0].start; },
                                                      [](AppConfig& c) -> data::Timestamp& { return c.split.ranges[1].start; },
                                                      [](AppConfig& c) -> data::Timestamp& { return c.split.ranges[2].start; }};
  static data::Timestamp& (*ends[3])(AppConfig&) = {[](AppConfig& c) -> data::Timestamp& { return c.split.ranges[0].end; },
                                                    [](AppConfig& c) -> data::Timestamp& { return c.split.ranges[1].end; },
                                                    [](AppConfig& c) -> data::Timestamp& { return c.split.ranges[2].end; }};
  static Index& (*maxes[3])(AppConfig&) = {[](AppConfig& c) -> Index& { return c.split.max_counts[0]; },
                                           [](AppConfig& c) -> Index& { return c.split.max_counts[1]; },
                                           [](AppConfig& c) -> Index& { return c.split.max_counts[2]; }};
  for (int i = 0; i < 3; ++i) {
    const std::string p = std::string("split.") + parts[i];
    f.push_back(time_field(p + "_start", std::string(parts[i]) + " range start (inclusive, UTC)", starts[i]));
    f.push_back(time_field(p + "_end", std::string(parts[i]) + " range end (exclusive, UTC)", ends[i]));
    f.push_back(field<Index>(p + "_max", std::string(parts[i]) + " subsample size, -1 = all", maxes[i]));
  }
  f.push_back(field<std::uint64_t>("split.seed", "subsampling seed", [](AppConfig& c) -> std::uint64_t& { return c.split.seed; }));
  // synth
  f.push_back(field<Index>("synth.n_samples", "samples (or raw timestamps) to generate",
                           [](AppConfig& c) -> Index& { return c.synth.n_samples; }));
  f.push_back(field<double>("synth.noise_sd", "noise level", [](AppConfig& c) -> double& { return c.synth.noise_sd; }));
  f.push_back(field<double>("synth.swh_lo", "lowest reference SWH (m)", [](AppConfig& c) -> double& { return c.synth.swh_lo; }));
  f.push_back(field<double>("synth.swh_hi", "highest reference SWH (m)", [](AppConfig& c) -> double& { return c.synth.swh_hi; }));
  f.push_back(field<double>("synth.channel_corr", "similarity of the four channels' SWH, 0..1",
                            [](AppConfig& c) -> double& { return c.synth.channel_corr; }));
  f.push_back(field<bool>("synth.planted_signal", "observables encode SWH", [](AppConfig& c) -> bool& { return c.synth.planted_signal; }));
  f.push_back(time_field("synth.start", "first synthetic timestamp", [](AppConfig& c) -> data::Timestamp& { return c.synth.start; }));
  f.push_back(time_field("synth.end", "synthetic timestamps end (exclusive)", [](AppConfig& c) -> data::Timestamp& { return c.synth.end; }));
  f.push_back(field<std::uint64_t>("synth.seed", "generator seed", [](AppConfig& c) -> std::uint64_t& { return c.synth.seed; }));
  // eval
  f.push_back(Field{{"eval.bin_edges", "comma-separated reference-SWH bin edges"},
                    [](const AppConfig& c) {
                      std::string s;
                      for (double e : c.eval.bin_edges) s += (s.empty() ? "" : ",") + io::format_double(e);
                      return s;
                    },
                    [](AppConfig& c, std::string_view v) {
                      std::vector<double> edges;
                      size_t pos = 0;
                      while (pos <= v.size()) {
                        const size_t comma = std::min(v.find(',', pos), v.size());
                        edges.push_back(parse_number<double>(trim(v.substr(pos, comma - pos)), "bin edge"));
                        pos = comma + 1;
                      }
                      c.eval.bin_edges = std::move(edges);
                    }});
  f.push_back(field<double>("eval.scatter_bin_width", "density histogram cell (m)",
                            [](AppConfig& c) -> double& { return c.eval.scatter_bin_width; }));
  f.push_back(field<double>("eval.bias_cell_deg", "bias map cell (deg)", [](AppConfig& c) -> double& { return c.eval.bias_cell_deg; }));
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = make_fields();
  return f;
}

const Field& lookup(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.key.key == key) return f;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const Field& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void AppConfig::set(std::string_view key, std::string_view value) {
  const Field& f = lookup(key);
  try {
    f.set(*this, trim(value));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
  // DDM geometry and the wind flag are owned by the model section.
  qc.ddm_width = synth.ddm_width = model.ddm_width;
  qc.ddm_height = synth.ddm_height = model.ddm_height;
  synth.use_wind = model.use_wind;
}

std::string AppConfig::get(std::string_view key) const { return lookup(key).get(*this); }

void AppConfig::apply_text(std::string_view text, const std::string& origin) {
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string AppConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += f.key.key + " = " + f.get(*this) + "\n";
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string AppConfig::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_text())));
  return buf;
}

void AppConfig::validate() const {
  model.validate();
  train.validate();
  split.validate();
  synth.validate();
  if (synth.ddm_width != model.ddm_width || synth.ddm_height != model.ddm_height || synth.use_wind != model.use_wind) {
    throw ConfigError("synth geometry and wind flag must match the model");
  }
  if (qc.ddm_width != model.ddm_width || qc.ddm_height != model.ddm_height) {
    throw ConfigError("QC geometry must match the model DDM geometry");
  }
  if (!(swh_cap > 0.0)) throw ConfigError("match.swh_cap must be positive");
  if (!(buoy.max_distance_km >= 0.0) || buoy.max_dt_s < 0) throw ConfigError("buoy match windows must be non-negative");
  if (eval.bin_edges.size() < 2) throw ConfigError("eval.bin_edges needs at least two edges");
  for (size_t i = 1; i < eval.bin_edges.size(); ++i) {
    if (!(eval.bin_edges[i] > eval.bin_edges[i - 1])) throw ConfigError("eval.bin_edges must be strictly increasing");
  }
  if (!(eval.scatter_bin_width > 0.0)) throw ConfigError("eval.scatter_bin_width must be positive");
  if (!(eval.bias_cell_deg > 0.0)) throw ConfigError("eval.bias_cell_deg must be positive");
}

AppConfig load_config(const std::string& path) {
  AppConfig c;
  c.apply_text(io::read_file(path), path);
  return c;
}

}  // namespace scawave
