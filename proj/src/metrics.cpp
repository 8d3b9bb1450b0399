// SPDX-License-Identifier: Apache-2.0
#include "scawave/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "scawave/text_io.hpp"

namespace scawave::metrics {

namespace {

using io::format_double;

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

nlohmann::ordered_json to_json(const MetricValues& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["rmse"] = m.rmse;
  j["mae"] = m.mae;
  j["bias"] = m.bias;
  j["mape_percent"] = m.mape ? nlohmann::ordered_json(*m.mape) : nlohmann::ordered_json(nullptr);
  j["mape_excluded"] = m.mape_excluded;
  j["cc"] = m.cc ? nlohmann::ordered_json(*m.cc) : nlohmann::ordered_json(nullptr);
  return j;
}

std::string csv_row(const std::string& scope, const std::string& channel, const std::string& lo,
                    const std::string& hi, const MetricValues& m) {
  std::ostringstream row;
  row << scope << ',' << channel << ',' << lo << ',' << hi << ',' << m.n << ',' << format_double(m.rmse)
      << ',' << format_double(m.mae) << ',' << format_double(m.bias) << ',' << opt(m.mape) << ','
      << opt(m.cc) << '\n';
  return row.str();
}

}  // namespace

MetricValues evaluate(const Eigen::Ref<const Eigen::VectorXd>& pred,
                      const Eigen::Ref<const Eigen::VectorXd>& ref) {
  MetricValues m;
  m.n = pred.size();
  m.rmse = rmse(pred, ref);
  m.mae = mae(pred, ref);
  m.bias = bias(pred, ref);
  m.cc = cc(pred, ref);
  std::vector<double> p, y;
  for (Index i = 0; i < ref.size(); ++i) {
    if (std::abs(ref[i]) < kMapeFloor) {
      ++m.mape_excluded;
    } else {
      p.push_back(pred[i]);
      y.push_back(ref[i]);
    }
  }
  if (!y.empty()) {
    m.mape = mape(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size())),
                  Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Index>(y.size())));
  }
  return m;
}

MetricValues average(std::span<const MetricValues> channels) {
  if (channels.empty()) throw ContractError("average: no channels");
  MetricValues avg;
  double mape_sum = 0, cc_sum = 0;
  int mape_count = 0, cc_count = 0;
  for (const MetricValues& m : channels) {
    avg.n += m.n;
    avg.mape_excluded += m.mape_excluded;
    avg.rmse += m.rmse;
    avg.mae += m.mae;
    avg.bias += m.bias;
    if (m.mape) {
      mape_sum += *m.mape;
      ++mape_count;
    }
    if (m.cc) {
      cc_sum += *m.cc;
      ++cc_count;
    }
  }
  const double k = static_cast<double>(channels.size());
  avg.rmse /= k;
  avg.mae /= k;
  avg.bias /= k;
  if (mape_count > 0) avg.mape = mape_sum / mape_count;
  if (cc_count > 0) avg.cc = cc_sum / cc_count;
  return avg;
}

std::optional<size_t> bin_of(double ref, std::span<const double> edges) {
  if (edges.size() < 2 || !(ref >= edges.front()) || !(ref <= edges.back())) return std::nullopt;
  if (ref == edges.back()) return edges.size() - 2;
  const auto it = std::upper_bound(edges.begin(), edges.end(), ref);
  return static_cast<size_t>(it - edges.begin()) - 1;
}

MetricsReport report(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref, std::span<const double> edges) {
  if (pred.cols() != 4 || ref.cols() != 4 || pred.rows() != ref.rows()) {
    throw ContractError("report: expected matching [n×4] predictions and references");
  }
  if (pred.rows() == 0) throw ContractError("report: no samples");
  for (size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ConfigError("report: bin edges must increase");
  }
  MetricsReport out;
  for (Index c = 0; c < 4; ++c) out.channels[static_cast<size_t>(c)] = evaluate(pred.col(c), ref.col(c));
  out.average = average(out.channels);

  if (edges.size() < 2) return out;
  const size_t nbins = edges.size() - 1;
  std::vector<std::array<std::vector<double>, 4>> bp(nbins), br(nbins);
  for (Index r = 0; r < ref.rows(); ++r)
    for (Index c = 0; c < 4; ++c) {
      if (const auto b = bin_of(ref(r, c), edges)) {
        bp[*b][static_cast<size_t>(c)].push_back(pred(r, c));
        br[*b][static_cast<size_t>(c)].push_back(ref(r, c));
      }
    }
  for (size_t b = 0; b < nbins; ++b) {
    BinRow row;
    row.lo = edges[b];
    row.hi = edges[b + 1];
    std::vector<MetricValues> present;
    for (size_t c = 0; c < 4; ++c) {
      const auto& p = bp[b][c];
      if (p.empty()) continue;
      const auto& y = br[b][c];
      row.channels[c] = evaluate(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size())),
                                 Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Index>(y.size())));
      present.push_back(*row.channels[c]);
    }
    if (!present.empty()) {
      row.average = average(present);
      out.bins.push_back(std::move(row));
    }
  }
  return out;
}

double channel_sd_percentile(const Eigen::MatrixXd& refs, double q) {
  if (refs.cols() != 4 || refs.rows() == 0) throw ContractError("channel_sd_percentile: expected [n×4] references");
  if (!(q >= 0.0 && q <= 1.0)) throw ContractError("channel_sd_percentile: q must lie in [0, 1]");
  std::vector<double> sd(static_cast<size_t>(refs.rows()));
  for (Index r = 0; r < refs.rows(); ++r) {
    const double mu = refs.row(r).mean();
    sd[static_cast<size_t>(r)] = std::sqrt((refs.row(r).array() - mu).square().mean());
  }
  std::sort(sd.begin(), sd.end());
  const double h = q * static_cast<double>(sd.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sd.size() - 1);
  return sd[lo] + (h - static_cast<double>(lo)) * (sd[hi] - sd[lo]);
}

std::optional<LinearFit> least_squares(const Eigen::Ref<const Eigen::VectorXd>& ref,
                                       const Eigen::Ref<const Eigen::VectorXd>& pred) {
  detail::check_pair(ref, pred, "least_squares");
  const double mx = ref.mean(), my = pred.mean();
  const double sxx = (ref.array() - mx).square().sum();
  if (sxx == 0.0) return std::nullopt;
  const double sxy = ((ref.array() - mx) * (pred.array() - my)).sum();
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

std::vector<HistogramCell> histogram2d(const Eigen::Ref<const Eigen::VectorXd>& ref,
                                       const Eigen::Ref<const Eigen::VectorXd>& pred, double bin_width) {
  detail::check_pair(ref, pred, "histogram2d");
  if (!(bin_width > 0.0)) throw ConfigError("histogram2d: bin width must be positive");
  std::map<std::pair<long, long>, Index> counts;
  for (Index i = 0; i < ref.size(); ++i) {
    ++counts[{static_cast<long>(std::floor(ref[i] / bin_width)), static_cast<long>(std::floor(pred[i] / bin_width))}];
  }
  std::vector<HistogramCell> cells;
  for (const auto& [key, n] : counts) cells.push_back({key.first, key.second, n});
  return cells;
}

std::vector<BiasCell> bias_grid(const Eigen::Ref<const Eigen::VectorXd>& lat,
                                const Eigen::Ref<const Eigen::VectorXd>& lon,
                                const Eigen::Ref<const Eigen::VectorXd>& pred,
                                const Eigen::Ref<const Eigen::VectorXd>& ref, double cell_deg) {
  if (!(cell_deg > 0.0)) throw ConfigError("bias_grid: cell size must be positive");
  if (lat.size() != lon.size() || lat.size() != pred.size() || lat.size() != ref.size()) {
    throw ContractError("bias_grid: input lengths differ");
  }
  std::map<std::pair<long, long>, std::pair<double, Index>> acc;
  for (Index i = 0; i < lat.size(); ++i) {
    auto& cell = acc[{static_cast<long>(std::floor(lat[i] / cell_deg)), static_cast<long>(std::floor(lon[i] / cell_deg))}];
    cell.first += pred[i] - ref[i];
    ++cell.second;
  }
  std::vector<BiasCell> cells;
  for (const auto& [key, v] : acc) {
    cells.push_back({(static_cast<double>(key.first) + 0.5) * cell_deg,
                     (static_cast<double>(key.second) + 0.5) * cell_deg,
                     v.first / static_cast<double>(v.second), v.second});
  }
  return cells;
}

void write_report_json(const std::string& path, const MetricsReport& report, const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  for (size_t c = 0; c < 4; ++c) j["channels"].push_back(to_json(report.channels[c]));
  j["average"] = to_json(report.average);
  j["bins"] = nlohmann::ordered_json::array();
  for (const BinRow& row : report.bins) {
    nlohmann::ordered_json b;
    b["lo"] = row.lo;
    b["hi"] = row.hi;
    for (size_t c = 0; c < 4; ++c) {
      b["channels"].push_back(row.channels[c] ? to_json(*row.channels[c]) : nlohmann::ordered_json(nullptr));
    }
    b["average"] = to_json(*row.average);
    j["bins"].push_back(b);
  }
  io::write_file(path, j.dump(2) + "\n");
}

void write_report_csv(const std::string& path, const MetricsReport& report, const std::string& config_hash) {
  std::string text = "# config_hash=" + config_hash + "\n";
  text += "scope,channel,bin_lo,bin_hi,n,rmse,mae,bias,mape,cc\n";
  for (size_t c = 0; c < 4; ++c) text += csv_row("overall", std::to_string(c + 1), "", "", report.channels[c]);
  text += csv_row("overall", "avg", "", "", report.average);
  for (const BinRow& row : report.bins) {
    const std::string lo = format_double(row.lo), hi = format_double(row.hi);
    for (size_t c = 0; c < 4; ++c) {
      if (row.channels[c]) text += csv_row("bin", std::to_string(c + 1), lo, hi, *row.channels[c]);
    }
    text += csv_row("bin", "avg", lo, hi, *row.average);
  }
  io::write_file(path, text);
}

void write_bins_csv(const std::string& path, const MetricsReport& report, std::span<const double> edges,
                    const std::string& config_hash) {
  std::string text = "# config_hash=" + config_hash + "\n";
  text += "bin_lo,bin_hi,n,rmse,mae,bias,mape,cc\n";
  for (size_t b = 0; b + 1 < edges.size(); ++b) {
    const std::string lo = format_double(edges[b]), hi = format_double(edges[b + 1]);
    const auto row = std::find_if(report.bins.begin(), report.bins.end(),
                                  [&](const BinRow& r) { return r.lo == edges[b] && r.hi == edges[b + 1]; });
    if (row == report.bins.end() || !row->average) {
      text += lo + "," + hi + ",0,,,,,\n";
      continue;
    }
    const std::string full = csv_row("", "", lo, hi, *row->average);
    text += full.substr(2);  // drop the empty scope and channel columns
  }
  io::write_file(path, text);
}

void export_scatter(const std::string& prefix, const Eigen::Ref<const Eigen::VectorXd>& ref,
                    const Eigen::Ref<const Eigen::VectorXd>& pred, double bin_width,
                    const std::string& config_hash) {
  const std::string header = "# config_hash=" + config_hash + "\n";
  std::string points = header + "ref,pred\n";
  for (Index i = 0; i < ref.size(); ++i) points += format_double(ref[i]) + "," + format_double(pred[i]) + "\n";
  io::write_file(prefix + "_points.csv", points);

  std::string hist = header + "ref_lo,pred_lo,count\n";
  for (const HistogramCell& cell : histogram2d(ref, pred, bin_width)) {
    hist += format_double(static_cast<double>(cell.ref_bin) * bin_width) + "," +
            format_double(static_cast<double>(cell.pred_bin) * bin_width) + "," + std::to_string(cell.count) + "\n";
  }
  io::write_file(prefix + "_hist.csv", hist);

  nlohmann::ordered_json fit;
  fit["config_hash"] = config_hash;
  fit["n"] = ref.size();
  fit["bin_width"] = bin_width;
  if (const auto f = least_squares(ref, pred)) {
    fit["slope"] = f->slope;
    fit["intercept"] = f->intercept;
  } else {
    fit["slope"] = nullptr;
    fit["intercept"] = nullptr;
  }
  io::write_file(prefix + "_fit.json", fit.dump(2) + "\n");
}

void export_bias_grid(const std::string& path, const std::vector<BiasCell>& cells, const std::string& config_hash) {
  std::string text = "# config_hash=" + config_hash + "\nlat_center,lon_center,bias,n\n";
  for (const BiasCell& c : cells) {
    text += format_double(c.lat_center) + "," + format_double(c.lon_center) + "," + format_double(c.bias) + "," +
            std::to_string(c.n) + "\n";
  }
  io::write_file(path, text);
}

}  // namespace scawave::metrics
