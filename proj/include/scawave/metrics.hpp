// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scawave/error.hpp"

namespace scawave::metrics {

using Index = Eigen::Index;

namespace detail {

template <typename P, typename R>
void check_pair(const Eigen::DenseBase<P>& pred, const Eigen::DenseBase<R>& ref, const char* op) {
  if (pred.size() != ref.size()) {
    throw ContractError(std::string(op) + ": prediction and reference lengths differ (" +
                        std::to_string(pred.size()) + " vs " + std::to_string(ref.size()) + ")");
  }
  if (pred.size() == 0) throw ContractError(std::string(op) + ": empty input");
}

}  // namespace detail

/// sqrt(mean((ŷ - y)²))
template <typename P, typename R>
double rmse(const Eigen::DenseBase<P>& pred, const Eigen::DenseBase<R>& ref) {
  detail::check_pair(pred, ref, "rmse");
  return std::sqrt((pred.derived().array() - ref.derived().array()).square().mean());
}

/// mean(|ŷ - y|)
template <typename P, typename R>
double mae(const Eigen::DenseBase<P>& pred, const Eigen::DenseBase<R>& ref) {
  detail::check_pair(pred, ref, "mae");
  return (pred.derived().array() - ref.derived().array()).abs().mean();
}

/// mean(ŷ - y), signed.
template <typename P, typename R>
double bias(const Eigen::DenseBase<P>& pred, const Eigen::DenseBase<R>& ref) {
  detail::check_pair(pred, ref, "bias");
  return (pred.derived().array() - ref.derived().array()).mean();
}

/// 100 · mean(|(ŷ - y) / y|). Throws ContractError on a zero reference.
template <typename P, typename R>
double mape(const Eigen::DenseBase<P>& pred, const Eigen::DenseBase<R>& ref) {
  detail::check_pair(pred, ref, "mape");
  if ((ref.derived().array() == 0.0).any()) throw ContractError("mape: zero reference value");
  return 100.0 * ((pred.derived().array() - ref.derived().array()) / ref.derived().array()).abs().mean();
}

/// Pearson correlation. Empty when either vector is constant.
template <typename P, typename R>
std::optional<double> cc(const Eigen::DenseBase<P>& pred, const Eigen::DenseBase<R>& ref) {
  detail::check_pair(pred, ref, "cc");
  const Eigen::ArrayXd p = pred.derived().array().template cast<double>();
  const Eigen::ArrayXd y = ref.derived().array().template cast<double>();
  const Eigen::ArrayXd dp = p - p.mean();
  const Eigen::ArrayXd dy = y - y.mean();
  const double sp = dp.square().sum(), sy = dy.square().sum();
  if (sp == 0.0 || sy == 0.0) return std::nullopt;
  return (dp * dy).sum() / std::sqrt(sp * sy);
}

/// All five metrics of one (prediction, reference) set.
struct MetricValues {
  double rmse = 0, mae = 0, bias = 0;
  std::optional<double> mape;  ///< empty when every reference was excluded
  std::optional<double> cc;
  Index n = 0;
  Index mape_excluded = 0;  ///< pairs with reference below the MAPE floor
};

/// References below this are left out of MAPE in batch reports.
inline constexpr double kMapeFloor = 0.01;

/// Metrics of one channel. MAPE skips references below kMapeFloor.
MetricValues evaluate(const Eigen::Ref<const Eigen::VectorXd>& pred,
                      const Eigen::Ref<const Eigen::VectorXd>& ref);

/// Arithmetic mean of per-channel values. CC and MAPE are averaged over the
/// channels where they are defined; n is the total pair count.
MetricValues average(std::span<const MetricValues> channels);

struct BinRow {
  double lo = 0, hi = 0;
  std::array<std::optional<MetricValues>, 4> channels;  ///< empty cells omitted
  std::optional<MetricValues> average;  ///< over the channels present in the bin
};

struct MetricsReport {
  std::array<MetricValues, 4> channels;
  MetricValues average;
  std::vector<BinRow> bins;
};

inline const std::vector<double>& default_bin_edges() {
  static const std::vector<double> edges{0, 1, 2, 3, 4, 5, 6, 7, 8};
  return edges;
}

/// Bin index of `ref` for left-closed bins whose last bin is also closed on
/// the right. Empty when outside [edges.front(), edges.back()].
std::optional<size_t> bin_of(double ref, std::span<const double> edges);

/// pred, ref: [n×4]. Bins are assigned by the reference value.
MetricsReport report(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& ref,
                     std::span<const double> edges = default_bin_edges());

/// q-quantile (linear interpolation between order statistics) of the
/// per-sample population SD of the four reference values. refs: [n×4].
double channel_sd_percentile(const Eigen::MatrixXd& refs, double q);

struct LinearFit {
  double slope = 0, intercept = 0;
};

/// Least-squares fit pred ≈ slope·ref + intercept. Empty when ref is constant.
std::optional<LinearFit> least_squares(const Eigen::Ref<const Eigen::VectorXd>& ref,
                                       const Eigen::Ref<const Eigen::VectorXd>& pred);

struct HistogramCell {
  long ref_bin = 0, pred_bin = 0;  ///< floor(value / bin_width)
  Index count = 0;
};

/// Sparse 2D histogram of (ref, pred), cells sorted by (ref_bin, pred_bin).
std::vector<HistogramCell> histogram2d(const Eigen::Ref<const Eigen::VectorXd>& ref,
                                       const Eigen::Ref<const Eigen::VectorXd>& pred, double bin_width);

struct BiasCell {
  double lat_center = 0, lon_center = 0, bias = 0;
  Index n = 0;
};

/// Mean (pred - ref) per lat/lon cell; only cells with data, sorted by (lat, lon).
std::vector<BiasCell> bias_grid(const Eigen::Ref<const Eigen::VectorXd>& lat,
                                const Eigen::Ref<const Eigen::VectorXd>& lon,
                                const Eigen::Ref<const Eigen::VectorXd>& pred,
                                const Eigen::Ref<const Eigen::VectorXd>& ref, double cell_deg);

// ---- file exports; every file carries the config hash ----------------------

/// JSON document with per-channel, averaged and binned metrics.
void write_report_json(const std::string& path, const MetricsReport& report, const std::string& config_hash);
/// CSV: scope,channel,bin_lo,bin_hi,n,rmse,mae,bias,mape,cc (one row per cell).
void write_report_csv(const std::string& path, const MetricsReport& report, const std::string& config_hash);
/// CSV: bin_lo,bin_hi,n,rmse,mae,bias,mape,cc with one row per bin of
/// `edges` (channel-averaged). Bins without data keep n = 0 and empty metrics.
void write_bins_csv(const std::string& path, const MetricsReport& report, std::span<const double> edges,
                    const std::string& config_hash);
/// Writes <prefix>_points.csv, <prefix>_hist.csv and <prefix>_fit.json.
void export_scatter(const std::string& prefix, const Eigen::Ref<const Eigen::VectorXd>& ref,
                    const Eigen::Ref<const Eigen::VectorXd>& pred, double bin_width,
                    const std::string& config_hash);
/// CSV: lat_center,lon_center,bias,n.
void export_bias_grid(const std::string& path, const std::vector<BiasCell>& cells, const std::string& config_hash);

}  // namespace scawave::metrics
