#include "ductsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ductsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lengths(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty()) throw Error("metrics require at least one data point");
  if (actual.size() != predicted.size())
    throw Error("metrics require sequences of equal length (" +
                std::to_string(actual.size()) + " vs " + std::to_string(predicted.size()) + ")");
  for (double a : actual)
    if (!std::isfinite(a)) throw Error("actual values must be finite");
}

}  // namespace

double mse(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!std::isfinite(predicted[i])) return kInf;
    const double r = actual[i] - predicted[i];
    sum += r * r;
  }
  const double v = sum / static_cast<double>(actual.size());
  return std::isfinite(v) ? v : kInf;
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!std::isfinite(predicted[i])) return kInf;
    sum += std::fabs(actual[i] - predicted[i]);
  }
  const double v = sum / static_cast<double>(actual.size());
  return std::isfinite(v) ? v : kInf;
}

double nmae_percent(std::span<const double> actual, std::span<const double> predicted) {
  check_lengths(actual, predicted);
  const auto [lo, hi] = std::minmax_element(actual.begin(), actual.end());
  const double range = *hi - *lo;
  if (range <= 0.0) throw Error("NMAE is undefined when all actual values are equal");
  return mae(actual, predicted) / range * 100.0;
}

MetricReport make_report(std::span<const double> actual, std::span<const double> predicted) {
  MetricReport r;
  r.mse = mse(actual, predicted);
  r.mae = mae(actual, predicted);
  r.nmae_percent = nmae_percent(actual, predicted);
  r.n = actual.size();
  const auto [lo, hi] = std::minmax_element(actual.begin(), actual.end());
  r.y_range = *hi - *lo;
  return r;
}

}  // namespace ductsr
