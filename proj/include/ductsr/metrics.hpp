#pragma once

#include <cstddef>
#include <span>

#include "ductsr/errors.hpp"

namespace ductsr {

/// Mean squared error. Non-finite predictions poison the result to +inf.
double mse(std::span<const double> actual, std::span<const double> predicted);

/// Mean absolute error; same conventions as mse.
double mae(std::span<const double> actual, std::span<const double> predicted);

/// Mean absolute error normalized by the range of the actual values, as a
/// percentage. Throws Error when the actual values have zero range.
double nmae_percent(std::span<const double> actual, std::span<const double> predicted);

struct MetricReport {
  double mse = 0.0;
  double mae = 0.0;
  double nmae_percent = 0.0;
  std::size_t n = 0;
  double y_range = 0.0;
};

MetricReport make_report(std::span<const double> actual, std::span<const double> predicted);

}  // namespace ductsr
