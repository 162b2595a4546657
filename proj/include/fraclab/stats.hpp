#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fraclab {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  size_t n = 0;
};

// Ordinary least squares y = slope*x + intercept. This is the one fitting
// kernel in the project; every log-log exponent estimate goes through it.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double pearson_r(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased, n-1
// Excess kurtosis (Fisher). 0 for a Gaussian sample in expectation.
double excess_kurtosis(std::span<const double> v);

struct Histogram {
  std::vector<double> edges;   // bins+1 edges
  std::vector<size_t> counts;  // bins
  double lo = 0.0;
  double hi = 0.0;
};

Histogram histogram(std::span<const double> v, size_t bins);

double median(std::vector<double> v);  // by value: sorts a copy

}  // namespace fraclab
