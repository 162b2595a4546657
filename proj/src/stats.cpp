#include "fraclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fraclab {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("linear_fit: size mismatch");
  }
  const size_t n = x.size();
  if (n < 2) {
    throw std::invalid_argument("linear_fit: need at least 2 points");
  }
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) {
    throw std::invalid_argument("linear_fit: degenerate x variance");
  }
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy == 0.0) {
    fit.r_squared = 1.0;  // y constant and perfectly explained by slope 0
  } else {
    double ss_res = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * x[i]);
      ss_res += r * r;
    }
    fit.r_squared = 1.0 - ss_res / syy;
  }
  return fit;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("pearson_r: need two equal-length series");
  }
  const size_t n = x.size();
  double mx = mean(x), my = mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::invalid_argument("pearson_r: degenerate variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

double mean(std::span<const double> v) {
  if (v.empty()) {
    throw std::invalid_argument("mean: empty");
  }
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) {
    throw std::invalid_argument("variance: need >= 2 samples");
  }
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return s / static_cast<double>(v.size() - 1);
}

double excess_kurtosis(std::span<const double> v) {
  if (v.size() < 4) {
    throw std::invalid_argument("excess_kurtosis: need >= 4 samples");
  }
  const double m = mean(v);
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(v.size());
  m2 /= n;
  m4 /= n;
  if (m2 == 0.0) {
    return 0.0;
  }
  return m4 / (m2 * m2) - 3.0;
}

Histogram histogram(std::span<const double> v, size_t bins) {
  if (v.empty() || bins == 0) {
    throw std::invalid_argument("histogram: empty input or zero bins");
  }
  Histogram h;
  h.lo = *std::min_element(v.begin(), v.end());
  h.hi = *std::max_element(v.begin(), v.end());
  double span = h.hi - h.lo;
  if (span == 0.0) {
    span = 1.0;  // all-identical values fall into the first bin
  }
  h.edges.resize(bins + 1);
  for (size_t i = 0; i <= bins; ++i) {
    h.edges[i] = h.lo + span * static_cast<double>(i) / static_cast<double>(bins);
  }
  h.counts.assign(bins, 0);
  for (double x : v) {
    size_t b = static_cast<size_t>((x - h.lo) / span * static_cast<double>(bins));
    if (b >= bins) {
      b = bins - 1;
    }
    h.counts[b]++;
  }
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) {
    throw std::invalid_argument("median: empty");
  }
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) {
    return v[n / 2];
  }
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace fraclab
