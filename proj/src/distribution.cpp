#include "w2fair/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace w2fair {

namespace {

void require_samples(std::span<const double> samples, const char* who) {
  if (samples.empty())
    throw std::invalid_argument(std::string(who) + ": samples are empty");
  for (double v : samples)
    if (!std::isfinite(v))
      throw std::invalid_argument(std::string(who) + ": non-finite sample");
}

void require_grid(const OutputGrid& grid, const char* who) {
  if (grid.steps < 2 || !(grid.delta > 0.0) || !std::isfinite(grid.lo) ||
      !std::isfinite(grid.delta))
    throw std::invalid_argument(std::string(who) + ": invalid grid");
}

void require_cdf(const DiscreteCdf& cdf, const char* who) {
  require_grid(cdf.grid, who);
  if (static_cast<int>(cdf.values.size()) != cdf.grid.steps || cdf.count < 1)
    throw std::invalid_argument(std::string(who) + ": malformed cdf");
}

}  // namespace

int OutputGrid::cell(double x) const {
  const int c = static_cast<int>(std::floor((x - lo) / delta));
  return std::clamp(c, 0, steps - 1);
}

OutputGrid build_grid(std::span<const double> samples, int steps) {
  require_samples(samples, "build_grid");
  if (steps < 2) throw std::invalid_argument("build_grid: steps must be >= 2");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  OutputGrid grid;
  grid.lo = *lo_it;
  grid.steps = steps;
  grid.delta = (*hi_it - *lo_it) / steps;
  if (!(grid.delta > 0.0)) grid.delta = kGridEpsilon;
  return grid;
}

DiscreteCdf empirical_cdf(std::span<const double> samples, const OutputGrid& grid) {
  require_samples(samples, "empirical_cdf");
  require_grid(grid, "empirical_cdf");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  DiscreteCdf cdf;
  cdf.grid = grid;
  cdf.count = static_cast<long>(sorted.size());
  cdf.values.resize(grid.steps);
  std::size_t i = 0;
  for (int j = 1; j <= grid.steps; ++j) {
    const double pt = grid.point(j);
    while (i < sorted.size() && sorted[i] <= pt) ++i;
    cdf.values[j - 1] = static_cast<double>(i) / static_cast<double>(cdf.count);
  }
  // The top point covers the sample maximum, so the last value is 1 exactly;
  // writing it removes float residue from the division.
  cdf.values.back() = 1.0;
  return cdf;
}

double cdf_value_at(const DiscreteCdf& cdf, double x) {
  require_cdf(cdf, "cdf_value_at");
  const int j = std::clamp(
      static_cast<int>(std::ceil((x - cdf.grid.lo) / cdf.grid.delta)), 1,
      cdf.grid.steps);
  return cdf.values[j - 1];
}

double inverse_cdf(const DiscreteCdf& cdf, double p) {
  require_cdf(cdf, "inverse_cdf");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::domain_error("inverse_cdf: p outside [0, 1]");
  const auto it = std::lower_bound(cdf.values.begin(), cdf.values.end(), p);
  const int j = static_cast<int>(it - cdf.values.begin()) + 1;
  return cdf.grid.point(std::min(j, cdf.grid.steps));
}

double correction(const DiscreteCdf& cdf_target, const DiscreteCdf& cdf_source,
                  double x) {
  const double clamped =
      std::clamp(x, cdf_source.grid.lo, cdf_source.grid.hi());
  return inverse_cdf(cdf_target, cdf_value_at(cdf_source, clamped));
}

double w2_distance(std::span<const double> samples0,
                   std::span<const double> samples1, int steps) {
  require_samples(samples0, "w2_distance");
  require_samples(samples1, "w2_distance");
  if (steps < 1) throw std::invalid_argument("w2_distance: steps must be >= 1");

  std::vector<double> a(samples0.begin(), samples0.end());
  std::vector<double> b(samples1.begin(), samples1.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  const auto quantile = [](const std::vector<double>& s, double tau) {
    const auto n = static_cast<double>(s.size());
    const auto r = static_cast<long>(std::ceil(tau * n));
    return s[static_cast<std::size_t>(std::clamp<long>(r - 1, 0,
                                                       s.size() - 1))];
  };

  double acc = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double tau = (t - 0.5) / steps;
    const double d = quantile(a, tau) - quantile(b, tau);
    acc += d * d;
  }
  return acc / steps;
}

}  // namespace w2fair
