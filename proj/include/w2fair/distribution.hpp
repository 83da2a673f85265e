#pragma once

#include <span>
#include <vector>

namespace w2fair {

// Grid step used when every sample coincides; keeps the grid non-degenerate.
inline constexpr double kGridEpsilon = 1e-6;

// Uniform grid over an observed output range. Grid point j is
// lo + j*delta for j = 1..steps; the top point covers the sample maximum.
struct OutputGrid {
  double lo = 0.0;
  double delta = 0.0;
  int steps = 0;

  double point(int j) const { return lo + delta * j; }
  double hi() const { return point(steps); }

  // Index c of the half-open cell [point(c), point(c+1)) containing x,
  // clamped to [0, steps-1]; point(0) is lo, the top point lands in the
  // last cell.
  int cell(double x) const;
};

OutputGrid build_grid(std::span<const double> samples, int steps);

// Distribution function sampled at the grid points:
// values[j-1] = share of the samples <= point(j). Non-decreasing, ends at 1.
struct DiscreteCdf {
  OutputGrid grid;
  std::vector<double> values;
  long count = 0;
};

DiscreteCdf empirical_cdf(std::span<const double> samples, const OutputGrid& grid);

// Step evaluation at an arbitrary x: value at the smallest grid point >= x,
// clamped to the grid (x past the top reads 1, x at or below lo reads the
// first value).
double cdf_value_at(const DiscreteCdf& cdf, double x);

// Smallest grid point whose value reaches p. p outside [0, 1] is a domain
// error.
double inverse_cdf(const DiscreteCdf& cdf, double p);

// Quantile-matched transport of x from the source distribution onto the
// target: inverse_cdf(target, source value at x). x outside the grid is
// clamped.
double correction(const DiscreteCdf& cdf_target, const DiscreteCdf& cdf_source,
                  double x);

// Squared 2-Wasserstein distance between two empirical distributions:
// mean of (q0(t) - q1(t))^2 over quantile levels t = (i - 0.5)/steps, with
// q the left-continuous empirical sample quantile.
double w2_distance(std::span<const double> samples0,
                   std::span<const double> samples1, int steps);

}  // namespace w2fair
