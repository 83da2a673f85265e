#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>
#include <vector>

#include "w2fair/data.hpp"
#include "w2fair/distribution.hpp"
#include "w2fair/regularizer.hpp"
#include "w2fair/rng.hpp"

using namespace w2fair;

namespace {

GroupCdfPair make_pair(const std::vector<double>& g0,
                       const std::vector<double>& g1, int steps) {
  std::vector<double> all(g0);
  all.insert(all.end(), g1.begin(), g1.end());
  const OutputGrid grid = build_grid(all, steps);
  GroupCdfPair pair;
  pair.cdf0 = empirical_cdf(g0, grid);
  pair.cdf1 = empirical_cdf(g1, grid);
  pair.n0 = static_cast<long>(g0.size());
  pair.n1 = static_cast<long>(g1.size());
  return pair;
}

std::vector<double> clipped_normal(Rng& rng, int n, double mean, double sd) {
  std::vector<double> v(n);
  for (double& x : v) x = std::clamp(rng.normal(mean, sd), 0.0, 1.0);
  return v;
}

double cell_mass_of(const DiscreteCdf& cdf, double x) {
  const int c = cdf.grid.cell(x);
  const double left = c > 0 ? cdf.values[c - 1] : 0.0;
  return cdf.values[c] - left;
}

}  // namespace

TEST_CASE("pseudo_grad points from the own group toward the other") {
  Rng rng(3);
  // group 0 sits high, group 1 sits low
  const auto g0 = clipped_normal(rng, 120, 0.7, 0.05);
  const auto g1 = clipped_normal(rng, 120, 0.3, 0.05);
  const GroupCdfPair cdfs = make_pair(g0, g1, 100);

  // descending on a high group-0 output should lower it: positive derivative
  CHECK(pseudo_grad(0.7, 0, cdfs, 0.01).value > 0.0);
  // descending on a low group-1 output should raise it: negative derivative
  CHECK(pseudo_grad(0.3, 1, cdfs, 0.01).value < 0.0);
}

TEST_CASE("pseudo_grad vanishes between identical groups") {
  Rng rng(4);
  const auto g = clipped_normal(rng, 200, 0.5, 0.1);
  const GroupCdfPair cdfs = make_pair(g, g, 150);
  for (const double f : {0.35, 0.5, 0.65}) {
    for (const int group : {0, 1}) {
      // f and its transported twin differ by at most one grid cell
      const double bound =
          0.01 * (2.0 * cdfs.cdf0.grid.delta) /
          (static_cast<double>(g.size()) * (1.0 / (4.0 * g.size())));
      CHECK(std::abs(pseudo_grad(f, group, cdfs, 0.01).value) <= bound);
    }
  }
}

TEST_CASE("pseudo_grad output is finite even on degenerate cells") {
  // all mass in one cell; the 1/(4n) floor keeps the denominator alive
  const std::vector<double> g0 = {0.5, 0.5, 0.5};
  const std::vector<double> g1 = {0.5, 0.5, 0.5};
  const GroupCdfPair cdfs = make_pair(g0, g1, 10);
  const PseudoGrad g = pseudo_grad(0.5, 0, cdfs, 0.1);
  CHECK(std::isfinite(g.value));
  // outputs far outside the grid clamp instead of exploding
  CHECK(std::isfinite(pseudo_grad(42.0, 0, cdfs, 0.1).value));
  CHECK(std::isfinite(pseudo_grad(-42.0, 1, cdfs, 0.1).value));
}

TEST_CASE("pseudo_grad validates its inputs") {
  Rng rng(5);
  const auto g0 = clipped_normal(rng, 50, 0.4, 0.1);
  const auto g1 = clipped_normal(rng, 50, 0.6, 0.1);
  GroupCdfPair cdfs = make_pair(g0, g1, 40);

  CHECK_THROWS_AS(pseudo_grad(0.5, 2, cdfs, 0.1), std::domain_error);
  CHECK_THROWS_AS(pseudo_grad(0.5, -1, cdfs, 0.1), std::domain_error);
  CHECK_THROWS_AS(pseudo_grad(std::nan(""), 0, cdfs, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(pseudo_grad(0.5, 0, cdfs, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pseudo_grad(0.5, 0, cdfs, -0.1), std::invalid_argument);

  GroupCdfPair zero_n = cdfs;
  zero_n.n0 = 0;
  CHECK_THROWS_AS(pseudo_grad(0.5, 0, zero_n, 0.1), std::invalid_argument);

  GroupCdfPair mismatched = cdfs;
  mismatched.cdf1 = empirical_cdf(g1, build_grid(g1, 40));
  CHECK_THROWS_AS(pseudo_grad(0.5, 0, mismatched, 0.1), std::invalid_argument);
}

TEST_CASE("pseudo_grad tracks a finite difference of the W2 estimate") {
  // central difference of the sample W2^2 in one group-0 coordinate, against
  // the pseudo-derivative on a fine grid with tau_step = twice the cell mass
  // (one sample's two-sided quantile band)
  Rng rng(42);
  const int n = 100;
  std::vector<double> g0(n), g1(n);
  g0[0] = 0.35;
  for (int i = 1; i < n; ++i) {
    double x = rng.uniform01();
    while (std::abs(x - 0.35) <= 2e-3) x = rng.uniform01();
    g0[i] = x;
  }
  for (double& x : g1) x = rng.uniform(0.1, 0.9);

  const double h = 1e-3;
  const auto objective = [&](double f) {
    std::vector<double> probe(g0);
    probe[0] = f;
    return w2_distance(probe, g1, 10 * n);
  };
  const double fd = (objective(0.35 + h) - objective(0.35 - h)) / (2.0 * h);

  const GroupCdfPair cdfs = make_pair(g0, g1, 2000);
  const double mass = std::max(cell_mass_of(cdfs.cdf0, 0.35),
                               1.0 / (4.0 * static_cast<double>(n)));
  const double value = pseudo_grad(0.35, 0, cdfs, 2.0 * mass).value;

  CHECK(fd != 0.0);
  CHECK(std::abs(value - fd) <= 0.2 * std::abs(fd));
}

TEST_CASE("pseudo-gradient steps shrink the distance between two groups") {
  Rng rng(11);
  std::vector<double> g0 = clipped_normal(rng, 200, 0.3, 0.05);
  std::vector<double> g1 = clipped_normal(rng, 200, 0.7, 0.05);

  const int grid_steps = 100;   // optimization grid
  const int measure_steps = 2000;  // fine, fixed measurement grid
  const double tau_step = 1.0;
  // Step size chosen so 100 iterations stay in the contraction regime: large
  // enough to shrink the distance ~20x below the 10% bound, small enough that
  // the trajectory never reaches the grid-quantization floor where the
  // measured distance jitters instead of decreasing.
  const double lr = 0.1;
  const double initial = w2_distance(g0, g1, measure_steps);
  double prev = initial;
  int decreasing = 0;
  const int iterations = 100;
  for (int it = 0; it < iterations; ++it) {
    const GroupCdfPair cdfs = make_pair(g0, g1, grid_steps);
    std::vector<double> next0(g0), next1(g1);
    for (std::size_t i = 0; i < g0.size(); ++i)
      next0[i] -= lr * pseudo_grad(g0[i], 0, cdfs, tau_step).value;
    for (std::size_t i = 0; i < g1.size(); ++i)
      next1[i] -= lr * pseudo_grad(g1[i], 1, cdfs, tau_step).value;
    g0.swap(next0);
    g1.swap(next1);
    const double cur = w2_distance(g0, g1, measure_steps);
    if (cur < prev) ++decreasing;
    prev = cur;
  }
  CHECK(decreasing >= 95);
  CHECK(prev <= 0.10 * initial);
}

TEST_CASE("batch_pseudo_grads keeps order and zeroes unregularized classes") {
  Rng rng(6);
  const auto g0 = clipped_normal(rng, 60, 0.6, 0.1);
  const auto g1 = clipped_normal(rng, 60, 0.4, 0.1);
  std::map<int, GroupCdfPair> plans;
  plans.emplace(2, make_pair(g0, g1, 50));

  const std::vector<BatchElement> batch = {
      {0.6, 0, 1}, {0.6, 0, 2}, {0.4, 1, 2}, {0.2, 1, 3}};
  const std::vector<int> regularized = {2};
  const auto grads = batch_pseudo_grads(batch, regularized, plans, 0.02);

  REQUIRE(grads.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    CHECK(grads[i].cls == batch[i].cls);
  CHECK(grads[0].grad.value == 0.0);
  CHECK(grads[3].grad.value == 0.0);
  CHECK(grads[1].grad.value ==
        pseudo_grad(0.6, 0, plans.at(2), 0.02).value);
  CHECK(grads[2].grad.value ==
        pseudo_grad(0.4, 1, plans.at(2), 0.02).value);

  // a regularized class present in the batch but missing a plan is an error
  const std::vector<int> unplanned = {2, 3};
  CHECK_THROWS_AS(batch_pseudo_grads(batch, unplanned, plans, 0.02),
                  std::invalid_argument);
}

TEST_CASE("draw_reference samples without replacement outside the exclusions") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.num_features = 2;
  spec.per_class_group0 = 40;
  spec.per_class_group1 = 25;
  spec.seed = 9;
  const Dataset data = generate(spec);

  std::unordered_set<long> exclude;
  for (long idx : data.stratum(1, 0))
    if (exclude.size() < 10) exclude.insert(idx);

  Rng rng(21);
  const auto refs = draw_reference(data, 1, 0, 16, exclude, rng);
  CHECK(refs.size() == 16);
  std::unordered_set<long> seen;
  for (long idx : refs) {
    CHECK(!exclude.contains(idx));
    CHECK(data.examples[idx].label == 1);
    CHECK(data.examples[idx].group == 0);
    CHECK(seen.insert(idx).second);  // no duplicates
  }

  // pool smaller than m: returns the whole remainder
  Rng rng2(22);
  const auto all = draw_reference(data, 1, 0, 1000, exclude, rng2);
  CHECK(all.size() == 30);

  // deterministic in the rng state
  Rng a(33), b(33);
  CHECK(draw_reference(data, 2, 1, 8, {}, a) ==
        draw_reference(data, 2, 1, 8, {}, b));
}
