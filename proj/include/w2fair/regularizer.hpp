#pragma once

#include <map>
#include <span>
#include <unordered_set>
#include <vector>

#include "w2fair/data.hpp"
#include "w2fair/distribution.hpp"
#include "w2fair/rng.hpp"

namespace w2fair {

// Group-conditional output CDFs for one class on a shared grid, plus the
// full training-set stratum sizes n0, n1 that scale the pseudo-derivative.
struct GroupCdfPair {
  DiscreteCdf cdf0;
  DiscreteCdf cdf1;
  long n0 = 0;
  long n1 = 0;
};

struct PseudoGrad {
  double value = 0.0;
};

// Pseudo-derivative of the squared 2-Wasserstein distance between the two
// group-conditional output distributions with respect to one scalar output:
//   group 0:  tau_step * (f - cor1(f)) / (n0 * mass of f's grid cell in cdf0)
//   group 1: -tau_step * (cor0(f) - f) / (n1 * mass of f's grid cell in cdf1)
// where cor_s is the quantile-matched transport onto the other group. The
// cell mass is floored at 1/(4 * cdf count); the output is clamped onto the
// grid. The result is always finite.
PseudoGrad pseudo_grad(double output, int group, const GroupCdfPair& cdfs,
                       double tau_step);

struct BatchElement {
  double output = 0.0;  // scalar output at the element's true-class coordinate
  int group = 0;
  int cls = 0;  // true class, 1-based
};

struct ClassGrad {
  int cls = 0;
  PseudoGrad grad;
};

// Applies pseudo_grad to every element whose class is regularized; all other
// elements get exactly zero. A regularized class that appears in the batch
// but has no plan is a configuration error.
std::vector<ClassGrad> batch_pseudo_grads(
    std::span<const BatchElement> outputs, std::span<const int> regularized,
    const std::map<int, GroupCdfPair>& plans, double tau_step);

// Uniform draw without replacement of up to m example indices from the
// (cls, group) stratum, skipping `exclude`. Returns fewer than m only when
// the eligible pool is smaller; an empty stratum yields an empty list (the
// caller is expected to skip the class and warn).
std::vector<long> draw_reference(const Dataset& dataset, int cls, int group,
                                 int m, const std::unordered_set<long>& exclude,
                                 Rng& rng);

}  // namespace w2fair
