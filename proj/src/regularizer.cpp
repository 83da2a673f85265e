#include "w2fair/regularizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace w2fair {

namespace {

bool same_grid(const OutputGrid& a, const OutputGrid& b) {
  return a.lo == b.lo && a.delta == b.delta && a.steps == b.steps;
}

// Mass of the grid cell holding x: H(point(c+1)) - H(point(c)) with the
// notional H at point(0) being zero.
double cell_mass(const DiscreteCdf& cdf, double x) {
  const int c = cdf.grid.cell(x);
  const double left = c > 0 ? cdf.values[c - 1] : 0.0;
  return cdf.values[c] - left;
}

}  // namespace

PseudoGrad pseudo_grad(double output, int group, const GroupCdfPair& cdfs,
                       double tau_step) {
  if (group != 0 && group != 1)
    throw std::domain_error("pseudo_grad: group must be 0 or 1");
  if (!same_grid(cdfs.cdf0.grid, cdfs.cdf1.grid))
    throw std::invalid_argument("pseudo_grad: cdfs do not share a grid");
  if (!std::isfinite(output))
    throw std::invalid_argument("pseudo_grad: non-finite output");
  if (!(tau_step > 0.0))
    throw std::invalid_argument("pseudo_grad: tau_step must be positive");

  const DiscreteCdf& own = group == 0 ? cdfs.cdf0 : cdfs.cdf1;
  const DiscreteCdf& other = group == 0 ? cdfs.cdf1 : cdfs.cdf0;
  const long n = group == 0 ? cdfs.n0 : cdfs.n1;
  if (n < 1)
    throw std::invalid_argument("pseudo_grad: stratum count must be >= 1");

  const double f = std::clamp(output, own.grid.lo, own.grid.hi());
  const double mass =
      std::max(cell_mass(own, f), 1.0 / (4.0 * static_cast<double>(own.count)));
  const double cor = correction(other, own, f);
  const double scale = tau_step / (static_cast<double>(n) * mass);

  PseudoGrad g;
  g.value = group == 0 ? scale * (f - cor) : -scale * (cor - f);
  return g;
}

std::vector<ClassGrad> batch_pseudo_grads(
    std::span<const BatchElement> outputs, std::span<const int> regularized,
    const std::map<int, GroupCdfPair>& plans, double tau_step) {
  std::vector<ClassGrad> grads;
  grads.reserve(outputs.size());
  for (const BatchElement& el : outputs) {
    ClassGrad cg;
    cg.cls = el.cls;
    const bool active = std::find(regularized.begin(), regularized.end(),
                                  el.cls) != regularized.end();
    if (active) {
      const auto it = plans.find(el.cls);
      if (it == plans.end())
        throw std::invalid_argument(
            "batch_pseudo_grads: regularized class " + std::to_string(el.cls) +
            " has no cdf plan");
      cg.grad = pseudo_grad(el.output, el.group, it->second, tau_step);
    }
    grads.push_back(cg);
  }
  return grads;
}

std::vector<long> draw_reference(const Dataset& dataset, int cls, int group,
                                 int m, const std::unordered_set<long>& exclude,
                                 Rng& rng) {
  if (m < 0) throw std::invalid_argument("draw_reference: m must be >= 0");
  const std::vector<long>& stratum = dataset.stratum(cls, group);
  std::vector<long> pool;
  pool.reserve(stratum.size());
  for (long idx : stratum)
    if (!exclude.contains(idx)) pool.push_back(idx);

  const int take = std::min<long>(m, static_cast<long>(pool.size()));
  // partial Fisher-Yates: the first `take` slots become the sample
  for (int i = 0; i < take; ++i) {
    const auto j = i + static_cast<long>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace w2fair
