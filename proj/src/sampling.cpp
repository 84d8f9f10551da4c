#include "moelab/sampling.hpp"

#include <cmath>

#include "moelab/errors.hpp"
#include "moelab/rng.hpp"

namespace moe {

Dataset sample_dataset(const MixingMeasure& g, const SampleConfig& cfg) {
  if (cfg.n == 0) throw ArgumentError("sample size must be at least 1");
  const std::size_t n = cfg.n;
  const std::size_t d = g.dim();
  Philox rng(cfg.seed, cfg.stream);
  std::vector<double> xs(n * d);
  std::vector<double> ys(n);
  Vec x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t u = 0; u < d; ++u) {
      x[u] = rng.normal();
      xs[u * n + i] = x[u];
    }
    const Vec w = gate_weights(g, x);
    const Atom& a = g.atom(rng.categorical(w));
    double mean = a.b;
    for (std::size_t u = 0; u < d; ++u) mean += a.a[u] * x[u];
    ys[i] = rng.normal(mean, std::sqrt(a.nu));
  }
  return Dataset(d, std::move(xs), std::move(ys));
}

}  // namespace moe
