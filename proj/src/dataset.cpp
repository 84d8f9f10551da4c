#include "moelab/dataset.hpp"

#include <cmath>
#include <string>

#include "moelab/errors.hpp"

namespace moe {

Dataset::Dataset(std::size_t d, std::vector<double> x_colmajor, std::vector<double> y)
    : d_(d), x_(std::move(x_colmajor)), y_(std::move(y)) {
  if (d_ == 0) throw ArgumentError("dataset dimension must be at least 1");
  if (x_.size() != d_ * y_.size())
    throw ArgumentError("dataset covariate block has " + std::to_string(x_.size()) + " entries, expected " +
                        std::to_string(d_ * y_.size()));
  for (double v : x_)
    if (!std::isfinite(v)) throw ArgumentError("dataset covariates must be finite");
  for (double v : y_)
    if (!std::isfinite(v)) throw ArgumentError("dataset responses must be finite");
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& xs, std::vector<double> y) {
  if (xs.size() != y.size()) throw ArgumentError("dataset needs one covariate row per response");
  if (xs.empty()) throw ArgumentError("dataset from_rows needs at least one row to infer the dimension");
  const std::size_t d = xs.front().size();
  const std::size_t n = xs.size();
  std::vector<double> cols(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    if (xs[i].size() != d) throw ArgumentError("dataset rows have inconsistent dimension");
    for (std::size_t u = 0; u < d; ++u) cols[u * n + i] = xs[i][u];
  }
  return Dataset(d, std::move(cols), std::move(y));
}

std::vector<double> Dataset::row(std::size_t i) const {
  std::vector<double> r(d_);
  for (std::size_t u = 0; u < d_; ++u) r[u] = x(i, u);
  return r;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  const std::size_t m = idx.size();
  std::vector<double> cols(m * d_);
  std::vector<double> ys(m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t u = 0; u < d_; ++u) cols[u * m + r] = x(idx[r], u);
    ys[r] = y_[idx[r]];
  }
  return Dataset(d_, std::move(cols), std::move(ys));
}

}  // namespace moe
