#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace moe {

/// Paired covariates and scalar responses. Covariates are stored column-major
/// (one contiguous column per coordinate) so batched kernels can stream them.
class Dataset {
 public:
  Dataset() = default;
  /// `x_colmajor` has n*d entries, column u occupying [u*n, (u+1)*n).
  Dataset(std::size_t d, std::vector<double> x_colmajor, std::vector<double> y);
  static Dataset from_rows(const std::vector<std::vector<double>>& xs, std::vector<double> y);

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return d_; }
  bool empty() const { return y_.empty(); }

  double x(std::size_t i, std::size_t u) const { return x_[u * size() + i]; }
  std::span<const double> column(std::size_t u) const { return {x_.data() + u * size(), size()}; }
  std::span<const double> y() const { return y_; }
  std::vector<double> row(std::size_t i) const;

  /// Copies the rows selected by `idx` (repeats allowed).
  Dataset subset(std::span<const std::size_t> idx) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t d_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
};

}  // namespace moe
