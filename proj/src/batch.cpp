#include "moelab/batch.hpp"

#include <cmath>
#include <limits>

namespace moe {

GateParams GateParams::from(const MixingMeasure& g) {
  GateParams p;
  p.tau = g.tau();
  p.gate = g.gate();
  for (const Atom& a : g.atoms()) {
    p.beta0.push_back(a.beta0);
    p.beta1.push_back(a.beta1);
  }
  return p;
}

void GateBatch::compute(const GateParams& p, const Dataset& data, const simd::KernelTable& kern) {
  n = data.size();
  k = p.size();
  pre.resize(k * n);
  logits.resize(k * n);
  lse.resize(n);
  const double inv_tau = 1.0 / p.tau;
  const double* cols = data.dim() > 0 && n > 0 ? &data.column(0)[0] : nullptr;
  for (std::size_t j = 0; j < k; ++j) {
    double* s = pre.data() + j * n;
    double* z = logits.data() + j * n;
    kern.affine(cols, n, p.beta1[j], 0.0, s);
    if (p.gate.is_linear()) {
      for (std::size_t i = 0; i < n; ++i) z[i] = (s[i] + p.beta0[j]) * inv_tau;
    } else {
      const Activation& act = p.gate.activation();
      for (std::size_t i = 0; i < n; ++i) z[i] = (act.value(s[i]) + p.beta0[j]) * inv_tau;
    }
  }
  kern.logsumexp_cols(logits.data(), k, n, lse.data());
}

void BatchWorkspace::evaluate(const MixingMeasure& g, const Dataset& data) {
  gate_.compute(GateParams::from(g), data, *kern_);
  const std::size_t n = data.size();
  const std::size_t k = g.size();
  mean_.resize(n);
  log_joint_.resize(k * n);
  lse_joint_.resize(n);
  const double* cols = &data.column(0)[0];
  const double* y = data.y().data();
  for (std::size_t j = 0; j < k; ++j) {
    const Atom& a = g.atom(j);
    kern_->affine(cols, n, a.a, a.b, mean_.data());
    double* lj = log_joint_.data() + j * n;
    kern_->gaussian_logpdf(y, mean_.data(), n, a.nu, lj);
    const double* z = gate_.logits.data() + j * n;
    for (std::size_t i = 0; i < n; ++i) lj[i] += z[i] - gate_.lse[i];
  }
  kern_->logsumexp_cols(log_joint_.data(), k, n, lse_joint_.data());
}

double BatchWorkspace::mean_loglik() const {
  const std::size_t n = lse_joint_.size();
  for (double v : lse_joint_)
    if (v == -std::numeric_limits<double>::infinity()) return v;
  return kern_->sum(lse_joint_.data(), n) / static_cast<double>(n);
}

std::size_t BatchWorkspace::responsibilities(std::vector<double>& out) const {
  const std::size_t n = lse_joint_.size();
  const std::size_t k = n == 0 ? 0 : log_joint_.size() / n;
  out.resize(k * n);
  for (std::size_t j = 0; j < k; ++j)
    kern_->exp_shifted(log_joint_.data() + j * n, lse_joint_.data(), n, out.data() + j * n);
  std::size_t underflow = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(lse_joint_[i])) continue;
    ++underflow;
    for (std::size_t j = 0; j < k; ++j) out[j * n + i] = 1.0 / static_cast<double>(k);
  }
  return underflow;
}

}  // namespace moe
