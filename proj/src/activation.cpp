#include "moelab/activation.hpp"

#include <cmath>
#include <numbers>

#include "moelab/errors.hpp"

namespace moe {

namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double ipow(double z, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= z;
  return r;
}

}  // namespace

Activation Activation::power(int p) {
  if (p < 1) throw ArgumentError("power activation needs a positive integer exponent, got " + std::to_string(p));
  return Activation(Name::Power, p);
}

double Activation::value(double z) const {
  switch (name_) {
    case Name::Sigmoid: return logistic(z);
    case Name::Gelu: return z * std_normal_cdf(z);
    case Name::Power: return ipow(z, p_);
    case Name::Identity: return z;
  }
  return 0.0;
}

double Activation::d1(double z) const {
  switch (name_) {
    case Name::Sigmoid: {
      const double s = logistic(z);
      return s * (1.0 - s);
    }
    case Name::Gelu: return std_normal_cdf(z) + z * std_normal_pdf(z);
    case Name::Power: return p_ * ipow(z, p_ - 1);
    case Name::Identity: return 1.0;
  }
  return 0.0;
}

double Activation::d2(double z) const {
  switch (name_) {
    case Name::Sigmoid: {
      const double s = logistic(z);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Name::Gelu: return std_normal_pdf(z) * (2.0 - z * z);
    case Name::Power: return p_ < 2 ? 0.0 : p_ * (p_ - 1) * ipow(z, p_ - 2);
    case Name::Identity: return 0.0;
  }
  return 0.0;
}

std::string Activation::label() const {
  switch (name_) {
    case Name::Sigmoid: return "sigmoid";
    case Name::Gelu: return "gelu";
    case Name::Power: return "power" + std::to_string(p_);
    case Name::Identity: return "identity";
  }
  return "?";
}

}  // namespace moe
