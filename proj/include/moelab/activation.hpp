#pragma once

#include <string>

namespace moe {

/// Scalar activation used by the activated gate, with closed-form first and
/// second derivatives.
class Activation {
 public:
  enum class Name { Sigmoid, Gelu, Power, Identity };

  static Activation sigmoid() { return Activation(Name::Sigmoid, 0); }
  static Activation gelu() { return Activation(Name::Gelu, 0); }
  static Activation power(int p);
  static Activation identity() { return Activation(Name::Identity, 0); }

  Name name() const { return name_; }
  /// Exponent for Power, 0 otherwise.
  int exponent() const { return p_; }

  double value(double z) const;
  double d1(double z) const;
  double d2(double z) const;

  std::string label() const;

  friend bool operator==(const Activation&, const Activation&) = default;

 private:
  Activation(Name name, int p) : name_(name), p_(p) {}

  Name name_;
  int p_;
};

}  // namespace moe
