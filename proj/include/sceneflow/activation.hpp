#pragma once

#include <cmath>
#include <cstdint>

namespace sceneflow {

enum class Activation : std::uint8_t { ReLU = 0, SinC = 1, Gaussian = 2 };

/// SinC(0) = 1 exactly; near zero a short series keeps full precision.
inline double sinc_value(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

inline double sinc_deriv(double x) {
  if (std::abs(x) < 1e-3) {
    const double x2 = x * x;
    return x * (-1.0 / 3.0 + x2 / 30.0);
  }
  return (x * std::cos(x) - std::sin(x)) / (x * x);
}

inline double act_value(Activation a, double sigma, double x) {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::SinC: return sinc_value(x);
    case Activation::Gaussian: return std::exp(-x * x / (2.0 * sigma * sigma));
  }
  return 0.0;
}

/// Derivative w.r.t. the pre-activation. ReLU takes subgradient 0 at the kink.
inline double act_deriv(Activation a, double sigma, double x) {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::SinC: return sinc_deriv(x);
    case Activation::Gaussian:
      return -x / (sigma * sigma) * std::exp(-x * x / (2.0 * sigma * sigma));
  }
  return 0.0;
}

}  // namespace sceneflow
