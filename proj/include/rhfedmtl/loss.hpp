#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rhfedmtl {

/// Smoothed hinge loss on the signed margin z = y * w'x.
///
///   phi(z) = 0                    if z >= 1
///          = 1 - z - gamma / 2    if z <= 1 - gamma
///          = (1 - z)^2 / (2 gamma) otherwise
///
/// The loss is (1/gamma)-smooth. Duals are label-folded, so the conjugate is
/// only ever evaluated as phi*(-a) for a in [0, 1].
template <typename Scalar = double>
struct SmoothedHinge {
  Scalar gamma = Scalar(1);

  explicit SmoothedHinge(Scalar g = Scalar(1)) : gamma(g) {
    if (!(gamma > Scalar(0)) || !std::isfinite(gamma))
      throw std::invalid_argument("SmoothedHinge: gamma must be positive and finite");
  }

  Scalar value(Scalar z) const {
    if (!std::isfinite(z)) throw std::domain_error("SmoothedHinge: non-finite margin");
    if (z >= Scalar(1)) return Scalar(0);
    if (z <= Scalar(1) - gamma) return Scalar(1) - z - gamma / Scalar(2);
    const Scalar u = Scalar(1) - z;
    return u * u / (Scalar(2) * gamma);
  }

  /// d phi / dz.
  Scalar derivative(Scalar z) const {
    if (!std::isfinite(z)) throw std::domain_error("SmoothedHinge: non-finite margin");
    if (z >= Scalar(1)) return Scalar(0);
    if (z <= Scalar(1) - gamma) return Scalar(-1);
    return (z - Scalar(1)) / gamma;
  }

  /// phi*(-a) = -a + gamma a^2 / 2 on [0, 1], +inf elsewhere.
  Scalar conjugate(Scalar a) const {
    if (!(a >= Scalar(0) && a <= Scalar(1))) return std::numeric_limits<Scalar>::infinity();
    return -a + gamma * a * a / Scalar(2);
  }

  /// Maximizer over [0,1] of -phi*(-a), i.e. the unconstrained minimizer of
  /// the conjugate clipped to its domain.
  Scalar conjugate_argmin() const { return gamma >= Scalar(1) ? Scalar(1) / gamma : Scalar(1); }
};

template <typename Scalar>
Scalar loss(Scalar z, Scalar gamma) {
  return SmoothedHinge<Scalar>(gamma).value(z);
}

template <typename Scalar>
Scalar loss_conjugate(Scalar a, Scalar gamma) {
  return SmoothedHinge<Scalar>(gamma).conjugate(a);
}

}  // namespace rhfedmtl
