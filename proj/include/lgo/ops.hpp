// Numerically guarded semantics for logistic-gated operators and the
// protected arithmetic primitives they are combined with.
#pragma once

#include <algorithm>
#include <cmath>

namespace lgo {

inline constexpr double kSigmoidClip = 60.0;
inline constexpr double kSoftplusClip = 60.0;
inline constexpr double kThresholdMin = -3.0;
inline constexpr double kThresholdMax = 3.0;
inline constexpr double kProtectEps = 1e-12;

inline double sigmoid(double z) {
  return 1.0 / (1.0 + std::exp(-z));
}

/// Logistic of a clipped pre-activation.
inline double clipped_sigmoid(double z) {
  return sigmoid(std::clamp(z, -kSigmoidClip, kSigmoidClip));
}

/// softplus(t) = ln(1 + e^t) on t clipped to [-60, 60]; always > 0.
inline double softplus(double t) {
  t = std::clamp(t, -kSoftplusClip, kSoftplusClip);
  return std::log1p(std::exp(t));
}

/// d softplus / dt, zero outside the clip window.
inline double softplus_grad(double t) {
  if (t < -kSoftplusClip || t > kSoftplusClip) return 0.0;
  return sigmoid(t);
}

/// Inverse of softplus for a > 0.
inline double softplus_inverse(double a) {
  if (a > 30.0) return a + std::log1p(-std::exp(-a));
  return std::log(std::expm1(a));
}

inline double clip_threshold(double b) {
  return std::clamp(b, kThresholdMin, kThresholdMax);
}

/// Logistic gate value plus the quantities the gradients need.
struct GateEval {
  double s = 0.5;      // sigmoid value
  double u = 0.0;      // gated input
  double delta = 0.0;  // u - b
  bool clipped = false;
};

inline GateEval gate_eval(double u, double a, double b) {
  GateEval g;
  g.u = u;
  g.delta = u - b;
  const double z = a * g.delta;
  g.clipped = !(z >= -kSigmoidClip && z <= kSigmoidClip);
  g.s = clipped_sigmoid(z);
  return g;
}

/// s(1-s) with the flat-region convention for clipped arguments.
inline double gate_slope(const GateEval& g) {
  return g.clipped ? 0.0 : g.s * (1.0 - g.s);
}

inline double gate(double u, double a, double b) { return gate_eval(u, a, b).s; }

/// x * sigma(a (x - b)).
inline double lgo_soft(double x, double a, double b) { return x * gate(x, a, b); }

/// sigma(a (x - b)), in (0, 1).
inline double lgo_hard(double x, double a, double b) { return gate(x, a, b); }

inline double lgo_pair(double x, double y, double a, double b) {
  return (x * y) * gate(x - y, a, b);
}

inline double lgo_and2(double x, double y, double a, double b) {
  return (x * y) * gate(x, a, b) * gate(y, a, b);
}

inline double lgo_or2(double x, double y, double a, double b) {
  const double sx = gate(x, a, b);
  const double sy = gate(y, a, b);
  return (x + y) * (1.0 - (1.0 - sx) * (1.0 - sy));
}

inline double lgo_and3(double x, double y, double z, double a, double b) {
  return (x * y * z) * gate(x, a, b) * gate(y, a, b) * gate(z, a, b);
}

/// Expression-level gate f * sigma(a (f - b)); same formula as lgo_soft.
inline double gate_expr(double f, double a, double b) { return lgo_soft(f, a, b); }

enum class GateKind { soft, hard };

struct GateGradient {
  double d_a = 0.0;
  double d_b = 0.0;
};

/// Closed-form partials of a single-input gate with respect to (a, b).
inline GateGradient gate_gradients(GateKind kind, double u, double a, double b) {
  const GateEval g = gate_eval(u, a, b);
  const double slope = gate_slope(g);
  if (kind == GateKind::hard) return {g.delta * slope, -a * slope};
  return {u * g.delta * slope, -a * u * slope};
}

// Protected arithmetic.

inline double protect_denominator(double y) {
  const double mag = std::max(std::abs(y), kProtectEps);
  return std::signbit(y) ? -mag : mag;
}

inline double protected_div(double x, double y) { return x / protect_denominator(y); }
inline double protected_inv(double x) { return 1.0 / protect_denominator(x); }
inline double protected_log(double x) { return std::log(std::max(x, kProtectEps)); }
inline double protected_sqrt(double x) { return std::sqrt(std::abs(x)); }

/// Integer power; negative exponents go through the protected reciprocal.
inline double int_pow(double x, int k) {
  if (k >= 0) return std::pow(x, k);
  return protected_inv(std::pow(x, -k));
}

}  // namespace lgo
