#pragma once

// Band symbol of the 3D lattice Laplacian on the unit torus: values,
// gradient, critical points, and distances to the four threshold energies.

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "errors.hpp"

namespace fermires {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

// Reduce a coordinate to the fundamental domain [0, 1).
inline double wrap_unit(double x) {
  double y = x - std::floor(x);
  if (y >= 1.0) y -= 1.0;  // guards x = -eps, where floor rounding yields 1.0
  if (y < 0.0) y += 1.0;
  return y;
}

// Signed distance on the circle R/Z.
inline double circle_distance(double x, double y) {
  double d = std::fabs(wrap_unit(x) - wrap_unit(y));
  return std::min(d, 1.0 - d);
}

inline double torus_distance(const Vec3& x, const Vec3& y) {
  double s = 0.0;
  for (int j = 0; j < 3; ++j) {
    double d = circle_distance(x[j], y[j]);
    s += d * d;
  }
  return std::sqrt(s);
}

// A torus point with its trig data cached once at construction: every
// downstream formula consumes a, b, c so repeated evaluation is
// deterministic and cheap. c_j = b_j / a_j is left absent when |a_j| is
// below 1e-12; formulas that need it are only applied where a_j != 0
// and the absent state prevents silent infinities.
struct TorusPoint {
  Vec3 xi{};                                  // coordinates in [0,1)
  Vec3 a{};                                   // cos(2 pi xi_j)
  Vec3 b{};                                   // sin(2 pi xi_j)
  std::array<std::optional<double>, 3> c{};   // tan(2 pi xi_j) where defined

  static TorusPoint at(const Vec3& raw) {
    TorusPoint p;
    for (int j = 0; j < 3; ++j) {
      p.xi[j] = wrap_unit(raw[j]);
      p.a[j] = std::cos(kTwoPi * p.xi[j]);
      p.b[j] = std::sin(kTwoPi * p.xi[j]);
      if (std::fabs(p.a[j]) >= 1e-12) p.c[j] = p.b[j] / p.a[j];
    }
    return p;
  }
  static TorusPoint at(double x1, double x2, double x3) {
    return at(Vec3{x1, x2, x3});
  }
};

// Spectral energy lambda in [0,12] together with the shifted variable
// E = 3 - lambda/2, the level at which sum_j a_j cuts the surface.
struct EnergyLevel {
  double lambda{};
  double E{};

  static EnergyLevel from_lambda(double lambda) {
    return EnergyLevel{lambda, 3.0 - lambda / 2.0};
  }
  static EnergyLevel from_E(double E) { return EnergyLevel{6.0 - 2.0 * E, E}; }
};

// Band symbol value; range [0, 12].
inline double h0(const TorusPoint& p) {
  double s = 0.0;
  for (int j = 0; j < 3; ++j) {
    double t = std::sin(kPi * p.xi[j]);
    s += t * t;
  }
  return 4.0 * s;
}

// Gradient (4 pi sin 2 pi xi_j)_j = 4 pi b.
inline Vec3 grad_h0(const TorusPoint& p) {
  return Vec3{4.0 * kPi * p.b[0], 4.0 * kPi * p.b[1], 4.0 * kPi * p.b[2]};
}

enum class ThresholdKind { Elliptic, Hyperbolic };

inline const char* to_string(ThresholdKind k) {
  return k == ThresholdKind::Elliptic ? "elliptic" : "hyperbolic";
}

// A critical point of the symbol: all coordinates in {0, 1/2}; the energy
// is 4k where k counts the half coordinates. Extrema (0 and 12) are
// elliptic, saddles (4 and 8) hyperbolic.
struct ThresholdPoint {
  TorusPoint point;
  double energy{};
  ThresholdKind kind{};
};

// All eight critical points, in lexicographic coordinate order.
inline std::vector<ThresholdPoint> critical_points() {
  std::vector<ThresholdPoint> out;
  out.reserve(8);
  for (int i = 0; i < 8; ++i) {
    Vec3 xi{(i >> 2 & 1) * 0.5, (i >> 1 & 1) * 0.5, (i & 1) * 0.5};
    ThresholdPoint tp;
    tp.point = TorusPoint::at(xi);
    int halves = (i >> 2 & 1) + (i >> 1 & 1) + (i & 1);
    tp.energy = 4.0 * halves;
    tp.kind = (halves == 0 || halves == 3) ? ThresholdKind::Elliptic
                                           : ThresholdKind::Hyperbolic;
    out.push_back(tp);
  }
  return out;
}

// min_k |z - 4k| over the four thresholds k = 0..3.
inline double threshold_distance(std::complex<double> z) {
  double best = std::abs(z);
  for (int k = 1; k <= 3; ++k) best = std::min(best, std::abs(z - 4.0 * k));
  return best;
}

} // namespace fermires
