#pragma once

// Level-surface geometry of the band symbol: local graph charts, closed-form
// Gaussian curvature and normals, chart derivatives to third order, the
// curvature-degenerate locus with its classification flags, and the
// tangent-cotangent identities that hold on that locus.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "torus_symbol.hpp"

namespace fermires {

// ---------------------------------------------------------------------------
// Small dense types
// ---------------------------------------------------------------------------

// Symmetric 2x2 matrix (m11 m12; m12 m22).
struct Mat2 {
  double m11{}, m12{}, m22{};

  double det() const { return m11 * m22 - m12 * m12; }
  double frobenius() const {
    return std::sqrt(m11 * m11 + 2.0 * m12 * m12 + m22 * m22);
  }
  Vec2 apply(const Vec2& v) const {
    return Vec2{m11 * v[0] + m12 * v[1], m12 * v[0] + m22 * v[1]};
  }
};

// Eigen-decomposition of a symmetric 2x2 matrix with the library-wide
// conventions: `plus` is the eigenvalue of SMALLER absolute value (so the
// most degenerate direction always comes first), and each eigenvector's
// first component above 1e-14 in absolute value is made positive.
struct Eig2 {
  double lambda_plus{}, lambda_minus{};
  Vec2 u_plus{}, u_minus{};
};

inline Vec2 normalize_sign_convention(Vec2 v) {
  double n = std::sqrt(v[0] * v[0] + v[1] * v[1]);
  v[0] /= n;
  v[1] /= n;
  double lead = (std::fabs(v[0]) > 1e-14) ? v[0] : v[1];
  if (lead < 0.0) {
    v[0] = -v[0];
    v[1] = -v[1];
  }
  return v;
}

inline Eig2 eigen_sym2(const Mat2& B) {
  double tr = B.m11 + B.m22;
  double diff = B.m11 - B.m22;
  double disc = std::sqrt(diff * diff + 4.0 * B.m12 * B.m12);
  double lo = 0.5 * (tr - disc), hi = 0.5 * (tr + disc);
  double lp = (std::fabs(lo) <= std::fabs(hi)) ? lo : hi;
  double lm = (std::fabs(lo) <= std::fabs(hi)) ? hi : lo;

  auto vec_for = [&](double lam) -> Vec2 {
    // Rows of (B - lam I) are orthogonal to the eigenvector; pick the more
    // robust of the two candidate representations.
    Vec2 c1{B.m12, lam - B.m11};
    Vec2 c2{lam - B.m22, B.m12};
    double n1 = c1[0] * c1[0] + c1[1] * c1[1];
    double n2 = c2[0] * c2[0] + c2[1] * c2[1];
    Vec2 v = (n1 >= n2) ? c1 : c2;
    if (n1 < 1e-300 && n2 < 1e-300) v = Vec2{1.0, 0.0};  // B ~ lam I
    return normalize_sign_convention(v);
  };

  Eig2 e;
  e.lambda_plus = lp;
  e.lambda_minus = lm;
  if (disc < 1e-300) {
    e.u_plus = Vec2{1.0, 0.0};
    e.u_minus = Vec2{0.0, 1.0};
  } else {
    e.u_plus = vec_for(lp);
    e.u_minus = vec_for(lm);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Graph charts
// ---------------------------------------------------------------------------

// Solve the level equation a_1 + a_2 + a_3 = E for the coordinate on `axis`
// given the other two coordinates (`xi_free`, in increasing axis order).
// `branch` = +1/-1 selects the sign of sin(2 pi xi_axis).
inline double solve_graph(const Vec2& xi_free, EnergyLevel energy, int axis,
                          int branch) {
  double a_free = std::cos(kTwoPi * xi_free[0]) + std::cos(kTwoPi * xi_free[1]);
  double a_solved = energy.E - a_free;
  if (std::fabs(a_solved) >= 1.0 - 1e-12) {
    if (std::fabs(a_solved) <= 1.0 + 1e-12)
      throw DegenerateBranch("graph solve: solved cosine at +-1, chart invalid");
    throw OutOfRange("graph solve: free coordinates not over the surface");
  }
  (void)axis;  // the solved value depends only on E and the free cosines
  double xi = std::acos(a_solved) / kTwoPi;  // in (0, 1/2); sin branch +
  if (branch < 0) xi = wrap_unit(1.0 - xi);
  return xi;
}

// A local graph chart of the level surface: the coordinate on `solved_axis`
// is expressed as a function of the two remaining ones near `base`.
struct FermiPatch {
  EnergyLevel energy{};
  int solved_axis{};  // 0, 1, or 2
  int branch{};       // sign of b on the solved axis
  TorusPoint base{};
  double radius{};    // validity radius in the free coordinates

  std::array<int, 2> free_axes() const {
    switch (solved_axis) {
      case 0: return {1, 2};
      case 1: return {0, 2};
      default: return {0, 1};
    }
  }
  Vec2 base_free() const {
    auto fa = free_axes();
    return Vec2{base.xi[fa[0]], base.xi[fa[1]]};
  }
};

// Chart axis selection used across the library: the axis maximizing |b_j|
// (best implicit-function conditioning), ties broken by the smallest index.
inline int best_chart_axis(const TorusPoint& p) {
  int axis = 0;
  for (int j = 1; j < 3; ++j)
    if (std::fabs(p.b[j]) > std::fabs(p.b[axis])) axis = j;
  return axis;
}

// Lift free coordinates through the chart onto the surface. Throws
// OutsidePatch beyond the validity radius unless `clamp_check` is false.
inline TorusPoint lift(const FermiPatch& patch, const Vec2& xi_free,
                       bool check_radius = true) {
  if (check_radius) {
    Vec2 c = patch.base_free();
    double d1 = circle_distance(xi_free[0], c[0]);
    double d2 = circle_distance(xi_free[1], c[1]);
    if (std::sqrt(d1 * d1 + d2 * d2) > patch.radius * (1.0 + 1e-12))
      throw OutsidePatch("chart evaluation outside the patch radius");
  }
  double solved =
      solve_graph(xi_free, patch.energy, patch.solved_axis, patch.branch);
  Vec3 xi{};
  auto fa = patch.free_axes();
  xi[fa[0]] = xi_free[0];
  xi[fa[1]] = xi_free[1];
  xi[patch.solved_axis] = solved;
  return TorusPoint::at(xi);
}

// Build the canonical patch at a surface point: axis = argmax |b_j|, branch
// from the sign of b there, radius = largest r <= 0.1 (geometric backoff)
// such that 64 boundary samples all solve and keep |b_solved| above half its
// base value.
inline FermiPatch make_patch(const TorusPoint& base, EnergyLevel energy) {
  // Written NaN-robustly: a base with any non-finite coordinate must throw.
  if (!(std::fabs(h0(base) - energy.lambda) <= 1e-10))
    throw PreconditionViolated("patch base point is not on the level surface");
  FermiPatch patch;
  patch.energy = energy;
  patch.solved_axis = best_chart_axis(base);
  double bs = base.b[patch.solved_axis];
  if (std::fabs(bs) <= 1e-8)
    throw PreconditionViolated("patch base point is critical: no chart axis");
  patch.branch = bs > 0.0 ? +1 : -1;
  patch.base = base;

  Vec2 c{base.xi[patch.free_axes()[0]], base.xi[patch.free_axes()[1]]};
  double r = 0.1;
  for (int attempt = 0; attempt < 60; ++attempt) {
    bool ok = true;
    for (int k = 0; k < 64 && ok; ++k) {
      double th = kTwoPi * k / 64.0;
      Vec2 q{c[0] + r * std::cos(th), c[1] + r * std::sin(th)};
      try {
        double solved = solve_graph(q, energy, patch.solved_axis, patch.branch);
        double b_here = std::sin(kTwoPi * solved);
        if (std::fabs(b_here) <= 0.5 * std::fabs(bs)) ok = false;
      } catch (const Error&) {
        ok = false;
      }
    }
    if (ok) {
      patch.radius = r;
      return patch;
    }
    r *= 0.8;
    if (r < 1e-4)
      throw PreconditionViolated("no valid chart radius at this base point");
  }
  throw PreconditionViolated("no valid chart radius at this base point");
}

// Convenience: patch centered over explicit free coordinates.
inline FermiPatch make_patch_over(const Vec2& xi_free, EnergyLevel energy,
                                  int axis, int branch) {
  double solved = solve_graph(xi_free, energy, axis, branch);
  Vec3 xi{};
  FermiPatch tmp;
  tmp.solved_axis = axis;
  auto fa = tmp.free_axes();
  xi[fa[0]] = xi_free[0];
  xi[fa[1]] = xi_free[1];
  xi[axis] = solved;
  return make_patch(TorusPoint::at(xi), energy);
}

// ---------------------------------------------------------------------------
// Curvature
// ---------------------------------------------------------------------------

// The polynomial curvature numerator a1 a2 b3^2 + a2 a3 b1^2 + a3 a1 b2^2;
// the Gaussian curvature equals 4 pi^2 times this over |b|^4, so its zero
// set on the surface is exactly the curvature-degenerate locus.
inline double curvature_numerator(const TorusPoint& p) {
  return p.a[0] * p.a[1] * p.b[2] * p.b[2] +
         p.a[1] * p.a[2] * p.b[0] * p.b[0] +
         p.a[2] * p.a[0] * p.b[1] * p.b[1];
}

struct ClosedFormCurvature {
  double K{};
  Vec3 nu{};  // unit normal, parallel to the symbol gradient
};

inline ClosedFormCurvature curvature_closed_form(const TorusPoint& p) {
  double b2 = p.b[0] * p.b[0] + p.b[1] * p.b[1] + p.b[2] * p.b[2];
  double bn = std::sqrt(b2);
  if (bn < 1e-10)
    throw AtCriticalPoint("curvature undefined at a critical point");
  ClosedFormCurvature out;
  out.K = 4.0 * kPi * kPi * curvature_numerator(p) / (b2 * b2);
  out.nu = Vec3{p.b[0] / bn, p.b[1] / bn, p.b[2] / bn};
  return out;
}

// ---------------------------------------------------------------------------
// Chart derivatives (closed forms, orders 1..3)
// ---------------------------------------------------------------------------

// All derivative data of the graph function at one chart point. Indices
// refer to the two free axes in increasing order.
struct GraphJet {
  double f{};                  // solved coordinate
  TorusPoint point{};          // lifted surface point
  Vec2 d1{};                   // gradient (df/dx1', df/dx2')
  std::array<double, 3> d2{};  // Hessian (11, 12, 22)
  std::array<double, 4> d3{};  // third derivatives (111, 112, 122, 222)

  Mat2 hessian() const { return Mat2{d2[0], d2[1], d2[2]}; }
};

inline GraphJet graph_jet(const FermiPatch& patch, const Vec2& xi_free,
                          bool check_radius = true) {
  GraphJet jet;
  jet.point = lift(patch, xi_free, check_radius);
  jet.f = jet.point.xi[patch.solved_axis];

  auto fa = patch.free_axes();
  int s = patch.solved_axis;
  double as = jet.point.a[s], bs = jet.point.b[s];
  std::array<double, 2> a{jet.point.a[fa[0]], jet.point.a[fa[1]]};
  std::array<double, 2> b{jet.point.b[fa[0]], jet.point.b[fa[1]]};

  jet.d1 = Vec2{-b[0] / bs, -b[1] / bs};

  double bs3 = bs * bs * bs;
  jet.d2[0] = -kTwoPi * (a[0] * bs * bs + as * b[0] * b[0]) / bs3;
  jet.d2[1] = -kTwoPi * as * b[0] * b[1] / bs3;
  jet.d2[2] = -kTwoPi * (a[1] * bs * bs + as * b[1] * b[1]) / bs3;

  // Third derivative of the graph function: differentiating the Hessian
  // formula once more, using d a_s = 2 pi b_m on the chart and
  // d b_s = -2 pi a_s b_m / b_s.
  auto third = [&](int al, int be, int ga) {
    double bs2 = bs * bs;
    double delta3 = (al == be && be == ga) ? b[al] : 0.0;
    double pair_terms = 0.0;
    if (al == be) pair_terms += a[al] * as * b[ga];
    if (al == ga) pair_terms += a[al] * as * b[be];
    if (be == ga) pair_terms += a[be] * as * b[al];
    double bbb = b[al] * b[be] * b[ga];
    double val = delta3 - (pair_terms + bbb) / bs2 -
                 3.0 * as * as * bbb / (bs2 * bs2);
    return 4.0 * kPi * kPi * val / bs;
  };
  jet.d3[0] = third(0, 0, 0);
  jet.d3[1] = third(0, 0, 1);
  jet.d3[2] = third(0, 1, 1);
  jet.d3[3] = third(1, 1, 1);
  return jet;
}

// Flat view of one derivative order, mirroring the jet:
// order 1 -> {f_1, f_2}; order 2 -> {f_11, f_12, f_22};
// order 3 -> {f_111, f_112, f_122, f_222}.
inline std::vector<double> graph_derivatives(const FermiPatch& patch,
                                             const Vec2& xi_free, int order) {
  if (order < 1 || order > 3)
    throw PreconditionViolated("derivative order must be 1, 2, or 3");
  GraphJet jet = graph_jet(patch, xi_free);
  if (order == 1) return {jet.d1[0], jet.d1[1]};
  if (order == 2) return {jet.d2[0], jet.d2[1], jet.d2[2]};
  return {jet.d3[0], jet.d3[1], jet.d3[2], jet.d3[3]};
}

// Curvature data assembled in one chart point: closed-form curvature and
// normal, the chart Hessian, and its eigen-decomposition.
struct CurvatureData {
  double K{};
  Vec3 nu{};
  Mat2 second_form{};
  Eig2 eig{};
};

inline CurvatureData curvature_data(const FermiPatch& patch,
                                    const Vec2& xi_free) {
  GraphJet jet = graph_jet(patch, xi_free);
  CurvatureData out;
  ClosedFormCurvature cf = curvature_closed_form(jet.point);
  out.K = cf.K;
  out.nu = cf.nu;
  out.second_form = jet.hessian();
  out.eig = eigen_sym2(out.second_form);
  return out;
}

// Graph-coordinate curvature route det(Hessian) / (1 + |grad f|^2)^2,
// kept separate so the closed form can be checked against it.
inline double curvature_graph_route(const GraphJet& jet) {
  double g2 = jet.d1[0] * jet.d1[0] + jet.d1[1] * jet.d1[1];
  double den = (1.0 + g2) * (1.0 + g2);
  return jet.hessian().det() / den;
}

// Both curvature routes evaluated independently at the same point, each in
// extended precision. The two expressions agree as polynomial identities;
// evaluating them in long double keeps the comparison meaningful even next
// to the degenerate locus, where double-precision cancellation in either
// route would otherwise swamp a tight relative tolerance.
struct CurvatureConsistency {
  double closed_form{};
  double graph_route{};
};

inline CurvatureConsistency curvature_consistency(const TorusPoint& p) {
  const long double twopi = 2.0L * 3.14159265358979323846264338327950288L;
  long double a[3], b[3];
  for (int j = 0; j < 3; ++j) {
    a[j] = cosl(twopi * (long double)p.xi[j]);
    b[j] = sinl(twopi * (long double)p.xi[j]);
  }
  long double b2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
  if (b2 < 1e-20L)
    throw AtCriticalPoint("curvature undefined at a critical point");

  long double kt = a[0] * a[1] * b[2] * b[2] + a[1] * a[2] * b[0] * b[0] +
                   a[2] * a[0] * b[1] * b[1];
  long double pi2 = twopi * twopi / 4.0L;
  long double k_closed = 4.0L * pi2 * kt / (b2 * b2);

  int s = 0;
  for (int j = 1; j < 3; ++j)
    if (fabsl(b[j]) > fabsl(b[s])) s = j;
  int i = (s == 0) ? 1 : 0;
  int j2 = (s == 2) ? 1 : 2;
  long double bs = b[s], as = a[s];
  long double bs3 = bs * bs * bs;
  long double B11 = -twopi * (a[i] * bs * bs + as * b[i] * b[i]) / bs3;
  long double B12 = -twopi * as * b[i] * b[j2] / bs3;
  long double B22 = -twopi * (a[j2] * bs * bs + as * b[j2] * b[j2]) / bs3;
  long double g2 = (b[i] * b[i] + b[j2] * b[j2]) / (bs * bs);
  long double k_graph = (B11 * B22 - B12 * B12) / ((1.0L + g2) * (1.0L + g2));

  return CurvatureConsistency{(double)k_closed, (double)k_graph};
}

// ---------------------------------------------------------------------------
// Curvature-degenerate locus
// ---------------------------------------------------------------------------

struct DegenerateLocusPoint {
  TorusPoint point{};
  double energy{};
  bool umbilic{};      // whole second fundamental form vanishes
  bool transversal{};  // symbol gradient x curvature gradient nonzero
};

struct TransversalityResult {
  Vec3 cross{};  // b x grad(curvature numerator), closed form
  bool nonvanishing{};
};

// Closed-form cross product of the (unnormalized) normal b with the full
// gradient of the curvature numerator. On the degenerate locus this is
// parallel to grad(h0) x grad(K); its nonvanishing certifies that the locus
// is a transversally-cut curve.
inline TransversalityResult transversality_check(const TorusPoint& p) {
  double S = p.a[0] + p.a[1] + p.a[2];
  auto comp = [&](int i, int j, int k) {
    return -kTwoPi * p.b[j] * p.b[k] * (p.a[j] - p.a[k]) * (1.0 - p.a[i] * S);
  };
  TransversalityResult out;
  out.cross = Vec3{comp(0, 1, 2), comp(1, 2, 0), comp(2, 0, 1)};
  double n = std::sqrt(out.cross[0] * out.cross[0] +
                       out.cross[1] * out.cross[1] +
                       out.cross[2] * out.cross[2]);
  out.nonvanishing = n > 1e-8;
  return out;
}

inline TransversalityResult transversality_check(const DegenerateLocusPoint& p) {
  return transversality_check(p.point);
}

namespace detail {

// Residuals of the locus system F1 = sum a - E (surface), F2 = e2 - E e3
// (curvature degeneracy), in long double for the final polish.
struct LocusSystemLD {
  long double E;

  void eval(const long double x[3], long double F[2], long double J[2][3]) const {
    long double a[3], b[3];
    for (int j = 0; j < 3; ++j) {
      a[j] = cosl(2.0L * 3.14159265358979323846264338327950288L * x[j]);
      b[j] = sinl(2.0L * 3.14159265358979323846264338327950288L * x[j]);
    }
    const long double twopi = 2.0L * 3.14159265358979323846264338327950288L;
    F[0] = a[0] + a[1] + a[2] - E;
    F[1] = a[0] * a[1] + a[1] * a[2] + a[2] * a[0] - E * a[0] * a[1] * a[2];
    for (int j = 0; j < 3; ++j) {
      int k = (j + 1) % 3, l = (j + 2) % 3;
      J[0][j] = -twopi * b[j];
      J[1][j] = -twopi * b[j] * (a[k] + a[l] - E * a[k] * a[l]);
    }
  }
};

// One Gauss-Newton/Newton solve over the 2-equation, 3-unknown system.
// Returns true when the residual reaches `tol` in at most `itmax` steps.
template <typename Real>
bool locus_newton(Real x[3], long double E, Real tol, int itmax,
                  Real step_cap) {
  LocusSystemLD sys{E};
  for (int it = 0; it < itmax; ++it) {
    long double xl[3] = {(long double)x[0], (long double)x[1],
                         (long double)x[2]};
    long double F[2], J[2][3];
    sys.eval(xl, F, J);
    long double fmax = std::max(fabsl(F[0]), fabsl(F[1]));
    if (fmax < (long double)tol) return true;

    // Minimal-norm Gauss-Newton step: solve (J J^T) y = F, step = -J^T y.
    long double m11 = 0, m12 = 0, m22 = 0;
    for (int j = 0; j < 3; ++j) {
      m11 += J[0][j] * J[0][j];
      m12 += J[0][j] * J[1][j];
      m22 += J[1][j] * J[1][j];
    }
    long double det = m11 * m22 - m12 * m12;
    long double s[3];
    if (fabsl(det) > 1e-24L * (fabsl(m11 * m22) + 1e-30L)) {
      long double y0 = (m22 * F[0] - m12 * F[1]) / det;
      long double y1 = (-m12 * F[0] + m11 * F[1]) / det;
      for (int j = 0; j < 3; ++j) s[j] = -(J[0][j] * y0 + J[1][j] * y1);
    } else {
      // Degenerate row (e.g. both equations share a direction): fall back
      // to the Cauchy step of the squared residual.
      long double g[3];
      for (int j = 0; j < 3; ++j) g[j] = J[0][j] * F[0] + J[1][j] * F[1];
      long double jg0 = 0, jg1 = 0, gg = 0;
      for (int j = 0; j < 3; ++j) {
        jg0 += J[0][j] * g[j];
        jg1 += J[1][j] * g[j];
        gg += g[j] * g[j];
      }
      long double den = jg0 * jg0 + jg1 * jg1;
      if (den < 1e-60L || gg < 1e-60L) return false;
      long double t = (F[0] * jg0 + F[1] * jg1) / den;
      for (int j = 0; j < 3; ++j) s[j] = -t * g[j];
    }
    long double sn = sqrtl(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
    if (sn > (long double)step_cap)
      for (int j = 0; j < 3; ++j) s[j] *= (long double)step_cap / sn;
    for (int j = 0; j < 3; ++j) x[j] = (Real)(xl[j] + s[j]);
  }
  return false;
}

// Try to replace a near-axis solution with the exactly representable
// pattern: two coordinates at quarter points (cosine exactly zero) and the
// third at +-acos(E)/2pi. Such points satisfy both locus equations exactly
// in floating point, which downstream identity tests rely on.
inline bool snap_axis_pattern(Vec3& xi, double E, double tol) {
  for (int third = 0; third < 3; ++third) {
    Vec3 cand{};
    bool ok = true;
    for (int j = 0; j < 3 && ok; ++j) {
      if (j == third) continue;
      double q = (circle_distance(xi[j], 0.25) <= circle_distance(xi[j], 0.75))
                     ? 0.25
                     : 0.75;
      if (circle_distance(xi[j], q) > tol) ok = false;
      cand[j] = q;
    }
    if (!ok) continue;
    double t = std::acos(std::clamp(E, -1.0, 1.0)) / kTwoPi;
    double best = t;
    if (circle_distance(xi[third], wrap_unit(1.0 - t)) <
        circle_distance(xi[third], t))
      best = wrap_unit(1.0 - t);
    if (circle_distance(xi[third], best) > tol) continue;
    cand[third] = best;
    xi = cand;
    return true;
  }
  return false;
}

} // namespace detail

// Scan the surface for curvature-degenerate points: seed a grid x grid mesh
// of the two leading coordinates (both branches of the third), run damped
// Gauss-Newton on {surface, degeneracy} in double, polish survivors in long
// double, snap near-axis solutions to their exact patterns, deduplicate at
// torus distance 1e-6, and return the points sorted by coordinates.
inline std::vector<DegenerateLocusPoint> zero_curvature_locus(
    EnergyLevel energy, int grid = 256) {
  std::vector<Vec3> found;
  const double E = energy.E;

  for (int i1 = 0; i1 < grid; ++i1)
    for (int i2 = 0; i2 < grid; ++i2) {
      double x1 = double(i1) / grid, x2 = double(i2) / grid;
      double a3 = E - std::cos(kTwoPi * x1) - std::cos(kTwoPi * x2);
      if (std::fabs(a3) > 1.0) continue;
      double t = std::acos(a3) / kTwoPi;
      for (double x3 : {t, wrap_unit(1.0 - t)}) {
        double x[3] = {x1, x2, x3};
        if (!detail::locus_newton<double>(x, (long double)E, 1e-13, 40, 0.05))
          continue;
        Vec3 xi{wrap_unit(x[0]), wrap_unit(x[1]), wrap_unit(x[2])};
        if (!detail::snap_axis_pattern(xi, E, 5e-3)) {
          long double xl[3] = {xi[0], xi[1], xi[2]};
          if (!detail::locus_newton<long double>(xl, (long double)E, 1e-17L,
                                                 12, 0.01L))
            continue;
          xi = Vec3{wrap_unit((double)xl[0]), wrap_unit((double)xl[1]),
                    wrap_unit((double)xl[2])};
        }
        TorusPoint p = TorusPoint::at(xi);
        double bmax = std::max({std::fabs(p.b[0]), std::fabs(p.b[1]),
                                std::fabs(p.b[2])});
        if (bmax <= 1e-6) continue;  // critical points are not surface points
        found.push_back(xi);
      }
    }

  // Deduplicate within torus distance 1e-6 via a cell map (cell = 2e-6).
  std::sort(found.begin(), found.end());
  std::map<std::array<std::int64_t, 3>, std::vector<std::size_t>> cells;
  std::vector<Vec3> unique_pts;
  auto cell_of = [](const Vec3& v) {
    return std::array<std::int64_t, 3>{(std::int64_t)std::llround(v[0] * 5e5),
                                       (std::int64_t)std::llround(v[1] * 5e5),
                                       (std::int64_t)std::llround(v[2] * 5e5)};
  };
  for (const auto& xi : found) {
    auto c = cell_of(xi);
    bool dup = false;
    for (std::int64_t d1 = -1; d1 <= 1 && !dup; ++d1)
      for (std::int64_t d2 = -1; d2 <= 1 && !dup; ++d2)
        for (std::int64_t d3 = -1; d3 <= 1 && !dup; ++d3) {
          auto it = cells.find({c[0] + d1, c[1] + d2, c[2] + d3});
          if (it == cells.end()) continue;
          for (auto idx : it->second)
            if (torus_distance(unique_pts[idx], xi) < 1e-6) {
              dup = true;
              break;
            }
        }
    if (!dup) {
      unique_pts.push_back(xi);
      cells[c].push_back(unique_pts.size() - 1);
    }
  }

  std::vector<DegenerateLocusPoint> out;
  out.reserve(unique_pts.size());
  for (const auto& xi : unique_pts) {
    DegenerateLocusPoint pt;
    pt.point = TorusPoint::at(xi);
    pt.energy = energy.lambda;
    int axis = best_chart_axis(pt.point);
    FermiPatch patch;
    patch.energy = energy;
    patch.solved_axis = axis;
    patch.branch = pt.point.b[axis] > 0 ? +1 : -1;
    patch.base = pt.point;
    patch.radius = 1e-3;
    GraphJet jet = graph_jet(patch, patch.base_free(), false);
    pt.umbilic = jet.hessian().frobenius() < 1e-8;
    pt.transversal = transversality_check(pt.point).nonvanishing;
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tangent-direction identities on the degenerate locus
// ---------------------------------------------------------------------------

// At a degenerate-locus point with all cosines nonzero, the chart tangent
// vector (c_1', c_2') built from tangents of the free coordinates is a null
// eigenvector of the chart Hessian, and the derivative of the curvature
// numerator along it has the closed-form value (1 - E^2)(3 - E a1 a2 a3)
// after dividing by 2 pi. The report carries both measured quantities, the
// expected magnitude, and the orthogonality defect b . c.
struct NullDirectionReport {
  double eigvec_residual{};    // |B (c_i, c_j)^T|
  double directional_value{};  // (c . grad of curvature numerator) / (2 pi)
  double expected_magnitude{}; // |(1 - E^2)(3 - E a1 a2 a3)|
  double b_dot_c{};            // sum_j b_j c_j
};

inline NullDirectionReport null_direction_identity(const TorusPoint& p,
                                                   EnergyLevel energy) {
  if (!(std::fabs(h0(p) - energy.lambda) <= 1e-9))
    throw PreconditionViolated("point is not on the level surface");
  if (!(std::fabs(curvature_numerator(p)) <= 1e-9))
    throw PreconditionViolated("point is not curvature-degenerate");
  for (int j = 0; j < 3; ++j)
    if (std::fabs(p.a[j]) <= 1e-8)
      throw PreconditionViolated("a cosine vanishes: tangent vector undefined");
  double E = energy.E;
  if (std::fabs(E) >= 1.0 - 1e-12 || std::fabs(E) <= 1e-12)
    throw PreconditionViolated("shifted energy outside (-1,1) \\ {0}");

  int s = best_chart_axis(p);
  if (std::fabs(p.b[s]) <= 1e-8)
    throw PreconditionViolated("no chart axis: all sines vanish");
  FermiPatch patch;
  patch.energy = energy;
  patch.solved_axis = s;
  patch.branch = p.b[s] > 0 ? +1 : -1;
  patch.base = p;
  patch.radius = 1e-3;
  GraphJet jet = graph_jet(patch, patch.base_free(), false);

  auto fa = patch.free_axes();
  Vec2 cvec{*p.c[fa[0]], *p.c[fa[1]]};
  Vec2 Bc = jet.hessian().apply(cvec);

  NullDirectionReport rep;
  rep.eigvec_residual = std::sqrt(Bc[0] * Bc[0] + Bc[1] * Bc[1]);

  // In-chart derivative of the curvature numerator along an increment of
  // free coordinate alpha: 2 pi b_a (a_a - a_s)(1 - a_other * sum a).
  double S = p.a[0] + p.a[1] + p.a[2];
  double val = 0.0;
  for (int t = 0; t < 2; ++t) {
    int al = fa[t], other = fa[1 - t];
    val += cvec[t] * p.b[al] * (p.a[al] - p.a[s]) * (1.0 - p.a[other] * S);
  }
  rep.directional_value = val;

  double e3 = p.a[0] * p.a[1] * p.a[2];
  rep.expected_magnitude = std::fabs((1.0 - E * E) * (3.0 - E * e3));
  double bc = 0.0;
  for (int j = 0; j < 3; ++j) bc += p.b[j] * (*p.c[j]);
  rep.b_dot_c = bc;
  return rep;
}

} // namespace fermires
