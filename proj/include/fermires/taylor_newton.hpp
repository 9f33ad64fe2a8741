#pragma once

// Taylor models of the graph function at degenerate points (optionally in
// the eigenbasis of the chart Hessian), normal-form classification, and
// exact-rational Newton-polyhedron analysis predicting oscillatory decay
// exponents.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

#include "errors.hpp"
#include "fermi_geometry.hpp"

namespace fermires {

using Rational = boost::rational<long long>;

// ---------------------------------------------------------------------------
// Taylor models
// ---------------------------------------------------------------------------

// Bivariate Taylor coefficients of a phase around `base`, indexed by
// bi-index (j1, j2) of eta_1^{j1} eta_2^{j2}. When `rotated`, eta are
// coordinates in the orthonormal eigenbasis of the chart Hessian: columns
// of `rotation` are (u_plus | u_minus), original = rotation * eta.
struct TaylorModel {
  Vec2 base{};
  std::array<double, 4> rotation{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  bool rotated{false};
  int degree{5};
  std::map<std::array<int, 2>, double> coeffs;

  double coeff(int j1, int j2) const {
    auto it = coeffs.find(std::array<int, 2>{j1, j2});
    return it == coeffs.end() ? 0.0 : it->second;
  }
};

inline double evaluate(const TaylorModel& model, const Vec2& eta) {
  double total = 0.0;
  for (const auto& [idx, c] : model.coeffs)
    total += c * std::pow(eta[0], idx[0]) * std::pow(eta[1], idx[1]);
  return total;
}

namespace detail {

constexpr int kMaxDegree = 6;

// Dense truncated bivariate polynomial of total degree <= kMaxDegree.
struct Poly2 {
  std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> c{};

  static Poly2 product(const Poly2& A, const Poly2& B, int deg) {
    Poly2 C;
    for (int i = 0; i <= deg; ++i)
      for (int j = 0; j <= deg - i; ++j) {
        if (A.c[i][j] == 0.0) continue;
        for (int k = 0; k + i <= deg; ++k)
          for (int l = 0; l + k + i + j <= deg; ++l)
            C.c[i + k][j + l] += A.c[i][j] * B.c[k][l];
      }
    return C;
  }
};

inline constexpr std::array<double, 13> kFactorial = {
    1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0,
    362880.0, 3628800.0, 39916800.0, 479001600.0};

} // namespace detail

// Expand the graph function around `center` to total degree `degree`
// (2..6) by exact series composition: the solved coordinate is an analytic
// function g of the solved cosine u with g' = -1/(2 pi b_solved) and the
// two-term recurrence g^{(n+2)} = ((2n+1) u g^{(n+1)} + n^2 g^{(n)})/(1-u^2),
// composed with the trigonometric displacement series of u. All orders come
// out at machine precision, which finite differences of the solve cannot
// reach beyond order three.
//
// With `rotate`, coefficients are re-expressed in the eigenbasis of the
// chart Hessian at the center (smaller-|eigenvalue| direction first).
inline TaylorModel taylor_expand(const FermiPatch& patch, const Vec2& center,
                                 int degree, bool rotate) {
  if (degree < 2 || degree > detail::kMaxDegree)
    throw PreconditionViolated("taylor degree must lie in [2,6]");
  TorusPoint p = lift(patch, center);

  auto fa = patch.free_axes();
  int s = patch.solved_axis;
  double u0 = p.a[s], bs = p.b[s];
  std::array<double, 2> a{p.a[fa[0]], p.a[fa[1]]};
  std::array<double, 2> b{p.b[fa[0]], p.b[fa[1]]};

  // Derivatives of the branch-resolved inverse-cosine composition.
  std::array<double, detail::kMaxDegree + 1> h{};
  h[1] = -1.0 / (kTwoPi * bs);
  for (int n = 0; n + 2 <= degree; ++n)
    h[n + 2] = ((2.0 * n + 1.0) * u0 * h[n + 1] + double(n) * n * h[n]) /
               (1.0 - u0 * u0);

  // Displacement series of the solved cosine: for each free axis,
  // u(center + eta) - u0 contributes a(1 - cos 2 pi eta) + b sin 2 pi eta.
  detail::Poly2 V;
  for (int t = 0; t < 2; ++t) {
    for (int k = 1; k <= degree; ++k) {
      double w = std::pow(kTwoPi, k) / detail::kFactorial[k];
      double ck = 0.0, sk = 0.0;
      switch (k % 4) {
        case 0: ck = w; break;
        case 1: sk = w; break;
        case 2: ck = -w; break;
        default: sk = -w; break;
      }
      double coeff = -a[t] * ck + b[t] * sk;
      if (t == 0)
        V.c[k][0] += coeff;
      else
        V.c[0][k] += coeff;
    }
  }

  // Compose f = f0 + sum_n h_n / n! V^n, truncated at total degree.
  detail::Poly2 F, P;
  P.c[0][0] = 1.0;
  for (int n = 1; n <= degree; ++n) {
    P = detail::Poly2::product(P, V, degree);
    double w = h[n] / detail::kFactorial[n];
    for (int i = 0; i <= degree; ++i)
      for (int j = 0; j <= degree - i; ++j) F.c[i][j] += w * P.c[i][j];
  }
  F.c[0][0] = p.xi[s];

  TaylorModel model;
  model.base = center;
  model.degree = degree;

  if (rotate) {
    GraphJet jet = graph_jet(patch, center);
    Eig2 eig = eigen_sym2(jet.hessian());
    if (std::fabs(eig.lambda_plus - eig.lambda_minus) < 1e-10)
      throw EigenvalueCollision(
          "hessian eigenvalues coincide: rotation undefined");
    model.rotated = true;
    model.rotation = {eig.u_plus[0], eig.u_minus[0], eig.u_plus[1],
                      eig.u_minus[1]};
    const double U00 = model.rotation[0], U01 = model.rotation[1];
    const double U10 = model.rotation[2], U11 = model.rotation[3];

    detail::Poly2 G;
    auto binom = [](int n, int r) {
      return detail::kFactorial[n] /
             (detail::kFactorial[r] * detail::kFactorial[n - r]);
    };
    for (int i = 0; i <= degree; ++i)
      for (int j = 0; j <= degree - i; ++j) {
        double c = F.c[i][j];
        if (c == 0.0) continue;
        // (U00 z1 + U01 z2)^i (U10 z1 + U11 z2)^j
        for (int r = 0; r <= i; ++r)
          for (int t = 0; t <= j; ++t) {
            double term = c * binom(i, r) * std::pow(U00, r) *
                          std::pow(U01, i - r) * binom(j, t) *
                          std::pow(U10, t) * std::pow(U11, j - t);
            G.c[r + t][(i - r) + (j - t)] += term;
          }
      }
    F = G;
  }

  for (int i = 0; i <= degree; ++i)
    for (int j = 0; j <= degree - i; ++j)
      model.coeffs[std::array<int, 2>{i, j}] = F.c[i][j];
  return model;
}

// ---------------------------------------------------------------------------
// Normal-form classification
// ---------------------------------------------------------------------------

enum class NormalFormTag {
  UmbilicCubic,      // quadratic part gone; mixed cubics carry the phase
  GenericDegenerate, // one flat direction, healthy second eigenvalue
  SpecialAxisPoint,  // flat direction with cubic and quartic pure terms gone
};

inline const char* to_string(NormalFormTag tag) {
  switch (tag) {
    case NormalFormTag::UmbilicCubic: return "umbilic-cubic";
    case NormalFormTag::GenericDegenerate: return "generic-degenerate";
    default: return "special-axis-point";
  }
}

struct NormalFormCase {
  NormalFormTag case_tag{};
  std::vector<std::pair<std::string, double>> verified_constraints;
};

// Classify a rotated (or naturally diagonal) Taylor model at a
// curvature-degenerate point. Naming follows the quadratic-first scheme:
// alpha_1/alpha_2 are the coefficients of eta_1^2 / eta_2^2, alpha_{ijk}
// of eta_i eta_j eta_k, and alpha_1111 of eta_1^4. Constraints that assert
// presence (nonvanishing) report residual 0 when satisfied.
inline NormalFormCase classify_normal_form(const TaylorModel& model,
                                           EnergyLevel energy) {
  if (model.degree < 4)
    throw PreconditionViolated("classification needs a degree >= 4 model");
  const double c20 = model.coeff(2, 0), c11 = model.coeff(1, 1),
               c02 = model.coeff(0, 2);
  const double c30 = model.coeff(3, 0), c21 = model.coeff(2, 1),
               c12 = model.coeff(1, 2), c03 = model.coeff(0, 3);
  const double c40 = model.coeff(4, 0);
  const double kZero = 1e-9, kQuadZero = 1e-8, kPresent = 1e-3;

  NormalFormCase out;
  auto vanish = [&](const char* name, double v) {
    out.verified_constraints.emplace_back(name, std::fabs(v));
  };
  auto present = [&](const char* name, double v) {
    out.verified_constraints.emplace_back(name,
                                          std::fabs(v) > kPresent ? 0.0 : 1.0);
  };

  if (std::fabs(c20) < kQuadZero && std::fabs(c11) < kQuadZero &&
      std::fabs(c02) < kQuadZero && std::fabs(c21) > kPresent &&
      std::fabs(c12) > kPresent) {
    out.case_tag = NormalFormTag::UmbilicCubic;
    vanish("quadratic_20_vanishes", c20);
    vanish("quadratic_11_vanishes", c11);
    vanish("quadratic_02_vanishes", c02);
    vanish("cubic_30_vanishes", c30);
    vanish("cubic_03_vanishes", c03);
    present("mixed_cubic_21_present", c21);
    present("mixed_cubic_12_present", c12);
    vanish("shifted_energy_vanishes", energy.E);
    return out;
  }

  if (std::fabs(c20) < kZero && std::fabs(c30) < kZero &&
      std::fabs(c40) < kZero && std::fabs(c21) > kPresent) {
    out.case_tag = NormalFormTag::SpecialAxisPoint;
    vanish("alpha1_vanishes", c20);
    vanish("alpha111_vanishes", c30);
    vanish("alpha1111_vanishes", c40);
    present("alpha112_present", c21);
    vanish("offdiagonal_vanishes", c11);
    return out;
  }

  if (std::fabs(c20) < kZero && std::fabs(c02) > kPresent) {
    out.case_tag = NormalFormTag::GenericDegenerate;
    vanish("alpha1_vanishes", c20);
    present("alpha2_present", c02);
    vanish("offdiagonal_vanishes", c11);
    return out;
  }

  throw UnclassifiedPoint("model matches no known normal-form case");
}

// ---------------------------------------------------------------------------
// Newton polyhedron over exact rationals
// ---------------------------------------------------------------------------

enum class FaceKind { Vertex, Edge, RayVertical, RayHorizontal };

struct RatPoint {
  Rational x{}, y{};
};

struct NewtonData {
  std::map<std::array<int, 2>, double> taylor_support;  // degree >= 2 terms
  std::vector<RatPoint> polyhedron_vertices;            // staircase corners
  Rational newton_distance{};
  FaceKind face_kind{};
  RatPoint face_a{}, face_b{};  // endpoints; vertex: a == b; ray: a = corner
  TaylorModel principal_part{};
  int vanishing_order{};
  bool adapted{};
  std::optional<Rational> height;
  std::optional<int> varchenko_exponent;
  std::optional<Rational> predicted_exponent;
};

// Maximum multiplicity of zeros of the model, read as a trig polynomial
// sum c cos^{j1} sin^{j2} on the unit circle: dense sampling on an offset
// grid, bisection refinement of sign changes (odd-order zeros) and of
// derivative sign changes at small local minima (even-order zeros), then
// multiplicity by successive exact angular derivatives of the term list.
inline int vanishing_order_on_circle(const TaylorModel& principal_part) {
  struct Term {
    double c;
    int j, k;
  };
  std::vector<Term> terms;
  for (const auto& [idx, c] : principal_part.coeffs)
    if (std::fabs(c) > 1e-10) terms.push_back(Term{c, idx[0], idx[1]});
  if (terms.empty())
    throw EmptySupport("vanishing order of an identically zero part");

  auto eval = [](const std::vector<Term>& ts, double th) {
    double x = std::cos(th), y = std::sin(th), total = 0.0;
    for (const auto& t : ts)
      total += t.c * std::pow(x, t.j) * std::pow(y, t.k);
    return total;
  };
  auto derivative = [](const std::vector<Term>& ts) {
    std::map<std::array<int, 2>, double> acc;
    for (const auto& t : ts) {
      if (t.j > 0) acc[{t.j - 1, t.k + 1}] += -double(t.j) * t.c;
      if (t.k > 0) acc[{t.j + 1, t.k - 1}] += double(t.k) * t.c;
    }
    std::vector<Term> out;
    for (const auto& [idx, c] : acc)
      if (c != 0.0) out.push_back(Term{c, idx[0], idx[1]});
    return out;
  };
  auto scale_of = [](const std::vector<Term>& ts) {
    double s = 0.0;
    for (const auto& t : ts) s = std::max(s, std::fabs(t.c));
    return s;
  };

  const int N = 4096;
  double scale = scale_of(terms);
  std::vector<double> theta(N), val(N);
  for (int i = 0; i < N; ++i) {
    theta[i] = kTwoPi * (i + 0.5) / N;  // offset avoids exact lattice zeros
    val[i] = eval(terms, theta[i]);
  }

  auto deriv1 = derivative(terms);
  std::vector<double> roots;
  auto push_root = [&](double th) {
    th = std::fmod(th, kTwoPi);
    if (th < 0) th += kTwoPi;
    for (double r : roots) {
      double d = std::fabs(r - th);
      d = std::min(d, kTwoPi - d);
      if (d < 1e-6) return;
    }
    roots.push_back(th);
  };

  for (int i = 0; i < N; ++i) {
    int ip = (i + 1) % N;
    double t0 = theta[i], t1 = theta[i] + kTwoPi / N;
    if (val[i] == 0.0) {
      push_root(theta[i]);
    } else if (val[i] * val[ip] < 0.0) {
      // Odd-order zero: bisect the value.
      double lo = t0, hi = t1, flo = val[i];
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi), fm = eval(terms, mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm > 0) == (flo > 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      push_root(0.5 * (lo + hi));
    } else {
      // Candidate even-order zero: small local minimum of |p| with a sign
      // change of p' across it.
      int im = (i + N - 1) % N;
      if (std::fabs(val[i]) <= std::fabs(val[im]) &&
          std::fabs(val[i]) <= std::fabs(val[ip]) &&
          std::fabs(val[i]) < 1e-6 * std::max(scale, 1e-30)) {
        double lo = theta[i] - kTwoPi / N, hi = t1;
        double dlo = eval(deriv1, lo), dhi = eval(deriv1, hi);
        if (dlo * dhi < 0.0) {
          for (int it = 0; it < 100; ++it) {
            double mid = 0.5 * (lo + hi), dm = eval(deriv1, mid);
            if (dm == 0.0) {
              lo = hi = mid;
              break;
            }
            if ((dm > 0) == (dlo > 0)) {
              lo = mid;
              dlo = dm;
            } else {
              hi = mid;
            }
          }
          double th = 0.5 * (lo + hi);
          if (std::fabs(eval(terms, th)) < 1e-8 * std::max(scale, 1e-30))
            push_root(th);
        }
      }
    }
  }

  int worst = 0;
  for (double th : roots) {
    std::vector<Term> d = terms;
    int order = 0;
    for (int n = 1; n <= 2 * detail::kMaxDegree + 2; ++n) {
      d = derivative(d);
      double threshold = std::max(1e-8, 1e-12 * scale_of(d));
      if (d.empty()) break;
      if (std::fabs(eval(d, th)) > threshold) {
        order = n;
        break;
      }
    }
    if (order == 0) order = 2 * detail::kMaxDegree + 2;  // cap, defensive
    worst = std::max(worst, order);
  }
  return worst;
}

// Full Newton-polyhedron analysis of a Taylor model: support (total degree
// >= 2, coefficient threshold 1e-10), staircase vertices of the convex hull
// of translated upper quadrants (exact integer/rational arithmetic),
// Newton distance from the bisectrix, principal face and part, vanishing
// order on the circle, adaptedness, and the predicted decay exponent.
inline NewtonData newton_polyhedron(const TaylorModel& model) {
  NewtonData data;
  std::vector<std::array<long long, 2>> pts;
  for (const auto& [idx, c] : model.coeffs) {
    if (idx[0] + idx[1] < 2 || std::fabs(c) <= 1e-10) continue;
    data.taylor_support[idx] = c;
    pts.push_back({(long long)idx[0], (long long)idx[1]});
  }
  if (pts.empty())
    throw EmptySupport("no degree >= 2 terms above the support threshold");

  // Pareto-minimal staircase (no other support point weakly dominates).
  std::vector<std::array<long long, 2>> pareto;
  for (const auto& p : pts) {
    bool dominated = false;
    for (const auto& q : pts)
      if ((q[0] < p[0] && q[1] <= p[1]) || (q[0] <= p[0] && q[1] < p[1])) {
        dominated = true;
        break;
      }
    if (!dominated) pareto.push_back(p);
  }
  std::sort(pareto.begin(), pareto.end());

  // Convex chain: drop points on or above the segment of their neighbors.
  std::vector<std::array<long long, 2>> hull;
  for (const auto& p : pareto) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull[hull.size() - 1];
      long long cross = (b[0] - a[0]) * (p[1] - a[1]) -
                        (b[1] - a[1]) * (p[0] - a[0]);
      if (cross >= 0)
        hull.pop_back();  // b not a strict corner of the staircase
      else
        break;
    }
    hull.push_back(p);
  }

  for (const auto& v : hull)
    data.polyhedron_vertices.push_back(
        RatPoint{Rational(v[0]), Rational(v[1])});

  // Newton distance: smallest t with (t,t) inside every half-plane of the
  // staircase region.
  Rational d = std::max(Rational(hull.front()[0]), Rational(hull.back()[1]));
  struct EdgeS {
    std::size_t i;
    Rational s;
  };
  std::vector<EdgeS> edge_params;
  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    long long x1 = hull[i][0], y1 = hull[i][1];
    long long x2 = hull[i + 1][0], y2 = hull[i + 1][1];
    Rational s(x2 * y1 - x1 * y2, (y1 - y2) + (x2 - x1));
    edge_params.push_back({i, s});
    d = std::max(d, s);
  }
  data.newton_distance = d;

  // Principal face: the boundary face containing (d, d).
  bool resolved = false;
  for (const auto& v : data.polyhedron_vertices)
    if (v.x == d && v.y == d) {
      data.face_kind = FaceKind::Vertex;
      data.face_a = data.face_b = v;
      resolved = true;
      break;
    }
  if (!resolved) {
    for (const auto& e : edge_params) {
      Rational x1(hull[e.i][0]), x2(hull[e.i + 1][0]);
      if (e.s == d && x1 < d && d < x2) {
        data.face_kind = FaceKind::Edge;
        data.face_a = data.polyhedron_vertices[e.i];
        data.face_b = data.polyhedron_vertices[e.i + 1];
        resolved = true;
        break;
      }
    }
  }
  if (!resolved) {
    if (Rational(hull.front()[0]) == d) {
      data.face_kind = FaceKind::RayVertical;
      data.face_a = data.face_b = data.polyhedron_vertices.front();
    } else {
      data.face_kind = FaceKind::RayHorizontal;
      data.face_a = data.face_b = data.polyhedron_vertices.back();
    }
  }

  // Principal part: support points lying on the face.
  data.principal_part.base = model.base;
  data.principal_part.rotation = model.rotation;
  data.principal_part.rotated = model.rotated;
  data.principal_part.degree = model.degree;
  for (const auto& [idx, c] : data.taylor_support) {
    bool on_face = false;
    Rational px(idx[0]), py(idx[1]);
    switch (data.face_kind) {
      case FaceKind::Vertex:
        on_face = (px == data.face_a.x && py == data.face_a.y);
        break;
      case FaceKind::Edge: {
        Rational cross = (data.face_b.x - data.face_a.x) * (py - data.face_a.y) -
                         (data.face_b.y - data.face_a.y) * (px - data.face_a.x);
        on_face = (cross == Rational(0)) && data.face_a.x <= px &&
                  px <= data.face_b.x;
        break;
      }
      case FaceKind::RayVertical:
        on_face = (px == data.face_a.x && py >= data.face_a.y);
        break;
      case FaceKind::RayHorizontal:
        on_face = (py == data.face_a.y && px >= data.face_a.x);
        break;
    }
    if (on_face) data.principal_part.coeffs[idx] = c;
  }

  data.vanishing_order = vanishing_order_on_circle(data.principal_part);

  // Adapted coordinates: compact principal edge whose principal part
  // vanishes to lower order than the Newton distance. Then the height is
  // attained here and the decay exponent is its reciprocal (no logarithmic
  // correction below height 2).
  data.adapted = (data.face_kind == FaceKind::Edge) &&
                 (Rational(data.vanishing_order) < d);
  if (data.adapted) {
    data.height = d;
    if (d < Rational(2)) {
      data.varchenko_exponent = 0;
      data.predicted_exponent = Rational(1) / d;
    }
  }
  return data;
}

struct AdaptednessReport {
  bool adapted{};
  std::optional<Rational> exponent;
};

inline AdaptednessReport adaptedness_and_exponent(const NewtonData& data) {
  AdaptednessReport rep;
  rep.adapted = data.adapted;
  rep.exponent = data.predicted_exponent;
  return rep;
}

} // namespace fermires
