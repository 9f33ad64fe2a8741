#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <fermires/fermi_geometry.hpp>

using namespace fermires;

namespace {

// Independent 1D oracle: locate the solved coordinate by bisecting the
// symbol itself along the solved axis, never using the arccos route.
double bisect_solved_coordinate(const Vec2& xi_free, double lambda, int axis) {
  auto level = [&](double t) {
    Vec3 xi{};
    FermiPatch helper;
    helper.solved_axis = axis;
    auto fa = helper.free_axes();
    xi[fa[0]] = xi_free[0];
    xi[fa[1]] = xi_free[1];
    xi[axis] = t;
    return h0(TorusPoint::at(xi)) - lambda;
  };
  double lo = 0.0, hi = 0.5;  // cos 2 pi t decreases on [0, 1/2]: h0 increases
  REQUIRE(level(lo) < 0.0);
  REQUIRE(level(hi) > 0.0);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (level(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Deterministic sampler of surface points: draw two free coordinates, solve
// for the third, and scatter the solved coordinate over a random axis and
// branch so every chart orientation is exercised.
std::vector<TorusPoint> sample_surface(double lambda, int count,
                                       std::uint64_t seed,
                                       double margin = 0.999) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double E = EnergyLevel::from_lambda(lambda).E;
  std::vector<TorusPoint> out;
  while ((int)out.size() < count) {
    double x1 = unif(rng), x2 = unif(rng);
    double a3 = E - std::cos(kTwoPi * x1) - std::cos(kTwoPi * x2);
    if (std::fabs(a3) > margin) continue;
    double t = std::acos(a3) / kTwoPi;
    if (unif(rng) < 0.5) t = wrap_unit(1.0 - t);
    int axis = (int)(unif(rng) * 3.0) % 3;
    Vec3 xi{};
    FermiPatch helper;
    helper.solved_axis = axis;
    auto fa = helper.free_axes();
    xi[fa[0]] = x1;
    xi[fa[1]] = x2;
    xi[axis] = t;
    out.push_back(TorusPoint::at(xi));
  }
  return out;
}

double norm3(const Vec3& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

// Central finite difference of the curvature numerator over raw torus
// coordinates.
Vec3 fd_grad_curvature_numerator(const TorusPoint& p, double h = 1e-6) {
  Vec3 g{};
  for (int j = 0; j < 3; ++j) {
    Vec3 xp = p.xi, xm = p.xi;
    xp[j] = wrap_unit(xp[j] + h);
    xm[j] = wrap_unit(xm[j] - h);
    g[j] = (curvature_numerator(TorusPoint::at(xp)) -
            curvature_numerator(TorusPoint::at(xm))) /
           (2.0 * h);
  }
  return g;
}

} // namespace

TEST_CASE("graph solve agrees with the bisection oracle and level equation") {
  // Forced values of the solved cosine.
  double s1 = solve_graph(Vec2{0.25, 0.25}, EnergyLevel::from_lambda(6.0), 2, +1);
  REQUIRE(std::fabs(s1 - 0.25) < 1e-15);

  double s2 = solve_graph(Vec2{0.0, 0.0}, EnergyLevel::from_lambda(2.0), 2, +1);
  REQUIRE(std::fabs(s2 - 0.25) < 1e-13);
  double s2_oracle = bisect_solved_coordinate(Vec2{0.0, 0.0}, 2.0, 2);
  REQUIRE(std::fabs(s2 - s2_oracle) < 1e-12);

  // Free coordinates not over the surface.
  REQUIRE_THROWS_AS(
      solve_graph(Vec2{0.5, 0.5}, EnergyLevel::from_lambda(2.0), 2, +1),
      OutOfRange);
  // Solved cosine pinned at +1: the chart degenerates.
  REQUIRE_THROWS_AS(
      solve_graph(Vec2{0.25, 0.25}, EnergyLevel::from_lambda(4.0), 2, +1),
      DegenerateBranch);

  // Random free coordinates: level equation, branch sign, bisection oracle.
  std::mt19937_64 rng(0xfee1f00dULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int checked = 0;
  while (checked < 200) {
    double lambda = 2.0 + 8.0 * unif(rng);
    EnergyLevel energy = EnergyLevel::from_lambda(lambda);
    Vec2 q{unif(rng), unif(rng)};
    int axis = (int)(unif(rng) * 3.0) % 3;
    int branch = unif(rng) < 0.5 ? +1 : -1;
    double a3 = energy.E - std::cos(kTwoPi * q[0]) - std::cos(kTwoPi * q[1]);
    if (std::fabs(a3) > 0.999) continue;
    double t = solve_graph(q, energy, axis, branch);
    REQUIRE(std::sin(kTwoPi * t) * branch > 0.0);
    Vec3 xi{};
    FermiPatch helper;
    helper.solved_axis = axis;
    auto fa = helper.free_axes();
    xi[fa[0]] = q[0];
    xi[fa[1]] = q[1];
    xi[axis] = t;
    REQUIRE(std::fabs(h0(TorusPoint::at(xi)) - lambda) < 1e-12);
    if (branch > 0) {  // oracle bisects the principal branch only
      double ref = bisect_solved_coordinate(q, lambda, axis);
      REQUIRE(std::fabs(t - ref) < 1e-12);
    }
    ++checked;
  }
}

TEST_CASE("patch construction follows the chart-selection rules") {
  for (auto lambda : {2.0, 5.0, 7.0, 10.0}) {
    EnergyLevel energy = EnergyLevel::from_lambda(lambda);
    auto pts = sample_surface(lambda, 25, 0xabcdef01ULL + (std::uint64_t)lambda);
    for (const auto& p : pts) {
      FermiPatch patch = make_patch(p, energy);
      // Axis is the argmax of |b|, ties by smallest index.
      for (int j = 0; j < 3; ++j)
        REQUIRE(std::fabs(p.b[patch.solved_axis]) >= std::fabs(p.b[j]) - 1e-15);
      REQUIRE(patch.branch == (p.b[patch.solved_axis] > 0 ? +1 : -1));
      REQUIRE(patch.radius > 0.0);
      REQUIRE(patch.radius <= 0.1 + 1e-15);

      // The base reproduces itself through the chart.
      TorusPoint self = lift(patch, patch.base_free());
      REQUIRE(torus_distance(self.xi, p.xi) < 1e-13);

      // Boundary samples lift and keep the solved sine healthy.
      Vec2 c = patch.base_free();
      for (int k = 0; k < 16; ++k) {
        double th = kTwoPi * k / 16.0;
        Vec2 q{c[0] + patch.radius * std::cos(th),
               c[1] + patch.radius * std::sin(th)};
        TorusPoint lifted = lift(patch, q);
        REQUIRE(std::fabs(lifted.b[patch.solved_axis]) >
                0.5 * std::fabs(p.b[patch.solved_axis]));
        REQUIRE(std::fabs(h0(lifted) - lambda) < 1e-12);
      }

      // Outside the radius the chart refuses.
      REQUIRE_THROWS_AS(
          lift(patch, Vec2{c[0] + 2.5 * patch.radius, c[1]}), OutsidePatch);
    }
  }
  // Off-surface base points are rejected.
  REQUIRE_THROWS_AS(
      make_patch(TorusPoint::at(Vec3{0.1, 0.2, 0.3}),
                 EnergyLevel::from_lambda(2.0)),
      PreconditionViolated);
}

TEST_CASE("first derivatives match finite differences of the graph solve") {
  const double h = 1e-5;
  for (auto lambda : {2.0, 5.0, 6.0, 7.0, 10.0}) {
    EnergyLevel energy = EnergyLevel::from_lambda(lambda);
    auto pts = sample_surface(lambda, 40, 0x5151ULL + (std::uint64_t)(lambda * 7));
    for (const auto& p : pts) {
      FermiPatch patch = make_patch(p, energy);
      Vec2 c = patch.base_free();
      GraphJet jet = graph_jet(patch, c);
      for (int t = 0; t < 2; ++t) {
        Vec2 qp = c, qm = c;
        qp[t] += h;
        qm[t] -= h;
        double fd = (solve_graph(qp, energy, patch.solved_axis, patch.branch) -
                     solve_graph(qm, energy, patch.solved_axis, patch.branch)) /
                    (2.0 * h);
        REQUIRE(std::fabs(jet.d1[t] - fd) < 1e-7);
      }
    }
  }
}

TEST_CASE("second and third derivatives match nested finite differences") {
  const double h = 1e-5;
  for (auto lambda : {2.0, 5.0, 7.0}) {
    EnergyLevel energy = EnergyLevel::from_lambda(lambda);
    auto pts = sample_surface(lambda, 15, 0xd1d2ULL + (std::uint64_t)lambda);
    for (const auto& p : pts) {
      FermiPatch patch = make_patch(p, energy);
      Vec2 c = patch.base_free();
      GraphJet jet = graph_jet(patch, c);

      auto d1_at = [&](const Vec2& q) {
        return graph_jet(patch, q, false).d1;
      };
      auto d2_at = [&](const Vec2& q) {
        return graph_jet(patch, q, false).d2;
      };

      // Hessian from differenced gradients.
      std::array<double, 3> fd2{};
      for (int t = 0; t < 2; ++t) {
        Vec2 qp = c, qm = c;
        qp[t] += h;
        qm[t] -= h;
        Vec2 gp = d1_at(qp), gm = d1_at(qm);
        if (t == 0) {
          fd2[0] = (gp[0] - gm[0]) / (2.0 * h);
          fd2[1] = (gp[1] - gm[1]) / (2.0 * h);
        } else {
          fd2[2] = (gp[1] - gm[1]) / (2.0 * h);
        }
      }
      for (int k = 0; k < 3; ++k)
        REQUIRE(std::fabs(jet.d2[k] - fd2[k]) <=
                1e-5 * std::max(1.0, std::fabs(fd2[k])));

      // Third order from differenced Hessians.
      std::array<double, 4> fd3{};
      {
        Vec2 qp = c, qm = c;
        qp[0] += h;
        qm[0] -= h;
        auto hp = d2_at(qp), hm = d2_at(qm);
        fd3[0] = (hp[0] - hm[0]) / (2.0 * h);  // 111
        fd3[1] = (hp[1] - hm[1]) / (2.0 * h);  // 112
        fd3[2] = (hp[2] - hm[2]) / (2.0 * h);  // 122
      }
      {
        Vec2 qp = c, qm = c;
        qp[1] += h;
        qm[1] -= h;
        auto hp = d2_at(qp), hm = d2_at(qm);
        fd3[3] = (hp[2] - hm[2]) / (2.0 * h);  // 222
      }
      for (int k = 0; k < 4; ++k)
        REQUIRE(std::fabs(jet.d3[k] - fd3[k]) <=
                1e-5 * std::max(1.0, std::fabs(fd3[k])));
    }
  }
}

TEST_CASE("derivative order views and validation") {
  EnergyLevel energy = EnergyLevel::from_lambda(5.0);
  auto pts = sample_surface(5.0, 3, 77);
  FermiPatch patch = make_patch(pts[0], energy);
  Vec2 c = patch.base_free();
  GraphJet jet = graph_jet(patch, c);
  auto v1 = graph_derivatives(patch, c, 1);
  auto v2 = graph_derivatives(patch, c, 2);
  auto v3 = graph_derivatives(patch, c, 3);
  REQUIRE(v1.size() == 2);
  REQUIRE(v2.size() == 3);
  REQUIRE(v3.size() == 4);
  REQUIRE(v1[0] == jet.d1[0]);
  REQUIRE(v2[1] == jet.d2[1]);
  REQUIRE(v3[3] == jet.d3[3]);
  REQUIRE_THROWS_AS(graph_derivatives(patch, c, 4), PreconditionViolated);
  REQUIRE_THROWS_AS(graph_derivatives(patch, c, 0), PreconditionViolated);
}

TEST_CASE("curvature closed form: landmarks, normal, and positivity") {
  // The fully-quartered point is flat to machine precision.
  TorusPoint quarter = TorusPoint::at(Vec3{0.25, 0.25, 0.25});
  auto cf = curvature_closed_form(quarter);
  REQUIRE(std::fabs(cf.K) < 1e-12);

  // Normal: unit length and parallel to the symbol gradient.
  auto pts = sample_surface(2.0, 100, 0xbeefULL);
  for (const auto& p : pts) {
    auto c = curvature_closed_form(p);
    REQUIRE(std::fabs(norm3(c.nu) - 1.0) < 1e-12);
    Vec3 g = grad_h0(p);
    Vec3 cross{c.nu[1] * g[2] - c.nu[2] * g[1],
               c.nu[2] * g[0] - c.nu[0] * g[2],
               c.nu[0] * g[1] - c.nu[1] * g[0]};
    REQUIRE(norm3(cross) < 1e-12);
    REQUIRE(c.nu[0] * g[0] + c.nu[1] * g[1] + c.nu[2] * g[2] > 0.0);
    // The second band is strictly convex: positive curvature throughout.
    REQUIRE(c.K > 0.0);
  }

  REQUIRE_THROWS_AS(curvature_closed_form(TorusPoint::at(Vec3{0, 0, 0})),
                    AtCriticalPoint);
}

TEST_CASE("the two curvature routes agree at random surface points") {
  for (auto lambda : {2.0, 5.0, 6.0, 7.0, 10.0}) {
    auto pts = sample_surface(lambda, 1000,
                              0xc0ffee00ULL + (std::uint64_t)(lambda * 13));
    double worst = 0.0;
    for (const auto& p : pts) {
      auto cc = curvature_consistency(p);
      double rel = std::fabs(cc.closed_form - cc.graph_route) /
                   std::max(std::fabs(cc.closed_form), 1e-300);
      worst = std::max(worst, rel);
    }
    INFO("lambda = " << lambda << ", worst relative mismatch " << worst);
    REQUIRE(worst < 1e-9);
  }
}

TEST_CASE("curvature data is internally consistent") {
  for (auto lambda : {2.0, 5.0, 7.0}) {
    EnergyLevel energy = EnergyLevel::from_lambda(lambda);
    auto pts = sample_surface(lambda, 60, 0xfacadeULL + (std::uint64_t)lambda);
    for (const auto& p : pts) {
      FermiPatch patch = make_patch(p, energy);
      Vec2 c = patch.base_free();
      CurvatureData data = curvature_data(patch, c);
      GraphJet jet = graph_jet(patch, c);

      REQUIRE(std::fabs(norm3(data.nu) - 1.0) < 1e-12);

      // Graph-route consistency, absolute gate.
      double g2 = jet.d1[0] * jet.d1[0] + jet.d1[1] * jet.d1[1];
      double k_graph = data.second_form.det() / ((1.0 + g2) * (1.0 + g2));
      REQUIRE(std::fabs(k_graph - data.K) < 1e-10);

      // Eigen pairs: residuals, ordering, and sign conventions.
      for (auto [lam, v] : {std::pair{data.eig.lambda_plus, data.eig.u_plus},
                            std::pair{data.eig.lambda_minus, data.eig.u_minus}}) {
        Vec2 Bv = data.second_form.apply(v);
        REQUIRE(std::fabs(Bv[0] - lam * v[0]) < 1e-10);
        REQUIRE(std::fabs(Bv[1] - lam * v[1]) < 1e-10);
        REQUIRE(std::fabs(std::hypot(v[0], v[1]) - 1.0) < 1e-12);
        double lead = (std::fabs(v[0]) > 1e-14) ? v[0] : v[1];
        REQUIRE(lead > 0.0);
      }
      REQUIRE(std::fabs(data.eig.lambda_plus) <=
              std::fabs(data.eig.lambda_minus) + 1e-15);
    }
  }

  // Fixed-matrix conventions.
  Eig2 e = eigen_sym2(Mat2{2.0, 0.0, -1.0});
  REQUIRE(e.lambda_plus == -1.0);
  REQUIRE(e.lambda_minus == 2.0);
  REQUIRE(e.u_plus[1] == 1.0);
  REQUIRE(e.u_minus[0] == 1.0);
  Eig2 e2 = eigen_sym2(Mat2{1.0, 1.0, 1.0});
  REQUIRE(std::fabs(e2.lambda_plus) < 1e-15);
  REQUIRE(std::fabs(e2.lambda_minus - 2.0) < 1e-15);
  REQUIRE(e2.u_plus[0] > 0.0);  // sign convention on the leading component
}

TEST_CASE("umbilic jets: vanishing second form and frozen third derivatives") {
  EnergyLevel energy = EnergyLevel::from_lambda(6.0);
  FermiPatch patch;  // explicit chart solving the third axis
  patch.energy = energy;
  patch.solved_axis = 2;
  patch.branch = +1;
  patch.base = TorusPoint::at(Vec3{0.25, 0.25, 0.25});
  patch.radius = 0.05;
  GraphJet jet = graph_jet(patch, Vec2{0.25, 0.25});

  for (double d2 : jet.d2) REQUIRE(std::fabs(d2) < 1e-10);
  REQUIRE(std::fabs(jet.d3[0]) < 1e-10);  // diagonal cubics vanish
  REQUIRE(std::fabs(jet.d3[3]) < 1e-10);
  const double four_pi_sq = 4.0 * kPi * kPi;
  REQUIRE(std::fabs(jet.d3[1] + four_pi_sq) < 1e-10);  // mixed = -4 pi^2
  REQUIRE(std::fabs(jet.d3[2] + four_pi_sq) < 1e-10);
}

TEST_CASE("degenerate locus: umbilic inventory at the middle energy") {
  auto locus = zero_curvature_locus(EnergyLevel::from_lambda(6.0));
  REQUIRE(locus.size() == 8);
  for (const auto& pt : locus) {
    REQUIRE(pt.energy == 6.0);
    for (int j = 0; j < 3; ++j) {
      double d = std::min(circle_distance(pt.point.xi[j], 0.25),
                          circle_distance(pt.point.xi[j], 0.75));
      REQUIRE(d < 1e-9);
    }
    REQUIRE(pt.umbilic);
    REQUIRE_FALSE(pt.transversal);
    REQUIRE(std::fabs(curvature_closed_form(pt.point).K) < 1e-9);
    REQUIRE(std::fabs(h0(pt.point) - 6.0) < 1e-10);
  }
  // All 8 sign patterns of the three quarter coordinates appear once.
  std::vector<int> masks;
  for (const auto& pt : locus) {
    int m = 0;
    for (int j = 0; j < 3; ++j)
      if (circle_distance(pt.point.xi[j], 0.75) < 1e-9) m |= 1 << j;
    masks.push_back(m);
  }
  std::sort(masks.begin(), masks.end());
  for (int m = 0; m < 8; ++m) REQUIRE(masks[m] == m);
}

TEST_CASE("degenerate locus is empty outside the middle bands") {
  REQUIRE(zero_curvature_locus(EnergyLevel::from_lambda(2.0)).empty());
  REQUIRE(zero_curvature_locus(EnergyLevel::from_lambda(10.0)).empty());
}

TEST_CASE("middle-band locus satisfies the defining identities") {
  EnergyLevel energy = EnergyLevel::from_lambda(5.0);
  auto locus = zero_curvature_locus(energy);
  REQUIRE(locus.size() > 100);

  int axis_pattern_count = 0;
  for (const auto& pt : locus) {
    const TorusPoint& p = pt.point;
    REQUIRE(std::fabs(h0(p) - 5.0) < 1e-10);
    REQUIRE(std::fabs(curvature_closed_form(p).K) < 1e-9);

    // Defining polynomial identity of the locus.
    double e2 = p.a[0] * p.a[1] + p.a[1] * p.a[2] + p.a[2] * p.a[0];
    double e3 = p.a[0] * p.a[1] * p.a[2];
    REQUIRE(std::fabs(e2 - energy.E * e3) < 1e-9);

    // Either two cosines vanish or the cosine sums balance.
    int tiny = 0;
    for (int j = 0; j < 3; ++j)
      if (std::fabs(p.a[j]) < 1e-8) ++tiny;
    if (tiny >= 2) {
      ++axis_pattern_count;
    } else {
      double sum_a = p.a[0] + p.a[1] + p.a[2];
      double sum_inv = 1.0 / p.a[0] + 1.0 / p.a[1] + 1.0 / p.a[2];
      REQUIRE(std::fabs(sum_a - sum_inv) < 1e-8);
    }

    // The chart's free sine pair never collapses.
    int s = best_chart_axis(p);
    double free_max = 0.0;
    for (int j = 0; j < 3; ++j)
      if (j != s) free_max = std::max(free_max, std::fabs(p.b[j]));
    REQUIRE(free_max > 1e-6);

    REQUIRE_FALSE(pt.umbilic);
    REQUIRE(pt.transversal);
  }
  // Both quarter values on two axes, a third axis carrying the energy, and
  // both branches: 4 x 3 x 2 exactly representable points.
  REQUIRE(axis_pattern_count == 24);
}

TEST_CASE("transversality: closed form matches the finite-difference oracle") {
  EnergyLevel energy = EnergyLevel::from_lambda(5.0);
  auto locus = zero_curvature_locus(energy);
  REQUIRE(locus.size() > 50);

  std::size_t stride = std::max<std::size_t>(1, locus.size() / 50);
  for (std::size_t i = 0; i < locus.size(); i += stride) {
    const TorusPoint& p = locus[i].point;
    auto tv = transversality_check(locus[i]);

    Vec3 gk = fd_grad_curvature_numerator(p);
    Vec3 expect{p.b[1] * gk[2] - p.b[2] * gk[1],
                p.b[2] * gk[0] - p.b[0] * gk[2],
                p.b[0] * gk[1] - p.b[1] * gk[0]};
    for (int j = 0; j < 3; ++j)
      REQUIRE(std::fabs(tv.cross[j] - expect[j]) <=
              1e-6 * (1.0 + std::fabs(expect[j])));
    REQUIRE(tv.nonvanishing);
  }

  // At the umbilics every component carries a vanishing cosine difference.
  for (const auto& pt : zero_curvature_locus(EnergyLevel::from_lambda(6.0))) {
    auto tv = transversality_check(pt);
    REQUIRE(norm3(tv.cross) < 1e-8);
    REQUIRE_FALSE(tv.nonvanishing);
  }
}

TEST_CASE("gradient dichotomy: symbol-curvature independence in charts") {
  // Where the full-space gradients are independent, the in-chart curvature
  // gradient is nonzero; at umbilics both degenerate.
  EnergyLevel energy = EnergyLevel::from_lambda(5.0);
  auto locus = zero_curvature_locus(energy);
  std::size_t stride = std::max<std::size_t>(1, locus.size() / 25);
  const double h = 1e-6;

  for (std::size_t i = 0; i < locus.size(); i += stride) {
    const TorusPoint& p = locus[i].point;
    auto tv = transversality_check(p);
    if (norm3(tv.cross) <= 1e-6) continue;

    FermiPatch patch = make_patch(p, energy);
    Vec2 c = patch.base_free();
    Vec2 grad{};
    for (int t = 0; t < 2; ++t) {
      Vec2 qp = c, qm = c;
      qp[t] += h;
      qm[t] -= h;
      double kp = curvature_closed_form(lift(patch, qp, false)).K;
      double km = curvature_closed_form(lift(patch, qm, false)).K;
      grad[t] = (kp - km) / (2.0 * h);
    }
    REQUIRE(std::hypot(grad[0], grad[1]) > 1e-8);
  }

  // Umbilic: in-chart curvature gradient collapses along with the cross.
  TorusPoint umb = TorusPoint::at(Vec3{0.25, 0.25, 0.25});
  FermiPatch patch;
  patch.energy = EnergyLevel::from_lambda(6.0);
  patch.solved_axis = 2;
  patch.branch = +1;
  patch.base = umb;
  patch.radius = 0.05;
  Vec2 c{0.25, 0.25};
  Vec2 grad{};
  for (int t = 0; t < 2; ++t) {
    Vec2 qp = c, qm = c;
    qp[t] += h;
    qm[t] -= h;
    grad[t] = (curvature_closed_form(lift(patch, qp, false)).K -
               curvature_closed_form(lift(patch, qm, false)).K) /
              (2.0 * h);
  }
  REQUIRE(std::hypot(grad[0], grad[1]) < 1e-6);
  REQUIRE(norm3(transversality_check(umb).cross) < 1e-8);
}

TEST_CASE("tangent identities at degenerate points with nonzero cosines") {
  EnergyLevel energy = EnergyLevel::from_lambda(5.0);
  auto locus = zero_curvature_locus(energy);

  int qualified = 0;
  for (const auto& pt : locus) {
    const TorusPoint& p = pt.point;
    double amin = std::min({std::fabs(p.a[0]), std::fabs(p.a[1]),
                            std::fabs(p.a[2])});
    if (amin <= 1e-8) continue;
    ++qualified;

    NullDirectionReport rep = null_direction_identity(p, energy);
    REQUIRE(rep.eigvec_residual < 1e-9);
    REQUIRE(std::fabs(rep.b_dot_c) < 1e-9);
    REQUIRE(rep.directional_value > 0.0);
    double rel = std::fabs(std::fabs(rep.directional_value) -
                           rep.expected_magnitude) /
                 rep.expected_magnitude;
    REQUIRE(rel < 1e-8);

    // The claimed magnitude in closed form.
    double e3 = p.a[0] * p.a[1] * p.a[2];
    double claimed = std::fabs((1.0 - energy.E * energy.E) *
                               (3.0 - energy.E * e3));
    REQUIRE(std::fabs(rep.expected_magnitude - claimed) < 1e-14);
  }
  REQUIRE(qualified > 100);

  // Precondition guards.
  REQUIRE_THROWS_AS(
      null_direction_identity(TorusPoint::at(Vec3{0.25, 0.25, 0.25}),
                              EnergyLevel::from_lambda(6.0)),
      PreconditionViolated);  // cosines vanish at the umbilic
  REQUIRE_THROWS_AS(
      null_direction_identity(TorusPoint::at(Vec3{0.1, 0.2, 0.3}),
                              EnergyLevel::from_lambda(5.0)),
      PreconditionViolated);  // not on the surface
}
