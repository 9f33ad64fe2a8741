// Fourier transforms of cutoff surface measures and empirical decay-rate
// scans.
//
// The central object is the oscillatory integral
//
//   I(x) = integral over the chart square of
//          chi(xi') * exp(2*pi*i*(x.xi' + x_s*f(xi'))) / |grad h0|  dxi'
//
// evaluated by tensorized Gauss-Legendre panels whose size is chosen from a
// per-axis phase-variation budget, with a two-level (order 12 vs order 10)
// error estimate and panel doubling until the estimate clears the sample
// tolerance.  Samples that exhaust the refinement budget are flagged, never
// fabricated.  A decay scan fits |I(R*d)| ~ R^{-k} over a dyadic radius
// ladder for a deterministic bundle of directions.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include <fermires/detail/gauss_legendre.hpp>
#include <fermires/errors.hpp>
#include <fermires/fermi_geometry.hpp>
#include <fermires/taylor_newton.hpp>

namespace fermires {

// ---------------------------------------------------------------------------
// Cutoff functions
// ---------------------------------------------------------------------------

enum class CutoffProfile { SmoothBump };

// A radially symmetric C-infinity bump in chart coordinates, equal to 1 at
// its center and supported in the open disc of the given radius.
struct CutoffSpec {
  Vec2 center{};
  double radius{0.0};
  CutoffProfile profile{CutoffProfile::SmoothBump};
};

inline double cutoff_value(const CutoffSpec& spec, const Vec2& xi_free) {
  double dx = xi_free[0] - spec.center[0];
  double dy = xi_free[1] - spec.center[1];
  double rho2 = (dx * dx + dy * dy) / (spec.radius * spec.radius);
  if (rho2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - rho2));
}

// ---------------------------------------------------------------------------
// Single oscillatory samples
// ---------------------------------------------------------------------------

struct OscSample {
  Vec3 x{};                         // frequency point
  std::complex<double> value{};     // I(x)
  double quad_error{0.0};           // two-level quadrature error estimate
  bool unreliable{false};           // estimate failed the sample tolerance
  bool budget_exceeded{false};      // refinement cap hit before convergence
};

// Knobs for the adaptive quadrature.  The defaults keep roughly two
// oscillation periods per panel for the order-12 rule and allow three
// panel doublings on top of the phase-derived grid.
struct OscBudget {
  double phase_per_panel{4.0 * kPi};
  int min_panels{4};
  int panel_cap{8192};
  int max_refinements{3};
  double target_factor{5e-4};       // refine until err <= factor*|value|
  double flag_factor{1e-3};         // sample tolerance for the reliability flag
  double value_floor{1e-12};
};

namespace detail {

// Per-axis tables of everything the integrand needs at the quadrature nodes
// of a uniform panel grid over [lo, lo + span].
struct AxisTable {
  std::vector<double> pos;     // chart coordinate
  std::vector<double> dc2;     // squared offset from the cutoff center
  std::vector<double> cosv;    // cos(2*pi*pos)
  std::vector<double> xdot;    // x-component * pos
};

template <std::size_t N>
inline AxisTable build_axis_table(const std::array<GLNode, N>& rule,
                                  double lo, double span, int panels,
                                  double center, double xcomp) {
  AxisTable t;
  std::size_t total = N * (std::size_t)panels;
  t.pos.resize(total);
  t.dc2.resize(total);
  t.cosv.resize(total);
  t.xdot.resize(total);
  double h = span / panels;
  for (int p = 0; p < panels; ++p) {
    double mid = lo + (p + 0.5) * h;
    for (std::size_t k = 0; k < N; ++k) {
      std::size_t idx = (std::size_t)p * N + k;
      double q = mid + 0.5 * h * rule[k].x;
      t.pos[idx] = q;
      double d = q - center;
      t.dc2[idx] = d * d;
      t.cosv[idx] = std::cos(kTwoPi * q);
      t.xdot[idx] = xcomp * q;
    }
  }
  return t;
}

// One full pass of a tensorized fixed-order rule over an nx-by-ny panel
// grid; returns the per-panel partial sums so two rules can be compared
// panel by panel.
template <std::size_t N>
inline void tensor_pass(const std::array<GLNode, N>& rule,
                        const FermiPatch& patch, const CutoffSpec& cutoff,
                        const Vec3& x, int nx, int ny,
                        std::vector<std::complex<double>>& panel_sums) {
  auto fa = patch.free_axes();
  int s = patch.solved_axis;
  double E = patch.energy.E;
  double r2 = cutoff.radius * cutoff.radius;
  Vec2 lo{cutoff.center[0] - cutoff.radius, cutoff.center[1] - cutoff.radius};
  double span = 2.0 * cutoff.radius;
  double hx = span / nx, hy = span / ny;
  double jac = 0.25 * hx * hy;  // maps [-1,1]^2 weights to the panel

  AxisTable tx = build_axis_table(rule, lo[0], span, nx, cutoff.center[0],
                                  x[fa[0]]);
  AxisTable ty = build_axis_table(rule, lo[1], span, ny, cutoff.center[1],
                                  x[fa[1]]);
  double xs = x[s];
  double solved_sign = (patch.branch > 0) ? 1.0 : -1.0;

  panel_sums.assign((std::size_t)nx * ny, {0.0, 0.0});
  for (int py = 0; py < ny; ++py) {
    for (std::size_t ky = 0; ky < N; ++ky) {
      std::size_t jy = (std::size_t)py * N + ky;
      double wy = rule[ky].w;
      double dy2 = ty.dc2[jy];
      double ay = ty.cosv[jy];
      double phy = ty.xdot[jy];
      for (int px = 0; px < nx; ++px) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t kx = 0; kx < N; ++kx) {
          std::size_t jx = (std::size_t)px * N + kx;
          double rho2 = (tx.dc2[jx] + dy2) / r2;
          if (rho2 >= 1.0) continue;
          double u = E - tx.cosv[jx] - ay;
          double one_minus_u2 = 1.0 - u * u;
          if (one_minus_u2 <= 0.0) continue;  // cannot happen inside a patch
          double chi = std::exp(1.0 - 1.0 / (1.0 - rho2));
          // Solved coordinate on the requested branch, continuous over the
          // patch because |cos| < 1 strictly inside.
          double fplus = std::acos(u) * (1.0 / kTwoPi);
          double fs = (solved_sign > 0.0) ? fplus : 1.0 - fplus;
          double grad_norm =
              kTwoPi * 2.0 *
              std::sqrt(1.0 - tx.cosv[jx] * tx.cosv[jx] + 1.0 - ay * ay +
                        one_minus_u2);
          double weight = rule[kx].w * wy * chi / grad_norm;
          double theta = kTwoPi * (tx.xdot[jx] + phy + xs * fs);
          acc += std::complex<double>(weight * std::cos(theta),
                                      weight * std::sin(theta));
        }
        panel_sums[(std::size_t)py * nx + px] += jac * acc;
      }
    }
  }
}

// Largest per-axis phase rate |x_t + x_s * df/dt| over the cutoff support,
// with a safety margin; drives the initial phase-based panel counts.  The
// signed form matters: along directions near the surface normal the two
// terms cancel (that is what makes the point stationary), and a crude
// |x_t| + |x_s| sup|df| bound would demand several times the panels the
// oscillation actually requires.
inline Vec2 phase_rate_bound(const FermiPatch& patch, const CutoffSpec& cutoff,
                             const Vec3& x) {
  auto fa = patch.free_axes();
  Vec2 g{0.0, 0.0};
  const int n = 17;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vec2 q{cutoff.center[0] + cutoff.radius * (2.0 * i / (n - 1) - 1.0),
             cutoff.center[1] + cutoff.radius * (2.0 * j / (n - 1) - 1.0)};
      double dx = q[0] - cutoff.center[0], dy = q[1] - cutoff.center[1];
      if (dx * dx + dy * dy >= cutoff.radius * cutoff.radius) continue;
      GraphJet jet = graph_jet(patch, q, false);
      g[0] = std::max(g[0],
                      std::fabs(x[fa[0]] + x[patch.solved_axis] * jet.d1[0]));
      g[1] = std::max(g[1],
                      std::fabs(x[fa[1]] + x[patch.solved_axis] * jet.d1[1]));
    }
  }
  g[0] *= 1.25;
  g[1] *= 1.25;
  return g;
}

}  // namespace detail

// Fourier transform of the cutoff surface measure at frequency x.  The
// integrand is sampled over the chart square circumscribing the cutoff
// support; panel counts follow the per-axis phase budget and are doubled
// until the order-12 vs order-10 discrepancy clears the target tolerance.
inline OscSample surface_measure_ft(const FermiPatch& patch,
                                    const CutoffSpec& cutoff, const Vec3& x,
                                    const OscBudget& budget = {}) {
  if (!(cutoff.radius > 0.0)) {
    throw PreconditionViolated("cutoff radius must be positive");
  }
  Vec2 base = patch.base_free();
  double off = std::hypot(cutoff.center[0] - base[0],
                          cutoff.center[1] - base[1]);
  if (off + cutoff.radius > patch.radius * (1.0 + 1e-12)) {
    throw PreconditionViolated(
        "cutoff support must stay inside the chart patch");
  }

  Vec2 rates = detail::phase_rate_bound(patch, cutoff, x);
  double span = 2.0 * cutoff.radius;
  int counts[2];
  for (int t = 0; t < 2; ++t) {
    double need = span * kTwoPi * rates[t] / budget.phase_per_panel;
    counts[t] = std::clamp((int)std::ceil(need), budget.min_panels,
                           budget.panel_cap);
  }

  OscSample sample;
  sample.x = x;
  // A sample certainly below the fitting floor (|value| + error under the
  // floor) only ever gets excluded from fits, so chasing relative accuracy
  // there would burn panels on dead samples.
  auto floor_settled = [&budget](double err, double magnitude) {
    return magnitude + err < budget.value_floor;
  };
  std::vector<std::complex<double>> fine, coarse;
  for (int attempt = 0;; ++attempt) {
    detail::tensor_pass(detail::kGL12, patch, cutoff, x, counts[0], counts[1],
                        fine);
    detail::tensor_pass(detail::kGL10, patch, cutoff, x, counts[0], counts[1],
                        coarse);
    std::complex<double> total{0.0, 0.0};
    double err = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      total += fine[i];
      err += std::abs(fine[i] - coarse[i]);
    }
    sample.value = total;
    sample.quad_error = err;
    double scale = std::max(std::abs(total), budget.value_floor);
    if (err <= budget.target_factor * scale) break;
    if (floor_settled(err, std::abs(total))) break;
    bool can_double = attempt < budget.max_refinements &&
                      std::max(counts[0], counts[1]) * 2 <= budget.panel_cap;
    if (!can_double) {
      sample.budget_exceeded = true;
      break;
    }
    counts[0] *= 2;
    counts[1] *= 2;
  }
  double av = std::abs(sample.value);
  double scale = std::max(av, budget.value_floor);
  sample.unreliable = !(sample.quad_error < budget.flag_factor * scale ||
                        floor_settled(sample.quad_error, av));
  return sample;
}

// ---------------------------------------------------------------------------
// Decay scans
// ---------------------------------------------------------------------------

struct DecayFit {
  Vec3 direction{};                  // unit frequency direction
  std::vector<double> radii;         // dyadic ladder, strictly increasing
  std::vector<OscSample> samples;    // one per radius, same order
  double fitted_exponent{std::numeric_limits<double>::quiet_NaN()};
  double fit_residual{0.0};          // max |log-log point - fitted line|
  bool tainted{false};               // some used sample was unreliable
  std::optional<Rational> predicted; // filled by callers with Newton data
};

// Deterministic quasi-uniform direction bundle.
inline std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> dirs;
  dirs.reserve((std::size_t)std::max(n, 0));
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    dirs.push_back(Vec3{r * std::cos(phi), r * std::sin(phi), z});
  }
  return dirs;
}

// Unit normal of the level set at a surface point.
inline Vec3 surface_normal(const TorusPoint& p) {
  double n = std::sqrt(p.b[0] * p.b[0] + p.b[1] * p.b[1] + p.b[2] * p.b[2]);
  if (n < 1e-10) throw AtCriticalPoint("no normal direction at a critical point");
  return Vec3{p.b[0] / n, p.b[1] / n, p.b[2] / n};
}

namespace detail {

// The decay ladder approaches its asymptote from below (local log-log
// slopes still rise visibly through the mid rungs), so the exponent is
// fitted over the trailing rungs only.
inline constexpr int kFitWindow = 4;

inline void fit_decay_line(DecayFit& fit, double value_floor) {
  // Keep samples above the quadrature noise floor, then least-squares
  // -log|I| against log R over the last kFitWindow usable rungs; earlier
  // rungs are pre-asymptotic and would bias the slope low.
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < fit.samples.size(); ++i) {
    if (std::abs(fit.samples[i].value) >= value_floor) usable.push_back(i);
  }
  if (usable.size() > (std::size_t)kFitWindow) {
    usable.erase(usable.begin(), usable.end() - kFitWindow);
  }
  std::vector<double> ts, ys;
  for (std::size_t i : usable) {
    ts.push_back(std::log(fit.radii[i]));
    ys.push_back(-std::log(std::abs(fit.samples[i].value)));
    if (fit.samples[i].unreliable) fit.tainted = true;
  }
  if (ts.size() < 2) {
    // Decayed through the floor too quickly to fit; not a quadrature
    // failure, so the exponent simply stays unset.
    return;
  }
  double n = (double)ts.size();
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
    stt += ts[i] * ts[i];
    sty += ts[i] * ys[i];
  }
  double denom = n * stt - st * st;
  double slope = (n * sty - st * sy) / denom;
  double intercept = (sy - slope * st) / n;
  fit.fitted_exponent = slope;
  double resid = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    resid = std::max(resid, std::fabs(ys[i] - (intercept + slope * ts[i])));
  }
  fit.fit_residual = resid;
}

}  // namespace detail

// Fits the decay exponent along the exact surface normal at the patch base
// plus a Fibonacci bundle of `directions` further unit vectors, over the
// dyadic ladder R_min, 2*R_min, ..., <= R_max.  Entry 0 is always the
// normal direction.  Samples are independent, so the work parallelizes
// over directions; output order is deterministic either way.
inline std::vector<DecayFit> decay_scan(const FermiPatch& patch,
                                        const CutoffSpec& cutoff,
                                        int directions, double R_min,
                                        double R_max,
                                        const OscBudget& budget = {},
                                        int threads = 1) {
  if (directions < 1) {
    throw PreconditionViolated("need at least one scan direction");
  }
  if (!(R_min >= 16.0)) {
    throw PreconditionViolated("decay fits need R_min >= 16");
  }
  if (!(R_max >= 64.0 * R_min)) {
    throw PreconditionViolated("decay fits need R_max/R_min >= 2^6");
  }
  std::vector<double> radii;
  for (double R = R_min; R <= R_max * (1.0 + 1e-9); R *= 2.0) {
    radii.push_back(R);
  }
  if (radii.size() < 8) {
    throw PreconditionViolated("dyadic radius ladder needs at least 8 rungs");
  }

  std::vector<Vec3> dirs;
  dirs.push_back(surface_normal(patch.base));
  for (const Vec3& d : fibonacci_sphere(directions)) dirs.push_back(d);

  std::vector<DecayFit> fits(dirs.size());
  auto run_direction = [&](std::size_t d) {
    DecayFit& fit = fits[d];
    fit.direction = dirs[d];
    fit.radii = radii;
    fit.samples.reserve(radii.size());
    for (double R : radii) {
      Vec3 x{R * dirs[d][0], R * dirs[d][1], R * dirs[d][2]};
      fit.samples.push_back(surface_measure_ft(patch, cutoff, x, budget));
    }
    detail::fit_decay_line(fit, budget.value_floor);
  };

  int workers = std::clamp(threads, 1, (int)dirs.size());
  if (workers <= 1) {
    for (std::size_t d = 0; d < dirs.size(); ++d) run_direction(d);
  } else {
    std::vector<std::thread> pool;
    std::size_t total = dirs.size();
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t d = (std::size_t)w; d < total; d += (std::size_t)workers) {
          run_direction(d);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return fits;
}

// Smallest fitted exponent over a scan (the empirical decay order k),
// ignoring directions whose fit never materialized.
inline double min_fitted_exponent(const std::vector<DecayFit>& fits) {
  double best = std::numeric_limits<double>::infinity();
  for (const DecayFit& f : fits) {
    if (std::isnan(f.fitted_exponent)) continue;
    best = std::min(best, f.fitted_exponent);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Admissible weight/Lebesgue ranges for a given decay order
// ---------------------------------------------------------------------------

struct AdmissibleRange {
  Rational r_max;  // largest weight exponent r
  Rational p_max;  // largest Lebesgue index p, from 1/p = 1/2 + 1/r_max
};

inline AdmissibleRange weight_admissible_range(const Rational& k) {
  if (!(k > Rational(0) && k <= Rational(1))) {
    throw PreconditionViolated("decay order must lie in (0, 1]");
  }
  Rational r_max = Rational(2) + Rational(2) * k;
  Rational p_max = Rational(2) * r_max / (r_max + Rational(2));
  return AdmissibleRange{r_max, p_max};
}

}  // namespace fermires
