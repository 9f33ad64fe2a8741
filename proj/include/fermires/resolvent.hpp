// Lattice resolvent kernels and norm scans.
//
// The kernel R(z)(x, 0) is the inverse symbol transform
//
//   K(x) = (1/n^3) * sum over the uniform n^3 torus grid of
//          exp(2*pi*i*m.x/n) / (h0(m/n) - z),
//
// computed by a cosine-folded staged contraction that exploits the
// evenness of h0 in every axis: only the (n/2+1)^3 octant of the grid is
// touched, one plane at a time, so memory stays O(n^2) while the grid is
// doubled until the value at the origin stabilizes.  Finite sections of
// the convolution operator K(x-y) are measured in l^p -> l^p' norms by a
// Boyd-style nonlinear power iteration whose matrix-vector products run
// through FFT convolution; the reported number is a lower bound on the
// truncated operator norm, labeled with its convergence flag.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <fftw3.h>

#include <Eigen/Dense>

#include <fermires/errors.hpp>
#include <fermires/torus_symbol.hpp>

namespace fermires {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Resolvent kernel on a lattice box
// ---------------------------------------------------------------------------

struct KernelOptions {
  int grid_cap{1024};          // largest torus grid tried while doubling
  double rel_tol{1e-8};        // relative stabilization target at x = 0
  bool require_convergence{true};  // throw NoConvergence at the cap if unmet
};

// Tabulated kernel column over the centered cube |x|_inf <= box_radius.
struct ResolventGrid {
  Complex z{};
  int grid_n{0};       // torus grid that produced the table (per axis)
  int box_radius{0};
  bool converged{true};
  std::vector<Complex> table;  // (2L+1)^3, x-major ordering

  int side() const { return 2 * box_radius + 1; }
  const Complex& at(int x, int y, int zz) const {
    int L = box_radius;
    return table[(std::size_t)((x + L) * side() + (y + L)) * side() +
                 (std::size_t)(zz + L)];
  }
};

namespace detail {

// One staged cosine contraction at a fixed torus grid n; returns the
// nonnegative octant 0 <= x,y,z <= L (the kernel is even per axis).
inline std::vector<Complex> kernel_octant(Complex z, int n, int L) {
  int half = n / 2;
  int m_count = half + 1;
  int out = L + 1;

  // cos(2*pi*m*x/n) tables and fold weights w(0) = w(n/2) = 1, else 2.
  std::vector<double> cosmx((std::size_t)m_count * out);
  for (int m = 0; m < m_count; ++m) {
    for (int x = 0; x < out; ++x) {
      cosmx[(std::size_t)m * out + x] = std::cos(kTwoPi * m * x / n);
    }
  }
  std::vector<double> fold(m_count, 2.0);
  fold[0] = 1.0;
  fold[m_count - 1] = 1.0;
  std::vector<double> symbol_part(m_count);
  for (int m = 0; m < m_count; ++m) {
    symbol_part[m] = 2.0 - 2.0 * std::cos(kTwoPi * m / n);
  }

  // S(m1, x2, x3): the two inner axes contracted for each outer plane.
  std::vector<Complex> S((std::size_t)m_count * out * out, Complex{0, 0});
  std::vector<Complex> g((std::size_t)m_count * m_count);
  std::vector<Complex> t1((std::size_t)m_count * out);
  for (int m1 = 0; m1 < m_count; ++m1) {
    double h1 = symbol_part[m1];
    for (int m2 = 0; m2 < m_count; ++m2) {
      double h12 = h1 + symbol_part[m2];
      double w2 = fold[m2];
      Complex* grow = &g[(std::size_t)m2 * m_count];
      for (int m3 = 0; m3 < m_count; ++m3) {
        grow[m3] = w2 * fold[m3] / (Complex(h12 + symbol_part[m3]) - z);
      }
    }
    // t1(m2, x3) = sum_m3 g(m2, m3) cos(m3 x3); accumulate rows of the
    // cosine table so the inner loop is stride-1.
    std::fill(t1.begin(), t1.end(), Complex{0, 0});
    for (int m2 = 0; m2 < m_count; ++m2) {
      const Complex* grow = &g[(std::size_t)m2 * m_count];
      Complex* trow = &t1[(std::size_t)m2 * out];
      for (int m3 = 0; m3 < m_count; ++m3) {
        Complex c = grow[m3];
        const double* crow = &cosmx[(std::size_t)m3 * out];
        for (int x3 = 0; x3 < out; ++x3) trow[x3] += c * crow[x3];
      }
    }
    // S(m1, x2, x3) = sum_m2 cos(m2 x2) t1(m2, x3)
    Complex* Splane = &S[(std::size_t)m1 * out * out];
    for (int m2 = 0; m2 < m_count; ++m2) {
      const double* crow = &cosmx[(std::size_t)m2 * out];
      const Complex* trow = &t1[(std::size_t)m2 * out];
      for (int x2 = 0; x2 < out; ++x2) {
        double c = crow[x2];
        Complex* Srow = &Splane[(std::size_t)x2 * out];
        for (int x3 = 0; x3 < out; ++x3) Srow[x3] += c * trow[x3];
      }
    }
  }

  // K(x1, x2, x3) = (1/n^3) sum_m1 w1 cos(m1 x1) S(m1, x2, x3)
  std::vector<Complex> K((std::size_t)out * out * out, Complex{0, 0});
  double scale = 1.0 / ((double)n * n * n);
  for (int m1 = 0; m1 < m_count; ++m1) {
    const Complex* Splane = &S[(std::size_t)m1 * out * out];
    const double* crow = &cosmx[(std::size_t)m1 * out];
    for (int x1 = 0; x1 < out; ++x1) {
      double c = fold[m1] * crow[x1];
      Complex* Kplane = &K[(std::size_t)x1 * out * out];
      for (int i = 0; i < out * out; ++i) Kplane[i] += c * Splane[i];
    }
  }
  for (auto& v : K) v *= scale;
  return K;
}

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace detail

// Tabulates R(z)(x, 0) for |x|_inf <= box_radius, doubling the torus grid
// from grid_n until the origin value stabilizes to rel_tol.
inline ResolventGrid kernel(Complex z, int grid_n, int box_radius,
                            const KernelOptions& opts = {}) {
  if (z.imag() == 0.0 && z.real() >= -1e-12 && z.real() <= 12.0 + 1e-12) {
    throw OnSpectrum("spectral parameter lies on [0, 12]");
  }
  if (grid_n < 64 || !detail::is_power_of_two(grid_n)) {
    throw PreconditionViolated("torus grid must be a power of two >= 64");
  }
  if (box_radius < 1 || 4 * box_radius > grid_n) {
    throw PreconditionViolated(
        "kernel box must satisfy box_radius <= grid_n / 4");
  }

  ResolventGrid grid;
  grid.z = z;
  grid.box_radius = box_radius;
  int L = box_radius;

  std::vector<Complex> octant;
  Complex prev0{0, 0};
  bool have_prev = false;
  grid.converged = false;
  for (int n = grid_n;; n *= 2) {
    octant = detail::kernel_octant(z, n, L);
    grid.grid_n = n;
    Complex k0 = octant[0];
    if (have_prev &&
        std::abs(k0 - prev0) < opts.rel_tol * std::max(std::abs(k0), 1e-300)) {
      grid.converged = true;
      break;
    }
    prev0 = k0;
    have_prev = true;
    if (2 * n > opts.grid_cap) break;
  }
  if (!grid.converged && opts.require_convergence) {
    throw NoConvergence("kernel did not stabilize before the grid cap");
  }

  // Mirror the octant onto the full cube (evenness per axis).
  int out = L + 1, side = 2 * L + 1;
  grid.table.resize((std::size_t)side * side * side);
  for (int x = -L; x <= L; ++x) {
    for (int y = -L; y <= L; ++y) {
      for (int w = -L; w <= L; ++w) {
        const Complex& v =
            octant[((std::size_t)std::abs(x) * out + std::abs(y)) * out +
                   std::abs(w)];
        grid.table[((std::size_t)(x + L) * side + (y + L)) * side + (w + L)] =
            v;
      }
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

struct WeightSpec {
  std::vector<std::array<int, 3>> support;
  std::vector<double> values;  // strictly positive, aligned with support
  double r_norm{0.0};          // l^r norm for the configured r
};

// r may be infinity, in which case the norm is the largest value.
inline WeightSpec make_weight(std::vector<std::array<int, 3>> support,
                              std::vector<double> values, double r) {
  if (support.size() != values.size() || support.empty()) {
    throw PreconditionViolated("weight support and values must align");
  }
  for (double v : values) {
    if (!(v > 0.0)) {
      throw PreconditionViolated("weight values must be strictly positive");
    }
  }
  WeightSpec w;
  w.support = std::move(support);
  w.values = std::move(values);
  if (std::isinf(r)) {
    w.r_norm = *std::max_element(w.values.begin(), w.values.end());
  } else {
    if (!(r >= 1.0)) throw PreconditionViolated("weight exponent must be >= 1");
    double acc = 0.0;
    for (double v : w.values) acc += std::pow(v, r);
    w.r_norm = std::pow(acc, 1.0 / r);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Finite-section l^p -> l^p' norms
// ---------------------------------------------------------------------------

struct SectionNorm {
  double value{0.0};    // best Rayleigh quotient found (a lower bound)
  bool converged{true}; // every restart's iteration stabilized
  int iterations{0};    // total iterations spent
};

namespace detail {

inline int next_smooth(int n) {
  // smallest 2,3-smooth integer >= n (keeps FFTW sizes fast)
  for (int c = n;; ++c) {
    int m = c;
    while (m % 2 == 0) m /= 2;
    while (m % 3 == 0) m /= 3;
    if (m == 1) return c;
  }
}

// Circular-convolution engine: y = K * x over the section box, where the
// kernel cube is zero-padded to a smooth size P >= 2*(2s+1) - 1 so wrap
// never aliases the section.
class SectionOp {
 public:
  SectionOp(const ResolventGrid& grid, int section_radius)
      : s_(section_radius), side_(2 * section_radius + 1),
        P_(next_smooth(2 * (2 * section_radius + 1) - 1)) {
    std::size_t total = (std::size_t)P_ * P_ * P_;
    buf_ = fftw_alloc_complex(total);
    spec_ = fftw_alloc_complex(total);
    kspec_.resize(total);
    fwd_ = fftw_plan_dft_3d(P_, P_, P_, buf_, spec_, FFTW_FORWARD,
                            FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_3d(P_, P_, P_, spec_, buf_, FFTW_BACKWARD,
                            FFTW_ESTIMATE);

    // Kernel cube stored wrapped: offset o at index o mod P.
    std::memset(buf_, 0, total * sizeof(fftw_complex));
    int reach = 2 * section_radius;
    for (int x = -reach; x <= reach; ++x) {
      for (int y = -reach; y <= reach; ++y) {
        for (int z = -reach; z <= reach; ++z) {
          const Complex& v = grid.at(x, y, z);
          std::size_t idx = wrap_index(x, y, z);
          buf_[idx][0] = v.real();
          buf_[idx][1] = v.imag();
        }
      }
    }
    fftw_execute(fwd_);
    for (std::size_t i = 0; i < total; ++i) {
      kspec_[i] = Complex(spec_[i][0], spec_[i][1]);
    }
  }

  SectionOp(const SectionOp&) = delete;
  SectionOp& operator=(const SectionOp&) = delete;

  ~SectionOp() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
    fftw_free(spec_);
  }

  int dim() const { return side_ * side_ * side_; }

  // y = A x with A = [K(x - y)] over the section box.
  void apply(const std::vector<Complex>& x, std::vector<Complex>& y) const {
    run(x, y, /*adjoint=*/false);
  }

  // y = A^H x; the kernel cube is even, so the adjoint is the conjugate
  // kernel convolution over the same windows.
  void apply_adjoint(const std::vector<Complex>& x,
                     std::vector<Complex>& y) const {
    run(x, y, /*adjoint=*/true);
  }

 private:
  std::size_t wrap_index(int x, int y, int z) const {
    auto m = [&](int t) { return (std::size_t)((t % P_ + P_) % P_); };
    return (m(x) * P_ + m(y)) * P_ + m(z);
  }

  void run(const std::vector<Complex>& x, std::vector<Complex>& y,
           bool adjoint) const {
    std::size_t total = (std::size_t)P_ * P_ * P_;
    std::memset(buf_, 0, total * sizeof(fftw_complex));
    // Input embedded in the leading [0, side)^3 window.
    for (int a = 0; a < side_; ++a) {
      for (int b = 0; b < side_; ++b) {
        for (int c = 0; c < side_; ++c) {
          const Complex& v =
              x[((std::size_t)a * side_ + b) * side_ + c];
          std::size_t idx = ((std::size_t)a * P_ + b) * P_ + c;
          buf_[idx][0] = v.real();
          buf_[idx][1] = v.imag();
        }
      }
    }
    fftw_execute(fwd_);
    double inv = 1.0 / (double)total;
    for (std::size_t i = 0; i < total; ++i) {
      Complex f(spec_[i][0], spec_[i][1]);
      Complex k = adjoint ? std::conj(kspec_[i]) : kspec_[i];
      Complex prod = f * k * inv;
      spec_[i][0] = prod.real();
      spec_[i][1] = prod.imag();
    }
    fftw_execute(bwd_);
    y.resize((std::size_t)dim());
    // Output read back from the same leading window.
    for (int a = 0; a < side_; ++a) {
      for (int b = 0; b < side_; ++b) {
        for (int c = 0; c < side_; ++c) {
          std::size_t idx = ((std::size_t)a * P_ + b) * P_ + c;
          y[((std::size_t)a * side_ + b) * side_ + c] =
              Complex(buf_[idx][0], buf_[idx][1]);
        }
      }
    }
  }

  int s_, side_, P_;
  fftw_complex* buf_;
  fftw_complex* spec_;
  std::vector<Complex> kspec_;
  fftw_plan fwd_, bwd_;
};

inline double lp_norm(const std::vector<Complex>& v, double p) {
  double acc = 0.0;
  for (const Complex& c : v) acc += std::pow(std::abs(c), p);
  return std::pow(acc, 1.0 / p);
}

// One Boyd nonlinear power iteration from a given start, for l^p -> l^q
// with p in (1, 2] and q = dual exponent of p.  Returns the best Rayleigh
// quotient ||A x||_q with ||x||_p = 1 and whether it stabilized.
template <typename Apply, typename ApplyAdjoint>
inline std::pair<double, bool> boyd_iteration(const Apply& apply,
                                              const ApplyAdjoint& adjoint,
                                              std::vector<Complex> x, double p,
                                              double tol, int itmax,
                                              int* iterations_out = nullptr) {
  double q = p / (p - 1.0);  // target space exponent
  double nx = lp_norm(x, p);
  for (auto& c : x) c /= nx;
  std::vector<Complex> y, g, xn;
  double prev = -1.0;
  bool converged = false;
  int it = 0;
  for (; it < itmax; ++it) {
    apply(x, y);
    double gamma = lp_norm(y, q);
    if (gamma < 1e-300) break;
    if (prev >= 0.0 && std::fabs(gamma - prev) <= tol * gamma) {
      prev = std::max(prev, gamma);
      converged = true;
      break;
    }
    prev = std::max(prev, gamma);
    // Dual map of y in l^q, then pull back and dual-map into l^p.
    std::vector<Complex> phi(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      double a = std::abs(y[i]);
      phi[i] = (a == 0.0) ? Complex{0, 0}
                          : std::pow(a, q - 1.0) * (y[i] / a);
    }
    adjoint(phi, g);
    xn.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      double a = std::abs(g[i]);
      xn[i] = (a == 0.0) ? Complex{0, 0}
                         : std::pow(a, 1.0 / (p - 1.0)) * (g[i] / a);
    }
    double nn = lp_norm(xn, p);
    if (nn < 1e-300) break;
    for (auto& c : xn) c /= nn;
    x.swap(xn);
  }
  if (iterations_out) *iterations_out += it;
  return {std::max(prev, 0.0), converged};
}

}  // namespace detail

// Operator norm of the section matrix [K(x-y)] from l^p into the dual
// index l^p', via FFT-convolution matvecs and the Boyd iteration with
// `restarts` deterministic-seeded random starts (plus an all-ones start).
// p = 1 has the exact closed form max |entry|; the iterative values are
// lower bounds on the truncated norm and carry a convergence flag.
inline SectionNorm finite_section_norm(const ResolventGrid& grid, double p,
                                       int section_radius, int restarts = 5,
                                       std::uint64_t seed = 0x5ec7104ULL,
                                       double tol = 1e-8, int itmax = 200) {
  if (!(p >= 1.0 && p <= 2.0)) {
    throw PreconditionViolated("section norms require p in [1, 2]");
  }
  if (section_radius < 1 || 2 * section_radius > grid.box_radius) {
    throw PreconditionViolated(
        "section radius must satisfy section_radius <= box_radius / 2");
  }

  if (p == 1.0) {
    // l^1 -> l^inf norm: the largest kernel entry over realizable offsets.
    double best = 0.0;
    int reach = 2 * section_radius;
    for (int x = -reach; x <= reach; ++x) {
      for (int y = -reach; y <= reach; ++y) {
        for (int z = -reach; z <= reach; ++z) {
          best = std::max(best, std::abs(grid.at(x, y, z)));
        }
      }
    }
    return SectionNorm{best, true, 0};
  }

  detail::SectionOp op(grid, section_radius);
  auto apply = [&](const std::vector<Complex>& x, std::vector<Complex>& y) {
    op.apply(x, y);
  };
  auto adjoint = [&](const std::vector<Complex>& x, std::vector<Complex>& y) {
    op.apply_adjoint(x, y);
  };

  SectionNorm result;
  result.converged = true;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int r = 0; r <= restarts; ++r) {
    std::vector<Complex> x0((std::size_t)op.dim());
    if (r == 0) {
      std::fill(x0.begin(), x0.end(), Complex{1.0, 0.0});
    } else {
      for (auto& c : x0) c = Complex(gauss(rng), gauss(rng));
    }
    auto [val, ok] = detail::boyd_iteration(apply, adjoint, std::move(x0), p,
                                            tol, itmax, &result.iterations);
    result.value = std::max(result.value, val);
    result.converged = result.converged && ok;
  }
  return result;
}

// Largest singular value of [W1(x) K(x-y) W2(y)] over the weight supports.
inline double weighted_bs_norm(const ResolventGrid& grid, const WeightSpec& W1,
                               const WeightSpec& W2) {
  for (const auto& pt : W1.support) {
    for (const auto& qt : W2.support) {
      for (int t = 0; t < 3; ++t) {
        if (std::abs(pt[t] - qt[t]) > grid.box_radius) {
          throw PreconditionViolated(
              "weight supports exceed the tabulated kernel box");
        }
      }
    }
  }
  Eigen::MatrixXcd M((Eigen::Index)W1.support.size(),
                     (Eigen::Index)W2.support.size());
  for (std::size_t i = 0; i < W1.support.size(); ++i) {
    for (std::size_t j = 0; j < W2.support.size(); ++j) {
      const auto& a = W1.support[i];
      const auto& b = W2.support[j];
      Complex k = grid.at(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
      M((Eigen::Index)i, (Eigen::Index)j) = W1.values[i] * k * W2.values[j];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------
// Norm scans over the spectral parameter
// ---------------------------------------------------------------------------

struct NormScanReport {
  double p{0.0};
  double r{0.0};
  int section_radius{0};
  std::vector<Complex> z_samples;
  std::vector<double> norms;           // finite-section norms, one per z
  std::vector<double> weighted_norms;  // weighted l^2 norms, one per z
  std::vector<bool> flags;             // per-z: some stage failed to converge
  double max_norm{0.0};
  std::optional<double> near_threshold_slope;
};

// Finite-section norms over an explicit z list (e.g. a contour at fixed
// distance from the spectrum); no slope is fitted.
inline NormScanReport section_norm_scan(const std::vector<Complex>& z_samples,
                                        double p, int section_radius,
                                        int box_radius = 32,
                                        const KernelOptions& opts =
                                            KernelOptions{512, 1e-8, false},
                                        int restarts = 5) {
  NormScanReport report;
  report.p = p;
  report.r = 0.0;
  report.section_radius = section_radius;
  report.z_samples = z_samples;
  int grid_start = std::max(64, 4 * box_radius);
  for (Complex z : z_samples) {
    ResolventGrid grid = kernel(z, grid_start, box_radius, opts);
    SectionNorm norm = finite_section_norm(grid, p, section_radius, restarts);
    report.norms.push_back(norm.value);
    report.flags.push_back(!grid.converged || !norm.converged);
    report.max_norm = std::max(report.max_norm, norm.value);
  }
  return report;
}

// Norm growth toward the thresholds 0, 4, 8, 12: z = 4k +- eps + i eps/10
// for every eps in the (decreasing) list.  Reports finite-section norms,
// seeded random-weight l^2 norms, and the log-log slope of the per-eps
// norm envelope (negative slope = growth as eps shrinks).
inline NormScanReport threshold_scan(double p, double r,
                                     const std::vector<double>& eps_list,
                                     int seeds, int section_radius = 8,
                                     int box_radius = 16,
                                     const KernelOptions& opts =
                                         KernelOptions{512, 1e-8, false},
                                     int weight_radius = 2) {
  if (!(p >= 1.0 && p <= 2.0)) {
    throw PreconditionViolated("threshold scans require p in [1, 2]");
  }
  if (eps_list.size() < 2) {
    throw PreconditionViolated("need at least two eps values to fit a slope");
  }
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1])) {
      throw PreconditionViolated("eps values must strictly decrease");
    }
  }

  std::vector<std::array<int, 3>> wsupport;
  for (int x = -weight_radius; x <= weight_radius; ++x) {
    for (int y = -weight_radius; y <= weight_radius; ++y) {
      for (int z = -weight_radius; z <= weight_radius; ++z) {
        wsupport.push_back({x, y, z});
      }
    }
  }

  NormScanReport report;
  report.p = p;
  report.r = r;
  report.section_radius = section_radius;
  std::vector<double> envelope;
  std::mt19937_64 rng(0x7817e5ULL);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  int grid_start = std::max(64, 4 * box_radius);
  for (double eps : eps_list) {
    double env = 0.0;
    for (int k = 0; k <= 3; ++k) {
      for (int side = -1; side <= 1; side += 2) {
        Complex z(4.0 * k + side * eps, eps / 10.0);
        ResolventGrid grid = kernel(z, grid_start, box_radius, opts);
        SectionNorm norm =
            finite_section_norm(grid, p, section_radius);
        double weighted_best = 0.0;
        for (int s = 0; s < seeds; ++s) {
          std::vector<double> v1(wsupport.size()), v2(wsupport.size());
          for (auto& v : v1) v = unif(rng);
          for (auto& v : v2) v = unif(rng);
          WeightSpec W1 = make_weight(wsupport, v1, r);
          WeightSpec W2 = make_weight(wsupport, v2, r);
          double val = weighted_bs_norm(grid, W1, W2) /
                       (W1.r_norm * W2.r_norm);
          weighted_best = std::max(weighted_best, val);
        }
        report.z_samples.push_back(z);
        report.norms.push_back(norm.value);
        report.weighted_norms.push_back(weighted_best);
        report.flags.push_back(!grid.converged || !norm.converged);
        report.max_norm = std::max(report.max_norm, norm.value);
        env = std::max(env, norm.value);
      }
    }
    envelope.push_back(env);
  }

  // Slope of log(envelope) against log(eps).
  double st = 0, sy = 0, stt = 0, sty = 0;
  double n = (double)eps_list.size();
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    double t = std::log(eps_list[i]);
    double y = std::log(envelope[i]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  report.near_threshold_slope = (n * sty - st * sy) / (n * stt - st * st);
  return report;
}

// ---------------------------------------------------------------------------
// Two-weight equivalence test on small dense matrices
// ---------------------------------------------------------------------------

struct HolderReport {
  double c_direct{0.0};    // ||A||_{p -> p'} by multi-start maximization
  double c_weighted{0.0};  // best ||W1 A W2||_2 / (||W1||_r ||W2||_r)
};

namespace detail {

inline double dense_lp_to_dual_norm(const Eigen::MatrixXd& A, double p,
                                    int restarts, std::uint64_t seed,
                                    Eigen::VectorXd* argmax = nullptr) {
  if (p == 1.0) {
    Eigen::Index bi = 0, bj = 0;
    double best = A.cwiseAbs().maxCoeff(&bi, &bj);
    if (argmax) {
      *argmax = Eigen::VectorXd::Zero(A.cols());
      (*argmax)(bj) = 1.0;
    }
    return best;
  }
  double q = p / (p - 1.0);
  auto apply = [&](const std::vector<Complex>& x, std::vector<Complex>& y) {
    Eigen::VectorXd xr(A.cols());
    for (Eigen::Index i = 0; i < A.cols(); ++i) xr(i) = x[(std::size_t)i].real();
    Eigen::VectorXd yr = A * xr;
    y.resize((std::size_t)A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) y[(std::size_t)i] = yr(i);
  };
  auto adjoint = [&](const std::vector<Complex>& x, std::vector<Complex>& y) {
    Eigen::VectorXd xr(A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) xr(i) = x[(std::size_t)i].real();
    Eigen::VectorXd yr = A.transpose() * xr;
    y.resize((std::size_t)A.cols());
    for (Eigen::Index i = 0; i < A.cols(); ++i) y[(std::size_t)i] = yr(i);
  };
  // Real matrices admit real extremal vectors, so the complex Boyd path
  // collapses to the real one; restarts guard against local maxima.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double best = 0.0;
  std::vector<Complex> best_x;
  for (int rset = 0; rset <= restarts; ++rset) {
    std::vector<Complex> x0((std::size_t)A.cols());
    if (rset == 0) {
      std::fill(x0.begin(), x0.end(), Complex{1.0, 0.0});
    } else {
      for (auto& c : x0) c = Complex(gauss(rng), 0.0);
    }
    // Track the extremal vector by re-running the iteration map once the
    // quotient has stabilized.
    std::vector<Complex> x = x0;
    double nx = lp_norm(x, p);
    for (auto& c : x) c /= nx;
    std::vector<Complex> y, g;
    double prev = -1.0;
    for (int it = 0; it < 300; ++it) {
      apply(x, y);
      double gamma = lp_norm(y, q);
      if (gamma < 1e-300) break;
      bool done = prev >= 0.0 && std::fabs(gamma - prev) <= 1e-11 * gamma;
      prev = std::max(prev, gamma);
      if (done) break;
      std::vector<Complex> phi(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        double a = std::abs(y[i]);
        phi[i] = (a == 0.0) ? Complex{0, 0} : std::pow(a, q - 1.0) * (y[i] / a);
      }
      adjoint(phi, g);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double a = std::abs(g[i]);
        x[i] = (a == 0.0) ? Complex{0, 0}
                          : std::pow(a, 1.0 / (p - 1.0)) * (g[i] / a);
      }
      double nn = lp_norm(x, p);
      if (nn < 1e-300) break;
      for (auto& c : x) c /= nn;
    }
    if (prev > best) {
      best = prev;
      best_x = x;
    }
  }
  if (argmax && !best_x.empty()) {
    *argmax = Eigen::VectorXd((Eigen::Index)best_x.size());
    for (std::size_t i = 0; i < best_x.size(); ++i) {
      (*argmax)((Eigen::Index)i) = best_x[i].real();
    }
  }
  return best;
}

inline double largest_singular_value(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

}  // namespace detail

// Measures both sides of the two-weight reformulation on a small dense
// matrix: the direct l^p -> l^p' norm, and the best weighted l^2 -> l^2
// quotient over weight pairs built from the extremal vector (plus seeded
// random retries).  The weight exponent r solves 1/p = 1/2 + 1/r.
inline HolderReport holder_equivalence_test(const Eigen::MatrixXd& A, double p,
                                            int trials) {
  if (!(p >= 1.0 && p <= 2.0)) {
    throw PreconditionViolated("equivalence test requires p in [1, 2]");
  }
  if (A.rows() > 32 || A.cols() > 32 || A.rows() < 1 || A.cols() < 1) {
    throw PreconditionViolated("equivalence test expects matrices up to 32x32");
  }

  HolderReport report;
  Eigen::VectorXd xstar;
  report.c_direct = detail::dense_lp_to_dual_norm(
      A, p, std::max(8, trials), 0x401de5ULL, &xstar);

  auto weighted_value = [&](const Eigen::VectorXd& w1,
                            const Eigen::VectorXd& w2) {
    Eigen::MatrixXd M = w1.asDiagonal() * A * w2.asDiagonal();
    double sigma = detail::largest_singular_value(M);
    if (p == 2.0) {
      // r = infinity: weights normalized in sup norm.
      double n1 = w1.cwiseAbs().maxCoeff();
      double n2 = w2.cwiseAbs().maxCoeff();
      return (n1 == 0.0 || n2 == 0.0) ? 0.0 : sigma / (n1 * n2);
    }
    double r = 2.0 * p / (2.0 - p);
    double n1 = std::pow(w1.cwiseAbs().array().pow(r).sum(), 1.0 / r);
    double n2 = std::pow(w2.cwiseAbs().array().pow(r).sum(), 1.0 / r);
    return (n1 == 0.0 || n2 == 0.0) ? 0.0 : sigma / (n1 * n2);
  };

  // The equality construction: W2 from the extremal input, W1 from its
  // image through A.
  double pprime = (p == 1.0) ? std::numeric_limits<double>::infinity()
                             : p / (p - 1.0);
  Eigen::VectorXd w2(A.cols()), w1(A.rows());
  if (p == 2.0) {
    w1.setOnes();
    w2.setOnes();
  } else if (p == 1.0) {
    // x* is one-hot at the best column; pair it with the best row.
    Eigen::Index bi = 0, bj = 0;
    A.cwiseAbs().maxCoeff(&bi, &bj);
    w2.setZero();
    w2(bj) = 1.0;
    w1.setZero();
    w1(bi) = 1.0;
  } else {
    Eigen::VectorXd y = A * xstar;
    for (Eigen::Index i = 0; i < w2.size(); ++i) {
      w2(i) = std::pow(std::fabs(xstar(i)), (2.0 - p) / 2.0);
    }
    for (Eigen::Index i = 0; i < w1.size(); ++i) {
      w1(i) = std::pow(std::fabs(y(i)), (pprime - 2.0) / 2.0);
    }
  }
  report.c_weighted = weighted_value(w1, w2);

  std::mt19937_64 rng(0x3141ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd r1(A.rows()), r2(A.cols());
    for (Eigen::Index i = 0; i < r1.size(); ++i) r1(i) = std::fabs(gauss(rng)) + 1e-3;
    for (Eigen::Index i = 0; i < r2.size(); ++i) r2(i) = std::fabs(gauss(rng)) + 1e-3;
    report.c_weighted = std::max(report.c_weighted, weighted_value(r1, r2));
  }
  return report;
}

}  // namespace fermires
