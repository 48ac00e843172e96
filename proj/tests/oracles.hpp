#pragma once

// Independent reference computations for the tests. Nothing here calls the
// closed forms under test.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "qsurf/geometry.hpp"

namespace oracle {

using Fn = std::function<double(double)>;

namespace detail {

// 15-point Kronrod / 7-point Gauss pair on [a, b].
inline void gk15(const Fn& f, double a, double b, double& k15, double& err) {
  static const double xk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                               0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                               0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                               0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static const double wk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                               0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                               0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                               0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static const double wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                               0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * wk[7], rg = fc * wg[3];
  for (int j = 0; j < 7; ++j) {
    const double v = f(c - h * xk[j]) + f(c + h * xk[j]);
    rk += wk[j] * v;
    if (j % 2 == 1) rg += wg[j / 2] * v;
  }
  k15 = rk * h;
  err = std::abs((rk - rg) * h);
}

inline double adapt(const Fn& f, double a, double b, double tol, int depth) {
  double k, e;
  gk15(f, a, b, k, e);
  // stop at roundoff level as well, or tight tolerances never terminate
  if (e <= tol || e <= 1e-15 * std::abs(k) || depth > 30 || b - a < 1e-12) return k;
  const double m = 0.5 * (a + b);
  return adapt(f, a, m, 0.5 * tol, depth + 1) + adapt(f, m, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

// Adaptive Gauss-Kronrod with an absolute tolerance.
inline double integrate(const Fn& f, double a, double b, double tol = 1e-14) {
  return detail::adapt(f, a, b, tol, 0);
}

// w(p) = -(a / 2π) ∫_{-ell}^{ell} ln|p - (s, 0)| ds by quadrature.
inline double w_quad(double a, double x, double y, double ell = 1.0) {
  auto f = [&](double s) { return 0.5 * std::log((x - s) * (x - s) + y * y); };
  // split at the foot of p so the near-peak is resolved
  double I = 0.0;
  if (x > -ell && x < ell)
    I = integrate(f, -ell, x, 1e-15) + integrate(f, x, ell, 1e-15);
  else
    I = integrate(f, -ell, ell, 1e-15);
  return -a / (2.0 * std::numbers::pi) * I;
}

// Five-point Laplacian, Richardson-extrapolated from h and h/2.
inline double laplacian(const std::function<double(double, double)>& u, double x, double y,
                        double h) {
  auto L = [&](double s) {
    return (u(x + s, y) + u(x - s, y) + u(x, y + s) + u(x, y - s) - 4.0 * u(x, y)) / (s * s);
  };
  return (4.0 * L(0.5 * h) - L(h)) / 3.0;
}

inline double point_source_disk(double mass, double R, double r) {
  return mass / (2.0 * std::numbers::pi) * std::log(R / r);
}

struct Sample {
  double x, y;
};

// Uniform points in [lo, hi]² at distance > dmin from the segment [-1,1]x{0}.
inline std::vector<Sample> points_off_segment(std::mt19937& rng, int count, double lo, double hi,
                                              double dmin) {
  std::uniform_real_distribution<double> U(lo, hi);
  std::vector<Sample> out;
  while (static_cast<int>(out.size()) < count) {
    const double x = U(rng), y = U(rng);
    if (qsurf::distance_to_segment({x, y}) > dmin) out.push_back({x, y});
  }
  return out;
}

// Upper half of a disk over the lower half of an ellipse with the same
// horizontal semi-axis: non-symmetric, passes the normal property when
// |R - b²/R| <= 1.
inline qsurf::GraphDomain disk_over_ellipse(double R, double b, std::size_t n) {
  std::vector<double> xs(n), p1(n), p2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = std::numbers::pi * (1.0 - static_cast<double>(i) / (n - 1));
    xs[i] = R * std::cos(th);
    const double s = std::sin(th);
    p1[i] = R * s;
    p2[i] = -b * s;
  }
  p1.front() = p2.front() = 0.0;
  p1.back() = p2.back() = 0.0;
  xs.front() = -R;
  xs.back() = R;
  return {xs, p1, p2};
}

}  // namespace oracle
