#include "qsurf/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace qsurf {

const char* to_string(Side s) {
  switch (s) {
    case Side::upper: return "upper";
    case Side::lower: return "lower";
    case Side::both: return "both";
  }
  return "?";
}

GraphDomain::GraphDomain(std::vector<double> xs, std::vector<double> phi1,
                         std::vector<double> phi2)
    : xs_(std::move(xs)), phi1_(std::move(phi1)), phi2_(std::move(phi2)) {
  const std::size_t n = xs_.size();
  if (n < 8) throw std::invalid_argument("GraphDomain: need at least 8 abscissae");
  if (phi1_.size() != n || phi2_.size() != n)
    throw std::invalid_argument("GraphDomain: graph sizes differ from grid size");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(xs_[i]) || !std::isfinite(phi1_[i]) || !std::isfinite(phi2_[i]))
      throw std::invalid_argument("GraphDomain: non-finite value at node " + std::to_string(i));
    if (i > 0 && !(xs_[i] > xs_[i - 1]))
      throw std::invalid_argument("GraphDomain: abscissae not strictly increasing at node " +
                                  std::to_string(i));
    const bool end = (i == 0 || i + 1 == n);
    if (end ? phi1_[i] < phi2_[i] : !(phi1_[i] > phi2_[i]))
      throw std::invalid_argument("GraphDomain: upper graph not above lower graph at node " +
                                  std::to_string(i));
    if (xs_[i] >= -1.0 && xs_[i] <= 1.0 && (phi1_[i] < 0.0 || phi2_[i] > 0.0))
      throw std::invalid_argument("GraphDomain: domain does not contain C at node " +
                                  std::to_string(i));
  }
  if (xs_.front() > -1.0 || xs_.back() < 1.0)
    throw std::invalid_argument("GraphDomain: abscissa range does not span C");
}

std::vector<BoundaryNode> GraphDomain::boundary_loop() const {
  const std::size_t n = size();
  std::vector<BoundaryNode> loop;
  loop.reserve(2 * n);
  const bool lc = left_collapsed(), rc = right_collapsed();
  for (std::size_t i = 0; i < n; ++i) {
    Side s = Side::lower;
    if ((i == 0 && lc) || (i + 1 == n && rc)) s = Side::both;
    loop.push_back({{xs_[i], phi2_[i]}, s, i});
  }
  for (std::size_t k = n; k-- > 0;) {
    if ((k + 1 == n && rc) || (k == 0 && lc)) continue;
    loop.push_back({{xs_[k], phi1_[k]}, Side::upper, k});
  }
  return loop;
}

std::vector<Vec2> GraphDomain::boundary_points() const {
  std::vector<Vec2> pts;
  for (const auto& b : boundary_loop()) pts.push_back(b.p);
  return pts;
}

bool GraphDomain::contains(Vec2 p, double slack) const {
  if (p.x < xs_.front() - slack || p.x > xs_.back() + slack) return false;
  const double x = std::clamp(p.x, xs_.front(), xs_.back());
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t j = static_cast<std::size_t>(it - xs_.begin());
  j = std::clamp<std::size_t>(j, 1, size() - 1);
  const double t = (x - xs_[j - 1]) / (xs_[j] - xs_[j - 1]);
  const double top = phi1_[j - 1] + t * (phi1_[j] - phi1_[j - 1]);
  const double bot = phi2_[j - 1] + t * (phi2_[j] - phi2_[j - 1]);
  return p.y <= top + slack && p.y >= bot - slack;
}

double GraphDomain::scale() const {
  double h = 0.0;
  for (std::size_t i = 0; i < size(); ++i) h = std::max(h, phi1_[i] - phi2_[i]);
  return 0.5 * std::max(xs_.back() - xs_.front(), h);
}

double area(const GraphDomain& d) {
  const auto xs = d.xs();
  const auto p1 = d.phi1();
  const auto p2 = d.phi2();
  double a = 0.0;
  for (std::size_t i = 1; i < d.size(); ++i)
    a += 0.5 * (xs[i] - xs[i - 1]) * ((p1[i] - p2[i]) + (p1[i - 1] - p2[i - 1]));
  return a;
}

double perimeter(const GraphDomain& d) {
  const auto pts = d.boundary_points();
  double len = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    len += (pts[(i + 1) % pts.size()] - pts[i]).norm();
  return len;
}

double distance_to_segment(Vec2 p, double half_length) {
  const double dx = std::max(std::abs(p.x) - half_length, 0.0);
  return std::hypot(dx, p.y);
}

double clearance(const GraphDomain& d) {
  double c = std::numeric_limits<double>::infinity();
  for (const auto& b : d.boundary_loop()) c = std::min(c, distance_to_segment(b.p));
  return c;
}

namespace {

// Second-order first derivative on a non-uniform grid, plain one-sided
// quotients at the ends.
std::vector<double> grid_derivative(std::span<const double> x, std::span<const double> f) {
  const std::size_t n = x.size();
  std::vector<double> d(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    const double s0 = (f[i] - f[i - 1]) / h0, s1 = (f[i + 1] - f[i]) / h1;
    d[i] = (h1 * s0 + h0 * s1) / (h0 + h1);
  }
  d[0] = (f[1] - f[0]) / (x[1] - x[0]);
  d[n - 1] = (f[n - 1] - f[n - 2]) / (x[n - 1] - x[n - 2]);
  return d;
}

// x + phi phi' as F'/2 with F = x^2 + phi^2; F is linear on circles centred
// on the axis, so this is exact there, end nodes included.
std::vector<double> normal_foot(std::span<const double> x, std::span<const double> phi) {
  std::vector<double> F(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) F[i] = x[i] * x[i] + phi[i] * phi[i];
  auto s = grid_derivative(x, F);
  for (double& v : s) v *= 0.5;
  return s;
}

}  // namespace

GnpReport check_gnp(const GraphDomain& d, double tol_gnp) {
  GnpReport r;
  r.s1 = normal_foot(d.xs(), d.phi1());
  r.s2 = normal_foot(d.xs(), d.phi2());
  const std::size_t n = d.size();

  std::vector<ArcSegment> arcs;
  bool arcs_ready = false;
  const auto loop_size = d.boundary_loop().size();
  auto endpoint_on_type_i = [&](std::size_t i) {
    if (!arcs_ready) {
      arcs = classify_arcs(d);
      arcs_ready = true;
    }
    const std::size_t loop_index = (i == 0) ? 0 : n - 1;
    for (const auto& a : arcs) {
      if (a.type != ArcType::type_i) continue;
      for (auto k : arc_indices(a, loop_size))
        if (k == loop_index) return true;
    }
    return false;
  };

  auto scan = [&](const std::vector<double>& s, Side side) {
    for (std::size_t i = 0; i < n; ++i) {
      if (s[i] >= -1.0 - tol_gnp && s[i] <= 1.0 + tol_gnp) continue;
      const bool collapsed_end =
          (i == 0 && d.left_collapsed()) || (i + 1 == n && d.right_collapsed());
      if (collapsed_end && endpoint_on_type_i(i))
        r.flagged.push_back({i, side, s[i]});
      else
        r.violations.push_back({i, side, s[i]});
    }
  };
  scan(r.s1, Side::upper);
  scan(r.s2, Side::lower);
  r.passed = r.violations.empty();
  return r;
}

bool check_csp(const GraphDomain& d, int samples) {
  if (samples < 2) throw std::invalid_argument("check_csp: samples must be >= 2");
  const auto xs = d.xs();
  const auto p1 = d.phi1();
  const auto p2 = d.phi2();
  const double xl = d.x_left(), xr = d.x_right();

  // Chebyshev-spaced interior samples; dense near the boundary where the
  // offending cone regions are thin.
  std::vector<Vec2> interior;
  const int rows = samples;
  for (int j = 0; j < samples; ++j) {
    const double x =
        xl + (xr - xl) * 0.5 * (1.0 - std::cos(std::numbers::pi * (j + 0.5) / samples));
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - xs.begin()), 1,
                                            d.size() - 1);
    const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    const double top = p1[k - 1] + t * (p1[k] - p1[k - 1]);
    const double bot = p2[k - 1] + t * (p2[k] - p2[k - 1]);
    for (int r = 0; r < rows; ++r) {
      const double f = 0.5 * (1.0 - std::cos(std::numbers::pi * (r + 0.5) / rows));
      interior.push_back({x, bot + f * (top - bot)});
    }
  }

  const Vec2 c1{-1.0, 0.0}, c2{1.0, 0.0};
  constexpr double rel = 1e-9;
  for (const auto& b : d.boundary_loop()) {
    const Vec2 x = b.p;
    if (distance_to_segment(x) < 1e-12) continue;
    const Vec2 e1 = c1 - x, e2 = c2 - x;
    const double n1 = e1.norm(), n2 = e2.norm();
    for (const auto& y : interior) {
      const Vec2 v = y - x;
      const double nv = v.norm();
      if (v.dot(e1) < -rel * nv * n1 && v.dot(e2) < -rel * nv * n2) return false;
    }
  }
  return true;
}

GraphDomain steiner_full(const GraphDomain& d) {
  const std::size_t n = d.size();
  std::vector<double> p1(n), p2(n);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = 0.5 * (d.phi1()[i] - d.phi2()[i]);
    p2[i] = -p1[i];
  }
  return GraphDomain({d.xs().begin(), d.xs().end()}, std::move(p1), std::move(p2));
}

GraphDomain steiner_continuous(const GraphDomain& d, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("steiner_continuous: t must lie in [0,1]");
  if (t == 0.0) return d;
  const std::size_t n = d.size();
  std::vector<double> p1(d.phi1().begin(), d.phi1().end());
  std::vector<double> p2(d.phi2().begin(), d.phi2().end());
  for (std::size_t i = 0; i < n; ++i) {
    const double mid = 0.5 * (p1[i] + p2[i]);
    if (t == 1.0) {
      const double half = 0.5 * (p1[i] - p2[i]);
      p1[i] = half;
      p2[i] = -half;
    } else {
      p1[i] -= t * mid;
      p2[i] -= t * mid;
    }
  }
  return GraphDomain({d.xs().begin(), d.xs().end()}, std::move(p1), std::move(p2));
}

std::vector<std::size_t> arc_indices(const ArcSegment& arc, std::size_t loop_size) {
  std::vector<std::size_t> idx(arc.count);
  for (std::size_t k = 0; k < arc.count; ++k) idx[k] = (arc.first + k) % loop_size;
  return idx;
}

std::vector<ArcSegment> classify_arcs(const GraphDomain& d, double tol_arc) {
  const auto loop = d.boundary_loop();
  const std::size_t L = loop.size();
  std::vector<ArcSegment> out;

  for (double cx : {-1.0, 1.0}) {
    const Vec2 c{cx, 0.0};
    std::vector<double> dist(L);
    for (std::size_t j = 0; j < L; ++j) dist[j] = (loop[j].p - c).norm();

    // Runs of nodes whose distance spread stays within tol_arc * radius.
    std::vector<std::pair<std::size_t, std::size_t>> runs;  // (first, count)
    const auto [mn, mx] = std::minmax_element(dist.begin(), dist.end());
    if (*mx - *mn <= tol_arc * *mn) {
      runs.emplace_back(0, L);
    } else {
      std::size_t start = 0;
      double jump = -1.0;
      for (std::size_t j = 0; j < L; ++j) {
        const double dj = std::abs(dist[j] - dist[(j + L - 1) % L]);
        if (dj > jump) {
          jump = dj;
          start = j;
        }
      }
      std::size_t first = start, count = 1;
      double lo = dist[start], hi = dist[start];
      for (std::size_t k = 1; k < L; ++k) {
        const std::size_t j = (start + k) % L;
        const double nlo = std::min(lo, dist[j]), nhi = std::max(hi, dist[j]);
        if (nhi - nlo <= tol_arc * nlo) {
          lo = nlo;
          hi = nhi;
          ++count;
        } else {
          runs.emplace_back(first, count);
          first = j;
          count = 1;
          lo = hi = dist[j];
        }
      }
      runs.emplace_back(first, count);
    }

    auto beyond = [&](std::size_t j) {
      return cx < 0 ? loop[j].p.x <= -1.0 + 1e-12 : loop[j].p.x >= 1.0 - 1e-12;
    };
    auto emit = [&](std::size_t first, std::size_t count, bool type_i) {
      if (count < 3) return;
      ArcSegment a;
      a.first = first;
      a.count = count;
      a.last = (first + count - 1) % L;
      a.center = c;
      a.type = type_i ? ArcType::type_i : ArcType::type_ii;
      double r = 0.0;
      bool up = false, low = false;
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t j = (first + k) % L;
        r += dist[j];
        up |= loop[j].side == Side::upper;
        low |= loop[j].side == Side::lower;
      }
      a.radius = r / static_cast<double>(count);
      a.side = (up && low) ? Side::both : (up ? Side::upper : (low ? Side::lower : Side::both));
      out.push_back(a);
    };

    // Near a point where the distance to c is stationary any smooth curve
    // gives a short run; a genuine arc also has curvature radius ~ r.
    auto circular = [&](std::size_t first, std::size_t count) {
      const Vec2 A = loop[first].p, B = loop[(first + count / 2) % L].p,
                 Cc = loop[(first + count - 1) % L].p;
      const double twice = std::abs((B - A).cross(Cc - A));
      if (!(twice > 0.0)) return false;
      const double rho = (B - A).norm() * (Cc - B).norm() * (Cc - A).norm() / (2.0 * twice);
      return std::abs(rho - dist[first]) <= 0.1 * dist[first];
    };

    for (auto [first, count] : runs) {
      if (count < 3 || !circular(first, count)) continue;
      // A closed run around the whole loop may start mid-way through a
      // half-plane stretch; rotate it to a half-plane boundary first.
      if (count == L) {
        for (std::size_t k = 0; k < L; ++k)
          if (beyond(k) != beyond((k + L - 1) % L)) {
            first = k;
            break;
          }
      }
      std::size_t sub_first = first, sub_count = 0;
      bool flag = beyond(first);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t j = (first + k) % L;
        if (beyond(j) != flag) {
          emit(sub_first, sub_count, flag);
          sub_first = j;
          sub_count = 0;
          flag = beyond(j);
        }
        ++sub_count;
      }
      emit(sub_first, sub_count, flag);
    }
  }
  return out;
}

namespace {

// Periodic cubic spline through closed-polygon vertices, parameterized by
// cumulative chord length.
class LoopSpline {
 public:
  explicit LoopSpline(std::span<const Vec2> pts) {
    const std::size_t L = pts.size();
    if (L < 4) throw std::invalid_argument("LoopSpline: need at least 4 points");
    t_.resize(L + 1);
    t_[0] = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
      const double h = (pts[(j + 1) % L] - pts[j]).norm();
      if (!(h > 0.0)) throw std::invalid_argument("LoopSpline: repeated vertex");
      t_[j + 1] = t_[j] + h;
    }
    x_.resize(L);
    y_.resize(L);
    for (std::size_t j = 0; j < L; ++j) {
      x_[j] = pts[j].x;
      y_[j] = pts[j].y;
    }
    mx_ = second_derivatives(x_);
    my_ = second_derivatives(y_);
  }

  std::size_t segments() const { return x_.size(); }
  double h(std::size_t j) const { return t_[j + 1] - t_[j]; }

  Vec2 eval(std::size_t j, double tau) const { return {ev(x_, mx_, j, tau), ev(y_, my_, j, tau)}; }
  double x_at(std::size_t j, double tau) const { return ev(x_, mx_, j, tau); }
  double dx_at(std::size_t j, double tau) const { return dev(x_, mx_, j, tau); }

  // Critical points of x(t) inside segment j.
  std::vector<double> x_critical(std::size_t j) const {
    const std::size_t L = segments(), k = (j + 1) % L;
    const double hh = h(j);
    // x'(tau) = A tau^2 + B tau + Cc
    const double A = (mx_[k] - mx_[j]) / (2.0 * hh);
    const double B = mx_[j];
    const double Cc = (x_[k] - x_[j]) / hh - hh * (2.0 * mx_[j] + mx_[k]) / 6.0;
    std::vector<double> roots;
    auto push = [&](double r) {
      if (r > 0.0 && r < hh) roots.push_back(r);
    };
    if (std::abs(A) < 1e-300) {
      if (std::abs(B) > 0.0) push(-Cc / B);
    } else {
      const double disc = B * B - 4.0 * A * Cc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (B + std::copysign(sq, B));
        push(q / A);
        if (q != 0.0) push(Cc / q);
      }
    }
    return roots;
  }

 private:
  std::vector<double> second_derivatives(const std::vector<double>& v) const {
    const std::size_t L = v.size();
    std::vector<double> a(L), b(L), c(L), r(L);
    for (std::size_t j = 0; j < L; ++j) {
      const std::size_t jm = (j + L - 1) % L, jp = (j + 1) % L;
      const double h0 = h(jm), h1 = h(j);
      a[j] = h0;
      b[j] = 2.0 * (h0 + h1);
      c[j] = h1;
      r[j] = 6.0 * ((v[jp] - v[j]) / h1 - (v[j] - v[jm]) / h0);
    }
    return solve_cyclic(a, b, c, r);
  }

  // Cyclic tridiagonal solve (Sherman-Morrison).
  static std::vector<double> solve_cyclic(std::vector<double> a, std::vector<double> b,
                                          std::vector<double> c, std::vector<double> r) {
    const std::size_t n = b.size();
    const double alpha = c[n - 1];  // bottom-left corner
    const double beta = a[0];       // top-right corner
    const double gamma = -b[0];
    std::vector<double> bb = b;
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;
    auto thomas = [&](std::vector<double> rhs) {
      std::vector<double> cp(n), dp(n);
      cp[0] = c[0] / bb[0];
      dp[0] = rhs[0] / bb[0];
      for (std::size_t i = 1; i < n; ++i) {
        const double m = bb[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        dp[i] = (rhs[i] - a[i] * dp[i - 1]) / m;
      }
      std::vector<double> xsol(n);
      xsol[n - 1] = dp[n - 1];
      for (std::size_t i = n - 1; i-- > 0;) xsol[i] = dp[i] - cp[i] * xsol[i + 1];
      return xsol;
    };
    auto xsol = thomas(r);
    std::vector<double> u(n, 0.0);
    u[0] = gamma;
    u[n - 1] = alpha;
    auto z = thomas(u);
    const double fact = (xsol[0] + beta * xsol[n - 1] / gamma) /
                        (1.0 + z[0] + beta * z[n - 1] / gamma);
    for (std::size_t i = 0; i < n; ++i) xsol[i] -= fact * z[i];
    return xsol;
  }

  double ev(const std::vector<double>& v, const std::vector<double>& m, std::size_t j,
            double tau) const {
    const std::size_t k = (j + 1) % v.size();
    const double hh = h(j), s = hh - tau;
    return m[j] * s * s * s / (6.0 * hh) + m[k] * tau * tau * tau / (6.0 * hh) +
           (v[j] - m[j] * hh * hh / 6.0) * s / hh + (v[k] - m[k] * hh * hh / 6.0) * tau / hh;
  }
  double dev(const std::vector<double>& v, const std::vector<double>& m, std::size_t j,
             double tau) const {
    const std::size_t k = (j + 1) % v.size();
    const double hh = h(j), s = hh - tau;
    return -m[j] * s * s / (2.0 * hh) + m[k] * tau * tau / (2.0 * hh) -
           (v[j] - m[j] * hh * hh / 6.0) / hh + (v[k] - m[k] * hh * hh / 6.0) / hh;
  }

  std::vector<double> t_, x_, y_, mx_, my_;
};

struct SplinePos {
  std::size_t seg;
  double tau;
};

struct ChainSample {
  double x, y, s;
  SplinePos pos;
};

// Dense samples of the spline from `from` forward to `to`.
std::vector<ChainSample> sample_chain(const LoopSpline& sp, SplinePos from, SplinePos to,
                                      int per_segment) {
  std::vector<ChainSample> out;
  const std::size_t L = sp.segments();
  std::size_t seg = from.seg;
  double tau0 = from.tau;
  auto push = [&](std::size_t j, double tau) {
    const Vec2 p = sp.eval(j, tau);
    double s = 0.0;
    if (!out.empty()) s = out.back().s + std::hypot(p.x - out.back().x, p.y - out.back().y);
    out.push_back({p.x, p.y, s, {j, tau}});
  };
  for (std::size_t guard = 0; guard <= L + 1; ++guard) {
    const bool last = (seg == to.seg) && (guard > 0 || to.tau > tau0);
    if (last && to.tau == 0.0) {
      push(seg, 0.0);
      return out;
    }
    const double tau1 = last ? to.tau : sp.h(seg);
    for (int k = 0; k < per_segment; ++k)
      push(seg, tau0 + (tau1 - tau0) * k / static_cast<double>(per_segment));
    if (last) {
      push(seg, tau1);
      return out;
    }
    seg = (seg + 1) % L;
    tau0 = 0.0;
  }
  throw std::logic_error("sample_chain: did not reach end position");
}

// Solves x(t) = target between two consecutive chain samples, `a` first in
// spline order.
Vec2 invert_x(const LoopSpline& sp, const ChainSample& a, const ChainSample& b, double target) {
  std::size_t seg = a.pos.seg;
  double lo = a.pos.tau;
  double hi = (b.pos.seg == seg) ? b.pos.tau : sp.h(seg);
  double flo = sp.x_at(seg, lo) - target;
  const double fhi = sp.x_at(seg, hi) - target;
  if (flo == 0.0 || (flo < 0) == (fhi < 0))
    return sp.eval(seg, std::abs(flo) <= std::abs(fhi) ? lo : hi);
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = sp.x_at(seg, mid) - target;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15 * (1.0 + std::abs(hi))) break;
  }
  return sp.eval(seg, 0.5 * (lo + hi));
}

double interp_monotone(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - xs.begin()), 1,
                                          xs.size() - 1);
  const double dx = xs[k] - xs[k - 1];
  const double t = dx > 0 ? (x - xs[k - 1]) / dx : 0.0;
  return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

}  // namespace

GraphDomain graph_from_loop(std::span<const Vec2> loop, std::size_t n) {
  if (n < 8) throw std::invalid_argument("graph_from_loop: need n >= 8");
  const LoopSpline sp(loop);
  const std::size_t L = sp.segments();

  SplinePos left{0, 0.0}, right{0, 0.0};
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  for (std::size_t j = 0; j < L; ++j) {
    auto consider = [&](double tau) {
      const double x = sp.x_at(j, tau);
      if (x < xmin) {
        xmin = x;
        left = {j, tau};
      }
      if (x > xmax) {
        xmax = x;
        right = {j, tau};
      }
    };
    consider(0.0);
    for (double r : sp.x_critical(j)) consider(r);
  }

  // A tip found at the very end of a segment starts the next one.
  for (auto* pos : {&left, &right})
    if (pos->tau >= sp.h(pos->seg) * (1.0 - 1e-12)) *pos = {(pos->seg + 1) % L, 0.0};

  constexpr int per_segment = 8;
  auto lower = sample_chain(sp, left, right, per_segment);
  auto upper = sample_chain(sp, right, left, per_segment);
  std::reverse(upper.begin(), upper.end());
  const double upper_len = upper.front().s;
  for (auto& u : upper) u.s = upper_len - u.s;

  const double fold_tol = 1e-12 * (xmax - xmin);
  for (std::size_t k = 1; k < lower.size(); ++k)
    if (lower[k].x < lower[k - 1].x - fold_tol)
      throw std::invalid_argument("graph_from_loop: lower boundary is not a graph");
  for (std::size_t k = 1; k < upper.size(); ++k)
    if (upper[k].x < upper[k - 1].x - fold_tol)
      throw std::invalid_argument("graph_from_loop: upper boundary is not a graph");

  std::vector<double> lx, ls, ux, us;
  for (auto& c : lower) {
    lx.push_back(lx.empty() ? c.x : std::max(c.x, lx.back()));
    ls.push_back(c.s);
  }
  for (auto& c : upper) {
    ux.push_back(!ux.empty() ? std::max(c.x, ux.back()) : c.x);
    us.push_back(c.s);
  }

  // Mean arc length of the two graphs as a function of x.
  std::vector<double> grid;
  grid.reserve(lx.size() + ux.size());
  grid.insert(grid.end(), lx.begin(), lx.end());
  grid.insert(grid.end(), ux.begin(), ux.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> sigma(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k)
    sigma[k] = 0.5 * (interp_monotone(lx, ls, grid[k]) + interp_monotone(ux, us, grid[k]));
  for (std::size_t k = 1; k < sigma.size(); ++k) sigma[k] = std::max(sigma[k], sigma[k - 1]);

  std::vector<double> xs(n), p1(n), p2(n);
  const Vec2 pl = sp.eval(left.seg, left.tau), pr = sp.eval(right.seg, right.tau);
  xs.front() = pl.x;
  xs.back() = pr.x;
  p1.front() = p2.front() = pl.y;
  p1.back() = p2.back() = pr.y;

  // The upper chain runs against the spline direction.
  auto locate = [&](const std::vector<ChainSample>& chain, const std::vector<double>& cx,
                    double target, bool reversed) {
    auto it = std::upper_bound(cx.begin(), cx.end(), target);
    std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - cx.begin()), 1,
                                            cx.size() - 1);
    return reversed ? invert_x(sp, chain[k], chain[k - 1], target).y
                    : invert_x(sp, chain[k - 1], chain[k], target).y;
  };

  const double total = sigma.back();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double target = total * static_cast<double>(i) / static_cast<double>(n - 1);
    xs[i] = interp_monotone(sigma, grid, target);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(xs[i] > xs[i - 1]))
      throw std::invalid_argument("graph_from_loop: degenerate abscissa grid");
    p2[i] = locate(lower, lx, xs[i], false);
    p1[i] = locate(upper, ux, xs[i], true);
  }
  return GraphDomain(std::move(xs), std::move(p1), std::move(p2));
}

GraphDomain resample(const GraphDomain& d, std::size_t n) {
  const auto pts = d.boundary_points();
  return graph_from_loop(pts, n);
}

GraphDomain make_disk(double radius, std::size_t n, double center_x) {
  std::vector<double> xs(n), p1(n), p2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
    xs[i] = center_x - radius * std::cos(th);
    p1[i] = radius * std::sin(th);
    p2[i] = -p1[i];
  }
  xs.front() = center_x - radius;
  xs.back() = center_x + radius;
  p1.front() = p2.front() = p1.back() = p2.back() = 0.0;
  return GraphDomain(std::move(xs), std::move(p1), std::move(p2));
}

GraphDomain make_ellipse(double semi_x, double semi_y, std::size_t n) {
  std::vector<double> xs(n), p1(n), p2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
    xs[i] = -semi_x * std::cos(th);
    p1[i] = semi_y * std::sin(th);
    p2[i] = -p1[i];
  }
  xs.front() = -semi_x;
  xs.back() = semi_x;
  p1.front() = p2.front() = p1.back() = p2.back() = 0.0;
  return GraphDomain(std::move(xs), std::move(p1), std::move(p2));
}

GraphDomain make_stadium(double radius, std::size_t n) {
  const double cap = 0.5 * std::numbers::pi * radius;
  const double total = 2.0 * cap + 2.0;
  const std::size_t intervals = n - 1;
  std::size_t n_cap = static_cast<std::size_t>(
      std::max(1.0, std::round(static_cast<double>(intervals) * cap / total)));
  if (2 * n_cap + 1 > intervals) n_cap = (intervals - 1) / 2;
  const std::size_t n_flat = intervals - 2 * n_cap;

  std::vector<double> xs, p1;
  for (std::size_t k = 0; k < n_cap; ++k) {
    const double a = 0.5 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_cap);
    xs.push_back(-1.0 - radius * std::cos(a));
    p1.push_back(radius * std::sin(a));
  }
  for (std::size_t k = 0; k < n_flat; ++k) {
    xs.push_back(-1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n_flat));
    p1.push_back(radius);
  }
  for (std::size_t k = 0; k <= n_cap; ++k) {
    const double a = 0.5 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_cap);
    xs.push_back(1.0 + radius * std::sin(a));
    p1.push_back(radius * std::cos(a));
  }
  xs.front() = -1.0 - radius;
  xs.back() = 1.0 + radius;
  p1.front() = p1.back() = 0.0;
  std::vector<double> p2(p1.size());
  for (std::size_t i = 0; i < p1.size(); ++i) p2[i] = -p1[i];
  return GraphDomain(std::move(xs), std::move(p1), std::move(p2));
}

GraphDomain make_rectangle(double x0, double x1, double y0, double y1, std::size_t n) {
  std::vector<double> xs(n), p1(n, y1), p2(n, y0);
  for (std::size_t i = 0; i < n; ++i)
    xs[i] = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(n - 1);
  xs.back() = x1;
  return GraphDomain(std::move(xs), std::move(p1), std::move(p2));
}

namespace {

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

bool parse_double(std::string_view tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

}  // namespace

void write_polyline(std::ostream& os, const GraphDomain& d) {
  os << "# n=" << d.size() << " x_L=" << fmt17(d.x_left()) << " x_R=" << fmt17(d.x_right())
     << "\n";
  os << "# x phi1 phi2\n";
  for (std::size_t i = 0; i < d.size(); ++i)
    os << fmt17(d.xs()[i]) << ' ' << fmt17(d.phi1()[i]) << ' ' << fmt17(d.phi2()[i]) << '\n';
}

GraphDomain read_polyline(std::istream& is) {
  std::vector<double> xs, p1, p2;
  std::optional<std::size_t> declared_n;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first[0] == '#') {
      std::string tok = first.substr(1);
      do {
        if (tok.rfind("n=", 0) == 0) {
          std::size_t v = 0;
          auto r = std::from_chars(tok.data() + 2, tok.data() + tok.size(), v);
          if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
            throw ParseError("bad header value '" + tok + "' at line " + std::to_string(lineno),
                             lineno);
          declared_n = v;
        }
      } while (ls >> tok);
      continue;
    }
    std::string t2, t3, extra;
    double x = 0, a = 0, b = 0;
    if (!(ls >> t2 >> t3) || (ls >> extra) || !parse_double(first, x) || !parse_double(t2, a) ||
        !parse_double(t3, b))
      throw ParseError("expected 'x phi1 phi2' at line " + std::to_string(lineno), lineno);
    xs.push_back(x);
    p1.push_back(a);
    p2.push_back(b);
  }
  if (declared_n && *declared_n != xs.size())
    throw ParseError("header declares n=" + std::to_string(*declared_n) + " but file has " +
                         std::to_string(xs.size()) + " rows",
                     0);
  try {
    return GraphDomain(std::move(xs), std::move(p1), std::move(p2));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), 0);
  }
}

void save_polyline(const std::string& path, const GraphDomain& d) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_polyline(os, d);
}

GraphDomain load_polyline(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path, 0);
  return read_polyline(is);
}

}  // namespace qsurf
