#include "qsurf/potential.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace qsurf {

namespace {
constexpr double kPi = std::numbers::pi;
}

void validate(const LineSource& src) {
  if (!(src.a > 0.0) || !std::isfinite(src.a))
    throw std::invalid_argument("LineSource: intensity a must be positive");
  if (!(src.eps_degenerate > 0.0 && src.eps_degenerate <= 1.0))
    throw std::invalid_argument("LineSource: eps_degenerate must lie in (0, 1]");
}

double segment_log_integral(Vec2 p, double ell) {
  const double x = p.x, ay = std::abs(p.y);
  const double rp2 = (x + ell) * (x + ell) + ay * ay;
  const double rm2 = (x - ell) * (x - ell) + ay * ay;
  // (x+l) ln rp2 - (x-l) ln rm2 = l (ln rp2 + ln rm2) + x ln(rp2 / rm2)
  double logs = 0.0;
  if (rp2 > 0.0 && rm2 > 0.0) {
    const double ratio = (std::abs(x) * ell <= 0.125 * rm2) ? std::log1p(4.0 * x * ell / rm2)
                                                         : std::log(rp2 / rm2);
    logs = ell * (std::log(rp2) + std::log(rm2)) + x * ratio;
  } else if (rp2 > 0.0) {
    logs = (x + ell) * std::log(rp2);
  } else if (rm2 > 0.0) {
    logs = -(x - ell) * std::log(rm2);
  }
  const double theta = std::atan2(2.0 * ell * ay, x * x + ay * ay - ell * ell);
  return logs - 4.0 * ell + 2.0 * ay * theta;
}

double eval_w(const LineSource& src, Vec2 p) {
  return -src.a / (4.0 * kPi) * segment_log_integral(p, src.half_length());
}

Vec2 grad_w(const LineSource& src, Vec2 p) {
  const double ell = src.half_length();
  if (p.y == 0.0 && std::abs(p.x) <= ell)
    throw std::domain_error("grad_w: point lies on the source segment");
  const double x = p.x, y = p.y;
  const double rp2 = (x + ell) * (x + ell) + y * y;
  const double rm2 = (x - ell) * (x - ell) + y * y;
  const double dx = (std::abs(x) * ell < 0.25 * rm2) ? std::log1p(4.0 * x * ell / rm2)
                                                     : std::log(rp2 / rm2);
  const double theta = std::atan2(2.0 * ell * std::abs(y), x * x + y * y - ell * ell);
  const double dy = 2.0 * std::copysign(theta, y);
  const double c = -src.a / (4.0 * kPi);
  return {c * dx, c * dy};
}

Vec2 grad_w_on_segment(const LineSource& src, double x, bool upper) {
  const double ell = src.half_length();
  if (!(std::abs(x) < ell))
    throw std::domain_error("grad_w_on_segment: x must lie inside the segment");
  const double c = -src.a / (4.0 * kPi);
  const double dx = std::log(((x + ell) * (x + ell)) / ((x - ell) * (x - ell)));
  return {c * dx, upper ? -0.5 * src.a : 0.5 * src.a};
}

double segment_integral_w(const LineSource& src) {
  const double ell = src.half_length();
  return -src.a * ell * ell / (4.0 * kPi) *
         (8.0 * std::log(ell) + 8.0 * std::numbers::ln2 - 12.0);
}

double HarmonicExpansion::eval_h(Vec2 p) const {
  double h = constant;
  for (std::size_t j = 0; j < charges.size(); ++j) {
    const Vec2 d = p - charges[j];
    h += 0.5 * coeffs[j] * std::log(d.dot(d));
  }
  return h;
}

Vec2 HarmonicExpansion::grad_h(Vec2 p) const {
  Vec2 g{};
  for (std::size_t j = 0; j < charges.size(); ++j) {
    const Vec2 d = p - charges[j];
    g = g + d * (coeffs[j] / d.dot(d));
  }
  return g;
}

double HarmonicExpansion::segment_integral_h() const {
  const double ell = source.half_length();
  double s = 2.0 * ell * constant;
  for (std::size_t j = 0; j < charges.size(); ++j)
    s += 0.5 * coeffs[j] * segment_log_integral(charges[j], ell);
  return s;
}

namespace {

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double to_double(const std::string& tok, std::size_t lineno) {
  double v = 0.0;
  auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc() || r.ptr != tok.data() + tok.size())
    throw ParseError("bad number '" + tok + "' at line " + std::to_string(lineno), lineno);
  return v;
}

}  // namespace

void write_expansion(std::ostream& os, const HarmonicExpansion& e) {
  os << "# harmonic-expansion a=" << fmt17(e.source.a) << " eps=" << fmt17(e.source.eps_degenerate)
     << " constant=" << fmt17(e.constant) << " m=" << e.charges.size() << "\n";
  os << "# charge_x charge_y coeff\n";
  for (std::size_t j = 0; j < e.charges.size(); ++j)
    os << fmt17(e.charges[j].x) << ' ' << fmt17(e.charges[j].y) << ' ' << fmt17(e.coeffs[j])
       << '\n';
}

HarmonicExpansion read_expansion(std::istream& is) {
  HarmonicExpansion e;
  std::optional<std::size_t> m;
  bool header = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok[0] == '#') {
      tok = tok.substr(1);
      do {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "a") e.source.a = to_double(val, lineno), header = true;
        else if (key == "eps") e.source.eps_degenerate = to_double(val, lineno);
        else if (key == "constant") e.constant = to_double(val, lineno);
        else if (key == "m") m = static_cast<std::size_t>(to_double(val, lineno));
      } while (ls >> tok);
      continue;
    }
    std::string t2, t3, extra;
    if (!(ls >> t2 >> t3) || (ls >> extra))
      throw ParseError("expected 'x y coeff' at line " + std::to_string(lineno), lineno);
    e.charges.push_back({to_double(tok, lineno), to_double(t2, lineno)});
    e.coeffs.push_back(to_double(t3, lineno));
  }
  if (!header) throw ParseError("missing harmonic-expansion header", 0);
  if (m && *m != e.charges.size())
    throw ParseError("header declares m=" + std::to_string(*m) + " but block has " +
                         std::to_string(e.charges.size()) + " charges",
                     0);
  return e;
}

HarmonicSolution::HarmonicSolution(GraphDomain domain, HarmonicExpansion expansion,
                                   double residual, double condition, bool converged)
    : domain_(std::move(domain)),
      expansion_(std::move(expansion)),
      residual_(residual),
      condition_(condition),
      converged_(converged) {}

void polygon_normals_weights(std::span<const Vec2> pts, std::vector<Vec2>& normals,
                             std::vector<double>& weights) {
  const std::size_t q = pts.size();
  normals.resize(q);
  weights.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    const Vec2 pm = pts[(i + q - 1) % q], p = pts[i], pp = pts[(i + 1) % q];
    const Vec2 e0 = p - pm, e1 = pp - p;
    const double h0 = e0.norm(), h1 = e1.norm();
    // Tangent of the parabola through the three vertices (chord parameter).
    const Vec2 t = (e0 * (h1 / h0) + e1 * (h0 / h1)) * (1.0 / (h0 + h1));
    const double tn = t.norm();
    normals[i] = {t.y / tn, -t.x / tn};
    weights[i] = 0.5 * (h0 + h1);
  }
}

namespace {

double distance_to_polygon(Vec2 z, std::span<const Vec2> pts) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t q = pts.size();
  for (std::size_t i = 0; i < q; ++i) {
    const Vec2 a = pts[i], b = pts[(i + 1) % q];
    const Vec2 ab = b - a;
    const double t = std::clamp((z - a).dot(ab) / ab.dot(ab), 0.0, 1.0);
    best = std::min(best, (z - (a + ab * t)).norm());
  }
  return best;
}

}  // namespace

HarmonicSolution solve_dirichlet(const GraphDomain& d, const LineSource& src,
                                 const SolverOptions& opts) {
  validate(src);
  const auto pts = d.boundary_points();
  const std::size_t q = pts.size();
  for (const auto& p : pts)
    if (distance_to_segment(p, src.half_length()) == 0.0)
      throw SolverFailure("solve_dirichlet: boundary touches the source segment", 0.0,
                          std::numeric_limits<double>::infinity());
  std::vector<Vec2> normals;
  std::vector<double> weights;
  polygon_normals_weights(pts, normals, weights);

  const std::size_t m = opts.charges > 0 ? static_cast<std::size_t>(opts.charges)
                                         : std::max<std::size_t>(8, q / 2);
  if (q < m + 1)
    throw std::invalid_argument("solve_dirichlet: need at least charges + 1 boundary nodes");

  std::vector<Vec2> charges(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = (j * q) / m;
    double off = opts.offset * weights[i];
    bool ok = false;
    for (int attempt = 0; attempt < 6 && !ok; ++attempt, off *= 0.5) {
      const Vec2 z = pts[i] + normals[i] * off;
      if (d.contains(z, 0.0)) continue;
      if (distance_to_polygon(z, pts) < 0.5 * off) continue;
      charges[j] = z;
      ok = true;
    }
    if (!ok)
      throw PlacementError("solve_dirichlet: cannot place charge " + std::to_string(j) +
                           " outside the domain");
  }

  Eigen::MatrixXd A(q, m + 1);
  Eigen::VectorXd b(q);
  std::vector<double> wvals(q);
  for (std::size_t i = 0; i < q; ++i) {
    const double sw = std::sqrt(weights[i]);
    A(i, 0) = sw;
    for (std::size_t j = 0; j < m; ++j) {
      const Vec2 dz = pts[i] - charges[j];
      A(i, j + 1) = sw * 0.5 * std::log(dz.dot(dz));
    }
    wvals[i] = eval_w(src, pts[i]);
    b(i) = -sw * wvals[i];
  }
  Eigen::VectorXd colscale(m + 1);
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    colscale(j) = A.col(j).norm();
    if (colscale(j) == 0.0) colscale(j) = 1.0;
    A.col(j) /= colscale(j);
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  const double condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
  const double lambda = opts.regularization * smax;
  Eigen::VectorXd utb = svd.matrixU().transpose() * b;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    const double s = sv(k);
    utb(k) *= s / (s * s + lambda * lambda);
  }
  Eigen::VectorXd c = svd.matrixV() * utb;
  for (Eigen::Index j = 0; j < c.size(); ++j) c(j) /= colscale(j);

  HarmonicExpansion e;
  e.source = src;
  e.constant = c(0);
  e.charges = std::move(charges);
  e.coeffs.resize(m);
  for (std::size_t j = 0; j < m; ++j) e.coeffs[j] = c(static_cast<Eigen::Index>(j + 1));

  // w carries an arbitrary additive constant and may nearly vanish on the
  // boundary, so the failure scale never drops below the source scale M/2π.
  double residual = 0.0, scale = src.mass() / (2.0 * kPi);
  for (std::size_t i = 0; i < q; ++i) {
    residual = std::max(residual, std::abs(wvals[i] + e.eval_h(pts[i])));
    scale = std::max(scale, std::abs(wvals[i]));
  }
  if (!std::isfinite(residual) || residual > opts.fail_tol * std::max(scale, 1e-300))
    throw SolverFailure("solve_dirichlet: boundary residual " + fmt17(residual) +
                            " exceeds failure tolerance (condition " + fmt17(condition) + ")",
                        condition, residual);
  const double effective = std::min(condition, smax / std::max(lambda, 1e-300));
  if (effective > opts.max_condition)
    throw SolverFailure("solve_dirichlet: system too ill-conditioned", condition, residual);
  return HarmonicSolution(d, std::move(e), residual, condition, residual < opts.tol);
}

double eval_u(const HarmonicSolution& sol, Vec2 p) {
  const auto& d = sol.domain();
  if (!d.contains(p, 1e-9 * d.scale()))
    throw std::domain_error("eval_u: point outside the domain");
  return sol.expansion().eval_u(p);
}

Vec2 grad_u(const HarmonicSolution& sol, Vec2 p) {
  const auto& d = sol.domain();
  if (!d.contains(p, 1e-9 * d.scale()))
    throw std::domain_error("grad_u: point outside the domain");
  return grad_w(sol.source(), p) + sol.expansion().grad_h(p);
}

BoundaryField boundary_flux(const HarmonicSolution& sol) {
  BoundaryField f;
  f.nodes = sol.domain().boundary_loop();
  std::vector<Vec2> pts;
  pts.reserve(f.nodes.size());
  for (const auto& n : f.nodes) pts.push_back(n.p);
  polygon_normals_weights(pts, f.normals, f.weights);
  f.flux.resize(pts.size());
  double gauss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 g = grad_w(sol.source(), pts[i]) + sol.expansion().grad_h(pts[i]);
    f.flux[i] = g.dot(f.normals[i]);
    gauss -= f.weights[i] * f.flux[i];
  }
  f.gauss_flux = gauss;
  return f;
}

}  // namespace qsurf
