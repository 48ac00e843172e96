#include "qsurf/shape_opt.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include "json.hpp"

namespace qsurf {

JEvaluation evaluate_J(const GraphDomain& d, const LineSource& src, double k,
                       const SolverOptions& opts) {
  if (!(k > 0.0)) throw std::invalid_argument("evaluate_J: k must be positive");
  auto sol = solve_dirichlet(d, src, opts);
  const double seg = segment_integral_w(src) + sol.expansion().segment_integral_h();
  const double A = area(d);
  return {-src.a * seg + k * k * A, seg, A, std::move(sol)};
}

double eval_J(const GraphDomain& d, const LineSource& src, double k, const SolverOptions& opts) {
  return evaluate_J(d, src, k, opts).J;
}

BoundaryField shape_gradient(const HarmonicSolution& sol, double k) {
  auto f = boundary_flux(sol);
  f.g.resize(f.flux.size());
  for (std::size_t i = 0; i < f.flux.size(); ++i) f.g[i] = k * k - f.flux[i] * f.flux[i];
  return f;
}

double directional_derivative(const BoundaryField& f, std::span<const double> velocity) {
  if (velocity.size() != f.g.size())
    throw std::invalid_argument("directional_derivative: velocity size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < velocity.size(); ++i) s += f.g[i] * velocity[i] * f.weights[i];
  return s;
}

namespace {

void largest_lipschitz_minorant(std::span<const double> x, std::vector<double>& F) {
  const std::size_t n = F.size();
  for (std::size_t i = 1; i < n; ++i) F[i] = std::min(F[i], F[i - 1] + 2.0 * (x[i] - x[i - 1]));
  for (std::size_t i = n - 1; i-- > 0;)
    F[i] = std::min(F[i], F[i + 1] + 2.0 * (x[i + 1] - x[i]));
}

bool inside_box(const GraphDomain& d, const ContainmentSpec& box) {
  const double tol = 1e-12;
  if (d.x_left() < -box.box_half - tol || d.x_right() > box.box_half + tol) return false;
  const auto xs = d.xs(), p1 = d.phi1(), p2 = d.phi2();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (p1[i] > box.box_half + tol || p2[i] < -box.box_half - tol) return false;
    if (box.use_ball && std::abs(xs[i]) < box.ball_radius) {
      const double b = std::sqrt(box.ball_radius * box.ball_radius - xs[i] * xs[i]);
      if (p1[i] < b - tol || p2[i] > -b + tol) return false;
    }
  }
  if (box.use_ball && (d.x_left() > -box.ball_radius || d.x_right() < box.ball_radius))
    return false;
  return true;
}

}  // namespace

GraphDomain project_gnp(const GraphDomain& d, const ContainmentSpec& box) {
  if (!(box.box_half > 1.0)) throw std::invalid_argument("project_gnp: box must contain C");
  if (box.use_ball && !(box.ball_radius > 0.0 && box.ball_radius < box.box_half))
    throw std::invalid_argument("project_gnp: ball radius out of range");
  auto complies = [&](const GraphDomain& g) {
    return check_gnp(g, box.tol_gnp).passed && inside_box(g, box);
  };
  if (complies(d)) return d;

  const std::size_t n = d.size();
  GraphDomain cur = d;
  for (int sweep = 0; sweep < box.max_sweeps; ++sweep) {
    const std::size_t m = cur.size();
    const auto xs = cur.xs();
    std::vector<double> F1(m), F2(m);
    for (std::size_t i = 0; i < m; ++i) {
      F1[i] = xs[i] * xs[i] + cur.phi1()[i] * cur.phi1()[i];
      F2[i] = xs[i] * xs[i] + cur.phi2()[i] * cur.phi2()[i];
    }
    largest_lipschitz_minorant(xs, F1);
    largest_lipschitz_minorant(xs, F2);

    // Continuous minorant min_j F_j + 2|x - x_j| meets x^2 on the caps
    // about (-1,0) and (1,0); an end node beyond that cannot be kept. Both
    // graphs have to reach the tip, so take the inner one.
    double tip_l = -std::numeric_limits<double>::infinity();
    double tip_r = std::numeric_limits<double>::infinity();
    for (const auto* F : {&F1, &F2}) {
      double ml = std::numeric_limits<double>::infinity(), mr = ml;
      for (std::size_t j = 0; j < m; ++j) {
        ml = std::min(ml, (*F)[j] + 2.0 * xs[j] + 1.0);
        mr = std::min(mr, (*F)[j] - 2.0 * xs[j] + 1.0);
      }
      tip_l = std::max(tip_l, -1.0 - std::sqrt(std::max(ml, 0.0)));
      tip_r = std::min(tip_r, 1.0 + std::sqrt(std::max(mr, 0.0)));
    }
    const double gap = 1e-9 * cur.scale();
    const bool move_l = tip_l > xs.front() + gap, move_r = tip_r < xs.back() - gap;
    auto envelope = [&](const std::vector<double>& F, double x) {
      double v = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j) v = std::min(v, F[j] + 2.0 * std::abs(x - xs[j]));
      return v;
    };

    std::vector<double> X, P1, P2;
    auto push = [&](double x, double f1, double f2, double s1, double s2) {
      X.push_back(x);
      P1.push_back(std::copysign(std::sqrt(std::max(f1 - x * x, 0.0)), s1));
      P2.push_back(std::copysign(std::sqrt(std::max(f2 - x * x, 0.0)), s2));
    };
    if (move_l) push(tip_l, envelope(F1, tip_l), envelope(F2, tip_l), 1.0, -1.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (move_l && xs[i] <= tip_l + gap) continue;
      if (move_r && xs[i] >= tip_r - gap) continue;
      push(xs[i], F1[i], F2[i], cur.phi1()[i], cur.phi2()[i]);
    }
    if (move_r) push(tip_r, envelope(F1, tip_r), envelope(F2, tip_r), 1.0, -1.0);
    const std::size_t k = X.size();

    for (std::size_t i = 0; i < k; ++i) {
      P1[i] = std::min(P1[i], box.box_half);
      P2[i] = std::max(P2[i], -box.box_half);
      if (box.use_ball && std::abs(X[i]) < box.ball_radius) {
        const double b = std::sqrt(box.ball_radius * box.ball_radius - X[i] * X[i]);
        P1[i] = std::max(P1[i], b);
        P2[i] = std::min(P2[i], -b);
      }
    }
    // The minorant can pinch the graphs together near the tips; cut there.
    std::size_t lo = 0, hi = k - 1;
    while (lo + 1 < k && P1[lo + 1] <= P2[lo + 1]) ++lo;
    while (hi > lo && P1[hi - 1] <= P2[hi - 1]) --hi;
    for (std::size_t i = lo + 1; i < hi; ++i)
      if (!(P1[i] > P2[i])) throw ProjectionFailure("project_gnp: domain pinched off");
    if (hi < lo + 8) throw ProjectionFailure("project_gnp: domain collapsed");
    auto pinch = [&](std::size_t i) {
      if (P1[i] <= P2[i]) P1[i] = P2[i] = 0.5 * (P1[i] + P2[i]);
    };
    pinch(lo);
    pinch(hi);
    try {
      GraphDomain cut(std::vector<double>(X.begin() + lo, X.begin() + hi + 1),
                      std::vector<double>(P1.begin() + lo, P1.begin() + hi + 1),
                      std::vector<double>(P2.begin() + lo, P2.begin() + hi + 1));
      cur = (cut.size() == n && k == m && lo == 0 && hi == k - 1) ? std::move(cut)
                                                                   : resample(cut, n);
    } catch (const std::invalid_argument& e) {
      throw ProjectionFailure(std::string("project_gnp: ") + e.what());
    }
    if (complies(cur)) return cur;
  }
  throw ProjectionFailure("project_gnp: no fixed point after " +
                          std::to_string(box.max_sweeps) + " sweeps");
}

const char* to_string(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::collapsed: return "collapsed-onto-C";
    case MinimizeStatus::max_iterations: return "max-iterations";
    case MinimizeStatus::stalled: return "stalled";
    case MinimizeStatus::solver_failed: return "solver-failed";
  }
  return "?";
}

double free_boundary_residual(const BoundaryField& f, double k, const ContainmentSpec& box) {
  double r = 0.0;
  for (std::size_t i = 0; i < f.flux.size(); ++i) {
    if (box.use_ball && f.nodes[i].p.norm() <= box.ball_radius + 1e-9) continue;
    r = std::max(r, std::abs(std::abs(f.flux[i]) - k));
  }
  return r;
}

namespace {

// (W + l² K) V = W g on the closed loop: an H¹ Riesz representative of the
// shape derivative, so Σ g V w = Vᵀ(W + l² K)V > 0.
std::vector<double> smooth_velocity(const BoundaryField& f, double ell) {
  const std::size_t q = f.g.size();
  std::vector<double> V(f.g);
  if (ell <= 0.0) return V;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd b(q);
  for (std::size_t i = 0; i < q; ++i) {
    A(i, i) += f.weights[i];
    b(i) = f.weights[i] * f.g[i];
    const std::size_t j = (i + 1) % q;
    const double h = (f.nodes[j].p - f.nodes[i].p).norm();
    const double c = ell * ell / h;
    A(i, i) += c;
    A(j, j) += c;
    A(i, j) -= c;
    A(j, i) -= c;
  }
  Eigen::VectorXd v = A.ldlt().solve(b);
  for (std::size_t i = 0; i < q; ++i) V[i] = v(i);
  return V;
}

struct Iterate {
  GraphDomain domain;
  JEvaluation eval;
  BoundaryField field;
  double residual;
  double clearance;
};

Iterate make_iterate(GraphDomain d, const LineSource& src, double k, const MinimizeOptions& o) {
  auto ev = evaluate_J(d, src, k, o.solver);
  auto f = shape_gradient(ev.solution, k);
  const double res = free_boundary_residual(f, k, o.containment);
  const double cl = clearance(d);
  return {std::move(d), std::move(ev), std::move(f), res, cl};
}

}  // namespace

MinimizeResult minimize(const GraphDomain& d0, const LineSource& src, double k,
                        const MinimizeOptions& o, const MinimizeObserver& observer) {
  validate(src);
  if (!(k > 0.0)) throw std::invalid_argument("minimize: k must be positive");
  if (o.n < 8) throw std::invalid_argument("minimize: n must be at least 8");
  if (!(o.eta0 > 0.0 && o.tol_res > 0.0 && o.tol_step > 0.0 && o.collapse_eps > 0.0))
    throw std::invalid_argument("minimize: step sizes and tolerances must be positive");
  if (!(o.backtrack > 0.0 && o.backtrack < 1.0 && o.grow >= 1.0))
    throw std::invalid_argument("minimize: backtrack must lie in (0,1) and grow be >= 1");
  if (!check_gnp(d0, o.containment.tol_gnp).passed)
    throw std::invalid_argument("minimize: initial domain fails the GNP check");

  MinimizeResult r{d0, std::nullopt, {}, 0.0, clearance(d0), MinimizeStatus::max_iterations, 0, {}};
  std::optional<Iterate> cur;
  try {
    GraphDomain start = d0.size() == o.n ? d0 : project_gnp(resample(d0, o.n), o.containment);
    cur = make_iterate(std::move(start), src, k, o);
  } catch (const std::exception& e) {
    r.status = MinimizeStatus::solver_failed;
    r.message = e.what();
    return r;
  }
  r.J_history.push_back(cur->eval.J);

  double eta = o.eta0;
  int it = 0;
  auto notify = [&](double step) {
    if (observer) observer({it, cur->eval.J, cur->residual, cur->clearance, step}, cur->domain);
  };
  notify(0.0);
  for (;; ++it) {
    if (cur->clearance < o.collapse_eps) {
      r.status = MinimizeStatus::collapsed;
      break;
    }
    if (cur->residual < o.tol_res) {
      r.status = MinimizeStatus::converged;
      break;
    }
    if (it >= o.max_iter) {
      r.status = MinimizeStatus::max_iterations;
      break;
    }
    const auto& f = cur->field;
    const std::size_t q = f.g.size();
    double per = 0.0;
    for (double w : f.weights) per += w;
    const auto V = smooth_velocity(f, o.smoothing);
    double vmax = 0.0;
    for (double v : V) vmax = std::max(vmax, std::abs(v));
    const double slope = directional_derivative(f, V);
    if (!(vmax > 0.0) || !(slope > 0.0)) {
      r.status = MinimizeStatus::stalled;
      r.message = "descent direction vanished";
      break;
    }
    const double cap = std::min(o.max_move * per / static_cast<double>(q), 0.5 * cur->clearance);
    eta = std::min(eta, cap / vmax);

    bool accepted = false;
    std::string last_error;
    while (eta * vmax >= o.tol_step) {
      std::vector<Vec2> moved(q);
      for (std::size_t i = 0; i < q; ++i) moved[i] = f.nodes[i].p - f.normals[i] * (eta * V[i]);
      try {
        auto cand = project_gnp(graph_from_loop(moved, o.n), o.containment);
        auto next = make_iterate(std::move(cand), src, k, o);
        if (next.eval.J <= cur->eval.J - o.armijo_c * eta * slope) {
          cur = std::move(next);
          accepted = true;
          break;
        }
      } catch (const std::exception& e) {
        last_error = e.what();
      }
      eta *= o.backtrack;
    }
    if (!accepted) {
      r.status = MinimizeStatus::stalled;
      r.message = last_error.empty() ? "line search exhausted" : last_error;
      break;
    }
    r.J_history.push_back(cur->eval.J);
    notify(eta * vmax);
    eta *= o.grow;
  }

  r.iterations = it;
  r.residual = cur->residual;
  r.clearance = cur->clearance;
  r.domain = cur->domain;
  r.solution = cur->eval.solution;
  return r;
}

std::string result_json(const MinimizeResult& r, const LineSource& src, double k) {
  nlohmann::json j;
  j["status"] = to_string(r.status);
  j["iterations"] = r.iterations;
  j["a"] = src.a;
  j["k"] = k;
  j["J_history"] = r.J_history;
  j["residual"] = r.residual;
  j["clearance"] = r.clearance;
  j["perimeter"] = perimeter(r.domain);
  j["perimeter_predicted"] = src.mass() / k;
  j["area"] = area(r.domain);
  j["n"] = r.domain.size();
  if (r.solution) j["dirichlet_residual"] = r.solution->residual_dirichlet();
  if (!r.message.empty()) j["message"] = r.message;
  return j.dump(2);
}

}  // namespace qsurf
