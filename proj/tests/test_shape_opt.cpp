#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "qsurf/shape_opt.hpp"

using namespace qsurf;
constexpr double pi = std::numbers::pi;

namespace {

GraphDomain mirrored(const GraphDomain& d) {
  std::vector<double> xs(d.xs().begin(), d.xs().end()), p1, p2;
  for (std::size_t i = 0; i < d.size(); ++i) {
    p1.push_back(-d.phi2()[i]);
    p2.push_back(-d.phi1()[i]);
  }
  return {xs, p1, p2};
}

// ∫|∇u|² over the polygon on a polar midpoint grid centred at the origin.
double polar_energy(const HarmonicSolution& sol, int nr, int nt) {
  const auto pts = sol.domain().boundary_points();
  const auto& e = sol.expansion();
  double total = 0.0;
  for (int j = 0; j < nt; ++j) {
    const double t = (j + 0.5) * 2 * pi / nt;
    const Vec2 dir{std::cos(t), std::sin(t)};
    double rho = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec2 a = pts[i], b = pts[(i + 1) % pts.size()];
      const Vec2 ab = b - a;
      const double den = dir.cross(ab);
      if (std::abs(den) < 1e-300) continue;
      const double s = a.cross(ab) / den, u = a.cross(dir) / den;
      if (s > 0 && u >= 0 && u <= 1) rho = std::max(rho, s);
    }
    const double dr = rho / nr;
    double ring = 0.0;
    for (int i = 0; i < nr; ++i) {
      const double r = (i + 0.5) * dr;
      const Vec2 p = dir * r;
      const Vec2 g = grad_w(e.source, p) + e.grad_h(p);
      ring += g.dot(g) * r;
    }
    total += ring * dr;
  }
  return total * 2 * pi / nt;
}

}  // namespace

TEST_SUITE("shape_opt") {

TEST_CASE("J is additive in k squared") {
  const auto d = oracle::disk_over_ellipse(1.6, 1.2, 129);
  const LineSource s{2.0, 1.0};
  const double J1 = eval_J(d, s, 1.0), J2 = eval_J(d, s, 1.7);
  CHECK(std::abs((J2 - J1) - (1.7 * 1.7 - 1.0) * area(d)) < 1e-10 * std::abs(J2));
}

TEST_CASE("reduced J against a volume integral") {
  const auto d = make_disk(3.0, 129);
  const LineSource s{1.0, 1.0};
  const auto ev = evaluate_J(d, s, 1.0);
  auto u = [&](double x) { return ev.solution.expansion().eval_u({x, 0.0}); };
  const double seg = oracle::integrate(u, -1.0, 0.0, 1e-12) + oracle::integrate(u, 0.0, 1.0, 1e-12);
  CHECK(ev.segment_u == doctest::Approx(seg).epsilon(1e-9));
  const double energy = polar_energy(ev.solution, 1500, 1500);
  CHECK(energy == doctest::Approx(s.a * seg).epsilon(1e-4));
  const double direct = energy - 2 * s.a * seg + area(d);
  CHECK(ev.J == doctest::Approx(direct).epsilon(1e-4));
}

TEST_CASE("shape gradient identities") {
  const double k = 1.0;
  const auto sol = solve_dirichlet(make_disk(2.0, 129), LineSource{4.0, 1.0});
  const auto f = shape_gradient(sol, k);
  for (std::size_t i = 0; i < f.g.size(); ++i) {
    const double e = std::abs(std::abs(f.flux[i]) - k);
    CHECK(std::abs(f.g[i]) <= 2 * k * e + e * e + 1e-14);
  }
  std::vector<double> ones(f.g.size(), 1.0);
  double ref = 0.0;
  for (std::size_t i = 0; i < f.g.size(); ++i) ref += f.g[i] * f.weights[i];
  CHECK(directional_derivative(f, ones) == doctest::Approx(ref));
  CHECK_THROWS_AS(directional_derivative(f, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST_CASE("node bump finite differences match g times weight") {
  const LineSource s{4.0, 1.0};
  const double k = 1.0, delta = 1e-4;
  const auto d = make_disk(2.0, 129);
  const auto f = shape_gradient(solve_dirichlet(d, s), k);
  int tested = 0;
  for (std::size_t li = 0; li < f.nodes.size() && tested < 20; li += 5) {
    const auto& nd = f.nodes[li];
    if (nd.side != Side::upper || std::abs(f.normals[li].y) < 0.3) continue;
    auto bumped = [&](double h) {
      std::vector<double> xs(d.xs().begin(), d.xs().end());
      std::vector<double> p1(d.phi1().begin(), d.phi1().end());
      std::vector<double> p2(d.phi2().begin(), d.phi2().end());
      p1[nd.index] += h;
      return eval_J(GraphDomain(xs, p1, p2), s, k);
    };
    const double fd = (bumped(delta) - bumped(-delta)) / (2 * delta) / f.normals[li].y;
    const double an = f.g[li] * f.weights[li];
    CAPTURE(li);
    CHECK(std::abs(fd - an) < 1e-3 * std::abs(an));
    ++tested;
  }
  CHECK(tested == 20);
}

TEST_CASE("a huge disk wants to shrink") {
  const auto f = shape_gradient(solve_dirichlet(make_disk(50.0, 129), LineSource{1.0, 1.0}), 1.0);
  for (double g : f.g) CHECK(g > 0.0);
}

TEST_CASE("Steiner drift does not increase J") {
  const LineSource s{3.0, 1.0};
  const auto d = oracle::disk_over_ellipse(1.5, 1.0, 129);
  const double J0 = eval_J(d, s, 1.0);
  for (double t : {0.01, 0.05, 0.1, 0.2}) CHECK(eval_J(steiner_continuous(d, t), s, 1.0) <= J0 + 1e-10);
}

TEST_CASE("projection") {
  const auto disk = make_disk(2.0, 129);
  CHECK(project_gnp(disk) == disk);

  const auto el = make_ellipse(2.0, 1.0, 129);
  const auto p = project_gnp(el);
  CHECK(check_gnp(p).passed);
  CHECK(area(p) <= area(el) + 1e-12);
  CHECK(area(p) > 0.9 * area(el));

  ContainmentSpec ball;
  ball.use_ball = true;
  ball.ball_radius = 1.2;
  const auto q = project_gnp(make_stadium(0.5, 129), ball);
  CHECK(check_gnp(q).passed);
  CHECK(q.x_left() <= -1.2 + 1e-12);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double x = q.xs()[i];
    if (std::abs(x) >= 1.2) continue;
    CHECK(q.phi1()[i] >= std::sqrt(1.44 - x * x) - 1e-9);
    CHECK(q.phi2()[i] <= -std::sqrt(1.44 - x * x) + 1e-9);
  }

  ContainmentSpec wide;
  wide.use_ball = true;
  wide.ball_radius = 3.0;
  CHECK_THROWS_AS(project_gnp(el, wide), ProjectionFailure);
  ContainmentSpec silly;
  silly.box_half = 0.5;
  CHECK_THROWS_AS(project_gnp(el, silly), std::invalid_argument);
}

TEST_CASE("minimize above the threshold") {
  const LineSource s{4.0, 1.0};
  bool all_gnp = true, symmetric = true;
  auto obs = [&](const IterateInfo&, const GraphDomain& d) {
    all_gnp = all_gnp && check_gnp(d).passed;
    for (std::size_t i = 0; i < d.size(); ++i)
      symmetric = symmetric && std::abs(d.phi1()[i] + d.phi2()[i]) < 1e-8;
  };
  const auto r = minimize(make_disk(2.0, 129), s, 1.0, {}, obs);
  CHECK(r.status == MinimizeStatus::converged);
  CHECK(r.residual < 1e-2);
  CHECK(r.clearance > 0.1);
  CHECK(perimeter(r.domain) == doctest::Approx(8.0).epsilon(0.01));
  CHECK(all_gnp);
  CHECK(symmetric);
  for (std::size_t i = 1; i < r.J_history.size(); ++i) CHECK(r.J_history[i] <= r.J_history[i - 1]);
  const auto j = nlohmann::json::parse(result_json(r, s, 1.0));
  CHECK(j["status"] == "converged");
  CHECK(j["perimeter_predicted"] == 8.0);
}

TEST_CASE("minimize below the threshold collapses") {
  const auto r = minimize(make_disk(2.0, 129), LineSource{1.0, 1.0}, 1.0);
  CHECK(r.status == MinimizeStatus::collapsed);
  CHECK(r.clearance < 1e-2);
  CHECK(std::string(to_string(r.status)) == "collapsed-onto-C");
}

TEST_CASE("mirrored start gives the mirrored descent") {
  // exact up to roundoff; later Armijo decisions may split the two runs
  const LineSource s{4.0, 1.0};
  const auto d0 = oracle::disk_over_ellipse(2.0, 1.6, 129);
  REQUIRE(check_gnp(d0).passed);
  MinimizeOptions o;
  o.max_iter = 15;
  const auto a = minimize(d0, s, 1.0, o);
  const auto b = minimize(mirrored(d0), s, 1.0, o);
  REQUIRE(a.J_history.size() == b.J_history.size());
  for (std::size_t i = 0; i < a.J_history.size(); ++i)
    CHECK(std::abs(a.J_history[i] - b.J_history[i]) < 1e-6 * std::abs(a.J_history[i]));
  const auto m = mirrored(b.domain);
  CHECK(std::abs(area(a.domain) - area(m)) < 1e-6);
  CHECK(std::abs(a.domain.x_left() - m.x_left()) < 1e-5);
  CHECK(std::abs(a.domain.x_right() - m.x_right()) < 1e-5);
}

TEST_CASE("iterates respect the ball constraint") {
  MinimizeOptions o;
  o.max_iter = 40;
  o.containment.use_ball = true;
  o.containment.ball_radius = 1.5;
  bool inside = true;
  auto obs = [&](const IterateInfo&, const GraphDomain& d) {
    inside = inside && d.x_left() <= -1.5 + 1e-9 && d.x_right() >= 1.5 - 1e-9;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x = d.xs()[i];
      if (std::abs(x) >= 1.5) continue;
      inside = inside && d.phi1()[i] >= std::sqrt(2.25 - x * x) - 1e-9;
    }
  };
  const auto r = minimize(make_disk(2.0, 129), LineSource{4.0, 1.0}, 1.0, o, obs);
  CHECK(inside);
  CHECK(r.status != MinimizeStatus::solver_failed);
}

TEST_CASE("clearance grows with the intensity") {
  MinimizeOptions o;
  o.collapse_eps = 1e-4;
  o.max_iter = 150;
  const auto lo = minimize(make_disk(2.0, 129), LineSource{1.5, 1.0}, 1.0, o);
  const auto hi = minimize(make_disk(2.0, 129), LineSource{3.0, 1.0}, 1.0, o);
  CHECK(lo.clearance < hi.clearance);
}

TEST_CASE("minimize argument handling") {
  const LineSource s{4.0, 1.0};
  CHECK_THROWS_AS(minimize(make_ellipse(2.0, 1.0, 129), s, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(minimize(make_disk(2.0, 129), s, 0.0), std::invalid_argument);
  MinimizeOptions o;
  o.max_iter = 1;
  const auto r = minimize(make_disk(2.0, 129), s, 1.0, o);
  CHECK(r.status == MinimizeStatus::max_iterations);
  CHECK(r.J_history.size() == 2);
  // a coarse start is resampled to the working grid
  o.max_iter = 0;
  CHECK(minimize(make_disk(2.0, 65), s, 1.0, o).domain.size() == 129);
}

}
