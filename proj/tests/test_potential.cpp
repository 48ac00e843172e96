#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "qsurf/potential.hpp"

using namespace qsurf;
constexpr double pi = std::numbers::pi;

namespace {

std::vector<Vec2> interior_samples(const GraphDomain& d, int count, double margin,
                                   unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> X(d.x_left(), d.x_right()), T(0.0, 1.0);
  std::vector<Vec2> out;
  const auto xs = d.xs();
  while (static_cast<int>(out.size()) < count) {
    const double x = X(rng);
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = std::clamp<std::size_t>(it - xs.begin(), 1, d.size() - 1);
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    const double top = d.phi1()[i - 1] + t * (d.phi1()[i] - d.phi1()[i - 1]);
    const double bot = d.phi2()[i - 1] + t * (d.phi2()[i] - d.phi2()[i - 1]);
    if (top - bot < 2 * margin) continue;
    const Vec2 p{x, bot + margin + T(rng) * (top - bot - 2 * margin)};
    if (std::abs(p.y) < 1e-3 && std::abs(p.x) <= 1.0) continue;
    out.push_back(p);
  }
  return out;
}

std::vector<GraphDomain> gnp_suite() {
  return {make_disk(1.5, 129),
          make_disk(2.0, 129),
          make_disk(3.0, 129),
          make_disk(2.0, 129, 0.3),
          make_disk(2.5, 129, -0.6),
          make_stadium(0.3, 129),
          make_stadium(0.5, 129),
          make_stadium(1.0, 129),
          oracle::disk_over_ellipse(1.5, 1.0, 129),
          oracle::disk_over_ellipse(1.8, 1.5, 129)};
}

}  // namespace

TEST_SUITE("potential") {

TEST_CASE("source validation") {
  CHECK_THROWS_AS(validate(LineSource{0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(LineSource{1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(LineSource{1.0, 1.5}), std::invalid_argument);
  CHECK_NOTHROW(validate(LineSource{1.0, 1e-3}));
  CHECK(LineSource{3.0, 0.5}.mass() == 3.0);
}

TEST_CASE("w matches quadrature") {
  const LineSource s{1.0, 1.0};
  CHECK(std::abs(eval_w(s, {3.0, 2.0}) - oracle::w_quad(1.0, 3.0, 2.0)) <
        1e-10 * std::abs(oracle::w_quad(1.0, 3.0, 2.0)));
  std::mt19937 rng(3);
  const LineSource s2{2.5, 1.0};
  for (const auto& p : oracle::points_off_segment(rng, 100, -4.0, 4.0, 1e-3)) {
    const double ref = oracle::w_quad(2.5, p.x, p.y);
    CHECK(std::abs(eval_w(s2, {p.x, p.y}) - ref) < 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("w is even in x and in y") {
  std::mt19937 rng(5);
  const LineSource s{1.7, 1.0};
  for (const auto& p : oracle::points_off_segment(rng, 100, -5.0, 5.0, 1e-4)) {
    const double w = eval_w(s, {p.x, p.y});
    const double tol = 1e-14 * std::max(1.0, std::abs(w));
    CHECK(std::abs(eval_w(s, {-p.x, p.y}) - w) < tol);
    CHECK(std::abs(eval_w(s, {p.x, -p.y}) - w) < tol);
  }
}

TEST_CASE("w is continuous across C and shrinks to a point source") {
  const LineSource s{1.0, 1.0};
  for (double x : {-0.9, -0.3, 0.0, 0.6}) {
    CHECK(std::abs(eval_w(s, {x, 1e-9}) - eval_w(s, {x, 0.0})) < 1e-7);
    CHECK(std::abs(eval_w(s, {x, -1e-9}) - eval_w(s, {x, 0.0})) < 1e-7);
  }
  const LineSource pt{500.0, 1e-3};  // mass 1
  for (double r : {0.5, 1.0, 2.0}) {
    const double ref = -std::log(r) / (2 * pi);
    CHECK(std::abs(eval_w(pt, {r * 0.6, r * 0.8}) - ref) < 1e-6);
  }
}

TEST_CASE("far-field slope") {
  const double a = 1.3;
  const LineSource s{a, 1.0};
  const double slope = (eval_w(s, {1e4, 0.0}) - eval_w(s, {1e3, 0.0})) / std::log(10.0);
  CHECK(slope == doctest::Approx(-a / pi).epsilon(1e-4));
}

TEST_CASE("gradient of w against finite differences") {
  std::mt19937 rng(9);
  const LineSource s{2.0, 1.0};
  for (const auto& p : oracle::points_off_segment(rng, 100, -3.0, 3.0, 0.05)) {
    const double h = 1e-6;
    const Vec2 g = grad_w(s, {p.x, p.y});
    const double gx = (eval_w(s, {p.x + h, p.y}) - eval_w(s, {p.x - h, p.y})) / (2 * h);
    const double gy = (eval_w(s, {p.x, p.y + h}) - eval_w(s, {p.x, p.y - h})) / (2 * h);
    const double sc = std::max(1e-3, g.norm());
    CHECK(std::abs(g.x - gx) < 1e-6 * sc + 1e-9);
    CHECK(std::abs(g.y - gy) < 1e-6 * sc + 1e-9);
  }
  CHECK_THROWS_AS(grad_w(s, {0.2, 0.0}), std::domain_error);
  CHECK_THROWS_AS(grad_w(s, {1.0, 0.0}), std::domain_error);
}

TEST_CASE("normal derivative on C") {
  const double a = 3.0;
  const LineSource s{a, 1.0};
  CHECK(grad_w(s, {0.0, 1e-6}).y == doctest::Approx(-a / 2).epsilon(1e-4));
  CHECK(std::abs(grad_w(s, {0.0, 0.5}).x) < 1e-15);
  for (double x = -0.9; x <= 0.9 + 1e-12; x += 0.1) {
    CHECK(grad_w_on_segment(s, x, true).y == doctest::Approx(-a / 2).epsilon(1e-12));
    CHECK(grad_w_on_segment(s, x, false).y == doctest::Approx(a / 2).epsilon(1e-12));
    CHECK(grad_w(s, {x, 1e-8}).y == doctest::Approx(-a / 2).epsilon(1e-4));
  }
}

TEST_CASE("w is harmonic off C") {
  std::mt19937 rng(13);
  const LineSource s{2.0, 1.0};
  for (const auto& p : oracle::points_off_segment(rng, 100, -3.0, 3.0, 0.1)) {
    const double d = distance_to_segment({p.x, p.y});
    const double h = 0.01 * std::min(d, 1.0);
    auto w = [&](double x, double y) { return eval_w(s, {x, y}); };
    CHECK(std::abs(oracle::laplacian(w, p.x, p.y, h)) < 1e-6);
  }
}

TEST_CASE("segment integral of w against quadrature") {
  const LineSource s{1.0, 1.0};
  auto f = [&](double x) { return eval_w(s, {x, 0.0}); };
  const double ref = oracle::integrate(f, -1.0, 0.0, 1e-13) + oracle::integrate(f, 0.0, 1.0, 1e-13);
  CHECK(segment_integral_w(s) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("point-source limit on a disk") {
  const double R = 3.0;
  const LineSource s{500.0, 1e-3};
  SolverOptions o;
  o.charges = 128;
  const auto d = make_disk(R, 129);
  const auto sol = solve_dirichlet(d, s, o);
  CHECK(sol.converged());
  CHECK(sol.residual_dirichlet() < 1e-8);
  double err = 0.0;
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> rr(0.2, R - 0.05), th(0.0, 2 * pi);
  for (int i = 0; i < 400; ++i) {
    const double r = rr(rng), t = th(rng);
    const Vec2 p{r * std::cos(t), r * std::sin(t)};
    err = std::max(err, std::abs(eval_u(sol, p) - oracle::point_source_disk(s.mass(), R, r)));
  }
  CHECK(err < 1e-6);
  const auto f = boundary_flux(sol);
  for (double q : f.flux) CHECK(std::abs(-q - s.mass() / (2 * pi * R)) < 1e-6 * s.mass());
}

TEST_CASE("Dirichlet data, positivity and symmetry") {
  const LineSource s{2.0, 1.0};
  const auto d = make_disk(2.0, 129);
  const auto sol = solve_dirichlet(d, s);
  for (const auto& p : d.boundary_points())
    CHECK(std::abs(eval_u(sol, p)) <= sol.residual_dirichlet() + 1e-14);
  for (const auto& p : interior_samples(d, 200, 0.05, 1)) {
    CHECK(eval_u(sol, p) > 0.0);
    CHECK(std::abs(eval_u(sol, p) - eval_u(sol, {p.x, -p.y})) < 1e-8);
  }
  // u on C dominates the boundary values
  for (double x = -0.95; x < 1.0; x += 0.1) CHECK(eval_u(sol, {x, 0.0}) > sol.residual_dirichlet());
  CHECK_THROWS_AS(eval_u(sol, {2.5, 0.0}), std::domain_error);
  CHECK_THROWS_AS(grad_u(sol, {0.0, 2.1}), std::domain_error);
}

TEST_CASE("solution is linear in the intensity") {
  const auto d = make_stadium(0.7, 129);
  const auto s1 = solve_dirichlet(d, LineSource{1.0, 1.0});
  const auto s2 = solve_dirichlet(d, LineSource{2.0, 1.0});
  for (const auto& p : interior_samples(d, 50, 0.05, 2))
    CHECK(std::abs(eval_u(s2, p) - 2 * eval_u(s1, p)) < 1e-10 * std::abs(eval_u(s2, p)));
}

TEST_CASE("harmonic correction is harmonic") {
  const auto d = oracle::disk_over_ellipse(1.6, 1.1, 129);
  const auto sol = solve_dirichlet(d, LineSource{1.0, 1.0});
  const auto& e = sol.expansion();
  double hmax = 0.0;
  for (const auto& p : d.boundary_points()) hmax = std::max(hmax, std::abs(e.eval_h(p)));
  auto h = [&](double x, double y) { return e.eval_h({x, y}); };
  for (const auto& p : interior_samples(d, 100, 0.1, 3))
    CHECK(std::abs(oracle::laplacian(h, p.x, p.y, 1e-3)) < 1e-6 * std::max(1.0, hmax));
}

TEST_CASE("jump of the normal derivative across C") {
  const double a = 2.5;
  const auto sol = solve_dirichlet(make_disk(2.0, 129), LineSource{a, 1.0});
  for (double x = -0.9; x <= 0.9 + 1e-12; x += 0.15) {
    const double jump = grad_u(sol, {x, 1e-6}).y - grad_u(sol, {x, -1e-6}).y;
    CHECK(jump == doctest::Approx(-a).epsilon(1e-4));
  }
}

TEST_CASE("Gauss flux equals the source mass") {
  const auto f = boundary_flux(solve_dirichlet(make_disk(3.0, 129), LineSource{1.0, 1.0}));
  CHECK(f.gauss_flux == doctest::Approx(2.0).epsilon(1e-4));
  int i = 0;
  for (const auto& d : gnp_suite()) {
    const double a = 0.5 + 0.7 * (i++);
    const auto b = boundary_flux(solve_dirichlet(d, LineSource{a, 1.0}));
    CAPTURE(i);
    CHECK(b.gauss_flux == doctest::Approx(2 * a).epsilon(1e-4));
  }
}

TEST_CASE("boundary field invariants") {
  const auto d = oracle::disk_over_ellipse(1.5, 1.0, 129);
  const auto f = boundary_flux(solve_dirichlet(d, LineSource{1.0, 1.0}));
  const std::size_t q = 2 * d.size() - 2;
  REQUIRE(f.nodes.size() == q);
  REQUIRE(f.normals.size() == q);
  double wsum = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    CHECK(std::abs(f.normals[i].norm() - 1.0) < 1e-12);
    CHECK(f.weights[i] > 0.0);
    CHECK(f.flux[i] < 0.0);
    wsum += f.weights[i];
  }
  CHECK(wsum == doctest::Approx(perimeter(d)).epsilon(1e-10));

  const auto g = boundary_flux(solve_dirichlet(make_stadium(0.8, 129), LineSource{1.0, 1.0}));
  std::map<std::pair<std::size_t, int>, double> by;
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    by[{g.nodes[i].index, static_cast<int>(g.nodes[i].side)}] = g.flux[i];
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].side != Side::upper) continue;
    CHECK(std::abs(g.flux[i] - by.at({g.nodes[i].index, static_cast<int>(Side::lower)})) < 1e-6);
  }
}

TEST_CASE("expansion text round trip") {
  const auto sol = solve_dirichlet(make_disk(2.0, 65), LineSource{1.5, 1.0});
  std::stringstream ss;
  write_expansion(ss, sol.expansion());
  const auto e = read_expansion(ss);
  std::stringstream again;
  write_expansion(again, e);
  CHECK(again.str() == ss.str());
  for (const Vec2 p : {Vec2{0.3, 0.4}, Vec2{-1.2, 0.9}})
    CHECK(e.eval_u(p) == sol.expansion().eval_u(p));
  std::stringstream bad("# harmonic-expansion a=1 eps=1 constant=0 m=2\n0 0 1\n1 x 2\n");
  try {
    read_expansion(bad);
    FAIL("no throw");
  } catch (const ParseError& err) {
    CHECK(err.line() == 3);
  }
}

TEST_CASE("boundary touching C fails the solve") {
  std::vector<double> xs, p1, p2;
  for (int i = 0; i <= 20; ++i) {
    const double x = -2.0 + 0.2 * i;
    xs.push_back(x);
    p1.push_back(x * x);
    p2.push_back(-1.0);
  }
  xs[10] = 0.0;
  p1[10] = 0.0;
  CHECK_THROWS_AS(solve_dirichlet(GraphDomain(xs, p1, p2), LineSource{1.0, 1.0}), SolverFailure);
}

}
