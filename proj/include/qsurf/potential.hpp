#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsurf/geometry.hpp"

namespace qsurf {

/// Uniform density `a` per unit length on [-eps, eps] x {0}. eps = 1 is the
/// physical segment C; smaller values shrink it towards a point source of
/// mass 2 a eps and exist for closed-form checks.
struct LineSource {
  double a = 1.0;
  double eps_degenerate = 1.0;

  double half_length() const { return eps_degenerate; }
  double mass() const { return 2.0 * a * eps_degenerate; }
};

/// Throws std::invalid_argument if the source parameters are out of range.
void validate(const LineSource& src);

/// Exact integral of ln((x - s)^2 + y^2) over s in [-ell, ell].
double segment_log_integral(Vec2 p, double ell);

/// Potential of the source, -Δw = a δ_C: the single layer
/// w(p) = -(a / 2π) ∫_C ln|p - s| ds. Continuous across C.
double eval_w(const LineSource& src, Vec2 p);

/// Gradient of w. Throws for p on the closed segment.
Vec2 grad_w(const LineSource& src, Vec2 p);

/// One-sided limit of ∇w at (x, 0±) for |x| < half_length; `upper` selects
/// the y > 0 side.
Vec2 grad_w_on_segment(const LineSource& src, double x, bool upper);

/// ∫_C w(x, 0) dx.
double segment_integral_w(const LineSource& src);

struct SolverOptions {
  int charges = 0;              // 0: half the number of boundary nodes
  double offset = 5.0;          // charge distance in local boundary spacings
  double regularization = 1e-12;  // Tikhonov parameter relative to σ_max
  double tol = 1e-8;            // Dirichlet residual for a converged solve
  double fail_tol = 1e-3;       // residual relative to max(|w| on ∂Ω, M/2π) treated as failure
  double max_condition = 1e15;  // effective condition beyond which the fit fails
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double condition, double residual)
      : std::runtime_error(what), condition_(condition), residual_(residual) {}
  double condition() const { return condition_; }
  double residual() const { return residual_; }

 private:
  double condition_;
  double residual_;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Harmonic part h(p) = c0 + Σ c_j ln|p - z_j| together with the source;
/// u = w + h. Self-contained, so it can be replayed from a text block.
struct HarmonicExpansion {
  LineSource source;
  double constant = 0.0;
  std::vector<Vec2> charges;
  std::vector<double> coeffs;

  double eval_h(Vec2 p) const;
  Vec2 grad_h(Vec2 p) const;
  double eval_u(Vec2 p) const { return eval_w(source, p) + eval_h(p); }
  /// ∫_C h(x, 0) dx in closed form.
  double segment_integral_h() const;
};

void write_expansion(std::ostream& os, const HarmonicExpansion& e);
HarmonicExpansion read_expansion(std::istream& is);

/// Per-node boundary quantities on the closed boundary polygon.
struct BoundaryField {
  std::vector<BoundaryNode> nodes;
  std::vector<Vec2> normals;    // outward unit normals
  std::vector<double> flux;     // ∂u/∂ν (outward)
  std::vector<double> weights;  // arc-length quadrature weights
  std::vector<double> g;        // k² - (∂u/∂ν)², filled by shape_gradient
  double gauss_flux = 0.0;      // -∮ ∂u/∂ν ds
};

/// Dirichlet solution u = w + h on a graph domain. Immutable.
class HarmonicSolution {
 public:
  HarmonicSolution(GraphDomain domain, HarmonicExpansion expansion, double residual,
                   double condition, bool converged);

  const GraphDomain& domain() const { return domain_; }
  const HarmonicExpansion& expansion() const { return expansion_; }
  const LineSource& source() const { return expansion_.source; }
  const std::vector<Vec2>& charges() const { return expansion_.charges; }
  const std::vector<double>& coeffs() const { return expansion_.coeffs; }
  double residual_dirichlet() const { return residual_; }
  double condition() const { return condition_; }
  bool converged() const { return converged_; }

 private:
  GraphDomain domain_;
  HarmonicExpansion expansion_;
  double residual_;
  double condition_;
  bool converged_;
};

/// Solves -Δu = a δ_C in the domain, u = 0 on its boundary, with h fitted by
/// weighted least squares at the boundary nodes against exterior charges.
/// Throws PlacementError or SolverFailure.
HarmonicSolution solve_dirichlet(const GraphDomain& d, const LineSource& src,
                                 const SolverOptions& opts = {});

/// u(p) for p in the closed domain; throws std::domain_error outside.
double eval_u(const HarmonicSolution& sol, Vec2 p);
/// ∇u(p) for p in the closed domain off C.
Vec2 grad_u(const HarmonicSolution& sol, Vec2 p);

/// Outward normals (from neighbouring vertices), ∂u/∂ν and weights at every
/// boundary node; the flux uses the analytic gradients of w and h.
BoundaryField boundary_flux(const HarmonicSolution& sol);

/// Outward unit normals and arc-length weights of a closed CCW polygon.
void polygon_normals_weights(std::span<const Vec2> pts, std::vector<Vec2>& normals,
                             std::vector<double>& weights);

}  // namespace qsurf
