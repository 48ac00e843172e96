#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qsurf/geometry.hpp"
#include "qsurf/potential.hpp"

namespace qsurf {

struct JEvaluation {
  double J;
  double segment_u;  // ∫_C u(x, 0) dx
  double area;
  HarmonicSolution solution;
};

/// J = -a ∫_C u dx + k² |Ω|, with the segment integral in closed form.
JEvaluation evaluate_J(const GraphDomain& d, const LineSource& src, double k,
                       const SolverOptions& opts = {});
double eval_J(const GraphDomain& d, const LineSource& src, double k,
              const SolverOptions& opts = {});

/// Boundary field with g = k² - (∂u/∂ν)² filled in.
BoundaryField shape_gradient(const HarmonicSolution& sol, double k);

/// dJ for a node-wise outward normal velocity: Σ g_i V_i w_i.
double directional_derivative(const BoundaryField& f, std::span<const double> velocity);

/// Constraint set B ⊆ Ω ⊆ D for the projection.
struct ContainmentSpec {
  bool use_ball = false;
  double ball_radius = 1.0;
  double box_half = 10.0;  // D = [-box_half, box_half]²
  double tol_gnp = 1e-6;
  int max_sweeps = 20;
};

class ProjectionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nearest-from-inside GNP domain: x² + φ² is replaced by its largest
/// 2-Lipschitz minorant on the grid, which is exactly |x + φφ'| ≤ 1, then
/// the graphs are clipped into [B, D]. Domains that already comply are
/// returned unchanged.
GraphDomain project_gnp(const GraphDomain& d, const ContainmentSpec& box = {});

enum class MinimizeStatus { converged, collapsed, max_iterations, stalled, solver_failed };

const char* to_string(MinimizeStatus s);

struct MinimizeOptions {
  std::size_t n = 129;         // abscissae per iterate (2n - 2 boundary nodes)
  double eta0 = 0.5;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double grow = 2.0;
  double smoothing = 0.2;      // Sobolev length for the descent direction
  double max_move = 0.5;       // per-step displacement cap, in mean node spacings
  double tol_res = 1e-2;       // sup ||∂u/∂ν| - k| on the free boundary
  double tol_step = 1e-12;
  int max_iter = 400;
  double collapse_eps = 1e-2;
  ContainmentSpec containment;
  SolverOptions solver;
};

struct MinimizeResult {
  GraphDomain domain;
  std::optional<HarmonicSolution> solution;
  std::vector<double> J_history;
  double residual = 0.0;
  double clearance = 0.0;
  MinimizeStatus status = MinimizeStatus::max_iterations;
  int iterations = 0;
  std::string message;
};

struct IterateInfo {
  int iteration;
  double J;
  double residual;
  double clearance;
  double step;
};

using MinimizeObserver = std::function<void(const IterateInfo&, const GraphDomain&)>;

/// Projected Hadamard descent of J over GNP domains. Requires d0 to pass
/// check_gnp; solver failure at the start is reported through the status.
MinimizeResult minimize(const GraphDomain& d0, const LineSource& src, double k,
                        const MinimizeOptions& opts = {},
                        const MinimizeObserver& observer = {});

/// sup ||∂u/∂ν| - k| over nodes not held by the ball constraint.
double free_boundary_residual(const BoundaryField& f, double k,
                              const ContainmentSpec& box = {});

std::string result_json(const MinimizeResult& r, const LineSource& src, double k);

}  // namespace qsurf
