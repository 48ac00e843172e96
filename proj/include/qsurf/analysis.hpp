#pragma once

#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsurf/geometry.hpp"
#include "qsurf/potential.hpp"
#include "qsurf/shape_opt.hpp"

namespace qsurf {

struct PerimeterCheck {
  double perimeter;
  double predicted;       // 2a/k
  double deviation;       // |perimeter - 2a/k| k / 2a
  double gauss_flux;      // -∮ ∂u/∂ν ds
  double mean_flux;       // gauss_flux / perimeter
  double flux_deviation;  // |mean_flux - k| / k
};

/// Perimeter identity on a converged run; throws std::invalid_argument
/// otherwise.
PerimeterCheck verify_perimeter_identity(const MinimizeResult& r, const LineSource& src,
                                         double k);
/// Same check on an arbitrary domain (re-solved).
PerimeterCheck perimeter_identity(const GraphDomain& d, const LineSource& src, double k,
                                  const SolverOptions& opts = {});

/// max(node-wise |phi1 + phi2| cos(theta) / scale, theta the slope angle of
/// (phi1 - phi2)/2,
/// max |u(x,y) - u(x,-y)| over mirrored interior pairs).
double symmetry_metric(const HarmonicSolution& sol, int pairs = 200);
double verify_symmetry(const MinimizeResult& r);

struct ArcIntegral {
  std::size_t arc;
  int knot;         // step position in tenths of the arc
  bool decreasing;  // in boundary (counter-clockwise) order
  double value;     // ∫ g φ ds
};

struct ArcReport {
  std::vector<ArcSegment> arcs;
  std::vector<double> lengths;
  std::vector<double> mean_g;
  std::vector<ArcIntegral> integrals;
  double min_normalized = 0.0;  // min over integrals of value / (length k²)
  double sup_residual = 0.0;    // sup ||∂u/∂ν| - k| on arc nodes
};

/// Monotone step-function tests of g on every Type I arc: ten decreasing and
/// ten increasing steps per arc. Empty report when there are no such arcs.
ArcReport arc_optimality_check(const MinimizeResult& r, double k, double tol_arc = 1e-4);
ArcReport arc_optimality_check(std::span<const ArcSegment> arcs, const BoundaryField& f,
                               double k);

struct SweepOptions {
  std::vector<double> ratios{1.2, 1.6, 2.0, 2.4, 3.0, 4.0};
  double k = 1.0;
  double clearance_min = 1e-2;
  double bracket_width = 0.1;
  int workers = 1;
  int max_bisections = 12;
  double initial_radius = 2.0;
  MinimizeOptions minimize;
};

struct SweepEntry {
  double ratio;
  double clearance;
  double perimeter;
  double predicted;
  double residual;
  MinimizeStatus status;
  int iterations;
  bool bisection;
  bool success;
};

struct SweepReport {
  std::vector<SweepEntry> entries;  // sorted by ratio
  std::optional<std::pair<double, double>> bracket;
  static constexpr std::array<double, 3> markers{2.0, 3.92, 24.0 * std::numbers::pi};
  double clearance_min = 0.0;
  double bracket_width = 0.0;
};

/// Runs minimize per ratio a/k, then bisects between the largest failure and
/// the smallest success (warm-started from the success) down to
/// bracket_width. Success: converged with clearance > clearance_min.
SweepReport threshold_sweep(const SweepOptions& opts);

std::string sweep_csv(const SweepReport& r);
std::string sweep_json(const SweepReport& r);

}  // namespace qsurf
