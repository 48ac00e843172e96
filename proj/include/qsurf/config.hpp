#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qsurf/analysis.hpp"
#include "qsurf/geometry.hpp"
#include "qsurf/potential.hpp"
#include "qsurf/shape_opt.hpp"

namespace qsurf {

/// Flat key=value run configuration shared by all subcommands.
struct RunConfig {
  // geometry
  std::string preset = "disk";  // disk | ellipse | stadium | rectangle
  std::string boundary;         // polyline file; overrides the preset
  std::size_t n = 129;
  double radius = 2.0;
  double center_x = 0.0;
  double semi_x = 2.0;
  double semi_y = 1.0;
  double x_left = -2.0;
  double x_right = 2.0;
  double y_bottom = -1.0;
  double y_top = 1.0;
  // physics
  double a = 4.0;
  double k = 1.0;
  double eps = 1.0;
  // solver
  int charges = 0;
  double offset = 5.0;
  double regularization = 1e-12;
  double tol = 1e-8;
  // optimizer
  double eta0 = 0.5;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double smoothing = 0.2;
  double tol_res = 1e-2;
  double tol_step = 1e-12;
  int max_iter = 400;
  double collapse_eps = 1e-2;
  bool ball = false;
  double ball_radius = 1.0;
  double box_half = 10.0;
  double tol_gnp = 1e-6;
  double tol_arc = 1e-4;
  // sweep
  std::vector<double> ratios{1.2, 1.6, 2.0, 2.4, 3.0, 4.0};
  double clearance_min = 1e-2;
  double bracket_width = 0.1;
  int workers = 1;
  // output
  std::string out = ".";
  int field_samples = 64;

  /// Assigns one key from its text form; throws std::invalid_argument.
  void set(const std::string& key, const std::string& value);
  /// Throws std::invalid_argument when a value is out of range.
  void validate() const;

  LineSource source() const;
  SolverOptions solver_options() const;
  MinimizeOptions minimize_options() const;
  SweepOptions sweep_options() const;
  GraphDomain initial_domain() const;

  static const std::vector<std::string>& keys();
};

/// Reads '#'-commented key = value lines on top of `base`; ParseError
/// carries the offending line.
RunConfig read_config(std::istream& is, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

}  // namespace qsurf
