#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsurf {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

enum class Side { upper, lower, both };

const char* to_string(Side s);

/// One vertex of the closed boundary polygon of a GraphDomain.
struct BoundaryNode {
  Vec2 p;
  Side side;          // `both` for a collapsed endpoint shared by the graphs
  std::size_t index;  // abscissa index on the grid
};

/// Malformed polyline input. `line` is 1-based, 0 when not line-specific.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A domain convex in the y direction, stored as an upper graph phi1 and a
/// lower graph phi2 over a shared, strictly increasing abscissa grid.
///
/// The graphs either meet at an end abscissa (collapsed endpoint) or are
/// joined there by a vertical segment. The domain must contain the segment
/// C = [-1,1] x {0}.
class GraphDomain {
 public:
  GraphDomain(std::vector<double> xs, std::vector<double> phi1,
              std::vector<double> phi2);

  std::size_t size() const { return xs_.size(); }
  std::span<const double> xs() const { return xs_; }
  std::span<const double> phi1() const { return phi1_; }
  std::span<const double> phi2() const { return phi2_; }
  double x_left() const { return xs_.front(); }
  double x_right() const { return xs_.back(); }

  bool left_collapsed() const { return phi1_.front() == phi2_.front(); }
  bool right_collapsed() const { return phi1_.back() == phi2_.back(); }

  /// Counter-clockwise boundary polygon: the lower graph left to right, then
  /// the upper graph right to left. Collapsed endpoints appear once.
  std::vector<BoundaryNode> boundary_loop() const;
  std::vector<Vec2> boundary_points() const;

  /// Closed-polygon containment with a small absolute slack.
  bool contains(Vec2 p, double slack = 1e-12) const;

  /// Half the larger of the width and the maximal slice height.
  double scale() const;

  bool operator==(const GraphDomain&) const = default;

 private:
  std::vector<double> xs_;
  std::vector<double> phi1_;
  std::vector<double> phi2_;
};

double area(const GraphDomain& d);
double perimeter(const GraphDomain& d);

/// Minimum distance from the boundary nodes to the segment C.
double clearance(const GraphDomain& d);

/// Distance from p to the segment [-half_length, half_length] x {0}.
double distance_to_segment(Vec2 p, double half_length = 1.0);

struct GnpViolation {
  std::size_t index;
  Side side;
  double value;
};

struct GnpReport {
  std::vector<double> s1;  // x + phi1 phi1' per node
  std::vector<double> s2;  // x + phi2 phi2' per node
  std::vector<GnpViolation> violations;
  // Collapsed endpoints whose raw value is out of range but whose closing
  // arc is Type I.
  std::vector<GnpViolation> flagged;
  bool passed = true;
};

/// Normal geometric property: each inward normal meets C, i.e.
/// -1 <= x + phi_i phi_i' <= 1 on both graphs.
GnpReport check_gnp(const GraphDomain& d, double tol_gnp = 1e-6);

/// Cone test: no interior sample point lies in the cone
/// K_x = {y : (y - x).(c - x) <= 0 for all c in C} of any boundary node x.
bool check_csp(const GraphDomain& d, int samples = 48);

/// Full Steiner symmetrization about the x axis.
GraphDomain steiner_full(const GraphDomain& d);

/// Continuous Steiner symmetrization by midline drift,
/// phi_i^t = phi_i - t (phi1 + phi2) / 2. Requires 0 <= t <= 1.
GraphDomain steiner_continuous(const GraphDomain& d, double t);

enum class ArcType { type_i, type_ii };

struct ArcSegment {
  Side side;
  std::size_t first;  // loop index of the first node
  std::size_t last;   // loop index of the last node (cyclic, may wrap)
  std::size_t count;
  Vec2 center;
  double radius;
  ArcType type;
};

/// Runs of boundary nodes at constant distance (within tol_arc * radius)
/// from (-1,0) or (1,0). Runs in the half-plane beyond that endpoint are
/// Type I, other runs Type II. Runs shorter than three nodes, or whose
/// circumradius (first, middle, last node) is off the distance by more than
/// 10%, are dropped.
std::vector<ArcSegment> classify_arcs(const GraphDomain& d,
                                      double tol_arc = 1e-4);

/// Loop indices covered by an arc, in boundary order.
std::vector<std::size_t> arc_indices(const ArcSegment& arc,
                                     std::size_t loop_size);

/// Rebuilds a graph domain with `n` abscissae from a closed counter-clockwise
/// polygon through a periodic cubic spline. The new grid is near-uniform in
/// mean arc length of the two graphs and both ends are collapsed.
GraphDomain graph_from_loop(std::span<const Vec2> loop, std::size_t n);

/// Resamples a domain onto a near-uniform arc-length grid of size n.
GraphDomain resample(const GraphDomain& d, std::size_t n);

// Presets. Grids are chosen near-uniform in arc length unless noted.
GraphDomain make_disk(double radius, std::size_t n, double center_x = 0.0);
GraphDomain make_ellipse(double semi_x, double semi_y, std::size_t n);
GraphDomain make_stadium(double radius, std::size_t n);
/// [x0,x1] x [y0,y1] on a uniform grid with open (vertical) ends.
GraphDomain make_rectangle(double x0, double x1, double y0, double y1,
                           std::size_t n);

/// Polyline exchange format: '#' header with n, x_L, x_R, then one
/// "x phi1 phi2" triple per line at 17 significant digits.
void write_polyline(std::ostream& os, const GraphDomain& d);
GraphDomain read_polyline(std::istream& is);
void save_polyline(const std::string& path, const GraphDomain& d);
GraphDomain load_polyline(const std::string& path);

}  // namespace qsurf
