#include "qsurf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace qsurf {

namespace {

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
    throw std::invalid_argument(key + ": not a number: '" + v + "'");
  return x;
}

long parse_int(const std::string& key, const std::string& v) {
  long x = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw std::invalid_argument(key + ": not an integer: '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw std::invalid_argument(key + ": not a boolean: '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw std::invalid_argument(key + ": empty list item");
    out.push_back(parse_double(key, item.substr(b, e - b + 1)));
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T>
Setter num(T RunConfig::*field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    if constexpr (std::is_same_v<T, double>) {
      c.*field = parse_double(k, v);
    } else {
      const long x = parse_int(k, v);
      if (x < 0) throw std::invalid_argument(k + ": must be non-negative");
      c.*field = static_cast<T>(x);
    }
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"preset", [](RunConfig& c, const std::string&, const std::string& v) { c.preset = v; }},
      {"boundary", [](RunConfig& c, const std::string&, const std::string& v) { c.boundary = v; }},
      {"n", num(&RunConfig::n)},
      {"radius", num(&RunConfig::radius)},
      {"center_x", num(&RunConfig::center_x)},
      {"semi_x", num(&RunConfig::semi_x)},
      {"semi_y", num(&RunConfig::semi_y)},
      {"x_left", num(&RunConfig::x_left)},
      {"x_right", num(&RunConfig::x_right)},
      {"y_bottom", num(&RunConfig::y_bottom)},
      {"y_top", num(&RunConfig::y_top)},
      {"a", num(&RunConfig::a)},
      {"k", num(&RunConfig::k)},
      {"eps", num(&RunConfig::eps)},
      {"charges", num(&RunConfig::charges)},
      {"offset", num(&RunConfig::offset)},
      {"regularization", num(&RunConfig::regularization)},
      {"tol", num(&RunConfig::tol)},
      {"eta0", num(&RunConfig::eta0)},
      {"armijo_c", num(&RunConfig::armijo_c)},
      {"backtrack", num(&RunConfig::backtrack)},
      {"smoothing", num(&RunConfig::smoothing)},
      {"tol_res", num(&RunConfig::tol_res)},
      {"tol_step", num(&RunConfig::tol_step)},
      {"max_iter", num(&RunConfig::max_iter)},
      {"collapse_eps", num(&RunConfig::collapse_eps)},
      {"ball", [](RunConfig& c, const std::string& k, const std::string& v) { c.ball = parse_bool(k, v); }},
      {"ball_radius", num(&RunConfig::ball_radius)},
      {"box_half", num(&RunConfig::box_half)},
      {"tol_gnp", num(&RunConfig::tol_gnp)},
      {"tol_arc", num(&RunConfig::tol_arc)},
      {"ratios", [](RunConfig& c, const std::string& k, const std::string& v) { c.ratios = parse_list(k, v); }},
      {"clearance_min", num(&RunConfig::clearance_min)},
      {"bracket_width", num(&RunConfig::bracket_width)},
      {"workers", num(&RunConfig::workers)},
      {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
      {"field_samples", num(&RunConfig::field_samples)},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v;
    for (const auto& [key, _] : setters()) v.push_back(key);
    return v;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

void RunConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  if (n < 8) throw std::invalid_argument("n must be at least 8");
  positive(a, "a");
  positive(k, "k");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must lie in (0, 1]");
  positive(offset, "offset");
  positive(regularization, "regularization");
  positive(tol, "tol");
  positive(eta0, "eta0");
  positive(armijo_c, "armijo_c");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw std::invalid_argument("backtrack must lie in (0, 1)");
  if (smoothing < 0.0) throw std::invalid_argument("smoothing must be non-negative");
  positive(tol_res, "tol_res");
  positive(tol_step, "tol_step");
  positive(collapse_eps, "collapse_eps");
  positive(ball_radius, "ball_radius");
  positive(box_half, "box_half");
  positive(tol_gnp, "tol_gnp");
  positive(tol_arc, "tol_arc");
  if (ratios.empty()) throw std::invalid_argument("ratios must be non-empty");
  positive(clearance_min, "clearance_min");
  positive(bracket_width, "bracket_width");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (field_samples < 2) throw std::invalid_argument("field_samples must be at least 2");
}

LineSource RunConfig::source() const { return {a, eps}; }

SolverOptions RunConfig::solver_options() const {
  SolverOptions s;
  s.charges = charges;
  s.offset = offset;
  s.regularization = regularization;
  s.tol = tol;
  return s;
}

MinimizeOptions RunConfig::minimize_options() const {
  MinimizeOptions m;
  m.n = n;
  m.eta0 = eta0;
  m.armijo_c = armijo_c;
  m.backtrack = backtrack;
  m.smoothing = smoothing;
  m.tol_res = tol_res;
  m.tol_step = tol_step;
  m.max_iter = max_iter;
  m.collapse_eps = collapse_eps;
  m.containment.use_ball = ball;
  m.containment.ball_radius = ball_radius;
  m.containment.box_half = box_half;
  m.containment.tol_gnp = tol_gnp;
  m.solver = solver_options();
  return m;
}

SweepOptions RunConfig::sweep_options() const {
  SweepOptions s;
  s.ratios = ratios;
  s.k = k;
  s.clearance_min = clearance_min;
  s.bracket_width = bracket_width;
  s.workers = workers;
  s.initial_radius = radius;
  s.minimize = minimize_options();
  return s;
}

GraphDomain RunConfig::initial_domain() const {
  if (!boundary.empty()) return load_polyline(boundary);
  if (preset == "disk") return make_disk(radius, n, center_x);
  if (preset == "ellipse") return make_ellipse(semi_x, semi_y, n);
  if (preset == "stadium") return make_stadium(radius, n);
  if (preset == "rectangle") return make_rectangle(x_left, x_right, y_bottom, y_top, n);
  throw std::invalid_argument("unknown preset '" + preset + "'");
}

RunConfig read_config(std::istream& is, RunConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected key = value at line " + std::to_string(lineno), lineno);
    auto trim = [](std::string s) {
      const auto x = s.find_first_not_of(" \t\r"), y = s.find_last_not_of(" \t\r");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    try {
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string(e.what()) + " at line " + std::to_string(lineno), lineno);
    }
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path, 0);
  return read_config(is, std::move(base));
}

}  // namespace qsurf
