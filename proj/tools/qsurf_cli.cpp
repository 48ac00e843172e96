#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qsurf/analysis.hpp"
#include "qsurf/config.hpp"
#include "qsurf/geometry.hpp"
#include "qsurf/potential.hpp"
#include "qsurf/shape_opt.hpp"

using namespace qsurf;
using nlohmann::json;

namespace {

constexpr int kInputError = 2;
constexpr int kSolverFailure = 3;
constexpr int kProjectionFailure = 4;

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.out);
  return std::filesystem::path(cfg.out) / name;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

json arcs_json(const std::vector<ArcSegment>& arcs) {
  json a = json::array();
  for (const auto& s : arcs)
    a.push_back({{"type", s.type == ArcType::type_i ? "I" : "II"},
                 {"side", to_string(s.side)},
                 {"center", {s.center.x, s.center.y}},
                 {"radius", s.radius},
                 {"first", s.first},
                 {"last", s.last},
                 {"count", s.count}});
  return a;
}

std::string flux_csv(const BoundaryField& f, double k) {
  std::ostringstream os;
  os << "index,x,y,nx,ny,flux,weight,g,abs_flux_minus_k\n";
  for (std::size_t i = 0; i < f.nodes.size(); ++i) {
    const double g = f.g.empty() ? k * k - f.flux[i] * f.flux[i] : f.g[i];
    os << i << ',' << fmt(f.nodes[i].p.x) << ',' << fmt(f.nodes[i].p.y) << ','
       << fmt(f.normals[i].x) << ',' << fmt(f.normals[i].y) << ',' << fmt(f.flux[i]) << ','
       << fmt(f.weights[i]) << ',' << fmt(g) << ',' << fmt(std::abs(std::abs(f.flux[i]) - k))
       << '\n';
  }
  return os.str();
}

std::string field_csv(const HarmonicSolution& sol, int samples) {
  const auto& d = sol.domain();
  double ymin = 0.0, ymax = 0.0;
  for (double v : d.phi1()) ymax = std::max(ymax, v);
  for (double v : d.phi2()) ymin = std::min(ymin, v);
  std::ostringstream os;
  os << "x,y,u\n";
  for (int i = 0; i < samples; ++i)
    for (int j = 0; j < samples; ++j) {
      const double x = d.x_left() + (d.x_right() - d.x_left()) * (i + 0.5) / samples;
      const double y = ymin + (ymax - ymin) * (j + 0.5) / samples;
      if (!d.contains({x, y}, 0.0)) continue;
      os << fmt(x) << ',' << fmt(y) << ',' << fmt(sol.expansion().eval_u({x, y})) << '\n';
    }
  return os.str();
}

int cmd_solve(const RunConfig& cfg) {
  const auto d = cfg.initial_domain();
  const auto src = cfg.source();
  const auto ev = evaluate_J(d, src, cfg.k, cfg.solver_options());
  const auto& sol = ev.solution;
  const auto f = shape_gradient(sol, cfg.k);
  const auto arcs = classify_arcs(d, cfg.tol_arc);

  json j;
  j["a"] = src.a;
  j["eps"] = src.eps_degenerate;
  j["k"] = cfg.k;
  j["n"] = d.size();
  j["boundary_nodes"] = f.nodes.size();
  j["charges"] = sol.charges().size();
  j["gauss_flux"] = f.gauss_flux;
  j["mass"] = src.mass();
  j["gauss_relative_error"] = std::abs(f.gauss_flux - src.mass()) / src.mass();
  j["residual_dirichlet"] = sol.residual_dirichlet();
  j["condition"] = sol.condition();
  j["converged"] = sol.converged();
  j["J"] = ev.J;
  j["area"] = ev.area;
  j["perimeter"] = perimeter(d);
  j["clearance"] = clearance(d);
  j["sup_abs_flux_minus_k"] = free_boundary_residual(f, cfg.k);
  j["gnp_passed"] = check_gnp(d, cfg.tol_gnp).passed;
  j["arcs"] = arcs_json(arcs);
  write_text(out_path(cfg, "solve.json"), j.dump(2) + "\n");
  write_text(out_path(cfg, "flux.csv"), flux_csv(f, cfg.k));
  write_text(out_path(cfg, "field.csv"), field_csv(sol, cfg.field_samples));
  {
    std::ofstream os(out_path(cfg, "expansion.txt"));
    write_expansion(os, sol.expansion());
  }
  std::cout << "gauss_flux " << fmt(f.gauss_flux) << " (2a = " << fmt(src.mass()) << ")\n"
            << "residual_dirichlet " << fmt(sol.residual_dirichlet()) << "\n"
            << "J " << fmt(ev.J) << "\n"
            << "arcs " << arcs.size() << "\n";
  for (const auto& s : arcs)
    std::cout << "  type " << (s.type == ArcType::type_i ? "I" : "II") << " center ("
              << s.center.x << ", 0) radius " << fmt(s.radius) << " nodes " << s.count << "\n";
  return 0;
}

int cmd_minimize(const RunConfig& cfg) {
  const auto src = cfg.source();
  const auto mo = cfg.minimize_options();
  auto d0 = cfg.initial_domain();
  if (!check_gnp(d0, mo.containment.tol_gnp).passed) {
    d0 = project_gnp(d0, mo.containment);
    std::cout << "initial domain projected onto the GNP class\n";
  }
  const auto r = minimize(d0, src, cfg.k, mo);

  json j = json::parse(result_json(r, src, cfg.k));
  if (r.status == MinimizeStatus::converged) {
    const auto p = verify_perimeter_identity(r, src, cfg.k);
    const double sym = verify_symmetry(r);
    const auto arcs = arc_optimality_check(r, cfg.k, cfg.tol_arc);
    json v;
    v["perimeter_deviation"] = p.deviation;
    v["gauss_flux"] = p.gauss_flux;
    v["mean_flux"] = p.mean_flux;
    v["perimeter_pass"] = p.deviation < 0.01;
    v["symmetry"] = sym;
    v["symmetry_pass"] = sym < 1e-3;
    v["type_i_arcs"] = arcs.arcs.size();
    v["arc_min_normalized"] = arcs.min_normalized;
    v["arc_sup_residual"] = arcs.sup_residual;
    v["arc_mean_g"] = arcs.mean_g;
    v["arc_pass"] = arcs.min_normalized >= -1e-6 && arcs.sup_residual < 1e-2;
    j["verification"] = v;
  } else {
    j["verification"] = nullptr;
  }
  write_text(out_path(cfg, "result.json"), j.dump(2) + "\n");
  save_polyline(out_path(cfg, "boundary.txt").string(), r.domain);
  if (r.solution) write_text(out_path(cfg, "flux.csv"), flux_csv(shape_gradient(*r.solution, cfg.k), cfg.k));

  std::cout << "status " << to_string(r.status) << "\n"
            << "iterations " << r.iterations << "\n"
            << "residual " << fmt(r.residual) << "\n"
            << "clearance " << fmt(r.clearance) << "\n"
            << "perimeter " << fmt(perimeter(r.domain)) << " (2a/k = " << fmt(src.mass() / cfg.k)
            << ")\n";
  if (!r.message.empty()) std::cout << "note " << r.message << "\n";
  return r.status == MinimizeStatus::solver_failed ? kSolverFailure : 0;
}

int cmd_sweep(const RunConfig& cfg) {
  const auto rep = threshold_sweep(cfg.sweep_options());
  write_text(out_path(cfg, "sweep.csv"), sweep_csv(rep));
  write_text(out_path(cfg, "sweep.json"), sweep_json(rep) + "\n");
  for (const auto& e : rep.entries)
    std::cout << "a/k " << fmt(e.ratio) << "  " << to_string(e.status) << "  clearance "
              << fmt(e.clearance) << "  perimeter " << fmt(e.perimeter) << "\n";
  if (rep.bracket)
    std::cout << "bracket [" << fmt(rep.bracket->first) << ", " << fmt(rep.bracket->second)
              << "]\n";
  else
    std::cout << "bracket not found\n";
  std::cout << "markers";
  for (double m : SweepReport::markers) std::cout << ' ' << fmt(m);
  std::cout << "\n";
  return 0;
}

int cmd_check(const RunConfig& cfg, std::optional<double> steiner) {
  const auto d = cfg.initial_domain();
  const auto rep = check_gnp(d, cfg.tol_gnp);
  auto [s1lo, s1hi] = std::minmax_element(rep.s1.begin(), rep.s1.end());
  auto [s2lo, s2hi] = std::minmax_element(rep.s2.begin(), rep.s2.end());
  std::cout << "n " << d.size() << "\n"
            << "area " << fmt(area(d)) << "\n"
            << "perimeter " << fmt(perimeter(d)) << "\n"
            << "clearance " << fmt(clearance(d)) << "\n"
            << "gnp " << (rep.passed ? "passed" : "failed") << "\n"
            << "s_upper [" << fmt(*s1lo) << ", " << fmt(*s1hi) << "]\n"
            << "s_lower [" << fmt(*s2lo) << ", " << fmt(*s2hi) << "]\n";
  for (const auto& v : rep.violations)
    std::cout << "  violation node " << v.index << " " << to_string(v.side) << " x "
              << fmt(d.xs()[v.index]) << " s " << fmt(v.value) << "\n";
  for (const auto& v : rep.flagged)
    std::cout << "  flagged node " << v.index << " " << to_string(v.side) << " s "
              << fmt(v.value) << "\n";
  std::cout << "csp " << (check_csp(d) ? "passed" : "failed") << "\n";
  const auto arcs = classify_arcs(d, cfg.tol_arc);
  std::cout << "arcs " << arcs.size() << "\n";
  for (const auto& s : arcs)
    std::cout << "  type " << (s.type == ArcType::type_i ? "I" : "II") << " side "
              << to_string(s.side) << " center (" << s.center.x << ", 0) radius "
              << fmt(s.radius) << " nodes " << s.count << "\n";
  if (steiner) {
    const auto ds = steiner_continuous(d, *steiner);
    const auto path = out_path(cfg, "steiner.txt");
    save_polyline(path.string(), ds);
    std::cout << "steiner t " << fmt(*steiner) << " area " << fmt(area(ds)) << " written "
              << path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free-boundary solver for a uniform source on the segment [-1,1]x{0}"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  std::optional<double> steiner;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "key = value configuration file");
    sub->add_option("--set", sets, "override, key=value (repeatable)");
    for (const auto& key : RunConfig::keys()) sub->add_option("--" + key, flags[key]);
  };
  auto* solve = app.add_subcommand("solve", "solve the Dirichlet problem and report the flux");
  auto* mini = app.add_subcommand("minimize", "descend J from the initial domain");
  auto* sweep = app.add_subcommand("sweep", "threshold sweep over a/k");
  auto* check = app.add_subcommand("check", "geometric predicates of a boundary");
  for (auto* s : {solve, mini, sweep, check}) common(s);
  check->add_option("--steiner", steiner, "write the continuous Steiner symmetrization at t");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    CLI::App* active = app.get_subcommands().front();
    for (const auto& key : RunConfig::keys())
      if (active->count("--" + key) > 0) cfg.set(key, flags[key]);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    if (active == solve) return cmd_solve(cfg);
    if (active == mini) return cmd_minimize(cfg);
    if (active == sweep) return cmd_sweep(cfg);
    return cmd_check(cfg, steiner);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ProjectionFailure& e) {
    std::cerr << "projection failure: " << e.what() << "\n";
    return kProjectionFailure;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const PlacementError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
