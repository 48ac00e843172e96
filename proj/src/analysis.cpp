#include "qsurf/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace qsurf {

PerimeterCheck perimeter_identity(const GraphDomain& d, const LineSource& src, double k,
                                  const SolverOptions& opts) {
  if (!(k > 0.0)) throw std::invalid_argument("perimeter_identity: k must be positive");
  const auto f = boundary_flux(solve_dirichlet(d, src, opts));
  PerimeterCheck c{};
  c.perimeter = perimeter(d);
  c.predicted = src.mass() / k;
  c.deviation = std::abs(c.perimeter - c.predicted) / c.predicted;
  c.gauss_flux = f.gauss_flux;
  double wsum = 0.0;
  for (double w : f.weights) wsum += w;
  c.mean_flux = f.gauss_flux / wsum;
  c.flux_deviation = std::abs(c.mean_flux - k) / k;
  return c;
}

PerimeterCheck verify_perimeter_identity(const MinimizeResult& r, const LineSource& src,
                                         double k) {
  if (r.status != MinimizeStatus::converged || !r.solution)
    throw std::invalid_argument("verify_perimeter_identity: run did not converge");
  return perimeter_identity(r.domain, src, k);
}

double symmetry_metric(const HarmonicSolution& sol, int pairs) {
  const auto& d = sol.domain();
  const auto xs = d.xs(), p1 = d.phi1(), p2 = d.phi2();
  const std::size_t n = d.size();
  const double sc = d.scale();
  double m = 0.0;
  // Vertical offsets are scaled by the cosine of the slope of the mean
  // graph, i.e. measured along the normal; near a rounded tip the raw offset
  // of a node blows up like 1/sqrt(distance to the tip).
  auto psi = [&](std::size_t i) { return 0.5 * (p1[i] - p2[i]); };
  for (std::size_t i = 0; i < n; ++i) {
    double slope = 0.0;
    if (i > 0) slope = std::max(slope, std::abs((psi(i) - psi(i - 1)) / (xs[i] - xs[i - 1])));
    if (i + 1 < n) slope = std::max(slope, std::abs((psi(i + 1) - psi(i)) / (xs[i + 1] - xs[i])));
    m = std::max(m, std::abs(p1[i] + p2[i]) / (sc * std::sqrt(1.0 + slope * slope)));
  }
  for (int j = 0; j < pairs; ++j) {
    const std::size_t i = 1 + static_cast<std::size_t>(j) % (n - 2);
    const double reach = std::min(p1[i], -p2[i]);
    if (!(reach > 0.0)) continue;
    const double t = 0.05 + 0.9 * static_cast<double>((j * 37) % 100) / 100.0;
    const double y = t * reach;
    const double du = sol.expansion().eval_u({xs[i], y}) - sol.expansion().eval_u({xs[i], -y});
    m = std::max(m, std::abs(du));
  }
  return m;
}

double verify_symmetry(const MinimizeResult& r) {
  if (!r.solution) throw std::invalid_argument("verify_symmetry: result carries no solution");
  return symmetry_metric(*r.solution);
}

ArcReport arc_optimality_check(std::span<const ArcSegment> arcs, const BoundaryField& f,
                               double k) {
  if (f.g.size() != f.nodes.size())
    throw std::invalid_argument("arc_optimality_check: field has no shape gradient");
  ArcReport rep;
  rep.min_normalized = std::numeric_limits<double>::infinity();
  const std::size_t q = f.nodes.size();
  for (const auto& arc : arcs) {
    if (arc.type != ArcType::type_i) continue;
    const std::size_t a = rep.arcs.size();
    rep.arcs.push_back(arc);
    const auto idx = arc_indices(arc, q);
    std::vector<double> sigma(idx.size(), 0.0);
    for (std::size_t m = 1; m < idx.size(); ++m)
      sigma[m] = sigma[m - 1] + (f.nodes[idx[m]].p - f.nodes[idx[m - 1]].p).norm();
    const double L = sigma.back();
    rep.lengths.push_back(L);

    // Trapezoid rule for ∫ g φ ds with φ sampled at the nodes.
    auto integrate = [&](auto&& phi) {
      double s = 0.0;
      for (std::size_t m = 1; m < idx.size(); ++m) {
        const double h = sigma[m] - sigma[m - 1];
        s += 0.5 * h * (f.g[idx[m - 1]] * phi(sigma[m - 1]) + f.g[idx[m]] * phi(sigma[m]));
      }
      return s;
    };
    rep.mean_g.push_back(integrate([](double) { return 1.0; }) / L);
    for (int j = 1; j <= 10; ++j) {
      const double knot = L * j / 10.0;
      const double dec = integrate([&](double s) { return s <= knot * (1 + 1e-12) ? 1.0 : 0.0; });
      const double start = L * (j - 1) / 10.0;
      const double inc = integrate([&](double s) { return s >= start * (1 - 1e-12) ? 1.0 : 0.0; });
      rep.integrals.push_back({a, j, true, dec});
      rep.integrals.push_back({a, j - 1, false, inc});
      rep.min_normalized = std::min({rep.min_normalized, dec / (L * k * k), inc / (L * k * k)});
    }
    for (auto i : idx)
      rep.sup_residual = std::max(rep.sup_residual, std::abs(std::abs(f.flux[i]) - k));
  }
  if (rep.arcs.empty()) rep.min_normalized = 0.0;
  return rep;
}

ArcReport arc_optimality_check(const MinimizeResult& r, double k, double tol_arc) {
  if (!r.solution) throw std::invalid_argument("arc_optimality_check: result carries no solution");
  const auto arcs = classify_arcs(r.domain, tol_arc);
  return arc_optimality_check(arcs, shape_gradient(*r.solution, k), k);
}

namespace {

SweepEntry make_entry(double ratio, const MinimizeResult& m, const SweepOptions& o,
                      bool bisection) {
  SweepEntry e{};
  e.ratio = ratio;
  e.clearance = m.clearance;
  e.perimeter = perimeter(m.domain);
  e.predicted = 2.0 * ratio;
  e.residual = m.residual;
  e.status = m.status;
  e.iterations = m.iterations;
  e.bisection = bisection;
  e.success = m.status == MinimizeStatus::converged && m.clearance > o.clearance_min;
  return e;
}

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

SweepReport threshold_sweep(const SweepOptions& o) {
  if (o.ratios.empty()) throw std::invalid_argument("threshold_sweep: no ratios");
  if (!std::is_sorted(o.ratios.begin(), o.ratios.end()))
    throw std::invalid_argument("threshold_sweep: ratios must be sorted");
  if (!(o.k > 0.0) || !(o.clearance_min > 0.0) || !(o.bracket_width > 0.0) || o.workers < 1)
    throw std::invalid_argument("threshold_sweep: invalid options");
  for (double r : o.ratios)
    if (!(r > 0.0)) throw std::invalid_argument("threshold_sweep: ratios must be positive");

  MinimizeOptions mo = o.minimize;
  mo.containment.use_ball = false;
  const GraphDomain d0 = make_disk(o.initial_radius, mo.n);
  const std::size_t count = o.ratios.size();
  std::vector<std::optional<MinimizeResult>> runs(count);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        runs[i] = minimize(d0, LineSource{o.ratios[i] * o.k, 1.0}, o.k, mo);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(o.workers), count);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  SweepReport rep;
  rep.clearance_min = o.clearance_min;
  rep.bracket_width = o.bracket_width;
  std::optional<std::size_t> hi;
  for (std::size_t i = 0; i < count; ++i) {
    rep.entries.push_back(make_entry(o.ratios[i], *runs[i], o, false));
    if (!hi && rep.entries.back().success) hi = i;
  }
  std::optional<std::size_t> lo;
  if (hi)
    for (std::size_t i = *hi; i-- > 0;)
      if (!rep.entries[i].success) {
        lo = i;
        break;
      }

  if (hi && lo) {
    double a = o.ratios[*lo], b = o.ratios[*hi];
    GraphDomain warm = runs[*hi]->domain;
    for (int it = 0; it < o.max_bisections && b - a > o.bracket_width * (1.0 + 1e-9); ++it) {
      const double mid = 0.5 * (a + b);
      auto m = minimize(warm, LineSource{mid * o.k, 1.0}, o.k, mo);
      auto e = make_entry(mid, m, o, true);
      rep.entries.push_back(e);
      if (e.success) {
        b = mid;
        warm = m.domain;
      } else {
        a = mid;
      }
    }
    rep.bracket = std::make_pair(a, b);
  }
  std::stable_sort(rep.entries.begin(), rep.entries.end(),
                   [](const SweepEntry& x, const SweepEntry& y) { return x.ratio < y.ratio; });
  return rep;
}

std::string sweep_csv(const SweepReport& r) {
  std::ostringstream os;
  os << "ratio,clearance,perimeter,predicted,residual,status\n";
  for (const auto& e : r.entries)
    os << fmt17(e.ratio) << ',' << fmt17(e.clearance) << ',' << fmt17(e.perimeter) << ','
       << fmt17(e.predicted) << ',' << fmt17(e.residual) << ',' << to_string(e.status) << '\n';
  return os.str();
}

std::string sweep_json(const SweepReport& r) {
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : r.entries)
    j["entries"].push_back({{"ratio", e.ratio},
                            {"clearance", e.clearance},
                            {"perimeter", e.perimeter},
                            {"perimeter_predicted", e.predicted},
                            {"residual", e.residual},
                            {"status", to_string(e.status)},
                            {"iterations", e.iterations},
                            {"bisection", e.bisection},
                            {"success", e.success}});
  j["bracket_found"] = r.bracket.has_value();
  if (r.bracket)
    j["critical_ratio_bracket"] = {r.bracket->first, r.bracket->second};
  else
    j["critical_ratio_bracket"] = nullptr;
  j["markers"] = SweepReport::markers;
  j["clearance_min"] = r.clearance_min;
  j["bracket_width"] = r.bracket_width;
  return j.dump(2);
}

}  // namespace qsurf
