#include "cbvi/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace cbvi {

namespace {

const SimplexRule& rule_for(int dim, Quadrature q) {
  static const SimplexRule v2 = vertex_rule(2), v3 = vertex_rule(3), g2 = degree2_rule(2), g3 = degree2_rule(3);
  if (q == Quadrature::Vertex) return dim == 2 ? v2 : v3;
  return dim == 2 ? g2 : g3;
}

std::vector<double> union_grid(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> u;
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  u.erase(std::unique(u.begin(), u.end()), u.end());
  return u;
}

}  // namespace

Energy energy(const Model& model, const Trajectory& traj, double t, Quadrature quadrature) {
  const TimeSet& ts = traj.timeset();
  if (t < ts.t0() || t > ts.tf()) throw std::out_of_range("energy: time outside the run interval");
  const Mesh& mesh = model.mesh();
  const int d = model.dim();
  const int k = model.descriptor_dim();
  const Eigen::VectorXd x = traj.values_at(t);
  const Eigen::VectorXd v = traj.rates_at(t);

  Energy e;
  for (int a = 0; a < model.num_nodes(); ++a) {
    e.kinetic_u += 0.5 * model.coefficients().mass[a] * v.segment(model.dof(a, 0), d).squaredNorm();
  }
  const SimplexRule& rule = rule_for(d, quadrature);
  Eigen::VectorXd nu(k), rate(k);
  for (int K = 0; K < mesh.num_elements(); ++K) {
    auto conn = mesh.element(K);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      nu.setZero();
      rate.setZero();
      for (std::size_t i = 0; i < conn.size(); ++i) {
        nu += rule.points[q](i) * x.segment(model.dof(conn[i], d), k);
        rate += rule.points[q](i) * v.segment(model.dof(conn[i], d), k);
      }
      e.kinetic_nu += rule.weights[q] * mesh.volume(K) * chi_partials(model.material().chi, nu, rate).value;
    }
  }
  e.potential = potential_V(model, x);
  e.total = e.kinetic_u + e.kinetic_nu + e.potential;
  return e;
}

std::vector<EnergySample> energy_series(const Model& model, const Trajectory& traj, Quadrature quadrature) {
  std::vector<EnergySample> out;
  for (double t : traj.timeset().global()) out.push_back({t, energy(model, traj, t, quadrature)});
  return out;
}

EnergyTrend energy_trend(const std::vector<EnergySample>& series) {
  EnergyTrend tr;
  if (series.size() < 2) return tr;
  const double n = static_cast<double>(series.size());
  double st = 0, se = 0;
  for (const auto& s : series) {
    st += s.t;
    se += s.e.total;
  }
  const double mt = st / n, me = se / n;
  double num = 0, den = 0;
  double running_min = series.front().e.total;
  for (const auto& s : series) {
    num += (s.t - mt) * (s.e.total - me);
    den += (s.t - mt) * (s.t - mt);
    running_min = std::min(running_min, s.e.total);
    tr.max_rise = std::max(tr.max_rise, s.e.total - running_min);
    tr.max_drift = std::max(tr.max_drift, std::abs(s.e.total - series.front().e.total));
  }
  tr.slope = num / den;
  return tr;
}

double discrete_action(const Model& model, const Trajectory& traj) {
  const Mesh& mesh = model.mesh();
  const TimeSet& ts = traj.timeset();
  const int d = model.dim();
  const int k = model.descriptor_dim();
  const int ndof = model.dofs_per_node();
  const int npe = mesh.nodes_per_element();
  const auto& coef = model.coefficients();
  double kinetic = 0.0;
  double potential = 0.0;
  for (int K = 0; K < mesh.num_elements(); ++K) {
    auto conn = mesh.element(K);
    const double share = mesh.volume(K) / npe;
    for (int i = 0; i < npe; ++i) {
      const int a = conn[i];
      const NodeTrack& n = traj.node(a);
      const double m = coef.element_mass[static_cast<std::size_t>(K) * npe + i];
      for (std::size_t s = 0; s + 1 < n.size(); ++s) {
        const double h = n.times[s + 1] - n.times[s];
        Eigen::Map<const Eigen::VectorXd> r(n.rates.data() + s * ndof, ndof);
        Eigen::Map<const Eigen::VectorXd> v(n.values.data() + s * ndof, ndof);
        kinetic += h * 0.5 * m * r.head(d).squaredNorm();
        kinetic += h * share * chi_partials(model.material().chi, v.tail(k), r.tail(k)).value;
      }
    }
    auto times = ts.element(K);
    for (std::size_t j = 0; j + 1 < times.size(); ++j) {
      Eigen::VectorXd x(static_cast<Eigen::Index>(npe) * ndof);
      for (int i = 0; i < npe; ++i) x.segment(i * ndof, ndof) = traj.value_at(conn[i], times[j]);
      potential += (times[j + 1] - times[j]) * model.elements().potential(K, x);
    }
  }
  return kinetic - potential;
}

double pointwise_variation(const Trajectory& traj, Channel channel, double t1, double t2) {
  const TimeSet& ts = traj.timeset();
  if (!(t1 <= t2) || t1 < ts.t0() || t2 > ts.tf()) throw std::invalid_argument("invalid variation window");
  const int d = traj.dim();
  const int m = traj.dofs_per_node();
  const int off = channel == Channel::U ? 0 : d;
  const int width = channel == Channel::U ? d : traj.descriptor_dim();
  double total = 0.0;
  for (int a = 0; a < traj.num_nodes(); ++a) {
    const NodeTrack& n = traj.node(a);
    for (std::size_t i = 1; i < n.size(); ++i) {
      if (n.times[i - 1] > t2 || n.times[i] < t1) continue;
      Eigen::Map<const Eigen::VectorXd> r1(n.rates.data() + i * m + off, width);
      Eigen::Map<const Eigen::VectorXd> r0(n.rates.data() + (i - 1) * m + off, width);
      total += (r1 - r0).norm();
    }
  }
  return total;
}

DissipationComparison compare_dissipation(const Model& model, const Trajectory& nu, const Trajectory& phi) {
  if (nu.num_nodes() != model.num_nodes() || phi.num_nodes() != model.num_nodes()) {
    throw std::invalid_argument("trajectories do not match the model");
  }
  const int d = model.dim();
  const int k = model.descriptor_dim();
  const int m = model.dofs_per_node();
  const auto& coef = model.coefficients();
  DissipationComparison c;
  double abs_integral = 0.0;
  for (int a = 0; a < model.num_nodes(); ++a) {
    const NodeTrack& p = nu.node(a);
    const NodeTrack& q = phi.node(a);
    if (p.times != q.times) throw std::invalid_argument("nu and phi must share nodal instants");
    const double eta_a = coef.dissipation[a];
    for (std::size_t i = 1; i < p.size(); ++i) {
      Eigen::Map<const Eigen::VectorXd> n1(p.values.data() + i * m + d, k), n0(p.values.data() + (i - 1) * m + d, k);
      Eigen::Map<const Eigen::VectorXd> f1(q.values.data() + i * m + d, k), f0(q.values.data() + (i - 1) * m + d, k);
      const double h = p.times[i] - p.times[i - 1];
      const Eigen::VectorXd dn = n1 - n0;
      c.semidiscrete += eta_a * dn.dot(0.5 * (f1 + f0));
      c.discrete += eta_a * dn.dot(f0);
      const double rr = (dn / h).dot((f1 - f0) / h);
      c.identity += 0.5 * h * h * eta_a * rr;
      c.rate_integral += coef.weight[a] * h * rr;
      abs_integral += coef.weight[a] * h * std::abs(rr);
    }
  }
  c.identity = std::abs(c.identity);
  c.difference = std::abs(c.semidiscrete - c.discrete);
  const double T = nu.timeset().metrics().T;
  const double eta = model.material().eta;
  c.bound = 0.5 * eta * T * std::abs(c.rate_integral);
  c.absolute_bound = 0.5 * eta * T * abs_integral;
  return c;
}

std::string_view to_string(IntegratorKind kind) { return kind == IntegratorKind::Avi ? "avi" : "sync"; }

IntegratorKind parse_integrator(std::string_view text) {
  if (text == "avi") return IntegratorKind::Avi;
  if (text == "sync") return IntegratorKind::Sync;
  throw std::invalid_argument("integrator must be avi or sync, got '" + std::string(text) + "'");
}

Trajectory run_problem(const Problem& problem, const RunSettings& settings) {
  const Model& model = *problem.model;
  TimeSet ts = build(model.mesh(), problem.t0, problem.tf, settings.policy, settings.mode);
  if (settings.integrator == IntegratorKind::Avi) {
    AviOptions opts;
    opts.max_T = settings.max_T;
    return run_avi(model, ts, problem.init, opts);
  }
  return run_sync(model, ts, problem.init, settings.sync);
}

TimeSetPolicy refine_policy(const TimeSetPolicy& base, int level) {
  const int f = 1 << level;
  if (const auto* u = std::get_if<UniformPolicy>(&base)) return UniformPolicy{u->n * f};
  if (const auto* p = std::get_if<PerElementUniformPolicy>(&base)) {
    PerElementUniformPolicy r = *p;
    for (int& n : r.n) n *= f;
    return r;
  }
  JitteredPolicy j = std::get<JitteredPolicy>(base);
  j.n *= f;
  j.seed += static_cast<std::uint64_t>(level);
  return j;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  double best = 0.0;
  for (double t : union_grid(a.timeset().global(), b.timeset().global())) {
    best = std::max(best, (a.values_at(t) - b.values_at(t)).norm());
  }
  return best;
}

double l2_rate_distance(const Trajectory& a, const Trajectory& b) {
  const std::vector<double> g = union_grid(a.timeset().global(), b.timeset().global());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double mid = 0.5 * (g[i] + g[i + 1]);
    s += (g[i + 1] - g[i]) * (a.rates_at(mid) - b.rates_at(mid)).squaredNorm();
  }
  return std::sqrt(s);
}

namespace {

struct OracleErrors {
  double sup = 0.0;
  double l2 = 0.0;
};

OracleErrors oracle_errors(const Trajectory& traj, const LinearSystem& sys, const Problem& p) {
  const std::vector<double>& g = traj.timeset().global();
  std::vector<double> times = g;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) times.push_back(0.5 * (g[i] + g[i + 1]));
  const OracleStates ref = exact_solution(sys, p.init, p.t0, times);
  OracleErrors e;
  for (std::size_t i = 0; i < g.size(); ++i) e.sup = std::max(e.sup, (traj.values_at(g[i]) - ref.values[i]).norm());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double mid = times[g.size() + i];
    s += (g[i + 1] - g[i]) * (traj.rates_at(mid) - ref.rates[g.size() + i]).squaredNorm();
  }
  e.l2 = std::sqrt(s);
  return e;
}

int thread_cap(int requested, int levels) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("AVI_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(n, 1, levels);
}

}  // namespace

ConvergenceReport convergence_study(const Problem& problem, const RunSettings& settings, const StudyOptions& options) {
  if (options.levels < 3) throw std::invalid_argument("a convergence study needs at least 3 levels");
  const Model& model = *problem.model;
  const bool quadratic = is_quadratic(model.material().chi);
  bool use_oracle = options.reference == Reference::Oracle || (options.reference == Reference::Auto && quadratic);
  if (use_oracle && !quadratic) throw IncompatibleError("oracle reference requires a quadratic chi");

  std::optional<LinearSystem> sys;
  if (use_oracle) {
    const Pairing pairing = settings.integrator == IntegratorKind::Sync && settings.sync.quadrature == Quadrature::Gauss
                                ? Pairing::Consistent
                                : Pairing::Lumped;
    sys = assemble_linear_system(model, pairing);
  }

  const int L = options.levels;
  std::vector<std::optional<Trajectory>> trajs(L);
  std::vector<double> runtimes(L, 0.0);
  std::vector<std::exception_ptr> errors(L);
  std::mutex mu;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int l;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= L) return;
        l = next++;
      }
      try {
        RunSettings s = settings;
        s.policy = refine_policy(settings.policy, l);
        const auto start = std::chrono::steady_clock::now();
        Trajectory t = run_problem(problem, s);
        runtimes[l] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        trajs[l].emplace(std::move(t));
      } catch (...) {
        errors[l] = std::current_exception();
      }
    }
  };
  const int nthreads = thread_cap(options.threads, L);
  std::vector<std::thread> pool;
  for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (int l = 0; l < L; ++l) {
    if (!errors[l]) continue;
    const std::string tag = "level " + std::to_string(l) + ": ";
    try {
      std::rethrow_exception(errors[l]);
    } catch (const NumericalError& e) {
      throw NumericalError(tag + e.what());
    } catch (const IncompatibleError& e) {
      throw IncompatibleError(tag + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(tag + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(tag + e.what());
    }
  }

  ConvergenceReport report;
  report.oracle_reference = use_oracle;
  for (int l = 0; l < L; ++l) {
    const Trajectory& t = *trajs[l];
    ConvergenceRow row;
    row.level = l;
    row.T_theta = t.timeset().metrics().T;
    row.tau_theta = t.timeset().metrics().tau;
    if (use_oracle) {
      const OracleErrors e = oracle_errors(t, *sys, problem);
      row.sup_err = e.sup;
      row.l2_rate_err = e.l2;
    } else if (l + 1 < L) {
      row.sup_err = sup_distance(t, *trajs[L - 1]);
      row.l2_rate_err = l2_rate_distance(t, *trajs[L - 1]);
    }
    row.pV_u = pointwise_variation(t, Channel::U, problem.t0, problem.tf);
    row.pV_nu = pointwise_variation(t, Channel::Nu, problem.t0, problem.tf);
    row.max_rate = t.max_rate();
    row.runtime = runtimes[l];
    report.rows.push_back(row);
    for (const auto& w : t.warnings) report.notes.push_back("level " + std::to_string(l) + ": " + w);
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ConvergenceRow& a, const ConvergenceRow& b) { return a.T_theta > b.T_theta; });

  const int compared = use_oracle ? L : L - 1;
  for (int l = 0; l + 1 < compared; ++l) {
    const double e0 = report.rows[l].sup_err, e1 = report.rows[l + 1].sup_err;
    if (e0 > 0.0 && e1 > 0.0) report.orders.push_back(std::log2(e0 / e1));
  }
  for (int l = 0; l + 1 < L; ++l) {
    if (!(report.rows[l + 1].sup_err < report.rows[l].sup_err)) report.monotone = false;
  }
  if (!report.orders.empty()) {
    report.order = std::accumulate(report.orders.begin(), report.orders.end(), 0.0) / report.orders.size();
  }
  if (!report.monotone) report.notes.push_back("sup errors are not strictly decreasing across levels");
  return report;
}

void ConvergenceReport::write_csv(std::ostream& out) const {
  out << "level,T_theta,tau_theta,sup_err,l2_rate_err,pV_u,pV_nu,max_rate,runtime_s\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.6f\n", r.level, r.T_theta,
                  r.tau_theta, r.sup_err, r.l2_rate_err, r.pV_u, r.pV_nu, r.max_rate, r.runtime);
    out << buf;
  }
  out << "# reference=" << (oracle_reference ? "oracle" : "finest") << "\n";
  std::snprintf(buf, sizeof buf, "# order=%.6g\n", order);
  out << buf;
  if (!monotone) out << "# non-monotone sup errors\n";
  for (const auto& n : notes) out << "# " << n << "\n";
}

}  // namespace cbvi
