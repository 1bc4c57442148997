// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include "cbvi/commands.hpp"
#include "cbvi/config.hpp"
#include "cbvi/diagnostics.hpp"
#include "cbvi/errors.hpp"
#include "fixtures.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

using namespace cbvi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream o;
  o.precision(4);
  o << x;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> uniform_times(int n, double t0, double tf) {
  std::vector<double> t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = t0 + (tf - t0) * i / n;
  return t;
}

Problem load_problem(const std::string& config, RunConfig* out = nullptr) {
  const RunConfig c = load_config(fixtures::data_path("configs/" + config));
  if (out) *out = c;
  return build_problem(c);
}

// 1. sync against the matrix exponential oracle at h, h/2, h/4.
Outcome oracle_equivalence() {
  const Problem p = load_problem("quadratic_sync.ini");
  const Model& model = *p.model;
  const LinearSystem sys = assemble_linear_system(model);
  std::vector<double> errs;
  double slowest = 0.0;
  for (int n : {100, 200, 400}) {
    const auto times = uniform_times(n, p.t0, p.tf);
    const auto start = std::chrono::steady_clock::now();
    const Trajectory traj = run_sync(model, synchronous_timeset(model.mesh().num_elements(), times), p.init);
    slowest = std::max(slowest, seconds_since(start));
    const OracleStates ex = exact_solution(sys, p.init, p.t0, times);
    double e = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      e = std::max(e, (traj.values_at(times[i]) - ex.values[i]).cwiseAbs().maxCoeff());
    }
    errs.push_back(e);
  }
  const double r1 = errs[0] / errs[1], r2 = errs[1] / errs[2];
  const bool in = [](double r) { return r >= 3.2 && r <= 4.8; }(r1) && r2 >= 3.2 && r2 <= 4.8;
  return {in && slowest < 1.0, "errors " + fmt(errs[0]) + " " + fmt(errs[1]) + " " + fmt(errs[2]) + ", ratios " +
                                   fmt(r1) + " " + fmt(r2) + ", slowest run " + fmt(slowest) + " s"};
}

// 2. AVI on identical elemental sets reproduces the synchronous trajectory.
Outcome avi_sync_reduction() {
  const Problem p = load_problem("quadratic_sync.ini");
  const Model& model = *p.model;
  const TimeSet ts = synchronous_timeset(model.mesh().num_elements(), uniform_times(100, p.t0, p.tf));
  const Trajectory a = run_avi(model, ts, p.init);
  const Trajectory s = run_sync(model, ts, p.init);
  double worst = 0.0;
  for (int n = 0; n < model.num_nodes(); ++n) {
    if (a.node(n).times != s.node(n).times) return {false, "nodal instants differ at node " + std::to_string(n)};
    for (std::size_t i = 0; i < a.node(n).values.size(); ++i) {
      worst = std::max(worst, std::abs(a.node(n).values[i] - s.node(n).values[i]));
      worst = std::max(worst, std::abs(a.node(n).rates[i] - s.node(n).rates[i]));
    }
  }
  return {worst <= 1e-12, "max nodal difference " + fmt(worst)};
}

// Criterion 3's study is shared with criterion 4.
struct Study {
  ConvergenceReport report;
  double runtime = 0.0;
};

const Study& avi_study() {
  static const Study study = [] {
    RunConfig c;
    const Problem p = load_problem("quadratic_avi.ini", &c);
    const auto start = std::chrono::steady_clock::now();
    ConvergenceReport r = convergence_study(p, build_settings(c), StudyOptions{3, Reference::Finest, 0});
    return Study{std::move(r), seconds_since(start)};
  }();
  return study;
}

// 3. Cauchy convergence of AVI on jittered sets with tau <= 2.
Outcome avi_convergence() {
  const Study& s = avi_study();
  const auto& rows = s.report.rows;
  if (rows.size() != 3) return {false, "expected 3 levels"};
  bool sup_dec = true, l2_dec = true, tau_ok = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    sup_dec = sup_dec && rows[i].sup_err < rows[i - 1].sup_err;
    l2_dec = l2_dec && rows[i].l2_rate_err < rows[i - 1].l2_rate_err;
  }
  std::string T, sup, l2;
  for (const auto& r : rows) {
    tau_ok = tau_ok && r.tau_theta <= 2.0 + 1e-12;
    T += " " + fmt(r.T_theta);
    sup += " " + fmt(r.sup_err);
    l2 += " " + fmt(r.l2_rate_err);
  }
  return {sup_dec && l2_dec && tau_ok && s.runtime < 10.0,
          "T_theta" + T + "; sup vs finest" + sup + "; L2 rate" + l2 + "; runtime " + fmt(s.runtime) + " s"};
}

// 4. pV(u') + pV(nu') stays within a factor 2 across the levels of criterion 3.
Outcome bv_bound() {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::string values;
  for (const auto& r : avi_study().report.rows) {
    const double pv = r.pV_u + r.pV_nu;
    lo = std::min(lo, pv);
    hi = std::max(hi, pv);
    values += " " + fmt(pv);
  }
  return {hi < 2.0 * lo, "pV_u + pV_nu" + values + ", max/min " + fmt(hi / lo)};
}

// 5. Psi monotone at dt = T0 / 2 for the tanh co-energy; solver reaches 1e-10 in 50 iterations.
Outcome psi_monotonicity() {
  const Problem p = load_problem("tanh_sync.ini");
  const Model& model = *p.model;
  const ChiConstants cc = chi_constants(model.material().chi);
  const double dt = 0.5 * monotonicity_window(cc.gamma, cc.xi);
  if (cc.gamma != 1.0 || cc.xi != 2.0 || std::abs(dt - 0.2) > 1e-15) return {false, "unexpected constants"};
  const MonotonicitySample s = sample_psi_monotonicity(model, dt, Quadrature::Vertex, 100, 2024, 1.0, 1e-9);

  std::mt19937_64 rng(2025);
  const int n = model.num_nodes() * model.descriptor_dim();
  int solved = 0, max_iters = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const PsiContext ctx = make_psi_context(model, 0.0, dt, 2.0 * dt, fixtures::random_vector(n, rng),
                                            fixtures::random_vector(n, rng), fixtures::random_vector(n, rng));
    const PsiSolveResult r = solve_psi(ctx, fixtures::random_vector(n, rng, 5.0), 1e-10, 50);
    if (r.converged && r.residual <= 1e-10 && r.iterations <= 50) ++solved;
    max_iters = std::max(max_iters, r.iterations);
    worst = std::max(worst, r.residual);
  }
  return {s.pairs == 100 && s.violations == 0 && solved == 100,
          std::to_string(s.pairs - s.violations) + "/100 pairs, min margin " + fmt(s.min_margin) + "; " +
              std::to_string(solved) + "/100 solves, max residual " + fmt(worst) + ", max iterations " +
              std::to_string(max_iters)};
}

// 6. eta = 1 without forcing: energy slope negative, positive fluctuation halves with h.
Outcome dissipation_trend() {
  RunConfig c;
  const Problem p = load_problem("dissipative.ini", &c);
  bool pass = true;
  std::string detail;
  for (IntegratorKind kind : {IntegratorKind::Avi, IntegratorKind::Sync}) {
    RunSettings s = build_settings(c);
    s.integrator = kind;
    s.mode = TimeSetMode::Relaxed;
    s.policy = UniformPolicy{100};
    const EnergyTrend coarse = energy_trend(energy_series(*p.model, run_problem(p, s)));
    s.policy = UniformPolicy{200};
    const EnergyTrend fine = energy_trend(energy_series(*p.model, run_problem(p, s)));
    const bool halves = fine.max_rise <= 0.5 * coarse.max_rise;
    pass = pass && coarse.slope < 0.0 && halves;
    detail += std::string(detail.empty() ? "" : "; ") + std::string(to_string(kind)) + " slope " +
              fmt(coarse.slope) + ", max rise " + fmt(coarse.max_rise) + " -> " + fmt(fine.max_rise);
  }
  return {pass, detail};
}

// 7. Gradient-only energy without loads conserves sum m_a u'_a.
Outcome momentum() {
  RunConfig c;
  const Problem p = load_problem("momentum.ini", &c);
  const Model& model = *p.model;
  const Trajectory traj = run_problem(p, build_settings(c));
  const int d = model.dim();
  auto total = [&](double t) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    for (int a = 0; a < model.num_nodes(); ++a) m += model.coefficients().mass[a] * traj.rate_at(a, t).head(d);
    return m;
  };
  const Eigen::VectorXd p0 = total(p.t0);
  double worst = 0.0;
  for (double t : traj.timeset().global()) worst = std::max(worst, (total(t) - p0).norm());
  return {traj.events >= 10000 && worst <= 1e-12,
          std::to_string(traj.events) + " events, max drift " + fmt(worst) + ", |p| " + fmt(p0.norm())};
}

// Trajectory whose nu channel is a random piecewise-affine function on the nodal instants.
Trajectory random_nu(const Model& model, const TimeSet& ts, std::mt19937_64& rng) {
  const int d = model.dim(), k = model.descriptor_dim(), m = d + k;
  Trajectory traj(ts, d, k, model.num_nodes(), InitialData::zero(model.num_dofs()));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int a = 0; a < model.num_nodes(); ++a) {
    const NodalTimes nt = nodal_times(ts, model.mesh(), a);
    std::vector<double> v(m, 0.0), r(m, 0.0);
    for (int c = 0; c < k; ++c) v[d + c] = u(rng);
    for (std::size_t i = 0; i < nt.times.size(); ++i) {
      if (i + 1 < nt.times.size())
        for (int c = 0; c < k; ++c) r[d + c] = u(rng);
      traj.record(a, nt.times[i], v.data(), r.data());
      if (i + 1 < nt.times.size())
        for (int c = 0; c < k; ++c) v[d + c] += r[d + c] * (nt.times[i + 1] - nt.times[i]);
    }
  }
  return traj;
}

// 8. |D_T - D_T,Theta| <= eta T / 2 |int nu' . phi'| on random data.
Outcome dissipation_bound() {
  const Mesh mesh = load_mesh_file(fixtures::data_path("meshes/grid4.mesh"));
  Material mat = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 1, 1, 1, 1));
  mat.eta = 0.8;
  const Model model(mesh, mat);
  std::mt19937_64 rng(8);
  int held = 0, identity_ok = 0, abs_held = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (int s = 0; s < 50; ++s) {
    const TimeSet ts = build(mesh, 0.0, 1.0, JitteredPolicy{5 + s % 7, static_cast<std::uint64_t>(100 + s), 2.0});
    const DissipationComparison c = compare_dissipation(model, random_nu(model, ts, rng), random_nu(model, ts, rng));
    worst_slack = std::min(worst_slack, c.bound - c.difference);
    if (c.bound - c.difference >= 0.0) ++held;
    if (std::abs(c.difference - c.identity) <= 1e-12 * std::max(1.0, c.identity)) ++identity_ok;
    if (c.difference <= c.absolute_bound * (1.0 + 1e-12)) ++abs_held;
  }
  return {held == 50, std::to_string(held) + "/50 satisfy the bound, min slack " + fmt(worst_slack) +
                          "; identity " + std::to_string(identity_ok) + "/50; bound with |nu'.phi'| inside " +
                          std::to_string(abs_held) + "/50"};
}

// 9. Validators accept the criterion configs and flag the broken ones.
Outcome validators() {
  auto validate = [](const std::string& name) {
    std::ostringstream out, err;
    cmd_validate(fixtures::data_path("configs/" + name), out, err);
    return out.str() + err.str();
  };
  auto fail_lines = [](const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
      if (l.rfind("FAIL", 0) == 0) lines.push_back(l);
    return lines;
  };
  bool pass = true;
  std::string detail;
  for (const char* name : {"quadratic_sync.ini", "quadratic_avi.ini", "tanh_sync.ini", "dissipative.ini"}) {
    const bool ok = validate(name).find("status=ok") != std::string::npos;
    pass = pass && ok;
    detail += std::string(name) + (ok ? " ok; " : " FAILED; ");
  }
  // kappa = 0 is what makes the energy gradient-only, so only coercivity may fail
  bool momentum_ok = true;
  for (const auto& l : fail_lines(validate("momentum.ini"))) momentum_ok = momentum_ok && l.rfind("FAIL A1", 0) == 0;
  pass = pass && momentum_ok;
  detail += std::string("momentum.ini ") + (momentum_ok ? "A1 only; " : "unexpected fails; ");
  const bool q = validate("broken_indefinite_q.ini").find("FAIL A1 coercivity") != std::string::npos;
  const bool chi = validate("broken_nonconvex_chi.ini").find("FAIL A5 uniform convexity") != std::string::npos;
  pass = pass && q && chi;
  detail += std::string("indefinite Q ") + (q ? "flagged" : "missed") + "; non-convex chi " + (chi ? "flagged" : "missed");
  return {pass, detail};
}

// 10. Analytic partials against central differences.
Outcome gradient_oracles() {
  std::mt19937_64 rng(10);
  const double step = 1e-5;
  double elastic = 0.0, w = 0.0, chi = 0.0, forces = 0.0;

  for (auto [d, k] : {std::pair{2, 1}, std::pair{2, 2}, std::pair{3, 1}}) {
    const int n = d * d + k + k * d;
    const ElasticForm e(d, k, fixtures::random_spd(n, rng));
    for (int s = 0; s < 20; ++s) {
      const Eigen::MatrixXd U = Eigen::MatrixXd::Random(d, d), N = Eigen::MatrixXd::Random(k, d);
      const Eigen::VectorXd nu = Eigen::VectorXd::Random(k);
      const ElasticPartials p = elastic_partials(e, U, nu, N);
      const Eigen::VectorXd fd = finite_difference_gradient(e, pack_strain(U, nu, N), step);
      elastic = std::max(elastic, (pack_strain(p.d_F, p.d_nu, p.d_N) - fd).cwiseAbs().maxCoeff());
    }
    const ExternalPotential ext(fixtures::random_spd(d + k, rng) - Eigen::MatrixXd::Identity(d + k, d + k),
                                fixtures::random_vector(d + k, rng), 0.3);
    for (int s = 0; s < 20; ++s) {
      const Eigen::VectorXd z = fixtures::random_vector(d + k, rng, 2.0);
      w = std::max(w, (ext.gradient(z) - finite_difference_gradient(ext, z, step)).cwiseAbs().maxCoeff());
    }
  }

  for (int k : {1, 2}) {
    const std::vector<ChiModel> models = {ScalarQuadratic{1.7}, MatrixQuadratic{fixtures::random_spd(k, rng)},
                                          tanh_chi(k, 1.2, 0.3, 0.2, 1.0, 2.0)};
    for (const ChiModel& m : models) {
      for (int s = 0; s < 20; ++s) {
        const Eigen::VectorXd nu = fixtures::random_vector(k, rng, 2.0), z = fixtures::random_vector(k, rng, 2.0);
        const ChiPartials p = chi_partials(m, nu, z);
        const auto fd_nu = finite_difference_gradient([&](const Eigen::VectorXd& x) { return chi_partials(m, x, z).value; },
                                                      nu, step);
        const auto fd_z = finite_difference_gradient([&](const Eigen::VectorXd& x) { return chi_partials(m, nu, x).value; },
                                                     z, step);
        chi = std::max({chi, (p.d_nu - fd_nu).cwiseAbs().maxCoeff(), (p.d_rate - fd_z).cwiseAbs().maxCoeff()});
      }
    }
  }

  for (const char* mesh_name : {"meshes/square2.mesh", "meshes/tet.mesh", "meshes/grid4.mesh"}) {
    const Mesh mesh = load_mesh_file(fixtures::data_path(mesh_name));
    const Model model(mesh, fixtures::quadratic_material(mesh));
    for (int s = 0; s < 20; ++s) {
      const Eigen::VectorXd x = fixtures::random_vector(model.num_dofs(), rng);
      const Eigen::VectorXd fd =
          finite_difference_gradient([&](const Eigen::VectorXd& y) { return potential_V(model, y); }, x, step);
      forces = std::max(forces, (global_force(model, x) - fd).cwiseAbs().maxCoeff());
    }
  }
  const double worst = std::max({elastic, w, chi, forces});
  return {worst <= 1e-6, "max |analytic - fd|: elastic " + fmt(elastic) + ", w " + fmt(w) + ", chi " + fmt(chi) +
                             ", forces " + fmt(forces)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence (sync)", oracle_equivalence},
      {"AVI equals sync on identical sets", avi_sync_reduction},
      {"AVI Cauchy convergence", avi_convergence},
      {"BV bound", bv_bound},
      {"Psi monotonicity", psi_monotonicity},
      {"dissipation trend", dissipation_trend},
      {"momentum conservation", momentum},
      {"discrete dissipation bound", dissipation_bound},
      {"assumption validators", validators},
      {"gradient oracles", gradient_oracles},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
