#include "cbvi/commands.hpp"

#include "cbvi/config.hpp"
#include "cbvi/diagnostics.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace cbvi {

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MeshError& e) {
    err << "error: mesh: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw ConfigError("output.dir: cannot write " + (dir / name).string());
  return f;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config_path);
    const Problem problem = build_problem(cfg);
    const RunSettings settings = build_settings(cfg);
    const Trajectory traj = run_problem(problem, settings);
    const Model& model = *problem.model;
    const TimeSetMetrics& m = traj.timeset().metrics();

    std::ostringstream s;
    s << "integrator=" << to_string(cfg.integrator) << "\n";
    s << "chi=" << chi_kind(model.material().chi) << "\n";
    s << "t0=" << num(cfg.t0) << "\ntf=" << num(cfg.tf) << "\nfinal_time=" << num(traj.timeset().tf()) << "\n";
    s << "nodes=" << model.num_nodes() << "\nelements=" << model.mesh().num_elements() << "\n";
    s << "events=" << traj.events << "\n";
    s << "timeset_mode=" << to_string(traj.timeset().mode()) << "\n";
    s << "h_theta=" << num(m.h) << "\nT_theta=" << num(m.T) << "\ntau_theta=" << num(m.tau)
      << "\ntau_prime_theta=" << num(m.tau_prime) << "\n";
    s << "max_rate=" << num(traj.max_rate()) << "\n";
    s << "pV_u=" << num(pointwise_variation(traj, Channel::U, cfg.t0, cfg.tf)) << "\n";
    s << "pV_nu=" << num(pointwise_variation(traj, Channel::Nu, cfg.t0, cfg.tf)) << "\n";
    if (cfg.energy) {
      const Energy e0 = energy(model, traj, cfg.t0, cfg.quadrature);
      const Energy e1 = energy(model, traj, cfg.tf, cfg.quadrature);
      s << "energy_initial=" << num(e0.total) << "\nenergy_final=" << num(e1.total) << "\n";
      s << "discrete_action=" << num(discrete_action(model, traj)) << "\n";
    }
    s << "warnings=" << traj.warnings.size() << "\n";
    for (const auto& w : traj.warnings) err << "warning: " << w << "\n";

    if (cfg.write_trajectory) {
      auto f = open_output(cfg.output_dir, "trajectory.csv");
      traj.write_csv(f);
    }
    auto f = open_output(cfg.output_dir, "summary.txt");
    f << s.str();
    out << s.str();
    return kExitOk;
  });
}

int cmd_converge(const std::filesystem::path& config_path, std::optional<int> levels, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config_path);
    StudyOptions opts;
    opts.levels = levels.value_or(cfg.levels);
    opts.reference = cfg.reference;
    if (opts.levels < 3) throw ConfigError("converge.levels: a study needs at least 3 levels");
    const Problem problem = build_problem(cfg);
    const ConvergenceReport report = convergence_study(problem, build_settings(cfg), opts);
    std::ostringstream s;
    report.write_csv(s);
    auto f = open_output(cfg.output_dir, "convergence.csv");
    f << s.str();
    out << s.str();
    return kExitOk;
  });
}

int cmd_validate(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config_path);
    const Mesh mesh = [&] {
      try {
        return load_mesh_file(cfg.mesh_path);
      } catch (const MeshError& e) {
        throw ConfigError(std::string("mesh.path: ") + e.what());
      }
    }();
    const Material material = build_material(cfg.material, mesh, cfg.seed);
    ValidationOptions vo;
    vo.seed = cfg.seed;
    const AssumptionReport report = validate_assumptions(material, &mesh, vo);
    bool ok = report.ok();

    out << "lambda=" << num(report.lambda) << "\nLambda=" << num(report.Lambda) << "\nXi1=" << num(report.xi1)
        << "\ngamma=" << num(report.gamma) << "\nXi=" << num(report.xi) << "\nXi2=" << num(report.xi2)
        << "\nT0=" << num(report.t0) << "\n";
    for (const auto& c : report.checks) {
      out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    }
    out << "PASS mesh: " << mesh.num_nodes() << " nodes, " << mesh.num_elements()
        << " elements with positive volume, " << mesh.facets().size() << " boundary facets, c_T="
        << num(grad_bound_constant(mesh)) << "\n";

    const TimeSet ts = build(mesh, cfg.t0, cfg.tf, build_policy(cfg), cfg.timeset.mode);
    const bool chain = ts.metrics().chain_holds(ts.num_elements());
    ok = ok && chain;
    out << (chain ? "PASS " : "FAIL ") << "timeset chain: h=" << num(ts.metrics().h) << " T=" << num(ts.metrics().T)
        << " tau=" << num(ts.metrics().tau) << "\n";

    if (cfg.integrator == IntegratorKind::Avi && !is_scalar_quadratic(material.chi)) {
      out << "FAIL integrator compatibility: avi requires a scalar chi\n";
      ok = false;
    }

    try {
      const Model model(mesh, material);
      const double dt = ts.metrics().T;
      const MonotonicitySample ms = sample_psi_monotonicity(model, dt, cfg.quadrature, 100, cfg.seed);
      const bool pass = ms.violations == 0;
      ok = ok && pass;
      out << (pass ? "PASS " : "FAIL ") << "psi monotonicity: " << ms.pairs - ms.violations << "/" << ms.pairs
          << " pairs at dt=" << num(dt) << ", min ratio " << num(ms.min_ratio) << " vs gamma/2="
          << num(0.5 * chi_constants(material.chi).gamma) << "\n";
    } catch (const std::invalid_argument& e) {
      out << "FAIL model: " << e.what() << "\n";
      ok = false;
    }
    out << "status=" << (ok ? "ok" : "fail") << "\n";
    return kExitOk;
  });
}

int cmd_mesh_info(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Mesh mesh = load_mesh_file(path);
    double vmin = mesh.volume(0), vmax = mesh.volume(0);
    for (int K = 1; K < mesh.num_elements(); ++K) {
      vmin = std::min(vmin, mesh.volume(K));
      vmax = std::max(vmax, mesh.volume(K));
    }
    int counts[4] = {0, 0, 0, 0};
    for (const auto& f : mesh.facets()) ++counts[static_cast<int>(f.marker)];
    int fixed_u = 0, fixed_nu = 0;
    for (int a = 0; a < mesh.num_nodes(); ++a) {
      fixed_u += mesh.fixed_u(a);
      fixed_nu += mesh.fixed_nu(a);
    }
    out << "dim=" << mesh.dim() << "\nk=" << mesh.descriptor_dim() << "\nnodes=" << mesh.num_nodes()
        << "\nelements=" << mesh.num_elements() << "\nfacets=" << mesh.facets().size() << "\n";
    out << "facets_traction=" << counts[0] << "\nfacets_fixed_u=" << counts[1] << "\nfacets_fixed_nu=" << counts[2]
        << "\nfacets_free=" << counts[3] << "\n";
    out << "nodes_fixed_u=" << fixed_u << "\nnodes_fixed_nu=" << fixed_nu << "\n";
    out << "total_volume=" << num(mesh.total_volume()) << "\nmin_volume=" << num(vmin) << "\nmax_volume=" << num(vmax)
        << "\ngrad_bound=" << num(grad_bound_constant(mesh)) << "\n";
    return kExitOk;
  });
}

}  // namespace cbvi
