#include "cbvi/sync.hpp"

#include "cbvi/avi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace cbvi {

std::string_view to_string(Quadrature q) { return q == Quadrature::Vertex ? "vertex" : "gauss"; }

Quadrature parse_quadrature(std::string_view text) {
  if (text == "vertex") return Quadrature::Vertex;
  if (text == "gauss") return Quadrature::Gauss;
  throw std::invalid_argument("sync quadrature must be vertex or gauss, got '" + std::string(text) + "'");
}

namespace {

const SimplexRule& rule_for(int dim, Quadrature q) {
  static const SimplexRule v2 = vertex_rule(2), v3 = vertex_rule(3), g2 = degree2_rule(2), g3 = degree2_rule(3);
  if (q == Quadrature::Vertex) return dim == 2 ? v2 : v3;
  return dim == 2 ? g2 : g3;
}

bool nu_free(const Model& m, int a, int c) { return m.is_free(m.dof(a, m.dim() + c)); }

Eigen::VectorXd nu_part(const Model& m, const Eigen::VectorXd& global) {
  const int k = m.descriptor_dim();
  Eigen::VectorXd out(static_cast<Eigen::Index>(m.num_nodes()) * k);
  for (int a = 0; a < m.num_nodes(); ++a) out.segment(a * k, k) = global.segment(m.dof(a, m.dim()), k);
  return out;
}

// Free nu channels in node-major order.
std::vector<int> free_nu_indices(const Model& m) {
  std::vector<int> idx;
  for (int a = 0; a < m.num_nodes(); ++a)
    for (int c = 0; c < m.descriptor_dim(); ++c)
      if (nu_free(m, a, c)) idx.push_back(a * m.descriptor_dim() + c);
  return idx;
}

Eigen::VectorXd restrict(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) r(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return r;
}

// Kronecker pairing (x) B + diag(eta_a) (x) I on the free channels.
Eigen::MatrixXd linear_operator(const Model& m, Quadrature q, const Eigen::MatrixXd& B, double inv_dt,
                                const std::vector<int>& idx) {
  const Eigen::MatrixXd M = pairing_matrix(m, q);
  const int k = m.descriptor_dim();
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = idx[i] / k, c = idx[i] % k;
    for (Eigen::Index j = 0; j < n; ++j) {
      const int b = idx[j] / k, e = idx[j] % k;
      A(i, j) = inv_dt * M(a, b) * B(c, e);
    }
    A(i, i) += m.coefficients().dissipation[a];
  }
  return A;
}

}  // namespace

PsiContext make_psi_context(const Model& model, double t_prev, double t_now, double t_next, Eigen::VectorXd nu_prev,
                            Eigen::VectorXd nu_now, Eigen::VectorXd rate_prev, Quadrature quadrature) {
  if (!(t_prev < t_now) || !(t_now < t_next)) {
    throw std::invalid_argument("Psi context needs t_{i-1} < t_i < t_{i+1}");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(model.num_nodes()) * model.descriptor_dim();
  if (nu_prev.size() != n || nu_now.size() != n || rate_prev.size() != n) {
    throw std::invalid_argument("Psi context vectors must have k entries per node");
  }
  PsiContext ctx{&model, t_prev, t_now, t_next, std::move(nu_prev), std::move(nu_now), std::move(rate_prev),
                 quadrature, {}};
  const ChiConstants cc = chi_constants(model.material().chi);
  if (cc.gamma > 0.0) {
    const double t0 = monotonicity_window(cc.gamma, cc.xi);
    if (ctx.dt() >= t0) {
      std::ostringstream msg;
      msg << "step " << ctx.dt() << " is outside the monotonicity window T0=" << t0;
      ctx.warnings.push_back(msg.str());
    }
  }
  return ctx;
}

Eigen::MatrixXd pairing_matrix(const Model& model, Quadrature quadrature) {
  const Mesh& mesh = model.mesh();
  const SimplexRule& rule = rule_for(mesh.dim(), quadrature);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(mesh.num_nodes(), mesh.num_nodes());
  for (int K = 0; K < mesh.num_elements(); ++K) {
    auto conn = mesh.element(K);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double w = rule.weights[q] * mesh.volume(K);
      const Eigen::VectorXd& p = rule.points[q];
      for (std::size_t i = 0; i < conn.size(); ++i)
        for (std::size_t j = 0; j < conn.size(); ++j) M(conn[i], conn[j]) += w * p(i) * p(j);
    }
  }
  return M;
}

Eigen::VectorXd psi_eval(const PsiContext& ctx, const Eigen::VectorXd& nu_trial) {
  const Model& m = *ctx.model;
  const Mesh& mesh = m.mesh();
  const int k = m.descriptor_dim();
  const Eigen::Index n = static_cast<Eigen::Index>(m.num_nodes()) * k;
  if (nu_trial.size() != n) throw std::invalid_argument("psi_eval: trial vector has the wrong size");
  const double dt = ctx.dt();
  if (!(dt > 0.0)) throw std::invalid_argument("psi_eval: nonpositive step");

  Eigen::VectorXd trial = nu_trial;
  for (int a = 0; a < m.num_nodes(); ++a)
    for (int c = 0; c < k; ++c)
      if (!nu_free(m, a, c)) trial(a * k + c) = 0.0;

  const SimplexRule& rule = rule_for(mesh.dim(), ctx.quadrature);
  const ChiModel& chi = m.material().chi;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd now(k), zeta(k), prev(k), rate(k);
  for (int K = 0; K < mesh.num_elements(); ++K) {
    auto conn = mesh.element(K);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Eigen::VectorXd& p = rule.points[q];
      now.setZero();
      zeta.setZero();
      prev.setZero();
      rate.setZero();
      for (std::size_t i = 0; i < conn.size(); ++i) {
        if (p(i) == 0.0) continue;
        const Eigen::Index s = static_cast<Eigen::Index>(conn[i]) * k;
        now += p(i) * ctx.nu_now.segment(s, k);
        zeta += p(i) * (trial.segment(s, k) - ctx.nu_now.segment(s, k)) / dt;
        prev += p(i) * ctx.nu_prev.segment(s, k);
        rate += p(i) * ctx.rate_prev.segment(s, k);
      }
      const ChiPartials p1 = chi_partials(chi, now, zeta);
      const ChiPartials p0 = chi_partials(chi, prev, rate);
      const Eigen::VectorXd integrand = p1.d_rate - p0.d_rate - dt * p1.d_nu;
      const double w = rule.weights[q] * mesh.volume(K);
      for (std::size_t i = 0; i < conn.size(); ++i) {
        if (p(i) == 0.0) continue;
        out.segment(static_cast<Eigen::Index>(conn[i]) * k, k) += (w * p(i)) * integrand;
      }
    }
  }
  const auto& eta = m.coefficients().dissipation;
  for (int a = 0; a < m.num_nodes(); ++a) {
    out.segment(a * k, k) += eta[a] * (trial.segment(a * k, k) - ctx.nu_now.segment(a * k, k));
    for (int c = 0; c < k; ++c)
      if (!nu_free(m, a, c)) out(a * k + c) = 0.0;
  }
  return out;
}

PsiSolveResult solve_psi(const PsiContext& ctx, const Eigen::VectorXd& rhs, double tol, int max_iters) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_psi: tolerance must be positive");
  if (max_iters < 1) throw std::invalid_argument("solve_psi: max_iters must be >= 1");
  const Model& m = *ctx.model;
  const int k = m.descriptor_dim();
  const std::vector<int> idx = free_nu_indices(m);
  const auto nf = static_cast<Eigen::Index>(idx.size());
  const ChiModel& chi = m.material().chi;

  auto restrict_to_free = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(nf);
    for (Eigen::Index i = 0; i < nf; ++i) r(i) = v(idx[i]);
    return r;
  };

  PsiSolveResult res;
  res.nu = Eigen::VectorXd::Zero(ctx.nu_now.size());
  for (int i : idx) res.nu(i) = ctx.nu_now(i) + ctx.dt() * ctx.rate_prev(i);
  auto residual = [&](const Eigen::VectorXd& nu) { return restrict_to_free(psi_eval(ctx, nu) - rhs); };

  Eigen::MatrixXd B(k, k);
  if (const auto* s = std::get_if<ScalarQuadratic>(&chi)) {
    B = s->rho_bar * Eigen::MatrixXd::Identity(k, k);
  } else if (const auto* mq = std::get_if<MatrixQuadratic>(&chi)) {
    B = mq->omega;
  } else {
    const ChiConstants cc = chi_constants(chi);
    B = 0.5 * (cc.gamma + cc.xi) * Eigen::MatrixXd::Identity(k, k);
  }
  const Eigen::LDLT<Eigen::MatrixXd> P(linear_operator(m, ctx.quadrature, B, 1.0 / ctx.dt(), idx));

  Eigen::VectorXd r = residual(res.nu);
  res.residual = r.norm();
  auto apply = [&](Eigen::VectorXd& nu, const Eigen::VectorXd& step) {
    for (Eigen::Index i = 0; i < nf; ++i) nu(idx[i]) -= step(i);
  };

  if (is_quadratic(chi)) {
    // Psi is affine with Jacobian P; a refinement pass absorbs rounding.
    for (int pass = 0; pass < 2 && res.residual > tol; ++pass) {
      apply(res.nu, P.solve(r));
      r = residual(res.nu);
      res.residual = r.norm();
      ++res.iterations;
    }
    res.converged = res.residual <= tol;
    return res;
  }

  while (res.residual > tol && res.iterations < max_iters) {
    const Eigen::VectorXd step = P.solve(r);
    double alpha = 1.0;
    Eigen::VectorXd trial;
    Eigen::VectorXd r_trial;
    for (;;) {
      trial = res.nu;
      apply(trial, alpha * step);
      r_trial = residual(trial);
      if (r_trial.norm() < res.residual || alpha < 1.0 / 1024.0) break;
      alpha *= 0.5;
    }
    ++res.iterations;
    if (!(r_trial.norm() < res.residual)) break;  // stalled
    res.nu = std::move(trial);
    r = std::move(r_trial);
    res.residual = r.norm();
  }
  res.converged = res.residual <= tol;
  return res;
}

MonotonicitySample sample_psi_monotonicity(const Model& model, double dt, Quadrature quadrature, int pairs,
                                           std::uint64_t seed, double scale, double slack) {
  const int k = model.descriptor_dim();
  const Eigen::Index n = static_cast<Eigen::Index>(model.num_nodes()) * k;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-scale, scale);
  auto draw = [&] {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = unif(rng);
    for (int a = 0; a < model.num_nodes(); ++a)
      for (int c = 0; c < k; ++c)
        if (!nu_free(model, a, c)) v(a * k + c) = 0.0;
    return v;
  };
  const double gamma = chi_constants(model.material().chi).gamma;
  const Eigen::MatrixXd M = pairing_matrix(model, quadrature);
  MonotonicitySample out;
  out.min_margin = std::numeric_limits<double>::infinity();
  out.min_ratio = std::numeric_limits<double>::infinity();
  for (int p = 0; p < pairs; ++p) {
    const PsiContext ctx = make_psi_context(model, 0.0, dt, 2.0 * dt, draw(), draw(), draw(), quadrature);
    const Eigen::VectorXd nu = draw(), mu = draw();
    const Eigen::VectorXd delta = nu - mu;
    double norm2 = 0.0;
    for (int a = 0; a < model.num_nodes(); ++a)
      for (int b = 0; b < model.num_nodes(); ++b)
        norm2 += M(a, b) * delta.segment(a * k, k).dot(delta.segment(b * k, k));
    const double lhs = (psi_eval(ctx, nu) - psi_eval(ctx, mu)).dot(delta);
    const double margin = lhs - 0.5 * gamma * norm2;
    ++out.pairs;
    if (margin < -slack) ++out.violations;
    out.min_margin = std::min(out.min_margin, margin);
    if (norm2 > 0.0) out.min_ratio = std::min(out.min_ratio, lhs / norm2);
  }
  return out;
}

Trajectory run_sync(const Model& model, const TimeSet& timeset, const InitialData& init, const SyncOptions& options) {
  if (!timeset.synchronous()) throw IncompatibleError("the synchronous integrator requires identical elemental time sets");
  if (timeset.num_elements() != model.mesh().num_elements()) {
    throw std::invalid_argument("time set and mesh have different element counts");
  }
  check_initial_data(model, init);

  const int d = model.dim();
  const int k = model.descriptor_dim();
  const auto& coef = model.coefficients();
  const std::vector<double>& times = timeset.global();

  Trajectory traj(timeset, d, k, model.num_nodes(), init);
  for (const auto& w : timeset.warnings()) traj.warnings.push_back(w);
  auto record_all = [&](double t, const Eigen::VectorXd& values, const Eigen::VectorXd& rates) {
    for (int a = 0; a < model.num_nodes(); ++a) {
      traj.record(a, t, values.data() + model.dof(a, 0), rates.data() + model.dof(a, 0));
    }
  };

  const bool quadratic = is_quadratic(model.material().chi);
  const std::vector<int> free_nu = free_nu_indices(model);
  Eigen::MatrixXd chi_matrix;
  if (const auto* s = std::get_if<ScalarQuadratic>(&model.material().chi)) {
    chi_matrix = s->rho_bar * Eigen::MatrixXd::Identity(k, k);
  } else if (const auto* mq = std::get_if<MatrixQuadratic>(&model.material().chi)) {
    chi_matrix = mq->omega;
  }
  Eigen::MatrixXd eta_diag = Eigen::MatrixXd::Zero(free_nu.size(), free_nu.size());
  for (std::size_t j = 0; j < free_nu.size(); ++j) eta_diag(j, j) = coef.dissipation[free_nu[j] / k];
  std::optional<Eigen::LDLT<Eigen::MatrixXd>> rate_solver;
  double cached_dt = 0.0;

  Eigen::VectorXd values = init.values;
  Eigen::VectorXd rates = init.rates;
  record_all(times.front(), values, rates);

  for (std::size_t i = 1; i + 1 < times.size(); ++i) {
    const double dt = times[i + 1] - times[i];
    const Eigen::VectorXd nu_prev = nu_part(model, values);
    const Eigen::VectorXd rate_prev = nu_part(model, rates);
    values += (times[i] - times[i - 1]) * rates;
    const Eigen::VectorXd force = global_force(model, values);

    for (int a = 0; a < model.num_nodes(); ++a)
      for (int c = 0; c < d; ++c) {
        const int j = model.dof(a, c);
        if (model.is_free(j)) rates(j) -= dt * force(j) / coef.mass[a];
      }

    const Eigen::VectorXd nu_now = nu_part(model, values);
    PsiContext ctx =
        make_psi_context(model, times[i - 1], times[i], times[i + 1], nu_prev, nu_now, rate_prev, options.quadrature);
    for (auto& w : ctx.warnings) {
      if (std::find(traj.warnings.begin(), traj.warnings.end(), w) == traj.warnings.end()) traj.warnings.push_back(w);
    }
    Eigen::VectorXd rhs = -dt * nu_part(model, force);
    Eigen::VectorXd new_rate;
    if (quadratic) {
      // Psi is affine in the rate: (M (x) B + dt eta) z = rhs - Psi(nu_i).
      if (!rate_solver || dt != cached_dt) {
        rate_solver.emplace(linear_operator(model, options.quadrature, chi_matrix, 1.0, free_nu) +
                            (dt - 1.0) * eta_diag);
        cached_dt = dt;
      }
      const Eigen::VectorXd r = psi_eval(ctx, nu_now) - rhs;
      const Eigen::VectorXd z = rate_solver->solve(-restrict(r, free_nu));
      new_rate = Eigen::VectorXd::Zero(nu_now.size());
      for (std::size_t j = 0; j < free_nu.size(); ++j) new_rate(free_nu[j]) = z(static_cast<Eigen::Index>(j));
    } else {
      const PsiSolveResult sol = solve_psi(ctx, rhs, options.tol, options.max_iters);
      if (!sol.converged) {
        std::ostringstream msg;
        msg << "nu solve did not converge at t=" << times[i] << " (residual " << sol.residual << " after "
            << sol.iterations << " iterations); the step may exceed the monotonicity window";
        throw NumericalError(msg.str());
      }
      new_rate = (sol.nu - nu_now) / dt;
    }
    for (int a = 0; a < model.num_nodes(); ++a)
      for (int c = 0; c < k; ++c) {
        if (nu_free(model, a, c)) rates(model.dof(a, d + c)) = new_rate(a * k + c);
      }
    if (!values.allFinite() || !rates.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite state at step t=" << times[i];
      throw NumericalError(msg.str());
    }
    record_all(times[i], values, rates);
    ++traj.events;
  }

  values += (times.back() - times[times.size() - 2]) * rates;
  if (!values.allFinite()) throw NumericalError("non-finite final state");
  record_all(times.back(), values, rates);
  return traj;
}

}  // namespace cbvi
