#include "cbvi/oracle.hpp"
#include "cbvi/sync.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace cbvi;

namespace {

std::vector<double> uniform_times(int n, double tf = 1.0) {
  std::vector<double> t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = tf * i / n;
  return t;
}

Model square_model(ChiModel chi, double eta = 0.0, int k = 1) {
  std::string text = fixtures::kSquare;
  text.replace(text.find("dim 2 1"), 7, "dim 2 " + std::to_string(k));
  Mesh mesh = load_mesh(text);
  Material m = fixtures::material(2, k, ElasticForm::isotropic(2, k, 1.0, 0.5, 1.0, 0.2));
  m.eta = eta;
  m.chi = std::move(chi);
  return Model(std::move(mesh), std::move(m));
}

PsiContext random_context(const Model& model, double dt, std::mt19937_64& rng, Quadrature q) {
  const int n = model.num_nodes() * model.descriptor_dim();
  return make_psi_context(model, 0.0, dt, 2 * dt, fixtures::random_vector(n, rng), fixtures::random_vector(n, rng),
                          fixtures::random_vector(n, rng), q);
}

GeneralChi cosine_chi() {
  GeneralChi g;
  g.value = [](const Eigen::VectorXd& nu, const Eigen::VectorXd& z) { return (0.5 + 0.1 * std::cos(nu(0))) * z.squaredNorm(); };
  g.d_nu = [](const Eigen::VectorXd& nu, const Eigen::VectorXd& z) {
    return Eigen::VectorXd::Constant(1, -0.1 * std::sin(nu(0)) * z.squaredNorm());
  };
  g.d_rate = [](const Eigen::VectorXd& nu, const Eigen::VectorXd& z) {
    return Eigen::VectorXd((1.0 + 0.2 * std::cos(nu(0))) * z);
  };
  g.gamma = 0.8;
  g.xi = 1.2;
  return g;
}

}  // namespace

TEST_CASE("Psi vanishes when the trial rate repeats the previous one") {
  std::mt19937_64 rng(79);
  const Model model = square_model(ScalarQuadratic{1.0});
  const double dt = 0.1;
  PsiContext ctx = random_context(model, dt, rng, Quadrature::Vertex);
  const Eigen::VectorXd trial = ctx.nu_now + dt * ctx.rate_prev;
  CHECK(psi_eval(ctx, trial).norm() < 1e-14);
}

TEST_CASE("scalar Psi is affine with the lumped slope") {
  std::mt19937_64 rng(83);
  const double eta = 0.5, rho_bar = 1.0, dt = 0.05;
  const Model model = square_model(ScalarQuadratic{rho_bar}, eta);
  const PsiContext ctx = random_context(model, dt, rng, Quadrature::Vertex);
  const Eigen::VectorXd nu = fixtures::random_vector(4, rng);
  const Eigen::VectorXd base = psi_eval(ctx, nu);
  for (int a = 0; a < 4; ++a) {
    Eigen::VectorXd p = nu;
    p(a) += 0.3;
    const Eigen::VectorXd diff = (psi_eval(ctx, p) - base) / 0.3;
    const double w = model.coefficients().weight[a];
    CHECK(diff(a) == doctest::Approx(w * rho_bar / dt + eta * w).epsilon(1e-12));
    CHECK(diff.norm() == doctest::Approx(std::abs(diff(a))).epsilon(1e-12));
  }
}

TEST_CASE("Psi is strongly monotone under both quadratures") {
  const Model model = square_model(tanh_chi(2, 1.2, 0.3, 0.2, 1.0, 2.0), 0.0, 2);
  const double dt = 0.5 * monotonicity_window(1.0, 2.0);
  for (Quadrature q : {Quadrature::Vertex, Quadrature::Gauss}) {
    const MonotonicitySample s = sample_psi_monotonicity(model, dt, q, 100, 7);
    CHECK(s.pairs == 100);
    CHECK(s.violations == 0);
    CHECK(s.min_ratio >= 0.5);
  }
}

TEST_CASE("solve_psi inverts Psi") {
  std::mt19937_64 rng(89);
  Eigen::Matrix2d omega;
  omega << 2.0, 0.3, 0.3, 1.0;
  const std::vector<std::pair<ChiModel, double>> cases = {
      {ScalarQuadratic{1.0}, 0.0}, {MatrixQuadratic{omega}, 0.4}, {tanh_chi(2, 1.2, 0.3, 0.2, 1.0, 2.0), 0.2}};
  for (const auto& [chi, eta] : cases) {
    const int k = std::holds_alternative<ScalarQuadratic>(chi) ? 1 : 2;
    const Model model = square_model(chi, eta, k);
    for (Quadrature q : {Quadrature::Vertex, Quadrature::Gauss}) {
      for (int s = 0; s < 10; ++s) {
        const PsiContext ctx = random_context(model, 0.1, rng, q);
        const Eigen::VectorXd nu0 = fixtures::random_vector(4 * k, rng);
        const PsiSolveResult r = solve_psi(ctx, psi_eval(ctx, nu0), 1e-12, 50);
        CHECK(r.converged);
        CHECK((r.nu - nu0).cwiseAbs().maxCoeff() < 1e-9);
      }
    }
  }
}

TEST_CASE("solve_psi reproduces the explicit nu update") {
  std::mt19937_64 rng(97);
  const Model model = square_model(ScalarQuadratic{1.0});
  const double dt = 0.1;
  const PsiContext ctx = random_context(model, dt, rng, Quadrature::Vertex);
  const PsiSolveResult r = solve_psi(ctx, Eigen::VectorXd::Zero(4));
  CHECK((r.nu - (ctx.nu_now + dt * ctx.rate_prev)).norm() < 1e-12);
}

TEST_CASE("monotone solver agrees with bisection on a non-quadratic co-energy") {
  std::mt19937_64 rng(101);
  const Model model = square_model(cosine_chi(), 0.1);
  const double dt = 0.5 * monotonicity_window(0.8, 1.2);
  for (int s = 0; s < 10; ++s) {
    const PsiContext ctx = random_context(model, dt, rng, Quadrature::Vertex);
    const Eigen::VectorXd rhs = fixtures::random_vector(4, rng);
    const PsiSolveResult r = solve_psi(ctx, rhs, 1e-10, 50);
    CHECK(r.converged);
    CHECK(r.iterations <= 50);
    CHECK(r.residual <= 1e-10);
    // under the vertex rule Psi decouples by node; bisect each component
    for (int a = 0; a < 4; ++a) {
      auto g = [&](double x) {
        Eigen::VectorXd v = r.nu;
        v(a) = x;
        return psi_eval(ctx, v)(a) - rhs(a);
      };
      double lo = r.nu(a) - 1.0, hi = r.nu(a) + 1.0;
      REQUIRE(g(lo) < 0.0);
      REQUIRE(g(hi) > 0.0);
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
      }
      CHECK(r.nu(a) == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-9));
    }
  }
}

TEST_CASE("sync run basics") {
  const Model model = square_model(ScalarQuadratic{1.0});
  const TimeSet ts = synchronous_timeset(2, uniform_times(20));
  const Trajectory z = run_sync(model, ts, InitialData::zero(model.num_dofs()));
  CHECK(z.values_at(1.0).norm() == 0.0);
  CHECK(z.rates_at(0.5).norm() == 0.0);

  const Mesh mesh = load_mesh(fixtures::kSquare);
  const TimeSet async(0.0, 1.0, {{0.0, 0.5, 1.0}, {0.0, 0.4, 1.0}}, TimeSetMode::Strict);
  CHECK_THROWS_AS(run_sync(model, async, InitialData::zero(model.num_dofs())), IncompatibleError);
}

TEST_CASE("sync converges at second order to the oracle") {
  // Rates are first-interval rates with no kick at t0, so the start is second order
  // only from rest in the acceleration: equilibrium values plus a velocity.
  std::mt19937_64 rng(103);
  const Mesh mesh = load_mesh(fixtures::kSquare);
  const Model model(mesh, fixtures::quadratic_material(mesh));
  const LinearSystem sys = assemble_linear_system(model);
  InitialData init{static_equilibrium(sys), fixtures::random_vector(model.num_dofs(), rng, 0.3)};
  model.apply_constraints(init.rates);
  std::vector<double> errs;
  for (int n : {100, 200, 400}) {
    const auto times = uniform_times(n);
    const Trajectory traj = run_sync(model, synchronous_timeset(2, times), init);
    const OracleStates ex = exact_solution(sys, init, 0.0, times);
    double e = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) e = std::max(e, (traj.values_at(times[i]) - ex.values[i]).cwiseAbs().maxCoeff());
    errs.push_back(e);
  }
  for (int i = 0; i + 1 < 3; ++i) {
    const double ratio = errs[i] / errs[i + 1];
    CHECK(ratio >= 3.2);
    CHECK(ratio <= 4.8);
  }
}

TEST_CASE("matrix co-energy: each channel oscillates at its own modal frequency") {
  // nu-only problem on a clamped triangle; Omega = diag(1, 4) keeps the channels apart
  const Mesh mesh = load_mesh("dim 2 2\nnodes 3\n0 0\n1 0\n0 1\nelements 1\n0 1 2\nboundary 3\n0 1 fixed_u\n1 2 fixed_u\n2 0 fixed_u\n");
  Material m = fixtures::material(2, 2, ElasticForm::isotropic(2, 2, 0.0, 0.0, 1.0, 0.3));
  m.chi = MatrixQuadratic{Eigen::Vector2d(1.0, 4.0).asDiagonal()};
  const Model model(mesh, m);
  const LinearSystem sys = assemble_linear_system(model);
  const Modes modes = normal_modes(sys);
  const double h = 0.01;
  const auto times = uniform_times(200, 2.0);
  for (int j = 0; j < modes.eigenvalues.size(); ++j) {
    const Eigen::VectorXd phi = modes.vectors.col(j);
    InitialData init{phi, Eigen::VectorXd::Zero(model.num_dofs())};
    const Trajectory traj = run_sync(model, synchronous_timeset(1, times), init);
    Eigen::VectorXd q(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
      const Eigen::VectorXd x = traj.values_at(times[i]);
      q(i) = phi.dot(sys.mass * x) / phi.dot(sys.mass * phi);
      CHECK((x - q(i) * phi).norm() < 1e-10);  // stays on the mode
    }
    // leapfrog recurrence q+ - 2q + q- = -(h^2 lambda) q, away from zeros of q
    for (std::size_t i = 1; i + 1 < times.size(); ++i) {
      if (std::abs(q(i)) < 0.2) continue;
      const double lam = -(q(i + 1) - 2 * q(i) + q(i - 1)) / (h * h * q(i));
      CHECK(lam == doctest::Approx(modes.eigenvalues(j)).epsilon(1e-7));
    }
  }
}
