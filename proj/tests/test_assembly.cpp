#include "cbvi/oracle.hpp"
#include "fixtures.hpp"

#include <doctest.h>

using namespace cbvi;

namespace {

State synchronous_state(const Model& model, const Eigen::VectorXd& values) {
  State s = State::zero(model.num_nodes(), model.dofs_per_node(), 0.0);
  s.values = values;
  return s;
}

Model random_quadratic_model(std::mt19937_64& rng, const char* mesh_text, int k = 1) {
  Mesh mesh = load_mesh(mesh_text);
  if (k != mesh.descriptor_dim()) {
    std::string t(mesh_text);
    t.replace(t.find("dim 2 1"), 7, "dim 2 " + std::to_string(k));
    mesh = load_mesh(t);
  }
  const int d = mesh.dim(), n = d * d + k + k * d;
  Material m = fixtures::quadratic_material(mesh);
  m.elastic = ElasticForm(d, k, fixtures::random_spd(n, rng));
  m.chi = ScalarQuadratic{m.rho_bar};
  return Model(std::move(mesh), std::move(m));
}

}  // namespace

TEST_CASE("constant gradient element force") {
  // e = |grad u|^2, u = x at the nodes: force on node (0,0) is 2 |K| (1,0)(-1,-1)
  Material m = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 0.0, 1.0, 0.0, 0.0));
  const Model model(load_mesh(fixtures::kReferenceTriangle), m);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.num_dofs());
  for (int a = 0; a < 3; ++a) x(model.dof(a, 0)) = model.mesh().node(a)(0);
  const State s = synchronous_state(model, x);
  const Eigen::MatrixXd f = force_u(model, 0, s, 0.0);
  CHECK(f(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(f(0, 1) == doctest::Approx(0.0));
  CHECK(global_force(model, x)(model.dof(0, 0)) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("zero state forces are the loads") {
  const Mesh mesh = load_mesh(fixtures::kSquare);
  const Model model(mesh, fixtures::quadratic_material(mesh));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(model.num_dofs());
  Eigen::VectorXd loads = Eigen::VectorXd::Zero(model.num_dofs());
  for (int K = 0; K < mesh.num_elements(); ++K) model.scatter_add(K, model.elements().load[K], loads);
  CHECK((global_force(model, zero) - loads).norm() < 1e-15);

  Material plain = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 1, 1, 1, 1));
  const Model quiet(mesh, plain);
  CHECK(global_force(quiet, zero).norm() == 0.0);
  const State s = State::zero(quiet.num_nodes(), quiet.dofs_per_node(), 0.0);
  CHECK(force_u(quiet, 0, s, 0.0).norm() == 0.0);
  CHECK(force_nu(quiet, 1, s, 0.0).norm() == 0.0);
}

TEST_CASE("stiffness is symmetric") {
  std::mt19937_64 rng(41);
  const Model model = random_quadratic_model(rng, fixtures::kSquare, 2);
  for (const auto& H : model.elements().stiffness) CHECK((H - H.transpose()).norm() < 1e-14);
  const LinearSystem sys = assemble_linear_system(model);
  for (int s = 0; s < 10; ++s) {
    const Eigen::VectorXd x = fixtures::random_vector(model.num_dofs(), rng);
    const Eigen::VectorXd y = fixtures::random_vector(model.num_dofs(), rng);
    CHECK(std::abs(x.dot(sys.stiffness * y) - y.dot(sys.stiffness * x)) < 1e-12);
  }
}

TEST_CASE("traction on an edge pulls its nodes") {
  const Mesh mesh = load_mesh(fixtures::kSquare);
  Material m = fixtures::material(2, 1, ElasticForm(2, 1, Eigen::MatrixXd::Zero(7, 7)));
  m.traction.values[1] = Eigen::Vector2d(1.0, 0.0);  // facet 1-2, length 1
  const Model model(mesh, m);
  const Eigen::VectorXd f = global_force(model, Eigen::VectorXd::Zero(model.num_dofs()));
  for (int a : {1, 2}) {
    CHECK(f(model.dof(a, 0)) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(f(model.dof(a, 1)) == 0.0);
  }
  for (int a : {0, 3}) CHECK(f.segment(model.dof(a, 0), 3).norm() == 0.0);

  // V = -L t.c for u = c on the traction edge
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.num_dofs());
  const Eigen::Vector2d c(0.3, -0.7);
  for (int a : {1, 2}) x.segment(model.dof(a, 0), 2) = c;
  CHECK(potential_V(model, x) == doctest::Approx(-1.0 * c(0)).epsilon(1e-15));
}

TEST_CASE("nu-only energy gives the exact moment force") {
  // e = |nu|^2, nu = c on K: force_nu_a = 2 c |K| / (d+1)
  Material m = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 0.0, 0.0, 1.0, 0.0));
  const Model model(load_mesh(fixtures::kReferenceTriangle), m);
  const double c = 0.8;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(model.num_dofs());
  for (int a = 0; a < 3; ++a) x(model.dof(a, 2)) = c;
  const Eigen::MatrixXd f = force_nu(model, 0, synchronous_state(model, x), 0.0);
  for (int a = 0; a < 3; ++a) CHECK(f(a, 0) == doctest::Approx(2.0 * c * 0.5 / 3.0).epsilon(1e-14));
}

TEST_CASE("assembled forces are the gradient of V") {
  std::mt19937_64 rng(43);
  for (int k : {1, 2}) {
    const Model model = random_quadratic_model(rng, fixtures::kSquare, k);
    for (int s = 0; s < 20; ++s) {
      const Eigen::VectorXd x = fixtures::random_vector(model.num_dofs(), rng);
      const Eigen::VectorXd fd =
          finite_difference_gradient([&](const Eigen::VectorXd& y) { return potential_V(model, y); }, x, 1e-5);
      CHECK((global_force(model, x) - fd).cwiseAbs().maxCoeff() < 1e-6);

      // per-element covectors against V_K
      const State st = synchronous_state(model, x);
      for (int K = 0; K < model.mesh().num_elements(); ++K) {
        const Eigen::VectorXd xk = model.gather(K, x);
        const Eigen::VectorXd fk = finite_difference_gradient(
            [&](const Eigen::VectorXd& y) { return model.elements().potential(K, y); }, xk, 1e-5);
        const Eigen::MatrixXd fu = force_u(model, K, st, 0.0);
        const Eigen::MatrixXd fn = force_nu(model, K, st, 0.0);
        const int dpn = model.dofs_per_node();
        for (int i = 0; i < 3; ++i) {
          for (int c = 0; c < 2; ++c) CHECK(std::abs(fu(i, c) - fk(i * dpn + c)) < 1e-6);
          for (int c = 0; c < k; ++c) CHECK(std::abs(fn(i, c) - fk(i * dpn + 2 + c)) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("potential: offset and Taylor check") {
  const Mesh mesh = load_mesh(fixtures::kSquare);
  Material m = fixtures::quadratic_material(mesh);
  m.external = ExternalPotential(m.external.hessian(), m.external.linear(), 0.25);
  const Model model(mesh, m);
  Material bare = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 1, 1, 1, 1));
  bare.external = ExternalPotential(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), 0.25);
  CHECK(potential_V(Model(mesh, bare), Eigen::VectorXd::Zero(model.num_dofs())) ==
        doctest::Approx(0.25 * mesh.total_volume()));

  std::mt19937_64 rng(47);
  const Eigen::VectorXd x0 = fixtures::random_vector(model.num_dofs(), rng);
  const Eigen::VectorXd F = global_force(model, x0);
  const int dof = model.dof(2, 2);
  for (double eps : {1e-2, 5e-3}) {
    Eigen::VectorXd x = x0;
    x(dof) += eps;
    const double rem = potential_V(model, x) - potential_V(model, x0) - eps * F(dof);
    CHECK(std::abs(rem) <= 0.5 * eps * eps * model.elements().stiffness[0].cwiseAbs().maxCoeff() * 4 + 1e-14);
  }
}

TEST_CASE("gradient-only energy is translation equivariant") {
  std::mt19937_64 rng(53);
  const Mesh mesh = load_mesh_file(fixtures::data_path("meshes/grid4.mesh"));
  Material m = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 0.6, 1.0, 0.0, 0.5));
  const Model model(mesh, m);
  State s = State::zero(model.num_nodes(), model.dofs_per_node(), 0.0);
  s.values = fixtures::random_vector(model.num_dofs(), rng);
  for (int K = 0; K < mesh.num_elements(); ++K) {
    CHECK(force_u(model, K, s, 0.0).colwise().sum().norm() < 1e-14);
    CHECK(force_nu(model, K, s, 0.0).colwise().sum().norm() < 1e-14);
  }
}

TEST_CASE("asynchronous states are advanced affinely before evaluation") {
  std::mt19937_64 rng(59);
  const Mesh mesh = load_mesh(fixtures::kSquare);
  const Model model(mesh, fixtures::quadratic_material(mesh));
  State s = State::zero(model.num_nodes(), model.dofs_per_node(), 0.0);
  s.values = fixtures::random_vector(model.num_dofs(), rng);
  s.rates = fixtures::random_vector(model.num_dofs(), rng);
  s.last_update = {0.0, 0.1, 0.2, 0.05};
  const double t = 0.3;
  Eigen::VectorXd advanced = s.values;
  for (int a = 0; a < 4; ++a) {
    const int dpn = model.dofs_per_node();
    advanced.segment(a * dpn, dpn) += (t - s.last_update[a]) * s.rates.segment(a * dpn, dpn);
  }
  CHECK((element_values_at(model, 1, s, t) - model.gather(1, advanced)).norm() < 1e-15);
}

TEST_CASE("model rejects inconsistent inputs") {
  const Mesh mesh = load_mesh(fixtures::kSquare);
  Material m = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 1, 1, 1, 1));
  m.traction.values[0] = Eigen::Vector2d(1, 0);  // facet 0 is free
  CHECK_THROWS_AS(Model(mesh, m), std::invalid_argument);
  Material m2 = fixtures::material(3, 1, ElasticForm::isotropic(3, 1, 1, 1, 1, 1));
  CHECK_THROWS_AS(Model(mesh, m2), std::invalid_argument);
  Material m3 = fixtures::material(2, 1, ElasticForm::isotropic(2, 1, 1, 1, 1, 1));
  m3.chi = ScalarQuadratic{2.0};
  CHECK_THROWS_AS(Model(mesh, m3), std::invalid_argument);
}
