#include "cbvi/oracle.hpp"

#include "cbvi/errors.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <stdexcept>

namespace cbvi {

std::vector<int> LinearSystem::free_indices() const {
  std::vector<int> idx;
  for (int i = 0; i < size(); ++i)
    if (free[i]) idx.push_back(i);
  return idx;
}

LinearSystem assemble_linear_system(const Model& model, Pairing pairing) {
  const ChiModel& chi = model.material().chi;
  if (!is_quadratic(chi)) throw IncompatibleError("no linear oracle exists for a general chi");
  const Mesh& mesh = model.mesh();
  const int n = model.num_dofs();
  const int d = model.dim();
  const int k = model.descriptor_dim();
  const int ndof = model.dofs_per_node();
  const int npe = mesh.nodes_per_element();

  Eigen::MatrixXd B(k, k);
  if (const auto* s = std::get_if<ScalarQuadratic>(&chi)) {
    B = s->rho_bar * Eigen::MatrixXd::Identity(k, k);
  } else {
    B = std::get<MatrixQuadratic>(chi).omega;
  }

  LinearSystem sys;
  sys.mass = Eigen::MatrixXd::Zero(n, n);
  sys.damping = Eigen::MatrixXd::Zero(n, n);
  sys.stiffness = Eigen::MatrixXd::Zero(n, n);
  sys.load = Eigen::VectorXd::Zero(n);
  sys.free = model.free_mask();

  const auto& coef = model.coefficients();
  for (int a = 0; a < model.num_nodes(); ++a) {
    for (int c = 0; c < d; ++c) sys.mass(model.dof(a, c), model.dof(a, c)) = coef.mass[a];
    for (int c = 0; c < k; ++c) sys.damping(model.dof(a, d + c), model.dof(a, d + c)) = coef.dissipation[a];
  }
  for (int K = 0; K < mesh.num_elements(); ++K) {
    auto conn = mesh.element(K);
    const double vol = mesh.volume(K);
    for (int i = 0; i < npe; ++i) {
      for (int j = 0; j < npe; ++j) {
        double w;
        if (pairing == Pairing::Lumped) {
          w = i == j ? vol / npe : 0.0;
        } else {
          w = vol * (i == j ? 2.0 : 1.0) / ((d + 1.0) * (d + 2.0));
        }
        sys.mass.block(model.dof(conn[i], d), model.dof(conn[j], d), k, k) += w * B;
        sys.stiffness.block(model.dof(conn[i], 0), model.dof(conn[j], 0), ndof, ndof) +=
            model.elements().stiffness[K].block(i * ndof, j * ndof, ndof, ndof);
      }
    }
    Eigen::VectorXd neg = -model.elements().load[K];
    model.scatter_add(K, neg, sys.load);
  }
  sys.stiffness = 0.5 * (sys.stiffness + sys.stiffness.transpose()).eval();
  return sys;
}

namespace {

Eigen::MatrixXd sub(const Eigen::MatrixXd& A, const std::vector<int>& idx) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) S(i, j) = A(idx[i], idx[j]);
  return S;
}

Eigen::VectorXd sub(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) s(static_cast<Eigen::Index>(i)) = v(idx[i]);
  return s;
}

}  // namespace

OracleStates exact_solution(const LinearSystem& sys, const InitialData& init, double t0,
                            const std::vector<double>& times) {
  const std::vector<int> idx = sys.free_indices();
  const auto nf = static_cast<Eigen::Index>(idx.size());
  if (init.values.size() != sys.size() || init.rates.size() != sys.size()) {
    throw std::invalid_argument("initial data does not match the linear system");
  }
  const Eigen::MatrixXd M = sub(sys.mass, idx);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success || M.diagonal().minCoeff() <= 0.0) {
    throw NumericalError("singular mass on a free channel");
  }
  const Eigen::MatrixXd MinvK = llt.solve(sub(sys.stiffness, idx));
  const Eigen::MatrixXd MinvC = llt.solve(sub(sys.damping, idx));
  const Eigen::VectorXd Minvf = llt.solve(sub(sys.load, idx));

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * nf + 1, 2 * nf + 1);
  A.block(0, nf, nf, nf).setIdentity();
  A.block(nf, 0, nf, nf) = -MinvK;
  A.block(nf, nf, nf, nf) = -MinvC;
  A.block(nf, 2 * nf, nf, 1) = Minvf;

  Eigen::VectorXd z0(2 * nf + 1);
  z0 << sub(init.values, idx), sub(init.rates, idx), 1.0;

  OracleStates out;
  out.times = times;
  for (double t : times) {
    Eigen::VectorXd z = z0;
    if (t != t0) {
      const Eigen::MatrixXd E = (A * (t - t0)).exp();
      z = E * z0;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(sys.size());
    for (Eigen::Index i = 0; i < nf; ++i) {
      x(idx[i]) = z(i);
      v(idx[i]) = z(nf + i);
    }
    out.values.push_back(std::move(x));
    out.rates.push_back(std::move(v));
  }
  return out;
}

Eigen::VectorXd static_equilibrium(const LinearSystem& sys) {
  const std::vector<int> idx = sys.free_indices();
  const Eigen::MatrixXd K = sub(sys.stiffness, idx);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  const Eigen::VectorXd xf = ldlt.solve(sub(sys.load, idx));
  if (ldlt.info() != Eigen::Success || !xf.allFinite() || (K * xf - sub(sys.load, idx)).norm() > 1e-8 * (1.0 + xf.norm())) {
    throw NumericalError("stiffness is singular on the free channels");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.size());
  for (std::size_t i = 0; i < idx.size(); ++i) x(idx[i]) = xf(static_cast<Eigen::Index>(i));
  return x;
}

Modes normal_modes(const LinearSystem& sys) {
  const std::vector<int> idx = sys.free_indices();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sub(sys.stiffness, idx), sub(sys.mass, idx));
  if (ges.info() != Eigen::Success) throw NumericalError("generalized eigenproblem failed");
  Modes m;
  m.eigenvalues = ges.eigenvalues();
  m.vectors = Eigen::MatrixXd::Zero(sys.size(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) m.vectors.row(idx[i]) = ges.eigenvectors().row(static_cast<Eigen::Index>(i));
  return m;
}

double quadratic_energy(const LinearSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
  return 0.5 * v.dot(sys.mass * v) + 0.5 * x.dot(sys.stiffness * x) - sys.load.dot(x);
}

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y(i) = x(i) + step;
    const double fp = f(y);
    y(i) = x(i) - step;
    const double fm = f(y);
    y(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace cbvi
