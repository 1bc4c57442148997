#include "cbvi/assembly.hpp"

#include <stdexcept>

namespace cbvi {

State State::zero(int num_nodes, int dofs_per_node, double t) {
  State s;
  s.t = t;
  s.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_nodes) * dofs_per_node);
  s.rates = Eigen::VectorXd::Zero(s.values.size());
  s.last_update.assign(num_nodes, t);
  return s;
}

ElementMatrices precompute(const Mesh& mesh, const Material& material) {
  const int d = mesh.dim();
  const int k = mesh.descriptor_dim();
  if (material.dim() != d || material.descriptor_dim() != k) {
    throw std::invalid_argument("material dimensions (d, k) do not match the mesh");
  }
  if (material.external.size() != d + k) {
    throw std::invalid_argument("external potential must act on R^(d+k)");
  }
  const int npe = d + 1;
  const int ndof = d + k;
  const int nloc = npe * ndof;
  const int nxi = material.elastic.size();
  const Eigen::MatrixXd& Q = material.elastic.matrix();
  const Eigen::MatrixXd& W = material.external.hessian();
  const Eigen::VectorXd& g = material.external.linear();
  const double rho = material.rho;

  ElementMatrices em;
  em.dofs_per_node = ndof;
  em.stiffness.resize(mesh.num_elements());
  em.load.resize(mesh.num_elements());
  em.constant.resize(mesh.num_elements());

  for (int K = 0; K < mesh.num_elements(); ++K) {
    const double vol = mesh.volume(K);
    const Eigen::MatrixXd& G = mesh.gradients(K);

    // xi(x) = sum_a N_a(x) xi_a with xi_a = E_a x: the gradient blocks are constant,
    // the nu block is nu_a.
    Eigen::MatrixXd common = Eigen::MatrixXd::Zero(nxi, nloc);
    for (int b = 0; b < npe; ++b) {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) common(i * d + j, b * ndof + i) = G(b, j);
      for (int al = 0; al < k; ++al)
        for (int j = 0; j < d; ++j) common(d * d + k + al * d + j, b * ndof + d + al) = G(b, j);
    }
    std::vector<Eigen::MatrixXd> E(npe, common);
    for (int a = 0; a < npe; ++a)
      for (int al = 0; al < k; ++al) E[a](d * d + al, a * ndof + d + al) = 1.0;

    // Exact P1 moments: int N_a N_b = |K| (1 + delta_ab) / ((d+1)(d+2)).
    auto moment = [&](int a, int b) { return vol * (a == b ? 2.0 : 1.0) / ((d + 1.0) * (d + 2.0)); };

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nloc, nloc);
    for (int a = 0; a < npe; ++a) {
      const Eigen::MatrixXd QEa = Q * E[a];
      for (int b = 0; b < npe; ++b) {
        H.noalias() += (2.0 * rho * moment(a, b)) * E[b].transpose() * QEa;
        H.block(a * ndof, b * ndof, ndof, ndof) += rho * moment(a, b) * W;
      }
    }
    H = 0.5 * (H + H.transpose()).eval();

    Eigen::VectorXd f = Eigen::VectorXd::Zero(nloc);
    for (int a = 0; a < npe; ++a) f.segment(a * ndof, ndof) += rho * vol / npe * g;
    em.stiffness[K] = std::move(H);
    em.load[K] = std::move(f);
    em.constant[K] = rho * material.external.offset() * vol;
  }

  // Traction: -int_F t . u, exact with int_F N_a = |F| / d.
  for (std::size_t fi = 0; fi < mesh.facets().size(); ++fi) {
    const auto& facet = mesh.facets()[fi];
    if (facet.marker != BoundaryMarker::Traction) continue;
    const Eigen::VectorXd t = material.traction.on(static_cast<int>(fi), d);
    for (int a : facet.nodes) {
      const int local = mesh.local_index(facet.element, a);
      em.load[facet.element].segment(local * ndof, d) -= facet.measure / d * t;
    }
  }
  return em;
}

Model::Model(Mesh mesh, Material material)
    : mesh_(std::move(mesh)),
      material_(std::move(material)),
      coefficients_(lumped_coefficients(mesh_, material_.rho, material_.rho_bar, material_.eta)),
      elements_(precompute(mesh_, material_)) {
  if (const auto* s = std::get_if<ScalarQuadratic>(&material_.chi); s && s->rho_bar != material_.rho_bar) {
    throw std::invalid_argument("scalar co-energy density must equal the material rho_bar");
  }
  for (const auto& [facet, t] : material_.traction.values) {
    if (facet < 0 || facet >= static_cast<int>(mesh_.facets().size())) {
      throw std::invalid_argument("traction given for missing facet " + std::to_string(facet));
    }
    if (mesh_.facets()[facet].marker != BoundaryMarker::Traction) {
      throw std::invalid_argument("traction given for facet " + std::to_string(facet) +
                                  " which is not marked traction");
    }
    if (t.size() != dim() || !t.allFinite()) {
      throw std::invalid_argument("traction on facet " + std::to_string(facet) + " must be a finite d-vector");
    }
  }
  free_.assign(num_dofs(), 1);
  for (int a = 0; a < num_nodes(); ++a) {
    if (mesh_.fixed_u(a))
      for (int c = 0; c < dim(); ++c) free_[dof(a, c)] = 0;
    if (mesh_.fixed_nu(a))
      for (int c = 0; c < descriptor_dim(); ++c) free_[dof(a, dim() + c)] = 0;
  }
}

Eigen::VectorXd Model::gather(int K, const Eigen::VectorXd& global) const {
  const int ndof = dofs_per_node();
  auto conn = mesh_.element(K);
  Eigen::VectorXd local(static_cast<Eigen::Index>(conn.size()) * ndof);
  for (std::size_t i = 0; i < conn.size(); ++i) {
    local.segment(static_cast<Eigen::Index>(i) * ndof, ndof) = global.segment(dof(conn[i], 0), ndof);
  }
  return local;
}

void Model::scatter_add(int K, const Eigen::VectorXd& local, Eigen::VectorXd& global) const {
  const int ndof = dofs_per_node();
  auto conn = mesh_.element(K);
  for (std::size_t i = 0; i < conn.size(); ++i) {
    global.segment(dof(conn[i], 0), ndof) += local.segment(static_cast<Eigen::Index>(i) * ndof, ndof);
  }
}

void Model::apply_constraints(Eigen::VectorXd& global) const {
  for (int i = 0; i < num_dofs(); ++i) {
    if (!free_[i]) global(i) = 0.0;
  }
}

bool Model::satisfies_constraints(const Eigen::VectorXd& global) const {
  for (int i = 0; i < num_dofs(); ++i) {
    if (!free_[i] && global(i) != 0.0) return false;
  }
  return true;
}

Eigen::VectorXd element_values_at(const Model& model, int K, const State& state, double t_eval) {
  const int ndof = model.dofs_per_node();
  auto conn = model.mesh().element(K);
  Eigen::VectorXd local(static_cast<Eigen::Index>(conn.size()) * ndof);
  for (std::size_t i = 0; i < conn.size(); ++i) {
    const int a = conn[i];
    const double dt = t_eval - state.last_update[a];
    local.segment(static_cast<Eigen::Index>(i) * ndof, ndof) =
        state.values.segment(model.dof(a, 0), ndof) + dt * state.rates.segment(model.dof(a, 0), ndof);
  }
  return local;
}

namespace {

Eigen::MatrixXd split_force(const Model& model, const Eigen::VectorXd& f, int offset, int width) {
  const int npe = model.mesh().nodes_per_element();
  const int ndof = model.dofs_per_node();
  Eigen::MatrixXd out(npe, width);
  for (int i = 0; i < npe; ++i) out.row(i) = f.segment(i * ndof + offset, width).transpose();
  return out;
}

}  // namespace

Eigen::MatrixXd force_u(const Model& model, int K, const State& state, double t_eval) {
  const Eigen::VectorXd f = model.elements().force(K, element_values_at(model, K, state, t_eval));
  return split_force(model, f, 0, model.dim());
}

Eigen::MatrixXd force_nu(const Model& model, int K, const State& state, double t_eval) {
  const Eigen::VectorXd f = model.elements().force(K, element_values_at(model, K, state, t_eval));
  return split_force(model, f, model.dim(), model.descriptor_dim());
}

Eigen::VectorXd global_force(const Model& model, const Eigen::VectorXd& values) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.num_dofs());
  for (int K = 0; K < model.mesh().num_elements(); ++K) {
    model.scatter_add(K, model.elements().force(K, model.gather(K, values)), out);
  }
  return out;
}

double potential_V(const Model& model, const Eigen::VectorXd& values) {
  double v = 0.0;
  for (int K = 0; K < model.mesh().num_elements(); ++K) {
    v += model.elements().potential(K, model.gather(K, values));
  }
  return v;
}

double potential_V(const Model& model, const State& state) {
  double v = 0.0;
  for (int K = 0; K < model.mesh().num_elements(); ++K) {
    v += model.elements().potential(K, element_values_at(model, K, state, state.t));
  }
  return v;
}

}  // namespace cbvi
