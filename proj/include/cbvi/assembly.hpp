#pragma once

#include "cbvi/material.hpp"
#include "cbvi/mesh.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cbvi {

/// Nodal state. Global vectors are node-major: node a owns entries
/// [a*(d+k), a*(d+k)+d) for u_a and the following k entries for nu_a.
struct State {
  double t = 0.0;
  Eigen::VectorXd values;
  Eigen::VectorXd rates;
  std::vector<double> last_update;  // per node; all equal to t for synchronous states

  static State zero(int num_nodes, int dofs_per_node, double t);
};

/// Per-element quadratic potentials V_K(x) = 1/2 x.H x + f.x + c over the element's
/// stacked nodal values x = (u_a, nu_a) in local node order. Integrals of the affine
/// fields are exact.
struct ElementMatrices {
  int dofs_per_node = 0;
  std::vector<Eigen::MatrixXd> stiffness;
  std::vector<Eigen::VectorXd> load;
  std::vector<double> constant;

  /// dV_K/dx, the right-hand-side integrals without the time-step factor.
  Eigen::VectorXd force(int K, const Eigen::VectorXd& x) const { return stiffness[K] * x + load[K]; }
  double potential(int K, const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(stiffness[K] * x) + load[K].dot(x) + constant[K];
  }
};

ElementMatrices precompute(const Mesh& mesh, const Material& material);

/// Mesh, material and everything derived from them that the integrators share.
/// Immutable after build.
class Model {
 public:
  Model(Mesh mesh, Material material);

  const Mesh& mesh() const { return mesh_; }
  const Material& material() const { return material_; }
  const NodalCoefficients& coefficients() const { return coefficients_; }
  const ElementMatrices& elements() const { return elements_; }

  int dim() const { return mesh_.dim(); }
  int descriptor_dim() const { return mesh_.descriptor_dim(); }
  int dofs_per_node() const { return dim() + descriptor_dim(); }
  int num_nodes() const { return mesh_.num_nodes(); }
  int num_dofs() const { return num_nodes() * dofs_per_node(); }
  int dof(int a, int component) const { return a * dofs_per_node() + component; }

  /// False for channels held at zero by fixed_u / fixed_nu markers.
  bool is_free(int dof) const { return free_[dof] != 0; }
  const std::vector<char>& free_mask() const { return free_; }

  Eigen::VectorXd gather(int K, const Eigen::VectorXd& global) const;
  void scatter_add(int K, const Eigen::VectorXd& local, Eigen::VectorXd& global) const;

  /// Zero every constrained channel.
  void apply_constraints(Eigen::VectorXd& global) const;
  /// True if every constrained channel is exactly zero.
  bool satisfies_constraints(const Eigen::VectorXd& global) const;

 private:
  Mesh mesh_;
  Material material_;
  NodalCoefficients coefficients_;
  ElementMatrices elements_;
  std::vector<char> free_;
};

/// Nodal values of K's vertices advanced affinely from their last update to t_eval.
Eigen::VectorXd element_values_at(const Model& model, int K, const State& state, double t_eval);

/// Rows are per-node covectors (local node order). Sign convention: the velocity
/// kick is rate -= dt * force / mass.
Eigen::MatrixXd force_u(const Model& model, int K, const State& state, double t_eval);
Eigen::MatrixXd force_nu(const Model& model, int K, const State& state, double t_eval);

/// Assembled dV/dx for a synchronous value vector (constrained channels included).
Eigen::VectorXd global_force(const Model& model, const Eigen::VectorXd& values);

double potential_V(const Model& model, const Eigen::VectorXd& values);
double potential_V(const Model& model, const State& state);

}  // namespace cbvi
