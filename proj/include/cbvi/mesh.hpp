#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cbvi {

enum class BoundaryMarker { Traction, FixedU, FixedNu, Free };

std::string_view to_string(BoundaryMarker marker);
BoundaryMarker parse_marker(std::string_view token);

/// Parse or validation failure. line() is 0 when the failure is not tied to a line.
class MeshError : public std::runtime_error {
 public:
  MeshError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct BoundaryFacet {
  std::vector<int> nodes;  // d node indices
  BoundaryMarker marker = BoundaryMarker::Free;
  int element = -1;        // the unique element containing the facet (derived)
  double measure = 0.0;    // length (d = 2) or area (d = 3) (derived)
};

/// Affine nodal shape function restricted to one element: N(x) = constant + gradient . x
struct ShapeFunction {
  int element = -1;
  int node = -1;
  Eigen::VectorXd gradient;
  double constant = 0.0;

  double operator()(const Eigen::VectorXd& x) const { return constant + gradient.dot(x); }
};

/// Simplicial tessellation with P1 shape functions. Immutable after construction;
/// the constructor validates every invariant and throws MeshError on violation.
class Mesh {
 public:
  Mesh(int dim, int descriptor_dim, Eigen::MatrixXd nodes, std::vector<int> elements,
       std::vector<BoundaryFacet> facets);

  int dim() const { return dim_; }
  int descriptor_dim() const { return k_; }
  int nodes_per_element() const { return dim_ + 1; }
  int num_nodes() const { return static_cast<int>(nodes_.rows()); }
  int num_elements() const { return static_cast<int>(elements_.size()) / (dim_ + 1); }

  Eigen::VectorXd node(int a) const { return nodes_.row(a).transpose(); }
  const Eigen::MatrixXd& nodes() const { return nodes_; }
  std::span<const int> element(int K) const;
  double volume(int K) const { return volumes_[K]; }
  double total_volume() const;

  /// Rows are the constant gradients of the element's shape functions, in local order.
  const Eigen::MatrixXd& gradients(int K) const { return gradients_[K]; }
  /// Position of node a inside element K, or -1.
  int local_index(int K, int a) const;
  /// Elements containing node a, ascending.
  const std::vector<int>& elements_of(int a) const { return node_elements_[a]; }

  const std::vector<BoundaryFacet>& facets() const { return facets_; }
  bool fixed_u(int a) const { return fixed_u_[a]; }
  bool fixed_nu(int a) const { return fixed_nu_[a]; }

  Eigen::VectorXd barycenter(int K) const;

  /// Copy with every coordinate multiplied by s.
  Mesh scaled(double s) const;

 private:
  void validate_and_derive();

  int dim_;
  int k_;
  Eigen::MatrixXd nodes_;
  std::vector<int> elements_;
  std::vector<BoundaryFacet> facets_;
  std::vector<double> volumes_;
  std::vector<Eigen::MatrixXd> gradients_;
  std::vector<std::vector<int>> node_elements_;
  std::vector<bool> fixed_u_;
  std::vector<bool> fixed_nu_;
};

Mesh load_mesh(std::string_view text);
Mesh load_mesh_file(const std::string& path);
std::string write_mesh(const Mesh& mesh);

Eigen::VectorXd shape_gradient(const Mesh& mesh, int K, int a);
ShapeFunction shape_function(const Mesh& mesh, int K, int a);

/// Vertex-lumped nodal coefficients. Per element-node values are stored with
/// stride nodes_per_element, in the element's local node order.
struct NodalCoefficients {
  std::vector<double> mass;        // m_a
  std::vector<double> inertia;     // rho_bar_a
  std::vector<double> dissipation; // eta_a
  std::vector<double> weight;      // lumped volume w_a = sum |K|/(d+1)
  std::vector<double> element_mass;
  std::vector<double> element_inertia;
  std::vector<double> element_dissipation;
};

NodalCoefficients lumped_coefficients(const Mesh& mesh, double rho, double rho_bar, double eta);

/// Max over elements of the spectral norm of the stacked shape gradients; a
/// certificate for sup |grad u| <= c |u| over piecewise-linear fields.
double grad_bound_constant(const Mesh& mesh);

/// Quadrature rule on the reference simplex. Points are barycentric (d+1 entries);
/// weights are fractions of |K| and sum to one.
struct SimplexRule {
  std::vector<Eigen::VectorXd> points;
  std::vector<double> weights;
};

SimplexRule vertex_rule(int dim);
/// Interior rule exact for quadratics.
SimplexRule degree2_rule(int dim);

}  // namespace cbvi
