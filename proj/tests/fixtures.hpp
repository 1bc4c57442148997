#pragma once

#include "cbvi/assembly.hpp"
#include "cbvi/material.hpp"
#include "cbvi/mesh.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>

namespace fixtures {

inline const char* kReferenceTriangle = R"(dim 2 1
nodes 3
0 0
1 0
0 1
elements 1
0 1 2
)";

// Left edge clamped in u, right edge carries traction (facet index 1).
inline const char* kSquare = R"(dim 2 1
nodes 4
0 0
1 0
1 1
0 1
elements 2
0 1 2
0 2 3
boundary 4
0 1 free
1 2 traction
2 3 free
3 0 fixed_u
)";

inline std::string data_path(const std::string& rel) { return std::string(CBVI_DATA_DIR) + "/" + rel; }

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double floor = 0.5) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  return A * A.transpose() / n + floor * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

inline cbvi::Material material(int d, int k, cbvi::ElasticForm e) {
  return cbvi::Material{std::move(e), cbvi::ExternalPotential::zero(d + k), {}, 1.0, 1.0, 0.0,
                        cbvi::ScalarQuadratic{1.0}};
}

// Quadratic data touching every term: full Q, W, g, traction on facet 1.
inline cbvi::Material quadratic_material(const cbvi::Mesh& mesh, double eta = 0.0) {
  const int d = mesh.dim(), k = mesh.descriptor_dim(), n = d + k;
  cbvi::Material m = material(d, k, cbvi::ElasticForm::isotropic(d, k, 1.0, 0.5, 1.0, 0.2));
  Eigen::MatrixXd W = 0.3 * Eigen::MatrixXd::Identity(n, n);
  W(0, n - 1) = W(n - 1, 0) = 0.05;
  Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(n, 0.1, -0.2);
  m.external = cbvi::ExternalPotential(W, g, 0.0);
  for (std::size_t f = 0; f < mesh.facets().size(); ++f) {
    if (mesh.facets()[f].marker == cbvi::BoundaryMarker::Traction) {
      m.traction.values[static_cast<int>(f)] = Eigen::VectorXd::Constant(d, 0.2);
    }
  }
  m.eta = eta;
  return m;
}

}  // namespace fixtures
