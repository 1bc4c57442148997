#pragma once

#include "cbvi/assembly.hpp"
#include "cbvi/trajectory.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace cbvi {

/// How the nu-inertia pairing is assembled: nodal lumping (vertex rule) or the
/// consistent mass |K|(1 + delta_ab)/((d+1)(d+2)).
enum class Pairing { Lumped, Consistent };

/// M x'' = -K x - C x' + f over all global channels; only free channels evolve.
struct LinearSystem {
  Eigen::MatrixXd mass;
  Eigen::MatrixXd damping;
  Eigen::MatrixXd stiffness;
  Eigen::VectorXd load;
  std::vector<char> free;

  int size() const { return static_cast<int>(load.size()); }
  std::vector<int> free_indices() const;
};

/// Requires quadratic chi. u-channels carry m_a, nu-channels the chi pairing.
LinearSystem assemble_linear_system(const Model& model, Pairing pairing = Pairing::Lumped);

struct OracleStates {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  std::vector<Eigen::VectorXd> rates;
};

/// exp((t - t0) A) on the augmented first-order system z = (x, x', 1).
OracleStates exact_solution(const LinearSystem& sys, const InitialData& init, double t0,
                            const std::vector<double>& times);

/// Solution of K x = f on the free channels (zero elsewhere).
Eigen::VectorXd static_equilibrium(const LinearSystem& sys);

/// Generalized eigenpairs of (K, M) on the free channels, ascending; vectors padded
/// with zeros on constrained channels.
struct Modes {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd vectors;
};
Modes normal_modes(const LinearSystem& sys);

/// 1/2 x'.M x' + 1/2 x.K x - f.x
double quadratic_energy(const LinearSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& v);

/// Central differences.
Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double step);

}  // namespace cbvi
