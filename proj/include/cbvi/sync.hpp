#pragma once

#include "cbvi/assembly.hpp"
#include "cbvi/errors.hpp"
#include "cbvi/timesets.hpp"
#include "cbvi/trajectory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <vector>

namespace cbvi {

enum class Quadrature { Vertex, Gauss };

std::string_view to_string(Quadrature q);
Quadrature parse_quadrature(std::string_view text);

/// Frozen data of one implicit nu step t_i -> t_{i+1}. Vectors are nu-only,
/// node-major with k entries per node.
struct PsiContext {
  const Model* model = nullptr;
  double t_prev = 0.0;
  double t_now = 0.0;
  double t_next = 0.0;
  Eigen::VectorXd nu_prev;    // nu(t_{i-1})
  Eigen::VectorXd nu_now;     // nu(t_i)
  Eigen::VectorXd rate_prev;  // nu'(t_{i-1})
  Quadrature quadrature = Quadrature::Vertex;
  std::vector<std::string> warnings;

  double dt() const { return t_next - t_now; }
};

/// Validates ordering (throws std::invalid_argument on dt <= 0) and adds a warning
/// when t_{i+1} - t_i exceeds T0 = 2 gamma / (2 Xi + gamma).
PsiContext make_psi_context(const Model& model, double t_prev, double t_now, double t_next,
                            Eigen::VectorXd nu_prev, Eigen::VectorXd nu_now, Eigen::VectorXd rate_prev,
                            Quadrature quadrature = Quadrature::Vertex);

/// Psi(nu_trial). Constrained nu channels are held at zero and return zero.
Eigen::VectorXd psi_eval(const PsiContext& ctx, const Eigen::VectorXd& nu_trial);

/// Pairing matrix int N_a N_b under the context's quadrature, over nodes (n x n).
Eigen::MatrixXd pairing_matrix(const Model& model, Quadrature quadrature);

struct PsiSolveResult {
  Eigen::VectorXd nu;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Root of Psi(nu) = rhs. Quadratic chi: one linear solve. Otherwise a preconditioned
/// fixed-point iteration with residual-halving line search.
PsiSolveResult solve_psi(const PsiContext& ctx, const Eigen::VectorXd& rhs, double tol = 1e-10,
                         int max_iters = 50);

/// Sampled check of <Psi(nu) - Psi(mu), nu - mu> >= (gamma/2) |nu - mu|^2 in the pairing
/// norm, with random frozen data and pairs drawn from [-scale, scale].
struct MonotonicitySample {
  int pairs = 0;
  int violations = 0;
  double min_margin = 0.0;  // min of lhs - rhs
  double min_ratio = 0.0;   // min of lhs / (|nu - mu|^2 in the pairing norm)
};

MonotonicitySample sample_psi_monotonicity(const Model& model, double dt, Quadrature quadrature, int pairs,
                                           std::uint64_t seed, double scale = 1.0, double slack = 1e-9);

struct SyncOptions {
  Quadrature quadrature = Quadrature::Vertex;
  double tol = 1e-10;
  int max_iters = 50;
};

/// Requires a synchronous time set. u is kicked with the assembled force; nu solves
/// Psi(nu(t_{i+1})) = -(t_{i+1} - t_i) dV/dnu at each interior instant.
Trajectory run_sync(const Model& model, const TimeSet& timeset, const InitialData& init,
                    const SyncOptions& options = {});

}  // namespace cbvi
