#pragma once

#include "cbvi/assembly.hpp"
#include "cbvi/avi.hpp"
#include "cbvi/oracle.hpp"
#include "cbvi/sync.hpp"
#include "cbvi/timesets.hpp"
#include "cbvi/trajectory.hpp"

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cbvi {

struct Energy {
  double kinetic_u = 0.0;
  double kinetic_nu = 0.0;  // int chi(nu, nu') under the quadrature rule
  double potential = 0.0;
  double total = 0.0;
};

/// Energy at t from affine values and right-limit rates. Throws std::out_of_range
/// for t outside the trajectory interval.
Energy energy(const Model& model, const Trajectory& traj, double t, Quadrature quadrature = Quadrature::Vertex);

struct EnergySample {
  double t;
  Energy e;
};

/// Energy at every instant of the global time set.
std::vector<EnergySample> energy_series(const Model& model, const Trajectory& traj,
                                        Quadrature quadrature = Quadrature::Vertex);

struct EnergyTrend {
  double slope = 0.0;     // least-squares slope of the total energy
  double max_rise = 0.0;  // largest rise of the total above its running minimum
  double max_drift = 0.0; // max |E(t) - E(t0)|
};

EnergyTrend energy_trend(const std::vector<EnergySample>& series);

/// Sum over elements and elemental intervals: nodal kinetic terms with element
/// shares of the lumped inertia, minus (t_K^{j+1} - t_K^j) V_K at t_K^j.
double discrete_action(const Model& model, const Trajectory& traj);

enum class Channel { U, Nu };

/// Sum over nodes of |rate jump| (Euclidean over the channel) at instants t_a^i with
/// [t_a^{i-1}, t_a^i] meeting [t1, t2].
double pointwise_variation(const Trajectory& traj, Channel channel, double t1, double t2);

/// Semidiscrete (trapezoidal) against fully discrete (left endpoint) dissipation of
/// nu tested on phi; nu and phi are the nu channels of two trajectories sharing a time set.
struct DissipationComparison {
  double semidiscrete = 0.0;
  double discrete = 0.0;
  double difference = 0.0;    // |semidiscrete - discrete|
  double identity = 0.0;      // 1/2 |sum h^2 eta_a nu' . phi'|
  double rate_integral = 0.0; // int_B x I nu' . phi' (lumped in space)
  double bound = 0.0;         // eta T / 2 |rate_integral|
  double absolute_bound = 0.0;// eta T / 2 int |nu' . phi'|
  bool holds() const { return difference <= bound; }
};

DissipationComparison compare_dissipation(const Model& model, const Trajectory& nu, const Trajectory& phi);

enum class IntegratorKind { Avi, Sync };

std::string_view to_string(IntegratorKind kind);
IntegratorKind parse_integrator(std::string_view text);

/// Mesh, material, initial data and interval of a run.
struct Problem {
  std::shared_ptr<const Model> model;
  InitialData init;
  double t0 = 0.0;
  double tf = 1.0;
};

struct RunSettings {
  IntegratorKind integrator = IntegratorKind::Avi;
  TimeSetPolicy policy = UniformPolicy{100};
  TimeSetMode mode = TimeSetMode::Strict;
  SyncOptions sync;
  double max_T = 0.0;
};

/// Builds the time set for the policy and runs the selected integrator.
Trajectory run_problem(const Problem& problem, const RunSettings& settings);

/// The policy with every step count multiplied by 2^level and the jitter seed offset by level.
TimeSetPolicy refine_policy(const TimeSetPolicy& base, int level);

enum class Reference { Auto, Oracle, Finest };

struct ConvergenceRow {
  int level = 0;
  double T_theta = 0.0;
  double tau_theta = 0.0;
  double sup_err = 0.0;
  double l2_rate_err = 0.0;
  double pV_u = 0.0;
  double pV_nu = 0.0;
  double max_rate = 0.0;
  double runtime = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;  // T_theta descending
  bool oracle_reference = false;
  std::vector<double> orders;        // log2(e_l / e_{l+1}) of successive nonzero errors
  double order = 0.0;                // mean of orders
  bool monotone = true;              // sup errors strictly decreasing
  std::vector<std::string> notes;

  void write_csv(std::ostream& out) const;
};

struct StudyOptions {
  int levels = 3;
  Reference reference = Reference::Auto;
  int threads = 0;  // <= 0: AVI_THREADS or the hardware count
};

/// Runs the levels concurrently. Requires levels >= 3. Failures are rethrown with the
/// level tag and the original error category.
ConvergenceReport convergence_study(const Problem& problem, const RunSettings& settings, const StudyOptions& options);

/// sup over the union grid of the stacked nodal value difference.
double sup_distance(const Trajectory& a, const Trajectory& b);
/// L2 norm in time of the stacked rate difference (midpoint rule on the union grid).
double l2_rate_distance(const Trajectory& a, const Trajectory& b);

}  // namespace cbvi
