#pragma once

#include "cbvi/timesets.hpp"

#include <Eigen/Dense>

#include <ostream>
#include <string>
#include <vector>

namespace cbvi {

/// (u, nu)(t0) and (u', nu')(t0) as node-major global vectors. The rates are those
/// of the first nodal interval.
struct InitialData {
  Eigen::VectorXd values;
  Eigen::VectorXd rates;

  static InitialData zero(int num_dofs);
};

/// Instants, values and right-limit rates of one node. At the final instant the
/// stored rate is that of the last interval.
struct NodeTrack {
  std::vector<double> times;
  std::vector<double> values;  // dofs_per_node entries per instant
  std::vector<double> rates;

  std::size_t size() const { return times.size(); }
};

class Trajectory {
 public:
  Trajectory(TimeSet timeset, int dim, int descriptor_dim, int num_nodes, InitialData initial);

  const TimeSet& timeset() const { return timeset_; }
  const InitialData& initial() const { return initial_; }
  int dim() const { return dim_; }
  int descriptor_dim() const { return k_; }
  int dofs_per_node() const { return dim_ + k_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  const NodeTrack& node(int a) const { return nodes_[a]; }
  void record(int a, double t, const double* values, const double* rates);

  /// Piecewise-affine nodal value at t in [t0, tf].
  Eigen::VectorXd value_at(int a, double t) const;
  /// Right-limit rate at t; the last interval's rate at tf.
  Eigen::VectorXd rate_at(int a, double t) const;
  Eigen::VectorXd values_at(double t) const;
  Eigen::VectorXd rates_at(double t) const;

  /// max over nodes and instants of |u'_a| + |nu'_a|.
  double max_rate() const;

  std::size_t events = 0;  // elemental events (AVI) or steps (sync)
  std::vector<std::string> warnings;

  /// Header t,node,channel,value,rate; channels u0.. then nu0.. .
  void write_csv(std::ostream& out) const;

 private:
  int interval_index(int a, double t) const;

  TimeSet timeset_;
  int dim_;
  int k_;
  InitialData initial_;
  std::vector<NodeTrack> nodes_;
};

}  // namespace cbvi
