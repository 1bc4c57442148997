#include "cbvi/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace cbvi {

InitialData InitialData::zero(int num_dofs) {
  return {Eigen::VectorXd::Zero(num_dofs), Eigen::VectorXd::Zero(num_dofs)};
}

Trajectory::Trajectory(TimeSet timeset, int dim, int descriptor_dim, int num_nodes, InitialData initial)
    : timeset_(std::move(timeset)), dim_(dim), k_(descriptor_dim), initial_(std::move(initial)), nodes_(num_nodes) {
  const Eigen::Index n = static_cast<Eigen::Index>(num_nodes) * dofs_per_node();
  if (initial_.values.size() != n || initial_.rates.size() != n) {
    throw std::invalid_argument("initial data must have (d+k) entries per node");
  }
}

void Trajectory::record(int a, double t, const double* values, const double* rates) {
  NodeTrack& n = nodes_[a];
  if (!n.times.empty() && !(t > n.times.back())) {
    throw std::logic_error("nodal instants must be recorded in increasing order");
  }
  n.times.push_back(t);
  n.values.insert(n.values.end(), values, values + dofs_per_node());
  n.rates.insert(n.rates.end(), rates, rates + dofs_per_node());
}

int Trajectory::interval_index(int a, double t) const {
  const NodeTrack& n = nodes_[a];
  if (n.times.empty()) throw std::logic_error("node has no recorded instants");
  if (t < n.times.front() || t > n.times.back()) throw std::out_of_range("time outside the trajectory interval");
  auto it = std::upper_bound(n.times.begin(), n.times.end(), t);
  return static_cast<int>(it - n.times.begin()) - 1;
}

Eigen::VectorXd Trajectory::value_at(int a, double t) const {
  const int i = interval_index(a, t);
  const NodeTrack& n = nodes_[a];
  const int m = dofs_per_node();
  Eigen::Map<const Eigen::VectorXd> v(n.values.data() + static_cast<std::size_t>(i) * m, m);
  Eigen::Map<const Eigen::VectorXd> r(n.rates.data() + static_cast<std::size_t>(i) * m, m);
  if (t == n.times[i]) return v;
  return v + (t - n.times[i]) * r;
}

Eigen::VectorXd Trajectory::rate_at(int a, double t) const {
  const int i = interval_index(a, t);
  const int m = dofs_per_node();
  return Eigen::Map<const Eigen::VectorXd>(nodes_[a].rates.data() + static_cast<std::size_t>(i) * m, m);
}

Eigen::VectorXd Trajectory::values_at(double t) const {
  const int m = dofs_per_node();
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_nodes()) * m);
  for (int a = 0; a < num_nodes(); ++a) out.segment(static_cast<Eigen::Index>(a) * m, m) = value_at(a, t);
  return out;
}

Eigen::VectorXd Trajectory::rates_at(double t) const {
  const int m = dofs_per_node();
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_nodes()) * m);
  for (int a = 0; a < num_nodes(); ++a) out.segment(static_cast<Eigen::Index>(a) * m, m) = rate_at(a, t);
  return out;
}

double Trajectory::max_rate() const {
  const int m = dofs_per_node();
  double best = 0.0;
  for (const NodeTrack& n : nodes_) {
    for (std::size_t i = 0; i < n.size(); ++i) {
      Eigen::Map<const Eigen::VectorXd> r(n.rates.data() + i * m, m);
      best = std::max(best, r.head(dim_).norm() + r.tail(k_).norm());
    }
  }
  return best;
}

void Trajectory::write_csv(std::ostream& out) const {
  out << "t,node,channel,value,rate\n";
  const int m = dofs_per_node();
  char buf[160];
  for (int a = 0; a < num_nodes(); ++a) {
    const NodeTrack& n = nodes_[a];
    for (std::size_t i = 0; i < n.size(); ++i) {
      for (int c = 0; c < m; ++c) {
        const bool is_u = c < dim_;
        std::snprintf(buf, sizeof buf, "%.17g,%d,%s%d,%.17g,%.17g\n", n.times[i], a, is_u ? "u" : "nu",
                      is_u ? c : c - dim_, n.values[i * m + c], n.rates[i * m + c]);
        out << buf;
      }
    }
  }
}

}  // namespace cbvi
