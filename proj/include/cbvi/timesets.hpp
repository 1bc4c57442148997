#pragma once

#include "cbvi/mesh.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cbvi {

enum class TimeSetMode { Strict, Relaxed };

std::string_view to_string(TimeSetMode mode);
TimeSetMode parse_mode(std::string_view text);

struct UniformPolicy {
  int n = 1;
};

struct PerElementUniformPolicy {
  std::vector<int> n;  // one count per element
};

/// Elemental gaps drawn independently per element so that tau <= max_ratio and the
/// largest gap is at most (tf - t0) / n.
struct JitteredPolicy {
  int n = 1;
  std::uint64_t seed = 1;
  double max_ratio = 2.0;
};

using TimeSetPolicy = std::variant<UniformPolicy, PerElementUniformPolicy, JitteredPolicy>;

struct TimeSetMetrics {
  double h = 0.0;          // max gap of the global set
  double T = 0.0;          // max elemental gap
  double tau = 0.0;        // max elemental gap / min elemental gap
  double tau_prime = 0.0;  // max / min gap of the global set
  double min_gap = 0.0;    // min elemental gap

  /// h <= T <= tau h #elements, to a relative rounding slack.
  bool chain_holds(int num_elements) const;
};

/// Elemental time sets over [t0, tf]. Each list starts at t0 and ends at tf exactly.
/// Strict mode forbids shared interior instants between elements.
class TimeSet {
 public:
  TimeSet(double t0, double tf, std::vector<std::vector<double>> elemental, TimeSetMode mode);

  double t0() const { return t0_; }
  double tf() const { return tf_; }
  TimeSetMode mode() const { return mode_; }
  int num_elements() const { return static_cast<int>(elemental_.size()); }
  std::span<const double> element(int K) const { return elemental_[K]; }
  const std::vector<double>& global() const { return global_; }
  const TimeSetMetrics& metrics() const { return metrics_; }
  /// Every elemental set equals the global one.
  bool synchronous() const { return synchronous_; }
  std::size_t total_events() const;

  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  double t0_;
  double tf_;
  std::vector<std::vector<double>> elemental_;
  TimeSetMode mode_;
  std::vector<double> global_;
  TimeSetMetrics metrics_;
  bool synchronous_ = false;
  std::vector<std::string> warnings_;
};

/// Strict mode is a request: if the policy produces shared interior instants the set
/// is returned in relaxed mode with a warning.
TimeSet build(const Mesh& mesh, double t0, double tf, const TimeSetPolicy& policy,
              TimeSetMode mode = TimeSetMode::Strict);

/// A single list shared by all elements, in relaxed mode.
TimeSet synchronous_timeset(int num_elements, std::vector<double> times);

TimeSetMetrics metrics(const TimeSet& ts);

/// Merged instants of the elements around a node. owners[i] is the element whose
/// instant times[i] is (lowest index on ties); endpoints carry the lowest element too.
struct NodalTimes {
  std::vector<double> times;
  std::vector<int> owners;

  int index_of(double t) const;  // -1 if absent
  /// t_a^{i+1} for an instant t_a^i; tf for tf.
  double successor(double t) const;
};

NodalTimes nodal_times(const TimeSet& ts, const Mesh& mesh, int a);

}  // namespace cbvi
