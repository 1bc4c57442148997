#pragma once

#include "cbvi/assembly.hpp"
#include "cbvi/errors.hpp"
#include "cbvi/timesets.hpp"
#include "cbvi/trajectory.hpp"

#include <functional>
#include <queue>
#include <vector>

namespace cbvi {

/// Next elemental instant t_K^j of element K.
struct ElementEvent {
  double t;
  int element;
  int index;
};

/// Min-queue on (t, element): each element holds exactly one pending entry.
class EventQueue {
 public:
  void push(ElementEvent e) { heap_.push(e); }
  const ElementEvent& top() const { return heap_.top(); }
  ElementEvent pop() {
    ElementEvent e = heap_.top();
    heap_.pop();
    return e;
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const ElementEvent& a, const ElementEvent& b) const {
      return a.t != b.t ? a.t > b.t : a.element > b.element;
    }
  };
  std::priority_queue<ElementEvent, std::vector<ElementEvent>, Later> heap_;
};

/// Rate jumps applied at one event, reported for the nodes the element owns at t.
/// When elements share an instant, each node's combined jump is reported once,
/// under the lowest-index element.
struct JumpRecord {
  double t = 0.0;
  int element = -1;
  std::vector<int> nodes;
  Eigen::MatrixXd du;   // rows per node, d columns
  Eigen::MatrixXd dnu;  // rows per node, k columns
};

using JumpHook = std::function<void(const JumpRecord&)>;

struct AviOptions {
  double max_T = 0.0;  // stability ceiling; <= 0 selects the default heuristic
  JumpHook hook;
};

/// 0.5 sqrt(min nodal inertia / lambda_max(assembled stiffness)); infinity with no stiffness.
double default_max_T(const Model& model);

/// Event-driven integration over the elemental sets. Requires ScalarQuadratic chi and
/// initial data that vanish on constrained channels.
Trajectory run_avi(const Model& model, const TimeSet& timeset, const InitialData& init,
                   const AviOptions& options = {});

/// Throws std::invalid_argument unless init has the model's size and respects constraints.
void check_initial_data(const Model& model, const InitialData& init);

}  // namespace cbvi
