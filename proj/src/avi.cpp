#include "cbvi/avi.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cbvi {

void check_initial_data(const Model& model, const InitialData& init) {
  if (init.values.size() != model.num_dofs() || init.rates.size() != model.num_dofs()) {
    throw std::invalid_argument("initial data must have (d+k) entries per node");
  }
  if (!init.values.allFinite() || !init.rates.allFinite()) {
    throw std::invalid_argument("initial data must be finite");
  }
  if (!model.satisfies_constraints(init.values) || !model.satisfies_constraints(init.rates)) {
    throw std::invalid_argument("initial data must vanish on constrained channels");
  }
}

double default_max_T(const Model& model) {
  const int n = model.num_dofs();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  const int ndof = model.dofs_per_node();
  for (int e = 0; e < model.mesh().num_elements(); ++e) {
    auto conn = model.mesh().element(e);
    const Eigen::MatrixXd& H = model.elements().stiffness[e];
    for (std::size_t i = 0; i < conn.size(); ++i)
      for (std::size_t j = 0; j < conn.size(); ++j)
        K.block(model.dof(conn[i], 0), model.dof(conn[j], 0), ndof, ndof) +=
            H.block(static_cast<Eigen::Index>(i) * ndof, static_cast<Eigen::Index>(j) * ndof, ndof, ndof);
  }
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .cwiseAbs()
                          .maxCoeff();
  if (!(lmax > 0.0)) return std::numeric_limits<double>::infinity();
  const auto& c = model.coefficients();
  const double mmin = std::min(*std::min_element(c.mass.begin(), c.mass.end()),
                               *std::min_element(c.inertia.begin(), c.inertia.end()));
  return 0.5 * std::sqrt(mmin / lmax);
}

Trajectory run_avi(const Model& model, const TimeSet& timeset, const InitialData& init, const AviOptions& options) {
  if (!is_scalar_quadratic(model.material().chi)) {
    throw IncompatibleError("the asynchronous integrator requires chi = 1/2 rho_bar |nu'|^2");
  }
  const Mesh& mesh = model.mesh();
  if (timeset.num_elements() != mesh.num_elements()) {
    throw std::invalid_argument("time set and mesh have different element counts");
  }
  check_initial_data(model, init);

  const int d = model.dim();
  const int k = model.descriptor_dim();
  const int ndof = model.dofs_per_node();
  const auto& coef = model.coefficients();

  Trajectory traj(timeset, d, k, model.num_nodes(), init);
  for (const auto& w : timeset.warnings()) traj.warnings.push_back(w);
  const double max_T = options.max_T > 0.0 ? options.max_T : default_max_T(model);
  if (timeset.metrics().T > max_T) {
    std::ostringstream msg;
    msg << "T_theta=" << timeset.metrics().T << " exceeds the stability ceiling " << max_T;
    traj.warnings.push_back(msg.str());
  }

  std::vector<NodalTimes> nodal(model.num_nodes());
  for (int a = 0; a < model.num_nodes(); ++a) nodal[a] = nodal_times(timeset, mesh, a);

  State state = State::zero(model.num_nodes(), ndof, timeset.t0());
  state.values = init.values;
  state.rates = init.rates;
  for (int a = 0; a < model.num_nodes(); ++a) {
    traj.record(a, timeset.t0(), state.values.data() + model.dof(a, 0), state.rates.data() + model.dof(a, 0));
  }

  EventQueue queue;
  for (int K = 0; K < mesh.num_elements(); ++K) {
    if (timeset.element(K).size() > 2) queue.push({timeset.element(K)[1], K, 1});
  }

  // Impulses are accumulated over every element sharing an instant, then applied once per node.
  Eigen::VectorXd impulse = Eigen::VectorXd::Zero(model.num_dofs());
  std::vector<char> touched(model.num_nodes(), 0);
  std::vector<int> batch_nodes;
  std::vector<ElementEvent> batch;

  while (!queue.empty()) {
    const double t = queue.top().t;
    batch.clear();
    while (!queue.empty() && queue.top().t == t) batch.push_back(queue.pop());

    batch_nodes.clear();
    for (const auto& ev : batch) {
      for (int a : mesh.element(ev.element)) {
        if (touched[a]) continue;
        touched[a] = 1;
        batch_nodes.push_back(a);
        const double dt = t - state.last_update[a];
        state.values.segment(model.dof(a, 0), ndof) += dt * state.rates.segment(model.dof(a, 0), ndof);
        state.last_update[a] = t;
      }
    }

    for (const auto& ev : batch) {
      auto times = timeset.element(ev.element);
      const double step = times[ev.index + 1] - times[ev.index];
      const Eigen::VectorXd f = model.elements().force(ev.element, model.gather(ev.element, state.values));
      model.scatter_add(ev.element, step * f, impulse);
      if (static_cast<std::size_t>(ev.index + 2) < times.size()) {
        queue.push({times[ev.index + 1], ev.element, ev.index + 1});
      }
      ++traj.events;
    }

    Eigen::VectorXd old_rates(static_cast<Eigen::Index>(batch_nodes.size()) * ndof);
    for (std::size_t i = 0; i < batch_nodes.size(); ++i) {
      const int a = batch_nodes[i];
      const int base = model.dof(a, 0);
      old_rates.segment(static_cast<Eigen::Index>(i) * ndof, ndof) = state.rates.segment(base, ndof);
      for (int c = 0; c < d; ++c) {
        if (model.is_free(base + c)) state.rates(base + c) -= impulse(base + c) / coef.mass[a];
      }
      const double h_next = nodal[a].successor(t) - t;
      const double denom = coef.inertia[a] + coef.dissipation[a] * h_next;
      for (int c = d; c < ndof; ++c) {
        if (model.is_free(base + c)) {
          state.rates(base + c) = (coef.inertia[a] * state.rates(base + c) - impulse(base + c)) / denom;
        }
      }
      impulse.segment(base, ndof).setZero();
      if (!state.rates.segment(base, ndof).allFinite() || !state.values.segment(base, ndof).allFinite()) {
        std::ostringstream msg;
        msg << "non-finite state at node " << a << " in the event at t=" << t << " of element "
            << batch.front().element;
        throw NumericalError(msg.str());
      }
      traj.record(a, t, state.values.data() + base, state.rates.data() + base);
    }

    if (options.hook) {
      for (const auto& ev : batch) {
        JumpRecord rec;
        rec.t = t;
        rec.element = ev.element;
        for (int a : mesh.element(ev.element)) {
          if (touched[a]) rec.nodes.push_back(a);
        }
        rec.du.resize(static_cast<Eigen::Index>(rec.nodes.size()), d);
        rec.dnu.resize(static_cast<Eigen::Index>(rec.nodes.size()), k);
        for (std::size_t r = 0; r < rec.nodes.size(); ++r) {
          const int a = rec.nodes[r];
          const auto pos = std::find(batch_nodes.begin(), batch_nodes.end(), a) - batch_nodes.begin();
          const Eigen::VectorXd jump = state.rates.segment(model.dof(a, 0), ndof) - old_rates.segment(pos * ndof, ndof);
          rec.du.row(static_cast<Eigen::Index>(r)) = jump.head(d).transpose();
          rec.dnu.row(static_cast<Eigen::Index>(r)) = jump.tail(k).transpose();
          touched[a] = 0;
        }
        options.hook(rec);
      }
    }
    for (int a : batch_nodes) touched[a] = 0;
  }

  if (traj.events != timeset.total_events()) {
    throw NumericalError("event queue drained before every elemental instant was processed");
  }

  for (int a = 0; a < model.num_nodes(); ++a) {
    const int base = model.dof(a, 0);
    Eigen::VectorXd v = state.values.segment(base, ndof) +
                        (timeset.tf() - state.last_update[a]) * state.rates.segment(base, ndof);
    if (!v.allFinite()) throw NumericalError("non-finite final state at node " + std::to_string(a));
    traj.record(a, timeset.tf(), v.data(), state.rates.data() + base);
  }
  return traj;
}

}  // namespace cbvi
