#include "cbvi/timesets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace cbvi {

std::string_view to_string(TimeSetMode mode) { return mode == TimeSetMode::Strict ? "strict" : "relaxed"; }

TimeSetMode parse_mode(std::string_view text) {
  if (text == "strict") return TimeSetMode::Strict;
  if (text == "relaxed") return TimeSetMode::Relaxed;
  throw std::invalid_argument("timeset mode must be strict or relaxed, got '" + std::string(text) + "'");
}

bool TimeSetMetrics::chain_holds(int num_elements) const {
  const double slack = 1e-12 * T;
  return h <= T + slack && T <= tau * h * num_elements + slack;
}

namespace {

std::vector<double> merge(const std::vector<std::vector<double>>& lists) {
  std::vector<double> all;
  for (const auto& l : lists) all.insert(all.end(), l.begin(), l.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

// Interior instants shared by at least two elements.
std::size_t count_coincidences(const std::vector<std::vector<double>>& lists) {
  std::vector<double> interior;
  for (const auto& l : lists) interior.insert(interior.end(), l.begin() + 1, l.end() - 1);
  std::sort(interior.begin(), interior.end());
  std::size_t c = 0;
  for (std::size_t i = 1; i < interior.size(); ++i) c += interior[i] == interior[i - 1];
  return c;
}

}  // namespace

TimeSet::TimeSet(double t0, double tf, std::vector<std::vector<double>> elemental, TimeSetMode mode)
    : t0_(t0), tf_(tf), elemental_(std::move(elemental)), mode_(mode) {
  if (!(t0_ < tf_) || !std::isfinite(t0_) || !std::isfinite(tf_)) {
    throw std::invalid_argument("time interval must satisfy t0 < tf");
  }
  if (elemental_.empty()) throw std::invalid_argument("time set needs at least one element");
  for (std::size_t K = 0; K < elemental_.size(); ++K) {
    const auto& l = elemental_[K];
    if (l.size() < 2 || l.front() != t0_ || l.back() != tf_) {
      throw std::invalid_argument("elemental time set " + std::to_string(K) + " must start at t0 and end at tf");
    }
    for (std::size_t j = 1; j < l.size(); ++j) {
      if (!(l[j] > l[j - 1])) {
        throw std::invalid_argument("elemental time set " + std::to_string(K) + " is not strictly increasing");
      }
    }
  }
  if (mode_ == TimeSetMode::Strict && count_coincidences(elemental_) > 0) {
    throw std::invalid_argument("strict time set has interior instants shared between elements");
  }
  global_ = merge(elemental_);
  synchronous_ = std::all_of(elemental_.begin(), elemental_.end(),
                             [&](const std::vector<double>& l) { return l == global_; });

  TimeSetMetrics m;
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& l : elemental_) {
    for (std::size_t j = 1; j < l.size(); ++j) {
      m.T = std::max(m.T, l[j] - l[j - 1]);
      min_gap = std::min(min_gap, l[j] - l[j - 1]);
    }
  }
  double gmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < global_.size(); ++i) {
    m.h = std::max(m.h, global_[i] - global_[i - 1]);
    gmin = std::min(gmin, global_[i] - global_[i - 1]);
  }
  m.min_gap = min_gap;
  m.tau = m.T / min_gap;
  m.tau_prime = m.h / gmin;
  metrics_ = m;
}

std::size_t TimeSet::total_events() const {
  std::size_t n = 0;
  for (const auto& l : elemental_) n += l.size() - 2;
  return n;
}

namespace {

std::vector<double> uniform_list(double t0, double tf, int n) {
  std::vector<double> l(n + 1);
  const double span = tf - t0;
  for (int j = 0; j <= n; ++j) l[j] = t0 + span * (static_cast<double>(j) / static_cast<double>(n));
  l.front() = t0;
  l.back() = tf;
  return l;
}

std::vector<double> jittered_list(double t0, double tf, double h, double h_lo, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gap(h_lo, h);
  const double span = tf - t0;
  std::vector<double> gaps;
  double sum = 0.0;
  while (sum < span) {
    gaps.push_back(gap(rng));
    sum += gaps.back();
  }
  const double scale = span / sum;
  std::vector<double> l{t0};
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < gaps.size(); ++j) {
    acc += gaps[j] * scale;
    l.push_back(t0 + acc);
  }
  l.push_back(tf);
  return l;
}

}  // namespace

TimeSet build(const Mesh& mesh, double t0, double tf, const TimeSetPolicy& policy, TimeSetMode mode) {
  if (!(t0 < tf)) throw std::invalid_argument("time interval must satisfy t0 < tf");
  const int ne = mesh.num_elements();
  std::vector<std::vector<double>> lists(ne);
  std::vector<std::string> notes;

  if (const auto* u = std::get_if<UniformPolicy>(&policy)) {
    if (u->n < 1) throw std::invalid_argument("timeset n must be >= 1");
    for (auto& l : lists) l = uniform_list(t0, tf, u->n);
  } else if (const auto* p = std::get_if<PerElementUniformPolicy>(&policy)) {
    if (static_cast<int>(p->n.size()) != ne) {
      throw std::invalid_argument("per-element policy needs one count per element");
    }
    for (int K = 0; K < ne; ++K) {
      if (p->n[K] < 1) throw std::invalid_argument("timeset n must be >= 1");
      lists[K] = uniform_list(t0, tf, p->n[K]);
    }
  } else {
    const auto& j = std::get<JitteredPolicy>(policy);
    if (j.n < 1) throw std::invalid_argument("timeset n must be >= 1");
    if (!(j.max_ratio >= 1.0)) throw std::invalid_argument("jitter max_ratio must be >= 1");
    const double span = tf - t0;
    const double h = span / j.n;
    // Rescaling the final overshoot shrinks gaps by at most span / (span + h).
    const double h_lo = h * (1.0 + h / span) / j.max_ratio;
    std::mt19937_64 rng(j.seed);
    if (h_lo >= h) {
      notes.push_back("max_ratio too small to jitter; using uniform elemental steps");
      for (auto& l : lists) l = uniform_list(t0, tf, j.n);
    } else {
      std::map<double, int> taken;
      for (int K = 0; K < ne; ++K) {
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
          lists[K] = jittered_list(t0, tf, h, h_lo, rng);
          ok = std::none_of(lists[K].begin() + 1, lists[K].end() - 1,
                            [&](double t) { return taken.count(t) > 0; });
        }
        for (std::size_t i = 1; i + 1 < lists[K].size(); ++i) taken[lists[K][i]] = K;
      }
    }
  }

  if (mode == TimeSetMode::Strict && ne > 1 && count_coincidences(lists) > 0) {
    notes.push_back("strict mode requested but elemental sets share interior instants; using relaxed mode");
    mode = TimeSetMode::Relaxed;
  }
  TimeSet ts(t0, tf, std::move(lists), mode);
  for (auto& n : notes) ts.add_warning(std::move(n));
  return ts;
}

TimeSet synchronous_timeset(int num_elements, std::vector<double> times) {
  if (times.size() < 2) throw std::invalid_argument("time list needs at least two instants");
  const double t0 = times.front();
  const double tf = times.back();
  return TimeSet(t0, tf, std::vector<std::vector<double>>(num_elements, std::move(times)), TimeSetMode::Relaxed);
}

TimeSetMetrics metrics(const TimeSet& ts) { return ts.metrics(); }

int NodalTimes::index_of(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end() || *it != t) return -1;
  return static_cast<int>(it - times.begin());
}

double NodalTimes::successor(double t) const {
  const int i = index_of(t);
  if (i < 0) throw std::invalid_argument("instant is not in the nodal time set");
  return i + 1 < static_cast<int>(times.size()) ? times[i + 1] : times[i];
}

NodalTimes nodal_times(const TimeSet& ts, const Mesh& mesh, int a) {
  if (a < 0 || a >= mesh.num_nodes()) throw std::out_of_range("node index out of range");
  std::vector<std::pair<double, int>> all;
  for (int K : mesh.elements_of(a)) {
    for (double t : ts.element(K)) all.emplace_back(t, K);
  }
  std::sort(all.begin(), all.end());
  NodalTimes out;
  for (const auto& [t, K] : all) {
    if (!out.times.empty() && out.times.back() == t) continue;  // sorted: first owner is the lowest index
    out.times.push_back(t);
    out.owners.push_back(K);
  }
  return out;
}

}  // namespace cbvi
