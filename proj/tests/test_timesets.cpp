#include "cbvi/timesets.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace cbvi;

TEST_CASE("uniform set on one element") {
  const Mesh tri = load_mesh(fixtures::kReferenceTriangle);
  const TimeSet ts = build(tri, 0.0, 1.0, UniformPolicy{10});
  CHECK(ts.metrics().T == doctest::Approx(0.1));
  CHECK(ts.metrics().h == doctest::Approx(0.1));
  CHECK(ts.metrics().tau == doctest::Approx(1.0));
  CHECK(ts.element(0).front() == 0.0);
  CHECK(ts.element(0).back() == 1.0);
  CHECK(ts.total_events() == 9);
}

TEST_CASE("two elements with steps 0.1 and 0.05") {
  const Mesh sq = load_mesh(fixtures::kSquare);
  const TimeSet ts = build(sq, 0.0, 1.0, PerElementUniformPolicy{{10, 20}});
  CHECK(ts.metrics().tau == doctest::Approx(2.0));
  CHECK(ts.metrics().T == doctest::Approx(0.1));
  CHECK(ts.metrics().h == doctest::Approx(0.05));
  // shared instants 0.1, 0.2, ... force relaxed mode
  CHECK(ts.mode() == TimeSetMode::Relaxed);
  CHECK_FALSE(ts.warnings().empty());
  CHECK(ts.metrics().chain_holds(2));
}

TEST_CASE("metrics from explicit gaps") {
  const TimeSet ts(0.0, 0.4, {{0.0, 0.1, 0.4}}, TimeSetMode::Strict);
  CHECK(ts.metrics().h == doctest::Approx(0.3));
  CHECK(ts.metrics().T == doctest::Approx(0.3));
  CHECK(ts.metrics().tau == doctest::Approx(3.0));

  const TimeSet halved(0.0, 0.2, {{0.0, 0.05, 0.2}}, TimeSetMode::Strict);
  CHECK(halved.metrics().h == doctest::Approx(0.15));
  CHECK(halved.metrics().T == doctest::Approx(0.15));
  CHECK(halved.metrics().tau == doctest::Approx(3.0));
  CHECK(halved.metrics().tau_prime == doctest::Approx(3.0));
}

TEST_CASE("synchronous sets have T = h and tau = 1") {
  std::vector<double> times;
  for (int i = 0; i <= 8; ++i) times.push_back(i / 8.0);
  const TimeSet ts = synchronous_timeset(3, times);
  CHECK(ts.synchronous());
  CHECK(ts.mode() == TimeSetMode::Relaxed);
  CHECK(ts.metrics().T == doctest::Approx(ts.metrics().h));
  CHECK(ts.metrics().tau == doctest::Approx(1.0));
}

TEST_CASE("refinement halves lengths and keeps ratios") {
  const Mesh grid = load_mesh_file(fixtures::data_path("meshes/grid4.mesh"));
  const TimeSet a = build(grid, 0.0, 1.0, PerElementUniformPolicy{std::vector<int>(32, 7)});
  std::vector<int> n(32);
  for (int K = 0; K < 32; ++K) n[K] = 5 + K % 3;
  const TimeSet b = build(grid, 0.0, 1.0, PerElementUniformPolicy{n});
  for (int K = 0; K < 32; ++K) n[K] *= 2;
  const TimeSet c = build(grid, 0.0, 1.0, PerElementUniformPolicy{n});
  CHECK(a.metrics().tau == doctest::Approx(1.0));
  CHECK(c.metrics().T == doctest::Approx(b.metrics().T / 2));
  CHECK(c.metrics().min_gap == doctest::Approx(b.metrics().min_gap / 2));
  CHECK(c.metrics().tau == doctest::Approx(b.metrics().tau));
}

TEST_CASE("nodal times merge the sets of the surrounding elements") {
  const Mesh sq = load_mesh(fixtures::kSquare);
  const TimeSet ts(0.0, 1.0, {{0.0, 0.2, 0.4, 1.0}, {0.0, 0.3, 1.0}}, TimeSetMode::Strict);
  const NodalTimes shared = nodal_times(ts, sq, 0);  // node 0 is in both elements
  CHECK(shared.times == std::vector<double>{0.0, 0.2, 0.3, 0.4, 1.0});
  CHECK(shared.owners == std::vector<int>{0, 0, 1, 0, 0});
  CHECK(shared.successor(0.3) == 0.4);
  CHECK(shared.successor(1.0) == 1.0);
  CHECK(shared.index_of(0.35) == -1);

  const NodalTimes single = nodal_times(ts, sq, 1);  // node 1 only in element 0
  CHECK(single.times == std::vector<double>{0.0, 0.2, 0.4, 1.0});
}

TEST_CASE("jittered sets: chain, union, ratio bound and determinism") {
  const Mesh grid = load_mesh_file(fixtures::data_path("meshes/grid4.mesh"));
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (int n : {10, 40}) {
      const JitteredPolicy policy{n, seed, 2.0};
      const TimeSet ts = build(grid, 0.0, 1.0, policy);
      CHECK(ts.metrics().chain_holds(grid.num_elements()));
      CHECK(ts.metrics().tau <= 2.0 + 1e-12);
      CHECK(ts.metrics().T <= 1.0 / n + 1e-12);

      std::set<double> all;
      for (int K = 0; K < ts.num_elements(); ++K) all.insert(ts.element(K).begin(), ts.element(K).end());
      CHECK(std::vector<double>(all.begin(), all.end()) == ts.global());

      const TimeSet again = build(grid, 0.0, 1.0, policy);
      for (int K = 0; K < ts.num_elements(); ++K) {
        CHECK(std::equal(ts.element(K).begin(), ts.element(K).end(), again.element(K).begin(),
                         again.element(K).end()));
      }
    }
  }
}

TEST_CASE("invalid time sets") {
  CHECK_THROWS_AS(TimeSet(1.0, 0.0, {{1.0, 0.0}}, TimeSetMode::Relaxed), std::invalid_argument);
  CHECK_THROWS_AS(TimeSet(0.0, 1.0, {{0.0, 0.5, 0.5, 1.0}}, TimeSetMode::Relaxed), std::invalid_argument);
  CHECK_THROWS_AS(TimeSet(0.0, 1.0, {{0.0, 0.5}}, TimeSetMode::Relaxed), std::invalid_argument);
  CHECK_THROWS_AS(TimeSet(0.0, 1.0, {{0.0, 0.5, 1.0}, {0.0, 0.5, 1.0}}, TimeSetMode::Strict), std::invalid_argument);
  CHECK_THROWS_AS(parse_mode("loose"), std::invalid_argument);
  const Mesh sq = load_mesh(fixtures::kSquare);
  CHECK_THROWS_AS(build(sq, 0.0, 1.0, UniformPolicy{0}), std::invalid_argument);
  CHECK_THROWS_AS(build(sq, 0.0, 1.0, PerElementUniformPolicy{{3}}), std::invalid_argument);
}
