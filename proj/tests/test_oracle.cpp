#include <gtest/gtest.h>

#include <cmath>
#include <iostream>
#include <random>

#include "test_support.hpp"

using namespace bethe;

namespace {

/// Midpoint between a sampled point and the uniform point: interior with
/// every entry bounded away from zero.
PseudoMarginals central_point(const FactorModel& m, std::uint64_t seed) {
  auto q = sample_pseudomarginals(m, seed);
  const auto u = io::uniform_beliefs(m);
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t x = 0; x < m.states(a); ++x) q.tables[a][x] = 0.5 * (q.tables[a][x] + u.tables[a][x]);
  return q;
}

}  // namespace

TEST(ExactGibbs, SingleBinaryVariable) {
  const auto m = FactorModel::from_hypergraph({{"1", 2}}, {});
  const auto ex = exact_gibbs(m);
  EXPECT_NEAR(ex.log_partition, std::log(2.0), 1e-15);
  EXPECT_EQ(ex.marginals.tables[0], (Table{0.5, 0.5}));
}

TEST(ExactGibbs, P3Zero) {
  const auto ex = exact_gibbs(test::fixture("p3_zero"));
  EXPECT_NEAR(ex.log_partition, 3.0 * std::log(2.0), 1e-14);
  for (const auto& t : ex.marginals.tables)
    for (double v : t) EXPECT_NEAR(v, 1.0 / static_cast<double>(t.size()), 1e-15);
}

TEST(ExactGibbs, SingleNodeMatchesClosedForm) {
  const auto m = test::fixture("single_node");
  const auto& h = m.hamiltonian(0);
  const double z = std::exp(-h[0]) + std::exp(-h[1]);
  const auto ex = exact_gibbs(m);
  EXPECT_NEAR(ex.log_partition, std::log(z), 1e-14);
  EXPECT_NEAR(ex.marginals.tables[0][0], std::exp(-h[0]) / z, 1e-15);
}

TEST(ExactGibbs, MarginalsAreConsistent) {
  std::mt19937_64 rng(1);
  for (const auto& name : test::all_fixtures())
    EXPECT_TRUE(is_locally_consistent(test::fixture(name), exact_gibbs(test::fixture(name)).marginals, 1e-12)) << name;
  for (int k = 0; k < 20; ++k) {
    const auto m = test::random_hypergraph_model(rng, 5, 4, 3, 3, 2.0);
    EXPECT_TRUE(is_locally_consistent(m, exact_gibbs(m).marginals, 1e-12));
  }
}

TEST(ExactGibbs, StableForLargeHamiltonians) {
  auto m = test::fixture("triangle");
  auto t = m.hamiltonians();
  for (auto& table : t)
    for (auto& v : table) v *= 400.0;
  const auto ex = exact_gibbs(m.with_hamiltonians(t));
  EXPECT_TRUE(std::isfinite(ex.log_partition));
  EXPECT_TRUE(is_locally_consistent(m, ex.marginals, 1e-12));
}

TEST(ExactGibbs, CapIsEnforced) {
  const auto m = test::fixture("grid2x2");
  EXPECT_THROW(exact_gibbs(m, 15), CapExceeded);
  EXPECT_NO_THROW(exact_gibbs(m, 16));
}

TEST(ExactGibbs, TreeBetheEnergyIsMinusLogZ) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto m = test::random_tree_model(rng, 6, 3);
    const auto ex = exact_gibbs(m);
    EXPECT_NEAR(bethe_energy(m, ex.marginals), -ex.log_partition, 1e-10);
  }
}

TEST(FiniteDifference, ZeroDirection) {
  const auto m = test::fixture("triangle");
  TangentVector zero;
  for (std::size_t a = 0; a < m.size(); ++a) zero.tables.emplace_back(m.states(a), 0.0);
  EXPECT_EQ(finite_difference_gradient(m, sample_pseudomarginals(m, 0), zero, 1e-5), 0.0);
}

TEST(FiniteDifference, MatchesDifferentialOnRandomTriples) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto m = test::random_hypergraph_model(rng, 4, 3, 3, 3);
    const auto q = central_point(m, rng());
    const auto u = test::random_tangent(m, rng);
    if (local_polytope(m).dimension() == 0) continue;
    const double exact = bethe_differential(m, q, u);
    const double fd = finite_difference_gradient(m, q, u, 1e-5);
    EXPECT_LE(std::abs(fd - exact), 1e-6 * std::max(std::abs(exact), 1e-8));
  }
}

TEST(FiniteDifference, SecondOrderConvergence) {
  std::mt19937_64 rng(4);
  const auto m = test::fixture("triangle_pendant");
  for (int k = 0; k < 5; ++k) {
    const auto q = central_point(m, rng());
    const auto u = test::random_tangent(m, rng);
    const double exact = bethe_differential(m, q, u);
    const double e1 = std::abs(finite_difference_gradient(m, q, u, 2e-2) - exact);
    const double e2 = std::abs(finite_difference_gradient(m, q, u, 1e-2) - exact);
    EXPECT_NEAR(e1 / e2, 4.0, 0.5);
  }
}

TEST(FiniteDifference, RejectsLeavingInterior) {
  std::mt19937_64 rng(5);
  const auto m = test::fixture("p3");
  const auto q = sample_pseudomarginals(m, 0);
  EXPECT_THROW(finite_difference_gradient(m, q, test::random_tangent(m, rng), 10.0), ValidationError);
}

TEST(CriticalPoints, SingleNodeIsGibbs) {
  const auto m = test::fixture("single_node");
  const auto crit = enumerate_critical_points(m);
  ASSERT_EQ(crit.points.size(), 1u);
  EXPECT_EQ(crit.runs, 32u);
  EXPECT_EQ(crit.accepted_runs, 32u);
  EXPECT_LE(table_distance(crit.points[0].tables, exact_gibbs(m).marginals.tables), 1e-8);
}

TEST(CriticalPoints, TreesHaveUniqueExactPoint) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 10; ++k) {
    const auto m = test::random_tree_model(rng, 5, 3);
    const auto crit = enumerate_critical_points(m, {8, 1e-10, 0, 5000});
    ASSERT_EQ(crit.points.size(), 1u);
    EXPECT_LE(table_distance(crit.points[0].tables, exact_gibbs(m).marginals.tables), 1e-8);
  }
}

TEST(CriticalPoints, PointsAreCriticalAndSorted) {
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    const auto crit = enumerate_critical_points(m);
    ASSERT_FALSE(crit.points.empty()) << name;
    ASSERT_EQ(crit.points.size(), crit.energies.size());
    for (std::size_t k = 0; k < crit.points.size(); ++k) {
      EXPECT_LE(projected_gradient_norm(m, crit.points[k]), kCriticalityTol) << name;
      EXPECT_TRUE(is_locally_consistent(m, crit.points[k], 1e-10)) << name;
      EXPECT_DOUBLE_EQ(crit.energies[k], bethe_energy(m, crit.points[k]));
      if (k > 0) {
        EXPECT_TRUE(crit.points[k - 1].tables < crit.points[k].tables);
        EXPECT_GT(table_distance(crit.points[k - 1].tables, crit.points[k].tables), kPointMergeDistance);
      }
    }
  }
}

TEST(CriticalPoints, SeedInvariantAsSets) {
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    const auto a = enumerate_critical_points(m, {32, kCriticalityTol, 0, 5000});
    const auto b = enumerate_critical_points(m, {32, kCriticalityTol, 1000, 5000});
    EXPECT_LE(hausdorff_distance(a.points, b.points), 1e-6) << name;
  }
}

TEST(CriticalPoints, AgreeWithBpFixedPoints) {
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    const auto crit = enumerate_critical_points(m);
    const auto bp = find_fixed_points(m, {}, 32, 0);
    std::vector<PseudoMarginals> beliefs;
    for (const auto& fp : bp.fixed_points) beliefs.push_back(fp.beliefs);
    EXPECT_LE(hausdorff_distance(crit.points, beliefs), 1e-6) << name;
  }
}

TEST(CriticalPoints, BetheMinimumVersusLogPartition) {
  // Recorded, not asserted: on loopy models the Bethe minimum may lie below -ln Z.
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    const auto crit = enumerate_critical_points(m);
    const double best = *std::min_element(crit.energies.begin(), crit.energies.end());
    std::cout << "  " << name << ": min BT = " << best << ", -ln Z = " << -exact_gibbs(m).log_partition << "\n";
  }
}

TEST(Hausdorff, EdgeCases) {
  const PseudoMarginals p{{Table{0.25, 0.75}}}, q{{Table{0.5, 0.5}}};
  EXPECT_EQ(hausdorff_distance({}, {}), 0.0);
  EXPECT_TRUE(std::isinf(hausdorff_distance({p}, {})));
  EXPECT_DOUBLE_EQ(hausdorff_distance({p}, {q}), 0.25);
  EXPECT_DOUBLE_EQ(hausdorff_distance({p, q}, {q}), 0.25);
  EXPECT_EQ(hausdorff_distance({p, q}, {q, p}), 0.0);
}

TEST(FiberObjective, Validation) {
  const auto m = retract_linear_model(test::fixture("triangle_pendant"), "4").first;
  const auto a = m.region_index("3,4"), d = m.region_index("3");
  const Table p = {0.5, 0.5};
  EXPECT_THROW(fiber_objective(m, a, d, p, Table{0.5}), ValidationError);
  EXPECT_THROW(fiber_objective(m, a, d, p, Table{-0.5, 1.5, 0.5, 0.5}), ValidationError);
  // Zero entries are allowed (0 ln 0 = 0).
  EXPECT_NO_THROW(fiber_objective(m, a, d, p, Table{0.0, 1.0, 1.0, 0.0}));
}

TEST(FiberObjective, ClosedFormValue) {
  // At pi*, each fiber contributes -log sum exp(-H_a) over the fiber.
  const auto m = retract_linear_model(test::fixture("triangle_pendant"), "4").first;
  const auto a = m.region_index("3,4"), d = m.region_index("3");
  const auto [kernel, hhat] = colinear_kernel(m, a, d);
  const Table p = {0.3, 0.7};
  double expected = 0.0;
  for (std::size_t y = 0; y < 2; ++y) expected -= p[y] * (hhat[y] - m.hamiltonian(d)[y]);
  EXPECT_NEAR(fiber_objective(m, a, d, p, kernel), expected, 1e-14);
}
