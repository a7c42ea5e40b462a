#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace bethe;

namespace {

PseudoMarginals uniform(const FactorModel& m) { return io::uniform_beliefs(m); }

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST(Consistency, UniformIsConsistent) {
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    EXPECT_TRUE(is_locally_consistent(m, uniform(m), 1e-15)) << name;
  }
}

TEST(Consistency, GlobalMarginalsAreConsistent) {
  // Marginals of an explicit global distribution over (x1, x2, x3).
  const auto m = test::fixture("triangle");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Table joint(8);
  double z = 0.0;
  for (auto& w : joint) z += (w = u(rng));
  PseudoMarginals q;
  for (std::size_t a = 0; a < m.size(); ++a) q.tables.emplace_back(m.states(a), 0.0);
  for (std::size_t x = 0; x < 8; ++x) {
    const std::size_t s[3] = {x >> 2 & 1, x >> 1 & 1, x & 1};
    for (std::size_t a = 0; a < m.size(); ++a) {
      std::size_t idx = 0;
      for (std::size_t v : m.region(a).vars) idx = idx * 2 + s[v];
      q.tables[a][idx] += joint[x] / z;
    }
  }
  EXPECT_TRUE(is_locally_consistent(m, q, 1e-14));
}

TEST(Consistency, PerturbationDetected) {
  const auto m = test::fixture("p3");
  auto q = uniform(m);
  q.tables[3][0] += 1e-3;
  EXPECT_FALSE(is_locally_consistent(m, q, 1e-6));
}

TEST(Consistency, ShapeMismatch) {
  const auto m = test::fixture("p3");
  EXPECT_THROW(is_locally_consistent(m, PseudoMarginals{{Table{1.0}}}, 1e-6), ValidationError);
}

TEST(Sampling, DeterministicConsistentAndPerturbed) {
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto g1 = sample_pseudomarginals(m, seed, SampleMode::global);
      const auto g2 = sample_pseudomarginals(m, seed, SampleMode::global);
      const auto p = sample_pseudomarginals(m, seed, SampleMode::perturbed);
      EXPECT_EQ(g1, g2);
      EXPECT_EQ(p, sample_pseudomarginals(m, seed, SampleMode::perturbed));
      EXPECT_TRUE(is_locally_consistent(m, g1, 1e-10)) << name;
      EXPECT_TRUE(is_locally_consistent(m, p, 1e-10)) << name;
      EXPECT_TRUE(g1.interior() && p.interior());
      if (local_polytope(m).dimension() > 0) EXPECT_GT(table_distance(p.tables, g1.tables), 0.0) << name;
    }
  }
}

TEST(Tangent, BasisIsOrthonormalAndSatisfiesConstraints) {
  std::mt19937_64 rng(12);
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    const auto& lp = local_polytope(m);
    const auto& b = lp.basis();
    const Eigen::MatrixXd gram = b.transpose() * b;
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-12) << name;
    const auto u = test::random_tangent(m, rng);
    // Tangent vectors sum to zero and commute with marginalization.
    PseudoMarginals shifted = uniform(m);
    for (std::size_t a = 0; a < m.size(); ++a)
      for (std::size_t x = 0; x < m.states(a); ++x) shifted.tables[a][x] += 1e-3 * u.tables[a][x];
    EXPECT_TRUE(is_locally_consistent(m, shifted, 1e-14)) << name;
  }
}

TEST(Tangent, DimensionOfBinaryTree) {
  // Binary pairwise tree: dim L(A) = |V| + |E|.
  const auto m = test::fixture("p3");
  EXPECT_EQ(local_polytope(m).dimension(), 5u);
  EXPECT_EQ(local_polytope(m).ambient_dimension(), 14u);
}

TEST(Tangent, CacheSharedAcrossHamiltonians) {
  const auto m = test::fixture("triangle");
  const auto m2 = m.with_hamiltonians(m.hamiltonians());
  EXPECT_EQ(&local_polytope(m), &local_polytope(m2));
}

TEST(Energy, SingleBinaryVariableUniform) {
  const auto m = FactorModel::from_hypergraph({{"1", 2}}, {});
  EXPECT_NEAR(bethe_energy(m, uniform(m)), -std::log(2.0), 1e-15);
}

TEST(Energy, P3ZeroUniform) {
  const auto m = test::fixture("p3_zero");
  EXPECT_NEAR(bethe_energy(m, uniform(m)), -3.0 * std::log(2.0), 1e-14);
}

TEST(Energy, ConstantShiftScalesWithCounting) {
  const auto m = test::fixture("triangle_pendant");
  const auto q = sample_pseudomarginals(m, 3);
  const double base = bethe_energy(m, q);
  for (std::size_t a = 0; a < m.size(); ++a) {
    auto t = m.hamiltonians();
    for (auto& v : t[a]) v += 0.75;
    EXPECT_NEAR(bethe_energy(m.with_hamiltonians(t), q) - base, 0.75 * static_cast<double>(m.counting(a)), 1e-12);
  }
}

TEST(Energy, BoundaryModes) {
  const auto m = FactorModel::from_hypergraph({{"1", 2}}, {});
  const PseudoMarginals corner{{Table{1.0, 0.0}}};
  EXPECT_THROW(bethe_energy(m, corner), ValidationError);
  EXPECT_DOUBLE_EQ(bethe_energy(m, corner, EntropyMode::boundary), 0.0);
  EXPECT_THROW(projected_gradient_norm(m, corner), ValidationError);
}

TEST(Energy, TreeExactMarginalsGiveMinusLogZ) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = test::random_tree_model(rng, 5, 3);
    const auto ex = exact_gibbs(m);
    EXPECT_NEAR(bethe_energy(m, ex.marginals), -ex.log_partition, 1e-10);
  }
}

TEST(Differential, ZeroDirection) {
  const auto m = test::fixture("triangle");
  TangentVector zero;
  for (std::size_t a = 0; a < m.size(); ++a) zero.tables.emplace_back(m.states(a), 0.0);
  EXPECT_EQ(bethe_differential(m, sample_pseudomarginals(m, 1), zero), 0.0);
}

TEST(Differential, MatchesFiniteDifferencesAlongBasis) {
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    const auto& lp = local_polytope(m);
    const auto q = sample_pseudomarginals(m, 5);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(lp.dimension()); ++k) {
      const auto u = lp.tangent(Eigen::VectorXd::Unit(static_cast<Eigen::Index>(lp.dimension()), k));
      const double exact = bethe_differential(m, q, u);
      const double fd = finite_difference_gradient(m, q, u, 1e-5);
      if (std::abs(exact) < 1e-6) {
        EXPECT_NEAR(fd, exact, 1e-8) << name;
      } else {
        EXPECT_LE(relative_error(exact, fd), 1e-6) << name;
      }
    }
  }
}

TEST(Differential, VanishesAtSingleNodeGibbs) {
  const auto m = test::fixture("single_node");
  const auto& h = m.hamiltonian(0);
  const double z = std::exp(-h[0]) + std::exp(-h[1]);
  const PseudoMarginals gibbs{{Table{std::exp(-h[0]) / z, std::exp(-h[1]) / z}}};
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(bethe_differential(m, gibbs, test::random_tangent(m, rng)), 0.0, 1e-15);
  EXPECT_LE(projected_gradient_norm(m, gibbs), 1e-10);
}

TEST(ProjectedGradient, P3ExactMarginalsAreCritical) {
  const auto m = test::fixture("p3");
  EXPECT_LE(projected_gradient_norm(m, exact_gibbs(m).marginals), 1e-8);
}

TEST(ProjectedGradient, RandomPointsAreNotCritical) {
  const auto m = test::fixture("p3");
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_GT(projected_gradient_norm(m, sample_pseudomarginals(m, seed, SampleMode::perturbed)), 1e-3);
}
