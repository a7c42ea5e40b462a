#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace bethe;

namespace {

FactorModel p3_model() {
  return FactorModel::from_hypergraph({{"1", 2}, {"2", 3}, {"3", 2}}, {{"1", "2"}, {"2", "3"}});
}

std::vector<Table> random_tables(const FactorModel& m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Table> t;
  for (std::size_t a = 0; a < m.size(); ++a) {
    t.emplace_back(m.states(a));
    for (auto& v : t.back()) v = normal(rng);
  }
  return t;
}

}  // namespace

TEST(Hypergraph, SingletonChain) {
  const auto p = poset_of_hypergraph({"i"}, {{"i"}});
  ASSERT_EQ(p.size(), 2u);
  EXPECT_TRUE(p.less(p.index_of("i"), p.index_of("{i}")));
}

TEST(Hypergraph, P3Poset) {
  const auto p = poset_of_hypergraph({"1", "2", "3"}, {{"1", "2"}, {"2", "3"}});
  EXPECT_EQ(p.size(), 5u);
  EXPECT_EQ(p.cover_pairs().size(), 4u);
  EXPECT_LE(p.height(), 1u);
}

TEST(Hypergraph, Antichain) {
  const auto p = poset_of_hypergraph({"1"}, {});
  EXPECT_EQ(p.size(), 1u);
  EXPECT_TRUE(p.cover_pairs().empty());
}

TEST(Hypergraph, Errors) {
  EXPECT_THROW(poset_of_hypergraph({"1"}, {{"1", "9"}}), ValidationError);
  EXPECT_THROW(poset_of_hypergraph({"1", "2"}, {{"1", "2"}, {"2", "1"}}), ValidationError);
  EXPECT_THROW(poset_of_hypergraph({"1"}, {{}}), ValidationError);
  // Nested hyperedges would create chains of length 2.
  EXPECT_THROW(FactorModel::from_hypergraph({{"1", 2}, {"2", 2}}, {{"1"}, {"1", "2"}}), ValidationError);
  EXPECT_THROW(FactorModel::from_hypergraph({{"1", 0}}, {}), ValidationError);
  EXPECT_THROW(FactorModel::from_hypergraph({{"a,b", 2}}, {}), ValidationError);
}

TEST(Hypergraph, RandomModelsHaveChainsOfLengthAtMostOne) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = test::random_hypergraph_model(rng, 5, 4, 3, 3);
    EXPECT_LE(m.poset().height(), 1u);
    EXPECT_TRUE(m.is_hypergraph_model());
  }
}

TEST(Model, NaturalOrderAndRowMajorProjection) {
  const auto m = FactorModel::from_hypergraph({{"10", 2}, {"9", 3}}, {{"10", "9"}});
  EXPECT_EQ(m.variables()[0].id, "9");
  EXPECT_EQ(m.region(2).key, "9,10");
  // Edge table over (x9, x10) with x10 fastest: entry 3 = (x9=1, x10=1).
  const auto to9 = m.projection(2, 0), to10 = m.projection(2, 1);
  EXPECT_EQ(to9[3], 1u);
  EXPECT_EQ(to10[3], 1u);
  EXPECT_EQ(to9[5], 2u);
  EXPECT_EQ(to10[4], 0u);
  EXPECT_EQ(m.states(2), 6u);
}

TEST(Model, CountingOfGraphs) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = test::random_hypergraph_model(rng, 6, 6, 2, 2);
    for (std::size_t a = 0; a < m.size(); ++a) {
      if (m.region(a).kind == RegionKind::hyperedge) {
        EXPECT_EQ(m.counting(a), 1);
      } else {
        EXPECT_EQ(m.counting(a), 1 - static_cast<long long>(m.covers_above(a).size()));
      }
    }
  }
}

TEST(Model, TableValidation) {
  const auto m = p3_model();
  auto t = m.hamiltonians();
  t[3].pop_back();
  EXPECT_THROW(m.with_hamiltonians(t), ValidationError);
  t = m.hamiltonians();
  t[0][0] = std::nan("");
  EXPECT_THROW(m.with_hamiltonians(t), ValidationError);
}

TEST(Model, RejectsNonInclusionOrder) {
  std::vector<Variable> vars = {{"1", 2}, {"2", 2}};
  std::vector<Region> regions = {{"1", RegionKind::vertex, {0}}, {"2", RegionKind::vertex, {1}}};
  const auto p = Poset::from_covers({"1", "2"}, {{"1", "2"}});
  EXPECT_THROW(FactorModel(vars, regions, p, {Table(2, 0.0), Table(2, 0.0)}), ValidationError);
}

TEST(Model, WithoutRegionKeepsOrphans) {
  const auto m = p3_model();
  const auto r = m.without_region(m.region_index("1"));
  EXPECT_EQ(r.size(), 4u);
  EXPECT_EQ(r.variables().size(), 3u);
  EXPECT_FALSE(r.is_hypergraph_model());
  EXPECT_EQ(r.hamiltonian(r.region_index("1,2")), m.hamiltonian(m.region_index("1,2")));
}

TEST(Zeta, AllOnesFactorsGiveZeroHamiltonians) {
  const auto m = p3_model();
  std::vector<Table> zero;
  for (std::size_t a = 0; a < m.size(); ++a) zero.emplace_back(m.states(a), 0.0);
  EXPECT_EQ(zeta_hamiltonians(m, zero), zero);
  EXPECT_EQ(mobius_factors(m, zero), zero);
}

TEST(Zeta, SingleRegion) {
  const auto m = FactorModel::from_hypergraph({{"i", 3}}, {});
  const std::vector<Table> lf = {{0.1, -0.2, 0.7}};
  const auto h = zeta_hamiltonians(m, lf);
  EXPECT_EQ(h[0], (Table{-0.1, 0.2, -0.7}));
  EXPECT_EQ(mobius_factors(m, h)[0], h[0]);  // vertex: -ln f_i = H_i
}

TEST(Zeta, P3EdgeAgainstExplicitLoop) {
  std::mt19937_64 rng(2);
  const auto m = p3_model();
  const auto lf = random_tables(m, rng);
  const auto h = zeta_hamiltonians(m, lf);
  const auto a = m.region_index("1,2"), i1 = m.region_index("1"), i2 = m.region_index("2");
  for (std::size_t x1 = 0; x1 < 2; ++x1)
    for (std::size_t x2 = 0; x2 < 3; ++x2) {
      const double expected = -lf[a][x1 * 3 + x2] - lf[i1][x1] - lf[i2][x2];
      EXPECT_NEAR(h[a][x1 * 3 + x2], expected, 1e-15);
    }
}

TEST(Zeta, RoundTripsOnRandomModels) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const auto m = test::random_hypergraph_model(rng, 5, 4, 3, 3);
    const auto l = random_tables(m, rng);
    // mobius_factors returns -ln f, so the inversion carries a sign.
    auto neg = l;
    for (auto& t : neg)
      for (auto& v : t) v = -v;
    EXPECT_LE(table_distance(mobius_factors(m, zeta_hamiltonians(m, l)), neg), 1e-12);
    EXPECT_LE(table_distance(zeta_hamiltonians(m, mobius_factors(m, l)), neg), 1e-12);
  }
}

TEST(Zeta, DimensionMismatch) {
  const auto m = p3_model();
  EXPECT_THROW(zeta_hamiltonians(m, {Table{0.0}}), ValidationError);
  EXPECT_THROW(mobius_factors(m, {Table{0.0}}), ValidationError);
}
