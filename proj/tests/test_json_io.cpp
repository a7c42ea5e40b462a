#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "test_support.hpp"

using namespace bethe;

TEST(Parse, ReportsLineAndColumn) {
  try {
    io::parse("{\n  \"a\": 1,\n  \"b\": ]\n}", "sample");
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "malformed JSON in sample at line 3, column 8");
  }
  EXPECT_THROW(io::parse(""), ValidationError);
  EXPECT_THROW(io::read_file("/nonexistent/model.json"), ValidationError);
}

TEST(Dump, DoublesRoundTripBitExactly) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1e3);
  io::Json arr = io::Json::array();
  std::vector<double> values = {0.1, 1.0 / 3.0, -0.0, 1e-300, 5e-324, 1.7976931348623157e308, 2.0, -7.0};
  for (int k = 0; k < 200; ++k) values.push_back(normal(rng));
  for (double v : values) arr.push_back(v);
  const auto back = io::parse(io::dump(arr));
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = back[k].get<double>();
    EXPECT_EQ(std::memcmp(&v, &values[k], sizeof v), 0) << values[k];
  }
}

TEST(Dump, Formatting) {
  io::Json j = io::Json::object();
  j["a"] = 1.0;
  j["b"] = io::Json::array({0.5, 2});
  j["c"] = io::Json::object();
  j["c"]["d"] = "x";
  EXPECT_EQ(io::dump(j), "{\n  \"a\": 1.0,\n  \"b\": [0.5, 2],\n  \"c\": {\n    \"d\": \"x\"\n  }\n}\n");  // indented output ends with a newline
  EXPECT_EQ(io::dump(j, -1), "{\"a\":1.0,\"b\":[0.5,2],\"c\":{\"d\":\"x\"}}");
  EXPECT_EQ(io::dump(io::Json::array()), "[]\n");
}

TEST(Hash, StableAndSensitive) {
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
  const auto m = test::fixture("p3");
  EXPECT_EQ(io::model_hash(m), io::model_hash(test::fixture("p3")));
  auto t = m.hamiltonians();
  t[0][0] = std::nextafter(t[0][0], 1.0);
  EXPECT_NE(io::model_hash(m), io::model_hash(m.with_hamiltonians(t)));
}

TEST(Model, FixturesRoundTrip) {
  for (const auto& name : test::all_fixtures()) {
    const auto m = test::fixture(name);
    const auto text = io::dump(io::model_to_json(m));
    EXPECT_EQ(io::model_from_json(io::parse(text)), m) << name;
    EXPECT_EQ(io::dump(io::model_to_json(io::model_from_json(io::parse(text)))), text) << name;
  }
}

TEST(Model, ReducedModelsUseExtendedForm) {
  std::mt19937_64 rng(2);
  for (const auto& name : test::all_fixtures()) {
    const auto trace = reduce_to_core(test::fixture(name));
    for (const auto& step : trace.steps) {
      const auto j = io::model_to_json(*step.result);
      EXPECT_EQ(j.contains("regions"), !step.result->is_hypergraph_model());
      EXPECT_EQ(io::model_from_json(io::parse(io::dump(j))), *step.result) << name;
    }
  }
}

TEST(Model, KeysAreCanonicalized) {
  const auto m = io::model_from_json(io::parse(R"({
    "variables": {"b": 2, "a": 3},
    "hyperedges": [["b", "a"]],
    "hamiltonians": {"b,a": [1, 2, 3, 4, 5, 6], "a": [0.5, 0, 0]}
  })"));
  EXPECT_EQ(m.variables()[0].id, "a");
  EXPECT_EQ(m.hamiltonian(m.region_index("a,b")), (Table{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(m.hamiltonian(m.region_index("a")), (Table{0.5, 0, 0}));
  EXPECT_EQ(m.hamiltonian(m.region_index("b")), (Table{0, 0}));
}

TEST(Model, IntegerIdsAndSingletonEdges) {
  const auto m = io::model_from_json(io::parse(R"({"variables": {"7": 2}, "hyperedges": [[7]],
                                                   "hamiltonians": {"{7}": [1, -1]}})"));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.region(1).key, "{7}");
  EXPECT_EQ(m.hamiltonian(1), (Table{1, -1}));
}

TEST(Model, FactorsMapThroughZeta) {
  const auto m = io::model_from_json(io::parse(R"({
    "variables": {"1": 2, "2": 2},
    "hyperedges": [["1", "2"]],
    "factors": {"1": [1, 2], "1,2": [1, 1, 1, 4]}
  })"));
  const auto& h1 = m.hamiltonian(m.region_index("1"));
  const auto& h12 = m.hamiltonian(m.region_index("1,2"));
  EXPECT_NEAR(h1[1], -std::log(2.0), 1e-15);
  EXPECT_NEAR(h12[3], -std::log(2.0) - std::log(4.0), 1e-15);
  EXPECT_NEAR(h12[0], 0.0, 1e-15);
  const auto ex = exact_gibbs(m);
  EXPECT_NEAR(ex.log_partition, std::log(1 + 1 + 2 + 8.0), 1e-14);
}

TEST(Model, Errors) {
  const char* bad[] = {
      R"([])",
      R"({"hyperedges": []})",
      R"({"variables": {"1": 0}})",
      R"({"variables": {"1": 1.5}})",
      R"({"variables": {"1": 2}, "hyperedges": [["1", "2"]]})",
      R"({"variables": {"1": 2}, "hyperedges": "x"})",
      R"({"variables": {"1": 2}, "hamiltonians": {"1": [0]}})",
      R"({"variables": {"1": 2}, "hamiltonians": {"9": [0, 0]}})",
      R"({"variables": {"1": 2}, "hamiltonians": {"1": [0, "x"]}})",
      R"({"variables": {"1": 2}, "hamiltonians": {"1": [0, 0]}, "factors": {"1": [1, 1]}})",
      R"({"variables": {"1": 2}, "factors": {"1": [1, 0]}})",
      R"({"variables": {"1": 2, "2": 2}, "hyperedges": [["1"], ["1", "2"]]})",
      R"({"variables": {"1": 2}, "regions": [{"key": "1", "kind": "loop", "variables": ["1"]}]})",
      R"({"variables": {"1": 2}, "regions": [{"key": "1", "kind": "vertex", "variables": ["3"]}]})",
  };
  for (const char* text : bad) EXPECT_THROW(io::model_from_json(io::parse(text)), ValidationError) << text;
}

TEST(Poset, RoundTrip) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const auto p = test::random_chain1_poset(rng, 12);
    const auto back = io::poset_from_json(io::parse(io::dump(io::poset_to_json(p))));
    EXPECT_EQ(back.ids(), p.ids());
    EXPECT_EQ(back.cover_pairs(), p.cover_pairs());
  }
  EXPECT_THROW(io::poset_from_json(io::parse(R"({"covers": []})")), ValidationError);
  EXPECT_THROW(io::poset_from_json(io::parse(R"({"elements": ["a"], "covers": [["a"]]})")), ValidationError);
}

TEST(Beliefs, RoundTripAndValidation) {
  const auto m = test::fixture("triangle_pendant");
  const auto q = sample_pseudomarginals(m, 4);
  EXPECT_EQ(io::beliefs_from_json(m, io::parse(io::dump(io::beliefs_to_json(m, q)))), q);
  auto j = io::beliefs_to_json(m, q);
  j.erase("3,4");
  EXPECT_THROW(io::beliefs_from_json(m, j), ValidationError);
  j = io::beliefs_to_json(m, q);
  j["1"] = io::Json::array({1.0});
  EXPECT_THROW(io::beliefs_from_json(m, j), ValidationError);
  EXPECT_THROW(io::beliefs_from_json(m, io::Json::array()), ValidationError);
}

TEST(Trace, RoundTripIsBitExact) {
  std::mt19937_64 rng(4);
  std::vector<FactorModel> models;
  for (const auto& name : test::all_fixtures()) models.push_back(test::fixture(name));
  for (int k = 0; k < 10; ++k) models.push_back(test::random_tree_model(rng, 5, 3, 2.0));
  for (const auto& m : models) {
    const auto trace = reduce_to_core(m);
    const auto text = io::dump(io::trace_to_json(trace));
    const auto back = io::trace_from_json(io::parse(text));
    EXPECT_EQ(back.final_model, trace.final_model);
    ASSERT_EQ(back.steps.size(), trace.steps.size());
    for (std::size_t k = 0; k < back.steps.size(); ++k) {
      EXPECT_EQ(back.steps[k].kernel, trace.steps[k].kernel);
      EXPECT_EQ(back.steps[k].hhat, trace.steps[k].hhat);
      EXPECT_EQ(back.steps[k].rewrites, trace.steps[k].rewrites);
      EXPECT_EQ(back.steps[k].target_counting, trace.steps[k].target_counting);
    }
    EXPECT_EQ(io::dump(io::trace_to_json(back)), text);
  }
}

TEST(Trace, TamperedTraceRejected) {
  const auto trace = reduce_to_core(test::fixture("triangle_pendant"));
  auto j = io::trace_to_json(trace);
  j["steps"][1]["rewrites"][0]["table"][0] = 0.25;
  EXPECT_THROW(io::trace_from_json(j), ValidationError);
  j = io::trace_to_json(trace);
  j["steps"][0]["removed"] = "1";
  EXPECT_THROW(io::trace_from_json(j), ValidationError);
  j = io::trace_to_json(trace);
  j["steps"][1]["rewrites"][0]["kind"] = "other";
  EXPECT_THROW(io::trace_from_json(j), ValidationError);
}
