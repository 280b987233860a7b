#include "drra/network.hpp"

#include <gtest/gtest.h>

#include <vector>

#include "drra/bench.hpp"
#include "drra/error.hpp"
#include "test_util.hpp"

using namespace drra;

TEST(ClosedNeighborhood, PathAndStarExamples) {
  const Graph path = testutil::path_graph(3);
  EXPECT_EQ(closed_neighborhood(path, 2), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(closed_neighborhood(path, 1), (std::vector<int>{1, 2}));
  const Graph star = testutil::star_graph(5);
  EXPECT_EQ(closed_neighborhood(star, 1), (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_EQ(closed_neighborhood(star, 3), (std::vector<int>{1, 3}));
}

TEST(ClosedNeighborhood, RejectsOutOfRangeIds) {
  const Graph g = testutil::path_graph(3);
  EXPECT_THROW(closed_neighborhood(g, 0), ValidationError);
  EXPECT_THROW(closed_neighborhood(g, 4), ValidationError);
}

TEST(VotingFromDraws, ThreeNodePathExample) {
  const UpdateSet u = voting_from_draws(testutil::path_graph(3), {0.1, 0.5, 0.9});
  EXPECT_EQ(u.leaders, (std::vector<int>{1}));
}

TEST(VotingFromDraws, FiveNodePathExample) {
  const UpdateSet u = voting_from_draws(testutil::path_graph(5), {0.1, 0.5, 0.9, 0.6, 0.2});
  EXPECT_EQ(u.leaders, (std::vector<int>{1, 5}));
}

TEST(VotingFromDraws, SingleNodeAlwaysLeads) {
  const Graph g(1, {});
  Rng rng(0);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(voting_select(g, rng).leaders, (std::vector<int>{1}));
}

TEST(VotingFromDraws, TiesBreakTowardSmallerId) {
  const UpdateSet u = voting_from_draws(testutil::path_graph(3), {0.5, 0.5, 0.9});
  EXPECT_EQ(u.leaders, (std::vector<int>{1}));
}

TEST(VerifyNonconflict, Examples) {
  const Graph path5 = testutil::path_graph(5);
  EXPECT_TRUE(verify_nonconflict(path5, UpdateSet{{1, 5}}));
  const Graph path3 = testutil::path_graph(3);
  EXPECT_FALSE(verify_nonconflict(path3, UpdateSet{{1, 3}}));
  EXPECT_TRUE(verify_nonconflict(path3, UpdateSet{{}}));
}

TEST(VotingSelect, AlwaysNonconflictingAndNonempty) {
  Rng graph_rng(42);
  Rng vote_rng(43);
  int draws = 0;
  while (draws < 10000) {
    const int n = 2 + static_cast<int>(graph_rng.next_index(29));
    const Graph g = random_connected_graph(n, graph_rng);
    for (int rep = 0; rep < 25 && draws < 10000; ++rep, ++draws) {
      const UpdateSet u = voting_select(g, vote_rng);
      ASSERT_FALSE(u.leaders.empty());
      ASSERT_TRUE(verify_nonconflict(g, u));
    }
  }
}

TEST(VotingSelect, SelectionFrequencyMeetsAssumedLowerBound) {
  const int n = 10;
  const Graph g = testutil::path_graph(n);
  Rng rng(7);
  std::vector<int> hits(n + 1, 0);
  const int draws = 100000;
  for (int k = 0; k < draws; ++k)
    for (int leader : voting_select(g, rng).leaders) ++hits[leader];
  for (int i = 1; i <= n; ++i)
    EXPECT_GE(static_cast<double>(hits[i]) / draws, 1.0 / (2.0 * n)) << "node " << i;
}

TEST(VotingSelect, DeterministicUnderSeed) {
  const Graph g = testutil::path_graph(12);
  Rng a(123), b(123);
  for (int k = 0; k < 200; ++k) EXPECT_EQ(voting_select(g, a).leaders, voting_select(g, b).leaders);
}

TEST(Graph, RejectsMalformedEdges) {
  EXPECT_THROW(Graph(3, {{1, 1}}), ValidationError);
  EXPECT_THROW(Graph(3, {{0, 1}}), ValidationError);
  EXPECT_THROW(Graph(3, {{1, 4}}), ValidationError);
}

TEST(Graph, ConnectivityDetection) {
  EXPECT_TRUE(testutil::path_graph(6).connected());
  EXPECT_FALSE(Graph(4, {{1, 2}, {3, 4}}).connected());
  EXPECT_TRUE(Graph(1, {}).connected());
}
