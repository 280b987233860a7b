#pragma once

#include <utility>
#include <vector>

#include "drra/rng.hpp"

namespace drra {

// Undirected communication graph on vertices {1..n}. Adjacency lists are
// sorted ascending and contain no self-loops. Immutable after construction.
class Graph {
 public:
  Graph() = default;
  // Edges are unordered {i, j} pairs with 1-based ids. Duplicates are merged.
  Graph(int n, const std::vector<std::pair<int, int>>& edges);

  int n() const { return n_; }
  const std::vector<int>& neighbors(int i) const;
  bool connected() const;
  std::vector<std::pair<int, int>> edges() const;

 private:
  int n_ = 0;
  std::vector<std::vector<int>> adj_;  // index 0 unused; ids are 1-based
};

// Leaders of one iteration. Invariant: closed neighborhoods of distinct
// leaders are pairwise disjoint.
struct UpdateSet {
  std::vector<int> leaders;  // sorted ascending
};

// Neighbors of i plus i itself, sorted ascending.
std::vector<int> closed_neighborhood(const Graph& g, int i);

// True iff the closed neighborhoods of all leader pairs are disjoint.
bool verify_nonconflict(const Graph& g, const UpdateSet& u);

// Voting rule applied to given per-node draws v[0..n-1] (v[i-1] is node i's
// draw). Each node votes for the smallest-draw member of its closed
// neighborhood, ties broken toward the smaller id; a node leads iff it
// collects every vote from its own closed neighborhood.
UpdateSet voting_from_draws(const Graph& g, const std::vector<double>& v);

// Draws one uniform number per node in id order, then applies the voting
// rule. The returned set is never empty and always conflict-free.
UpdateSet voting_select(const Graph& g, Rng& rng);

}  // namespace drra
