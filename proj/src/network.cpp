#include "drra/network.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

#include "drra/error.hpp"

namespace drra {

Graph::Graph(int n, const std::vector<std::pair<int, int>>& edges) : n_(n) {
  if (n < 1) throw ValidationError("graph needs at least one vertex, got n=" + std::to_string(n));
  adj_.assign(static_cast<std::size_t>(n) + 1, {});
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : edges) {
    if (a < 1 || a > n || b < 1 || b > n)
      throw ValidationError("edge {" + std::to_string(a) + "," + std::to_string(b) +
                            "} out of range for n=" + std::to_string(n));
    if (a == b) throw ValidationError("self-loop at vertex " + std::to_string(a));
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) continue;
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }
  for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

const std::vector<int>& Graph::neighbors(int i) const {
  if (i < 1 || i > n_) throw ValidationError("vertex id " + std::to_string(i) + " out of range");
  return adj_[i];
}

bool Graph::connected() const {
  if (n_ == 0) return false;
  std::vector<char> vis(static_cast<std::size_t>(n_) + 1, 0);
  std::vector<int> stack{1};
  vis[1] = 1;
  int count = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj_[v]) {
      if (!vis[w]) {
        vis[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n_;
}

std::vector<std::pair<int, int>> Graph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 1; i <= n_; ++i)
    for (int j : adj_[i])
      if (i < j) out.emplace_back(i, j);
  return out;
}

std::vector<int> closed_neighborhood(const Graph& g, int i) {
  std::vector<int> nb = g.neighbors(i);
  nb.insert(std::lower_bound(nb.begin(), nb.end(), i), i);
  return nb;
}

bool verify_nonconflict(const Graph& g, const UpdateSet& u) {
  std::vector<char> claimed(static_cast<std::size_t>(g.n()) + 1, 0);
  for (int leader : u.leaders) {
    for (int j : closed_neighborhood(g, leader)) {
      if (claimed[j]) return false;
      claimed[j] = 1;
    }
  }
  return true;
}

UpdateSet voting_from_draws(const Graph& g, const std::vector<double>& v) {
  const int n = g.n();
  if (static_cast<int>(v.size()) != n)
    throw ValidationError("need one draw per node, got " + std::to_string(v.size()));

  // Node i votes for the (v, id)-lexicographic minimum of its closed
  // neighborhood; smaller id wins ties.
  std::vector<int> vote(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    int best = i;
    for (int j : closed_neighborhood(g, i)) {
      if (v[j - 1] < v[best - 1] || (v[j - 1] == v[best - 1] && j < best)) best = j;
    }
    vote[i] = best;
  }

  UpdateSet u;
  for (int i = 1; i <= n; ++i) {
    bool all_votes = true;
    for (int j : closed_neighborhood(g, i)) {
      if (vote[j] != i) {
        all_votes = false;
        break;
      }
    }
    if (all_votes) u.leaders.push_back(i);
  }
  return u;
}

UpdateSet voting_select(const Graph& g, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(g.n()));
  for (double& d : v) d = rng.next_unit();
  return voting_from_draws(g, v);
}

}  // namespace drra
