#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dadmm/eigensolve.hpp"

namespace dadmm {

/// Undirected, connected agent network. Immutable after construction and
/// safe to share read-only across concurrent agent updates.
class Graph {
 public:
  /// Builds from a symmetric 0/1 adjacency matrix with zero diagonal.
  /// Throws unless the graph is connected.
  explicit Graph(Eigen::MatrixXi adjacency) : adj_(std::move(adjacency)) {
    const Eigen::Index n = adj_.rows();
    if (n < 2 || adj_.cols() != n) {
      throw std::invalid_argument("Graph: adjacency must be square with at least 2 agents");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (adj_(i, i) != 0) throw std::invalid_argument("Graph: self-loops are not allowed");
      for (Eigen::Index j = 0; j < n; ++j) {
        if (adj_(i, j) != 0 && adj_(i, j) != 1) {
          throw std::invalid_argument("Graph: adjacency entries must be 0 or 1");
        }
        if (adj_(i, j) != adj_(j, i)) {
          throw std::invalid_argument("Graph: adjacency must be symmetric");
        }
      }
    }
    neighbors_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (adj_(i, j) == 1) neighbors_[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
      }
    }
    if (!connected_from(adj_)) {
      throw std::invalid_argument("Graph: graph must be connected");
    }
  }

  int n_agents() const { return static_cast<int>(adj_.rows()); }
  const Eigen::MatrixXi& adjacency() const { return adj_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_.at(static_cast<std::size_t>(i)); }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  static bool connected_from(const Eigen::MatrixXi& adj) {
    const Eigen::Index n = adj.rows();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = 1;
    Eigen::Index count = 1;
    while (!frontier.empty()) {
      const Eigen::Index u = frontier.front();
      frontier.pop();
      for (Eigen::Index v = 0; v < n; ++v) {
        if (adj(u, v) == 1 && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          frontier.push(v);
        }
      }
    }
    return count == n;
  }

 private:
  Eigen::MatrixXi adj_;
  std::vector<std::vector<int>> neighbors_;
};

/// Breadth-first reachability from agent 0.
inline bool is_connected(const Graph& g) { return Graph::connected_from(g.adjacency()); }

/// Two-colorability by breadth-first search (graph assumed connected).
inline bool is_bipartite(const Graph& g) {
  const int n = g.n_agents();
  std::vector<int> color(static_cast<std::size_t>(n), -1);
  std::queue<int> frontier;
  frontier.push(0);
  color[0] = 0;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : g.neighbors(u)) {
      if (color[static_cast<std::size_t>(v)] == -1) {
        color[static_cast<std::size_t>(v)] = 1 - color[static_cast<std::size_t>(u)];
        frontier.push(v);
      } else if (color[static_cast<std::size_t>(v)] == color[static_cast<std::size_t>(u)]) {
        return false;
      }
    }
  }
  return true;
}

/// Spectral quantities consumed by the step-size conditions: the Laplacian
/// L = D - W and lambda_min(D + W), which is zero exactly when a connected
/// graph is bipartite.
struct GraphSpectrum {
  Eigen::MatrixXd laplacian;
  double lambda_min_d_plus_w = 0.0;
  bool bipartite = false;
};

inline GraphSpectrum compute_spectrum(const Graph& g) {
  const int n = g.n_agents();
  Eigen::MatrixXd w = g.adjacency().cast<double>();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) d(i, i) = static_cast<double>(g.degree(i));

  GraphSpectrum spec;
  spec.laplacian = d - w;
  spec.bipartite = is_bipartite(g);

  const Eigen::VectorXd evals = symmetric_eigenvalues(d + w);
  double lmin = evals.minCoeff();
  const double lmax = std::max(evals.maxCoeff(), 1.0);
  if (std::abs(lmin) <= 1e-12 * lmax) lmin = 0.0;
  spec.lambda_min_d_plus_w = lmin;
  return spec;
}

/// Symmetric Erdos-Renyi sample, resampled until connected (bounded retries).
/// With force_non_bipartite, one chord closing an odd cycle is added whenever
/// the connected sample happens to be bipartite.
inline Graph generate_connected_graph(int n_agents, double edge_probability, std::uint64_t seed,
                                      bool force_non_bipartite, int max_retries = 1000) {
  if (n_agents < 2) throw std::invalid_argument("generate_connected_graph: need at least 2 agents");
  if (!(edge_probability > 0.0) || edge_probability > 1.0) {
    throw std::invalid_argument("generate_connected_graph: edge_probability must be in (0, 1]");
  }
  if (force_non_bipartite && n_agents == 2) {
    throw std::invalid_argument(
        "generate_connected_graph: no non-bipartite graph exists on 2 agents");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(n_agents, n_agents);
    for (int i = 0; i < n_agents; ++i) {
      for (int j = i + 1; j < n_agents; ++j) {
        if (unif(rng) < edge_probability) {
          adj(i, j) = 1;
          adj(j, i) = 1;
        }
      }
    }
    if (!Graph::connected_from(adj)) continue;

    Graph g(adj);
    if (force_non_bipartite && is_bipartite(g)) {
      // Proper 2-coloring exists; joining two same-color non-adjacent agents
      // closes an odd cycle.
      std::vector<int> color(static_cast<std::size_t>(n_agents), -1);
      std::queue<int> frontier;
      frontier.push(0);
      color[0] = 0;
      while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v : g.neighbors(u)) {
          if (color[static_cast<std::size_t>(v)] == -1) {
            color[static_cast<std::size_t>(v)] = 1 - color[static_cast<std::size_t>(u)];
            frontier.push(v);
          }
        }
      }
      bool added = false;
      for (int i = 0; i < n_agents && !added; ++i) {
        for (int j = i + 1; j < n_agents && !added; ++j) {
          if (adj(i, j) == 0 && color[static_cast<std::size_t>(i)] == color[static_cast<std::size_t>(j)]) {
            adj(i, j) = 1;
            adj(j, i) = 1;
            added = true;
          }
        }
      }
      if (!added) continue;  // complete bipartite on tiny n; resample
      return Graph(adj);
    }
    return g;
  }
  throw std::runtime_error("generate_connected_graph: no connected sample within " +
                           std::to_string(max_retries) +
                           " retries; increase edge_probability or the retry budget");
}

/// Edge-list text format: header "agents N", then one "i j" pair per line,
/// 0-indexed, each undirected edge listed once with i < j.
inline void write_edge_list(const Graph& g, std::ostream& out) {
  out << "agents " << g.n_agents() << "\n";
  for (int i = 0; i < g.n_agents(); ++i) {
    for (int j : g.neighbors(i)) {
      if (i < j) out << i << " " << j << "\n";
    }
  }
}

inline Graph read_edge_list(std::istream& in) {
  std::string tag;
  int n = 0;
  if (!(in >> tag >> n) || tag != "agents") {
    throw std::invalid_argument("read_edge_list: expected header line 'agents N'");
  }
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(n, n);
  int i = 0, j = 0;
  while (in >> i >> j) {
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
      throw std::invalid_argument("read_edge_list: invalid edge " + std::to_string(i) + " " +
                                  std::to_string(j));
    }
    adj(i, j) = 1;
    adj(j, i) = 1;
  }
  return Graph(adj);
}

}  // namespace dadmm
