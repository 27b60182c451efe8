#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <random>
#include <sstream>

#include "dadmm/graph.hpp"

using dadmm::Graph;

namespace {

Eigen::MatrixXi path_graph(int n) {
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    adj(i, i + 1) = 1;
    adj(i + 1, i) = 1;
  }
  return adj;
}

Eigen::MatrixXi cycle_graph(int n) {
  Eigen::MatrixXi adj = path_graph(n);
  adj(0, n - 1) = 1;
  adj(n - 1, 0) = 1;
  return adj;
}

Eigen::MatrixXi complete_graph(int n) {
  Eigen::MatrixXi adj = Eigen::MatrixXi::Constant(n, n, 1);
  adj.diagonal().setZero();
  return adj;
}

// Independent bipartiteness oracle: try all 2^n colorings.
bool bipartite_exhaustive(const Eigen::MatrixXi& adj) {
  const int n = static_cast<int>(adj.rows());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    bool proper = true;
    for (int i = 0; i < n && proper; ++i) {
      for (int j = i + 1; j < n && proper; ++j) {
        if (adj(i, j) == 1 && ((mask >> i) & 1u) == ((mask >> j) & 1u)) proper = false;
      }
    }
    if (proper) return true;
  }
  return false;
}

double lambda_min_dw_oracle(const Graph& g) {
  const int n = g.n_agents();
  Eigen::MatrixXd dw = g.adjacency().cast<double>();
  for (int i = 0; i < n; ++i) dw(i, i) = g.degree(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dw);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("construction rejects malformed adjacency") {
  Eigen::MatrixXi self_loop = complete_graph(3);
  self_loop(0, 0) = 1;
  CHECK_THROWS_AS(Graph(self_loop), std::invalid_argument);

  Eigen::MatrixXi asym = complete_graph(3);
  asym(0, 1) = 0;
  CHECK_THROWS_AS(Graph(asym), std::invalid_argument);

  Eigen::MatrixXi disconnected = Eigen::MatrixXi::Zero(4, 4);
  disconnected(0, 1) = disconnected(1, 0) = 1;
  disconnected(2, 3) = disconnected(3, 2) = 1;
  CHECK_THROWS_AS(Graph(disconnected), std::invalid_argument);

  CHECK_THROWS_AS(Graph(Eigen::MatrixXi::Zero(1, 1)), std::invalid_argument);
}

TEST_CASE("connectivity of small graphs") {
  CHECK(dadmm::is_connected(Graph(complete_graph(2))));
  CHECK(dadmm::is_connected(Graph(path_graph(4))));
  Eigen::MatrixXi disconnected = Eigen::MatrixXi::Zero(4, 4);
  disconnected(0, 1) = disconnected(1, 0) = 1;
  disconnected(2, 3) = disconnected(3, 2) = 1;
  CHECK_FALSE(Graph::connected_from(disconnected));
}

TEST_CASE("bipartiteness of small graphs") {
  CHECK(dadmm::is_bipartite(Graph(cycle_graph(4))));
  CHECK_FALSE(dadmm::is_bipartite(Graph(complete_graph(3))));
  CHECK(dadmm::is_bipartite(Graph(path_graph(3))));
}

TEST_CASE("spectrum of the two-agent and cycle graphs") {
  const auto k2 = dadmm::compute_spectrum(Graph(complete_graph(2)));
  CHECK(k2.lambda_min_d_plus_w == 0.0);
  CHECK(k2.bipartite);

  const auto c4 = dadmm::compute_spectrum(Graph(cycle_graph(4)));
  CHECK(c4.lambda_min_d_plus_w == 0.0);
  CHECK(c4.bipartite);

  const auto k3 = dadmm::compute_spectrum(Graph(complete_graph(3)));
  CHECK_FALSE(k3.bipartite);
  CHECK(k3.lambda_min_d_plus_w == Catch::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("laplacian rows sum to zero") {
  const auto spec = dadmm::compute_spectrum(Graph(complete_graph(5)));
  const Eigen::VectorXd row_sums = spec.laplacian * Eigen::VectorXd::Ones(5);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(row_sums(i)) < 1e-12);
}

TEST_CASE("generated graphs: connected, reproducible, optionally non-bipartite") {
  const Graph a = dadmm::generate_connected_graph(8, 0.3, 7, true);
  const Graph b = dadmm::generate_connected_graph(8, 0.3, 7, true);
  CHECK(a.adjacency() == b.adjacency());
  CHECK(dadmm::is_connected(a));
  CHECK_FALSE(dadmm::is_bipartite(a));

  const Graph k2 = dadmm::generate_connected_graph(2, 1.0, 3, false);
  CHECK(k2.adjacency() == complete_graph(2));

  const Graph k3 = dadmm::generate_connected_graph(3, 1.0, 11, false);
  CHECK(k3.adjacency() == complete_graph(3));

  CHECK_THROWS_AS(dadmm::generate_connected_graph(1, 0.5, 1, false), std::invalid_argument);
  CHECK_THROWS_AS(dadmm::generate_connected_graph(2, 1.0, 1, true), std::invalid_argument);
  CHECK_THROWS_WITH(dadmm::generate_connected_graph(40, 1e-6, 1, false, 5),
                    Catch::Matchers::ContainsSubstring("5 retries"));
}

TEST_CASE("spectral sign matches bipartiteness on random graphs") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> size(2, 12);
  std::uniform_real_distribution<double> density(0.2, 0.9);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = size(rng);
    const Graph g = dadmm::generate_connected_graph(n, density(rng), rng(), false);
    const auto spec = dadmm::compute_spectrum(g);

    const bool bip = bipartite_exhaustive(g.adjacency());
    CHECK(bip == dadmm::is_bipartite(g));
    CHECK(bip == spec.bipartite);

    const double oracle = lambda_min_dw_oracle(g);
    CHECK(spec.lambda_min_d_plus_w == Catch::Approx(oracle).margin(1e-8));

    Eigen::MatrixXd dw = g.adjacency().cast<double>();
    for (int i = 0; i < n; ++i) dw(i, i) = g.degree(i);
    const double lmax = dadmm::symmetric_eigenvalues(dw).maxCoeff();
    CHECK(spec.lambda_min_d_plus_w >= -1e-9 * lmax);
    CHECK((spec.lambda_min_d_plus_w > 1e-9) == !bip);

    const Eigen::VectorXd row_sums = spec.laplacian * Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i) CHECK(std::abs(row_sums(i)) < 1e-12);
  }
}

TEST_CASE("edge-list serialization round trip") {
  const Graph g = dadmm::generate_connected_graph(9, 0.4, 42, true);
  std::stringstream ss;
  dadmm::write_edge_list(g, ss);
  CHECK(ss.str().rfind("agents 9\n", 0) == 0);
  const Graph back = dadmm::read_edge_list(ss);
  CHECK(back.adjacency() == g.adjacency());
}
