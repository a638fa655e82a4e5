#include "gbd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gbd {

void validate_graph(const Graph& g) {
  if (g.n_nodes < 2) throw InputError("graph: need at least 2 nodes");
  if (g.adjacency.rows() != g.n_nodes || g.adjacency.cols() != g.n_nodes) {
    throw InputError("graph: adjacency shape does not match n_nodes");
  }
  for (Eigen::Index i = 0; i < g.n_nodes; ++i) {
    if (g.adjacency(i, i) != 0.0) {
      throw InputError("graph: nonzero diagonal at node " + std::to_string(i));
    }
    for (Eigen::Index j = 0; j < g.n_nodes; ++j) {
      const double a = g.adjacency(i, j);
      if (a != 0.0 && a != 1.0) {
        throw InputError("graph: non-binary adjacency entry");
      }
      if (a != g.adjacency(j, i)) {
        throw InputError("graph: adjacency not symmetric");
      }
    }
  }
  if (g.degrees().minCoeff() < 1.0) {
    throw InputError("graph: isolated node");
  }
}

std::optional<Graph> generate_erdos_renyi(Eigen::Index n, double p_edge,
                                          std::uint64_t seed) {
  if (n < 2) throw InputError("generate_erdos_renyi: n must be >= 2");
  if (p_edge < 0.0 || p_edge > 1.0) {
    throw InputError("generate_erdos_renyi: p_edge outside [0, 1]");
  }
  Rng rng(seed);
  Graph g;
  g.n_nodes = n;
  g.adjacency = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p_edge)) {
        g.adjacency(i, j) = 1.0;
        g.adjacency(j, i) = 1.0;
      }
    }
  }
  if (g.degrees().minCoeff() < 1.0) return std::nullopt;
  return g;
}

bool is_connected(const Graph& g) {
  const Eigen::Index n = g.n_nodes;
  if (n == 0) return false;
  std::vector<bool> seen(static_cast<size_t>(n), false);
  std::vector<Eigen::Index> stack{0};
  seen[0] = true;
  Eigen::Index count = 1;
  while (!stack.empty()) {
    const Eigen::Index u = stack.back();
    stack.pop_back();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (g.adjacency(u, v) != 0.0 && !seen[static_cast<size_t>(v)]) {
        seen[static_cast<size_t>(v)] = true;
        stack.push_back(v);
        ++count;
      }
    }
  }
  return count == n;
}

Matrix normalized_adjacency_gso(const Graph& g) {
  validate_graph(g);
  const Vector d = g.degrees();
  const Vector dinv_sqrt = d.array().rsqrt();
  Matrix s = dinv_sqrt.asDiagonal() * g.adjacency * dinv_sqrt.asDiagonal();
  // Symmetrize away the last-bit roundoff from the two scalings.
  s = 0.5 * (s + s.transpose()).eval();
  return s;
}

EigenBasis eigenbasis(const Eigen::Ref<const Matrix>& s) {
  EighResult r = eigh_symmetric(s);
  return EigenBasis{std::move(r.eigenvalues), std::move(r.vectors)};
}

Matrix vandermonde(const Eigen::Ref<const Vector>& eigenvalues,
                   Eigen::Index degree) {
  if (degree < 1) throw InputError("vandermonde: degree must be >= 1");
  const Eigen::Index n = eigenvalues.size();
  Matrix psi(n, degree);
  psi.col(0).setOnes();
  for (Eigen::Index j = 1; j < degree; ++j) {
    psi.col(j) = psi.col(j - 1).cwiseProduct(eigenvalues);
  }
  return psi;
}

Matrix u_tilde(const Eigen::Ref<const Matrix>& v) {
  const Eigen::Index n = v.rows();
  if (v.cols() != n) throw InputError("u_tilde: V must be square");
  const double ortho = (v.transpose() * v - Matrix::Identity(n, n)).norm();
  if (ortho > 1e-8) {
    throw InputError("u_tilde: V not orthonormal (residual " +
                     std::to_string(ortho) + ")");
  }
  const Matrix vv = v.cwiseProduct(v);
  // Right-multiplying by P_1perp subtracts each row's mean.
  return vv.colwise() - vv.rowwise().mean();
}

ExperimentGraph sample_experiment_graph(Eigen::Index n, double p_edge,
                                        std::uint64_t seed) {
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t attempt_seed =
        derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
    std::optional<Graph> g = generate_erdos_renyi(n, p_edge, attempt_seed);
    if (!g || !is_connected(*g)) continue;
    Matrix s = normalized_adjacency_gso(*g);
    EigenBasis basis = eigenbasis(s);
    double min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      min_gap = std::min(min_gap, basis.eigenvalues(i + 1) - basis.eigenvalues(i));
    }
    if (min_gap <= 1e-8) continue;
    return ExperimentGraph{std::move(*g), std::move(s), std::move(basis)};
  }
  throw NumericalError(
      "sample_experiment_graph: no connected simple-spectrum graph in 1000 "
      "attempts");
}

void save_edge_list(const Graph& g, std::ostream& out) {
  out << "n_nodes=" << g.n_nodes << "\n";
  for (Eigen::Index i = 0; i < g.n_nodes; ++i) {
    for (Eigen::Index j = i + 1; j < g.n_nodes; ++j) {
      if (g.adjacency(i, j) != 0.0) out << i << " " << j << "\n";
    }
  }
}

Graph load_edge_list(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("n_nodes=", 0) != 0) {
    throw InputError("edge list: missing n_nodes= header");
  }
  const Eigen::Index n = std::stoll(header.substr(8));
  Graph g;
  g.n_nodes = n;
  g.adjacency = Matrix::Zero(n, n);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Eigen::Index i = 0, j = 0;
    if (!(ls >> i >> j)) throw InputError("edge list: malformed line: " + line);
    if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
      throw InputError("edge list: edge out of range: " + line);
    }
    g.adjacency(i, j) = 1.0;
    g.adjacency(j, i) = 1.0;
  }
  return g;
}

}  // namespace gbd
