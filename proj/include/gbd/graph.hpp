#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>

#include "gbd/linalg.hpp"
#include "gbd/rng.hpp"

namespace gbd {

/// Simple undirected graph held as a dense 0/1 adjacency matrix.
struct Graph {
  Eigen::Index n_nodes = 0;
  Matrix adjacency;  // symmetric, zero diagonal, entries in {0,1}

  Vector degrees() const { return adjacency.rowwise().sum(); }
};

/// Checks the adjacency invariants (symmetry, hollow diagonal, 0/1 entries,
/// minimum degree 1) and throws InputError on violation.
void validate_graph(const Graph& g);

/// Orthonormal eigenvector matrix plus eigenvalues of a symmetric operator.
/// Graph eigenbases store eigenvalues ascending; covariance-estimated bases
/// keep them in descending order of the covariance spectrum.
struct EigenBasis {
  Vector eigenvalues;
  Matrix vectors;

  Eigen::Index size() const { return eigenvalues.size(); }
};

/// Draws each of the n(n-1)/2 undirected edges independently with
/// probability p_edge from the seeded stream. Returns nullopt when the draw
/// produced an isolated node; the caller may resample with another seed.
std::optional<Graph> generate_erdos_renyi(Eigen::Index n, double p_edge,
                                          std::uint64_t seed);

bool is_connected(const Graph& g);

/// Degree-normalized adjacency S = D^{-1/2} A D^{-1/2}.
Matrix normalized_adjacency_gso(const Graph& g);

/// Eigendecomposition of a symmetric shift operator, eigenvalues ascending.
EigenBasis eigenbasis(const Eigen::Ref<const Matrix>& s);

/// Vandermonde map: Psi_ij = lambda_i^(j-1), N x L.
Matrix vandermonde(const Eigen::Ref<const Vector>& eigenvalues,
                   Eigen::Index degree);

/// U~ = (V o V) P_1perp, where o is the entrywise product. Its spectral
/// norm is at most 1 for any orthonormal V.
Matrix u_tilde(const Eigen::Ref<const Matrix>& v);

struct ExperimentGraph {
  Graph graph;
  Matrix gso;
  EigenBasis basis;
};

/// Experiment-harness sampler: resamples (derived seeds) until the graph is
/// connected and the GSO spectrum is simple (minimum eigengap > 1e-8), with
/// a cap of 1000 attempts. A degenerate spectrum would make the eigenbasis
/// perturbation Delta ill-defined.
ExperimentGraph sample_experiment_graph(Eigen::Index n, double p_edge,
                                        std::uint64_t seed);

/// Edge-list text format: header line "n_nodes=N", then one "i j" pair per
/// line, 0-indexed, i < j.
void save_edge_list(const Graph& g, std::ostream& out);
Graph load_edge_list(std::istream& in);

}  // namespace gbd
