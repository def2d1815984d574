#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

#include "swirl/errors.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// Q-point Gauss rule for the standard normal weight (probabilists'
/// Hermite), computed from the symmetric tridiagonal recurrence matrix:
/// zero diagonal, off-diagonal sqrt(k). Nodes are its eigenvalues and the
/// weight at node q is the squared first component of its unit eigenvector,
/// so the weights sum to 1.
inline std::pair<VectorXd, VectorXd> gauss_hermite_rule(int n_points) {
  if (n_points < 1) throw DimensionMismatch("quadrature requires n_points >= 1");
  MatrixXd jacobi = MatrixXd::Zero(n_points, n_points);
  for (int k = 1; k < n_points; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(jacobi);
  VectorXd nodes = solver.eigenvalues();
  VectorXd weights(n_points);
  for (int q = 0; q < n_points; ++q) {
    const double v0 = solver.eigenvectors()(0, q);
    weights[q] = v0 * v0;
  }
  return {std::move(nodes), std::move(weights)};
}

/// Tensor-product Gauss rule over R^dim with standard normal weight in each
/// variable. Node q has per-variable indices (i_1, .., i_d) with i_1 varying
/// slowest: q = ((i_1 Q + i_2) Q + ...) for a per-variable count Q. Exact
/// for polynomials of per-variable degree <= 2Q-1.
struct QuadratureRule {
  int dim = 0;
  int points_per_dim = 0;
  MatrixXd nodes;    // size() x dim
  VectorXd weights;  // sums to 1

  int size() const { return static_cast<int>(weights.size()); }

  VectorXd node(int q) const { return nodes.row(q).transpose(); }
};

inline QuadratureRule tensor_gauss_hermite(int dim, int points_per_dim) {
  if (dim < 1) throw DimensionMismatch("quadrature requires dim >= 1");
  auto [nodes1, weights1] = gauss_hermite_rule(points_per_dim);

  QuadratureRule rule;
  rule.dim = dim;
  rule.points_per_dim = points_per_dim;
  int total = 1;
  for (int i = 0; i < dim; ++i) total *= points_per_dim;
  rule.nodes.resize(total, dim);
  rule.weights.resize(total);
  for (int q = 0; q < total; ++q) {
    int rem = q;
    double w = 1.0;
    for (int i = dim - 1; i >= 0; --i) {
      const int idx = rem % points_per_dim;
      rem /= points_per_dim;
      rule.nodes(q, i) = nodes1[idx];
      w *= weights1[idx];
    }
    rule.weights[q] = w;
  }
  return rule;
}

}  // namespace swirl
