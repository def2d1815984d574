#pragma once

#include <string>
#include <vector>

#include "swirl/errors.hpp"
#include "swirl/types.hpp"

namespace swirl {

/// He_k(z), probabilists' family: He_0 = 1, He_1 = z,
/// He_{k+1} = z He_k - k He_{k-1}.
inline double hermite_value(int k, double z) {
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = z;
  for (int n = 1; n < k; ++n) {
    const double next = z * cur - n * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// He_0(z) .. He_r(z).
inline VectorXd hermite_values(int max_degree, double z) {
  VectorXd v(max_degree + 1);
  v[0] = 1.0;
  if (max_degree >= 1) v[1] = z;
  for (int n = 1; n < max_degree; ++n) v[n + 1] = z * v[n] - n * v[n - 1];
  return v;
}

using MultiIndex = std::vector<int>;

/// All multi-indices in `dim` variables of total degree <= `degree`, graded
/// by total degree and, within a grade, in descending lexicographic order:
/// d=2, r=2 -> (0,0); (1,0),(0,1); (2,0),(1,1),(0,2).
inline std::vector<MultiIndex> graded_indices(int dim, int degree) {
  if (dim < 1 || degree < 0) {
    throw DimensionMismatch("index set requires dim >= 1 and degree >= 0");
  }
  std::vector<MultiIndex> out;
  MultiIndex work(dim, 0);
  auto fill = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == dim - 1) {
      work[pos] = remaining;
      out.push_back(work);
      return;
    }
    for (int a = remaining; a >= 0; --a) {
      work[pos] = a;
      self(self, pos + 1, remaining - a);
    }
  };
  for (int g = 0; g <= degree; ++g) fill(fill, 0, g);
  return out;
}

/// Tensor Hermite basis phi_alpha(z) = prod_i He_{alpha_i}(z_i) over the
/// graded index set of total degree <= `degree`. Orthogonal under the
/// standard normal density with <phi_alpha^2> = prod_i alpha_i!.
class HermiteBasis {
 public:
  HermiteBasis(int dim, int degree)
      : dim_(dim), degree_(degree), indices_(graded_indices(dim, degree)) {
    norms_.resize(static_cast<int>(indices_.size()));
    for (int j = 0; j < norms_.size(); ++j) {
      double n = 1.0;
      for (int a : indices_[j])
        for (int k = 2; k <= a; ++k) n *= k;
      norms_[j] = n;
    }
  }

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const MultiIndex& index(int j) const { return indices_[j]; }

  /// <phi_j^2> under the standard normal weight.
  double norm(int j) const { return norms_[j]; }
  const VectorXd& norms() const { return norms_; }

  /// Position of the degree-1 index e_i (the linear term in variable i).
  int first_order_index(int i) const {
    if (i < 0 || i >= dim_) {
      throw DimensionMismatch("first_order_index: variable " + std::to_string(i) +
                              " out of range for dim " + std::to_string(dim_));
    }
    return 1 + i;
  }

  double eval(int j, const VectorXd& z) const {
    check_point(z);
    double p = 1.0;
    for (int i = 0; i < dim_; ++i) p *= hermite_value(indices_[j][i], z[i]);
    return p;
  }

  /// phi_j(z) for every j, sharing the per-variable recurrences.
  VectorXd eval_all(const VectorXd& z) const {
    check_point(z);
    std::vector<VectorXd> per_var(dim_);
    for (int i = 0; i < dim_; ++i) per_var[i] = hermite_values(degree_, z[i]);
    VectorXd out(size());
    for (int j = 0; j < size(); ++j) {
      double p = 1.0;
      for (int i = 0; i < dim_; ++i) p *= per_var[i][indices_[j][i]];
      out[j] = p;
    }
    return out;
  }

 private:
  void check_point(const VectorXd& z) const {
    if (z.size() != dim_) {
      throw DimensionMismatch("basis point dim " + std::to_string(z.size()) +
                              ", expected " + std::to_string(dim_));
    }
  }

  int dim_;
  int degree_;
  std::vector<MultiIndex> indices_;
  VectorXd norms_;
};

}  // namespace swirl
