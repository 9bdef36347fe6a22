#pragma once

#include <cstddef>
#include <vector>

#include "mergan/tensor.hpp"

namespace mergan {

struct SymmetricEigen {
  std::vector<double> values;
  Tensor vectors;  // column k is the eigenvector of values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Throws
/// NumericalError if the off-diagonal mass does not vanish within max_sweeps.
SymmetricEigen jacobi_eigen(const Tensor& symmetric, std::size_t max_sweeps = 100);

/// Symmetric PSD square root via jacobi_eigen. Eigenvalues in [-1e-10, 0) are
/// clamped to zero; anything more negative, or asymmetry above `symmetry_tol`
/// (relative to the largest entry), is an error.
Tensor matrix_sqrt_psd(const Tensor& sigma, double symmetry_tol = 1e-8);

Tensor matmul(const Tensor& a, const Tensor& b);
double trace(const Tensor& square);

struct GaussianStats {
  Tensor mean;        // 1 x d
  Tensor covariance;  // d x d, unbiased
  std::size_t count = 0;

  std::size_t dim() const noexcept { return mean.size(); }
};

/// Mean and unbiased covariance of the rows of an N x d sample matrix (N >= 2).
GaussianStats gaussian_stats(const Tensor& samples);

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the cross term
/// evaluated as Tr((A^{1/2} S_b A^{1/2})^{1/2}) so every root is of a symmetric
/// matrix. Clamped at zero against rounding.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

}  // namespace mergan
