#include "mergan/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mergan {

namespace {

void require_square(const Tensor& m, const char* what) {
  if (m.rank() != 2 || m.shape()[0] != m.shape()[1]) {
    throw ShapeError(std::string(what) + " needs a square matrix, got " + to_string(m.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul", a.shape(), b.shape());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double v = a[i * k + p];
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += v * b[p * m + j];
    }
  return out;
}

double trace(const Tensor& square) {
  require_square(square, "trace");
  double t = 0.0;
  for (std::size_t i = 0; i < square.rows(); ++i) t += square.at(i, i);
  return t;
}

SymmetricEigen jacobi_eigen(const Tensor& symmetric, std::size_t max_sweeps) {
  require_square(symmetric, "jacobi_eigen");
  const std::size_t n = symmetric.rows();
  Tensor a = symmetric;
  Tensor v(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  double total = 0.0;
  for (double x : a.values()) total += x * x;
  const double threshold = 1e-30 * std::max(total, 1e-300);

  for (std::size_t sweep = 0;; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off <= threshold) break;
    if (sweep == max_sweeps) {
      throw NumericalError("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) + " sweeps");
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymmetricEigen out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a.at(i, i);
  out.vectors = std::move(v);
  return out;
}

Tensor matrix_sqrt_psd(const Tensor& sigma, double symmetry_tol) {
  require_square(sigma, "matrix_sqrt_psd");
  const std::size_t n = sigma.rows();
  const double scale = std::max(sigma.max_abs(), 1e-300);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(sigma.at(i, j) - sigma.at(j, i)) > symmetry_tol * scale) {
        throw std::invalid_argument("matrix_sqrt_psd: matrix is not symmetric at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
      }
    }
  Tensor sym = sigma;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sym.at(i, j) = sym.at(j, i) = 0.5 * (sigma.at(i, j) + sigma.at(j, i));
  const SymmetricEigen eig = jacobi_eigen(sym);
  std::vector<double> roots(n);
  for (std::size_t k = 0; k < n; ++k) {
    double lambda = eig.values[k];
    if (lambda < 0.0) {
      if (lambda < -1e-10) {
        throw NumericalError("matrix_sqrt_psd: eigenvalue " + std::to_string(lambda) + " is negative");
      }
      lambda = 0.0;
    }
    roots[k] = std::sqrt(lambda);
  }
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += eig.vectors.at(i, k) * roots[k] * eig.vectors.at(j, k);
      out.at(i, j) = out.at(j, i) = s;
    }
  return out;
}

GaussianStats gaussian_stats(const Tensor& samples) {
  const std::size_t n = samples.rows(), d = samples.cols();
  if (n < 2) throw std::invalid_argument("gaussian_stats needs at least two samples");
  GaussianStats stats;
  stats.count = n;
  stats.mean = Tensor(Shape{1, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) stats.mean[j] += samples[i * d + j];
  for (double& m : stats.mean.values()) m /= static_cast<double>(n);
  Tensor centered(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered[i * d + j] = samples[i * d + j] - stats.mean[j];
  stats.covariance = Tensor(Shape{d, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p) {
      const double x = centered[i * d + p];
      if (x == 0.0) continue;
      for (std::size_t q = p; q < d; ++q) stats.covariance[p * d + q] += x * centered[i * d + q];
    }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = p; q < d; ++q) {
      const double v = stats.covariance[p * d + q] / denom;
      stats.covariance[p * d + q] = v;
      stats.covariance[q * d + p] = v;
    }
  return stats;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim()) throw ShapeError("frechet_distance", a.covariance.shape(), b.covariance.shape());
  double mean_term = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    const double d = a.mean[j] - b.mean[j];
    mean_term += d * d;
  }
  const Tensor root_a = matrix_sqrt_psd(a.covariance);
  Tensor inner = matmul(matmul(root_a, b.covariance), root_a);
  const std::size_t n = inner.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) inner.at(i, j) = inner.at(j, i) = 0.5 * (inner.at(i, j) + inner.at(j, i));
  // Rounding can push tiny eigenvalues of the product slightly below the
  // clamp threshold; rescale the tolerance by the matrix magnitude.
  const SymmetricEigen eig = jacobi_eigen(inner);
  const double floor = -1e-10 * std::max(1.0, inner.max_abs());
  double cross = 0.0;
  for (double lambda : eig.values) {
    if (lambda < floor) throw NumericalError("frechet_distance: covariance product is not PSD");
    cross += std::sqrt(std::max(lambda, 0.0));
  }
  const double fd = mean_term + trace(a.covariance) + trace(b.covariance) - 2.0 * cross;
  return std::max(fd, 0.0);
}

}  // namespace mergan
