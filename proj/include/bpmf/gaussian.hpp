#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "bpmf/common.hpp"
#include "bpmf/table.hpp"

namespace bpmf {

using cplx = std::complex<double>;

// Proper complex Gaussian CN(mu, Lambda^-1) in information form: mean vector
// plus Hermitian positive definite precision matrix.
struct ComplexGaussian {
  Eigen::VectorXcd mean;
  Eigen::MatrixXcd precision;

  int dim() const { return static_cast<int>(mean.size()); }
  Eigen::MatrixXcd covariance() const;
  // ln CN(x; mean, precision^-1)
  double log_density(const Eigen::VectorXcd& x) const;
  // differential entropy: d ln(pi e) - ln det(precision)
  double entropy() const;
};

// Checks Hermitian symmetry (1e-12) and positive definiteness (Cholesky).
void validate(const ComplexGaussian& g);

// Diagonal quadratic evidence: per-coordinate precision increments and
// precision-weighted means.
struct QuadraticEvidence {
  Eigen::VectorXd lambda;        // lambda_ii >= 0
  Eigen::VectorXcd lambda_mu;    // lambda_ii * mu_i

  static QuadraticEvidence zero(int dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXcd::Zero(dim)};
  }
  void add(int coord, double lam, cplx lam_mu) {
    lambda[coord] += lam;
    lambda_mu[coord] += lam_mu;
  }
};

// Product of Gaussian densities over the same variable, up to scale:
// precisions add, means combine precision-weighted.
ComplexGaussian gaussian_product(const std::vector<ComplexGaussian>& factors);

// posterior precision = prior precision + diag(lambda);
// posterior mean solves precision * mu = prior_precision * prior_mean + lambda_mu.
ComplexGaussian posterior_update(const ComplexGaussian& prior,
                                 const QuadraticEvidence& ev);

// Marginal mean and variance of coordinate i (selective inversion).
struct CoordMoments {
  cplx mean;
  double var;
};
CoordMoments coordinate_moments(const ComplexGaussian& g, int i);

// All per-coordinate moments at once (one factorization).
std::vector<CoordMoments> all_coordinate_moments(const ComplexGaussian& g);

// Mean and residual variance of a discrete constellation belief:
// mu = sum b(x) s(x), var = sum b(x) |s(x) - mu|^2.
struct SymbolStats {
  cplx mean;
  double var;
};
SymbolStats symbol_statistics(const Table& belief,
                              const std::vector<cplx>& constellation);

}  // namespace bpmf
