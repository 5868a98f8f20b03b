#include "bpmf/gaussian.hpp"

#include <cmath>

namespace bpmf {

Eigen::MatrixXcd ComplexGaussian::covariance() const {
  Eigen::LLT<Eigen::MatrixXcd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw Error("gaussian: precision is not positive definite");
  return llt.solve(Eigen::MatrixXcd::Identity(dim(), dim()));
}

double ComplexGaussian::log_density(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd d = x - mean;
  Eigen::LLT<Eigen::MatrixXcd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw Error("gaussian: precision is not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < dim(); ++i)
    logdet += 2.0 * std::log(std::real(llt.matrixL()(i, i)));
  double quad = std::real(d.dot(precision * d));  // d^H P d
  return logdet - dim() * std::log(M_PI) - quad;
}

double ComplexGaussian::entropy() const {
  Eigen::LLT<Eigen::MatrixXcd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw Error("gaussian: precision is not positive definite");
  double logdet = 0.0;
  for (int i = 0; i < dim(); ++i)
    logdet += 2.0 * std::log(std::real(llt.matrixL()(i, i)));
  return dim() * std::log(M_PI * std::exp(1.0)) - logdet;
}

void validate(const ComplexGaussian& g) {
  if (g.precision.rows() != g.dim() || g.precision.cols() != g.dim())
    throw Error("gaussian: shape mismatch");
  double scale = std::max(1.0, g.precision.cwiseAbs().maxCoeff());
  double herm = (g.precision - g.precision.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12 * scale)
    throw Error("gaussian: precision is not Hermitian");
  Eigen::LLT<Eigen::MatrixXcd> llt(g.precision);
  if (llt.info() != Eigen::Success)
    throw Error("gaussian: precision is not positive definite");
}

ComplexGaussian gaussian_product(const std::vector<ComplexGaussian>& factors) {
  if (factors.empty()) throw Error("gaussian_product: empty input");
  int d = factors[0].dim();
  Eigen::MatrixXcd lam = Eigen::MatrixXcd::Zero(d, d);
  Eigen::VectorXcd eta = Eigen::VectorXcd::Zero(d);
  for (const ComplexGaussian& g : factors) {
    if (g.dim() != d) throw Error("gaussian_product: dimension mismatch");
    lam += g.precision;
    eta += g.precision * g.mean;
  }
  Eigen::LLT<Eigen::MatrixXcd> llt(lam);
  if (llt.info() != Eigen::Success)
    throw Error("gaussian_product: combined precision is singular");
  return {llt.solve(eta), std::move(lam)};
}

ComplexGaussian posterior_update(const ComplexGaussian& prior,
                                 const QuadraticEvidence& ev) {
  int d = prior.dim();
  if (ev.lambda.size() != d || ev.lambda_mu.size() != d)
    throw Error("posterior_update: evidence dimension mismatch");
  for (int i = 0; i < d; ++i)
    if (!(ev.lambda[i] >= 0.0))
      throw Error("posterior_update: negative precision increment");
  Eigen::MatrixXcd lam = prior.precision;
  lam.diagonal() += ev.lambda.cast<cplx>();
  Eigen::VectorXcd rhs = prior.precision * prior.mean + ev.lambda_mu;
  Eigen::LLT<Eigen::MatrixXcd> llt(lam);
  if (llt.info() != Eigen::Success)
    throw Error("posterior_update: precision not positive definite");
  return {llt.solve(rhs), std::move(lam)};
}

CoordMoments coordinate_moments(const ComplexGaussian& g, int i) {
  if (i < 0 || i >= g.dim()) throw Error("coordinate_moments: index out of range");
  Eigen::LLT<Eigen::MatrixXcd> llt(g.precision);
  if (llt.info() != Eigen::Success)
    throw Error("coordinate_moments: precision not positive definite");
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(g.dim());
  e[i] = 1.0;
  Eigen::VectorXcd col = llt.solve(e);
  return {g.mean[i], std::real(col[i])};
}

std::vector<CoordMoments> all_coordinate_moments(const ComplexGaussian& g) {
  Eigen::LLT<Eigen::MatrixXcd> llt(g.precision);
  if (llt.info() != Eigen::Success)
    throw Error("coordinate_moments: precision not positive definite");
  Eigen::MatrixXcd cov =
      llt.solve(Eigen::MatrixXcd::Identity(g.dim(), g.dim()));
  std::vector<CoordMoments> out(g.dim());
  for (int i = 0; i < g.dim(); ++i)
    out[i] = {g.mean[i], std::real(cov(i, i))};
  return out;
}

SymbolStats symbol_statistics(const Table& belief,
                              const std::vector<cplx>& constellation) {
  if (!belief.is_unary()) throw Error("symbol_statistics: belief must be unary");
  if (belief.size() != constellation.size())
    throw Error("symbol_statistics: constellation size mismatch");
  cplx mu = 0.0;
  for (std::size_t k = 0; k < belief.size(); ++k)
    mu += belief.linear_at(k) * constellation[k];
  double var = 0.0;
  for (std::size_t k = 0; k < belief.size(); ++k)
    var += belief.linear_at(k) * std::norm(constellation[k] - mu);
  return {mu, var};
}

}  // namespace bpmf
