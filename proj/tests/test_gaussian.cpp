#include <doctest.h>

#include <random>

#include "bpmf/gaussian.hpp"
#include "bpmf/rng.hpp"

using namespace bpmf;

namespace {

ComplexGaussian scalar(cplx mu, double lam) {
  return {Eigen::VectorXcd::Constant(1, mu),
          Eigen::MatrixXcd::Constant(1, 1, cplx(lam, 0.0))};
}

Eigen::MatrixXcd random_hpd(Rng& rng, int d) {
  Eigen::MatrixXcd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = rng.cnormal();
  return A * A.adjoint() + 0.5 * Eigen::MatrixXcd::Identity(d, d);
}

}  // namespace

TEST_CASE("product of two scalar gaussians") {
  ComplexGaussian p = gaussian_product({scalar(1.0, 1.0), scalar(3.0, 1.0)});
  CHECK(std::abs(p.mean[0] - cplx(2.0, 0.0)) < 1e-14);
  CHECK(std::abs(p.precision(0, 0) - cplx(2.0, 0.0)) < 1e-14);
}

TEST_CASE("product with a flat factor is the identity") {
  ComplexGaussian g = scalar(cplx(0.3, -0.4), 1.7);
  ComplexGaussian flat{Eigen::VectorXcd::Zero(1), Eigen::MatrixXcd::Zero(1, 1)};
  ComplexGaussian p = gaussian_product({g, flat});
  CHECK(std::abs(p.mean[0] - g.mean[0]) < 1e-14);
  CHECK(std::abs(p.precision(0, 0) - g.precision(0, 0)) < 1e-14);
}

TEST_CASE("N identical factors scale the precision") {
  ComplexGaussian g = scalar(cplx(0.5, 0.25), 0.8);
  ComplexGaussian p = gaussian_product({g, g, g, g});
  CHECK(std::abs(p.mean[0] - g.mean[0]) < 1e-13);
  CHECK(std::abs(p.precision(0, 0) - 4.0 * g.precision(0, 0)) < 1e-13);
}

TEST_CASE("product agrees with pointwise log-density addition on a grid") {
  Rng rng(42);
  for (int t = 0; t < 5; ++t) {
    int d = 2;
    ComplexGaussian g1{Eigen::VectorXcd::Zero(d), random_hpd(rng, d)};
    ComplexGaussian g2{Eigen::VectorXcd::Zero(d), random_hpd(rng, d)};
    for (int i = 0; i < d; ++i) {
      g1.mean[i] = rng.cnormal();
      g2.mean[i] = rng.cnormal();
    }
    ComplexGaussian p = gaussian_product({g1, g2});
    double shift = 0.0;
    bool first = true;
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXcd x(d);
      for (int i = 0; i < d; ++i) x[i] = 2.0 * rng.cnormal();
      double lhs = g1.log_density(x) + g2.log_density(x);
      double rhs = p.log_density(x);
      if (first) {
        shift = lhs - rhs;
        first = false;
      } else {
        worst = std::max(worst, std::abs(lhs - rhs - shift));
      }
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("posterior update reference points") {
  // prior (0, I), one pilot with gamma=1, x=1, y=2
  ComplexGaussian prior{Eigen::VectorXcd::Zero(2),
                        Eigen::MatrixXcd::Identity(2, 2)};
  QuadraticEvidence ev = QuadraticEvidence::zero(2);
  ev.add(0, 1.0, cplx(2.0, 0.0));
  ComplexGaussian post = posterior_update(prior, ev);
  CHECK(std::abs(post.precision(0, 0) - cplx(2.0, 0.0)) < 1e-14);
  CHECK(std::abs(post.mean[0] - cplx(1.0, 0.0)) < 1e-14);
  CHECK(std::abs(post.mean[1]) < 1e-14);

  // zero evidence keeps the prior
  ComplexGaussian same = posterior_update(prior, QuadraticEvidence::zero(2));
  CHECK((same.mean - prior.mean).norm() < 1e-15);
  CHECK((same.precision - prior.precision).norm() < 1e-15);
}

TEST_CASE("data-coordinate evidence uses the symbol statistics") {
  // lambda = gamma(var + |mu|^2), lambda*mu = gamma y mu*
  double gamma = 2.0;
  cplx y(0.7, -0.3);
  SymbolStats st{cplx(0.5, 0.5), 0.25};
  double es2 = st.var + std::norm(st.mean);
  ComplexGaussian prior{Eigen::VectorXcd::Zero(1),
                        Eigen::MatrixXcd::Identity(1, 1)};
  QuadraticEvidence ev = QuadraticEvidence::zero(1);
  ev.add(0, gamma * es2, gamma * y * std::conj(st.mean));
  ComplexGaussian post = posterior_update(prior, ev);
  cplx expect_num = gamma * y * std::conj(st.mean);
  cplx expect = expect_num / (1.0 + gamma * es2);
  CHECK(std::abs(post.mean[0] - expect) < 1e-14);
}

TEST_CASE("posterior update is order independent") {
  Rng rng(7);
  ComplexGaussian prior{Eigen::VectorXcd::Zero(3), random_hpd(rng, 3)};
  std::vector<std::pair<int, std::pair<double, cplx>>> items;
  for (int k = 0; k < 6; ++k)
    items.push_back({k % 3, {0.3 + 0.2 * k, rng.cnormal()}});

  QuadraticEvidence fwd = QuadraticEvidence::zero(3);
  for (auto& it : items) fwd.add(it.first, it.second.first, it.second.second);
  QuadraticEvidence rev = QuadraticEvidence::zero(3);
  for (auto it = items.rbegin(); it != items.rend(); ++it)
    rev.add(it->first, it->second.first, it->second.second);

  ComplexGaussian a = posterior_update(prior, fwd);
  ComplexGaussian b = posterior_update(prior, rev);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.precision - b.precision).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("coordinate moments") {
  Eigen::MatrixXcd lam = Eigen::MatrixXcd::Zero(2, 2);
  lam(0, 0) = 2.0;
  lam(1, 1) = 4.0;
  ComplexGaussian g{Eigen::VectorXcd::Zero(2), lam};
  CHECK(coordinate_moments(g, 0).var == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(coordinate_moments(g, 1).var == doctest::Approx(0.25).epsilon(1e-14));

  Rng rng(3);
  ComplexGaussian c{Eigen::VectorXcd::Zero(2), random_hpd(rng, 2)};
  Eigen::MatrixXcd inv = c.precision.inverse();
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(coordinate_moments(c, i).var - std::real(inv(i, i))) < 1e-12);
}

TEST_CASE("precision stays Hermitian positive definite over long chains") {
  Rng rng(11);
  ComplexGaussian g{Eigen::VectorXcd::Zero(4), random_hpd(rng, 4)};
  for (int k = 0; k < 10000; ++k) {
    QuadraticEvidence ev = QuadraticEvidence::zero(4);
    ev.add(rng.uniform_int(4), 0.01 + rng.uniform01(), rng.cnormal());
    g = posterior_update(g, ev);
    if (k % 500 == 0) CHECK_NOTHROW(validate(g));
  }
  CHECK_NOTHROW(validate(g));
}

TEST_CASE("symbol statistics") {
  // uniform over unit-energy qpsk
  std::vector<cplx> qpsk{{M_SQRT1_2, M_SQRT1_2},
                         {M_SQRT1_2, -M_SQRT1_2},
                         {-M_SQRT1_2, M_SQRT1_2},
                         {-M_SQRT1_2, -M_SQRT1_2}};
  Table u = Table::uniform({0}, {4});
  SymbolStats s = symbol_statistics(u, qpsk);
  CHECK(std::abs(s.mean) < 1e-15);
  CHECK(s.var == doctest::Approx(1.0).epsilon(1e-14));

  Table pm = Table::point_mass(0, 4, 2);
  SymbolStats sp = symbol_statistics(pm, qpsk);
  CHECK(std::abs(sp.mean - qpsk[2]) < 1e-15);
  CHECK(sp.var == doctest::Approx(0.0));

  // belief [0.75, 0.25] over {+1, -1}: mean 0.5, var 0.75
  Table b = Table::from_linear({0}, {2}, {0.75, 0.25});
  SymbolStats sb = symbol_statistics(b, {cplx(1, 0), cplx(-1, 0)});
  CHECK(std::abs(sb.mean - cplx(0.5, 0.0)) < 1e-15);
  CHECK(sb.var == doctest::Approx(0.75).epsilon(1e-14));
}
