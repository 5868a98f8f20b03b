#include <doctest.h>

#include <random>

#include "bpmf/table.hpp"

using namespace bpmf;

TEST_CASE("normalize divides by the mass and reports the constant") {
  Table t = Table::from_linear({0}, {2}, {2.0, 6.0});
  auto [nt, z] = normalize(t);
  CHECK(nt.linear_at(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(nt.linear_at(1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(z == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
}

TEST_CASE("normalize is idempotent") {
  Table t = Table::from_linear({0}, {2}, {0.25, 0.75});
  auto [nt, z] = normalize(t);
  CHECK(z == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(max_abs_diff(nt, t) < 1e-15);
}

TEST_CASE("normalize keeps exact zeros") {
  Table t = Table::from_linear({0}, {2}, {0.0, 5.0});
  auto [nt, z] = normalize(t);
  CHECK(nt.linear_at(0) == 0.0);
  CHECK(nt.linear_at(1) == doctest::Approx(1.0));
  CHECK(z == doctest::Approx(0.2));

  Table logt = t.to_domain(Domain::Log);
  auto [nl, zl] = normalize(logt);
  CHECK(nl.log_at(0) == kNegInf);
  CHECK(zl == doctest::Approx(0.2));
}

TEST_CASE("normalize rejects all-zero tables") {
  Table t = Table::from_linear({0}, {2}, {0.0, 0.0});
  CHECK_THROWS_AS(normalize(t), ContradictionError);
}

TEST_CASE("marginalize sums out the other axes") {
  // [[1,2],[3,4]] over (x1,x2); summing over x2 leaves [3,7]
  Table t = Table::from_linear({1, 2}, {2, 2}, {1, 2, 3, 4});
  Table m = marginalize(t, 1);
  CHECK(m.linear_at(0) == doctest::Approx(3.0));
  CHECK(m.linear_at(1) == doctest::Approx(7.0));
  Table m2 = marginalize(t, 2);
  CHECK(m2.linear_at(0) == doctest::Approx(4.0));
  CHECK(m2.linear_at(1) == doctest::Approx(6.0));
}

TEST_CASE("product with the all-ones table is the identity") {
  Table t = Table::from_linear({0, 1}, {2, 3}, {1, 2, 3, 4, 5, 6});
  Table ones = Table::ones({1}, {3}, Domain::Linear);
  Table r = product({t, ones}, {0, 1}, {2, 3});
  CHECK(max_abs_diff(r, t) < 1e-15);
}

TEST_CASE("product then marginalize matches direct enumeration") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.1, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> av(6), bv(6);
    for (double& x : av) x = unif(rng);
    for (double& x : bv) x = unif(rng);
    Table a = Table::from_linear({0, 1}, {2, 3}, av);
    Table b = Table::from_linear({1, 2}, {3, 2}, bv);
    Table joint = product({a, b}, {0, 1, 2}, {2, 3, 2});
    Table marg = marginalize(joint, 0);
    // brute force
    double expect[2] = {0, 0};
    for (int x0 = 0; x0 < 2; ++x0)
      for (int x1 = 0; x1 < 3; ++x1)
        for (int x2 = 0; x2 < 2; ++x2)
          expect[x0] += av[x0 * 3 + x1] * bv[x1 * 2 + x2];
    CHECK(marg.linear_at(0) == doctest::Approx(expect[0]).epsilon(1e-12));
    CHECK(marg.linear_at(1) == doctest::Approx(expect[1]).epsilon(1e-12));
  }
}

TEST_CASE("entropy and kl reference points") {
  Table u = Table::uniform({0}, {4});
  CHECK(entropy(u) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  Table b = Table::from_linear({0}, {3}, {0.2, 0.3, 0.5});
  CHECK(kl(b, b) == doctest::Approx(0.0));

  Table p = Table::from_linear({0}, {2}, {1.0, 0.0});
  Table q = Table::from_linear({0}, {2}, {0.5, 0.5});
  CHECK(kl(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("kl follows the zero conventions") {
  Table b = Table::from_linear({0}, {2}, {0.0, 1.0});
  Table q = Table::from_linear({0}, {2}, {0.0, 1.0});
  CHECK(kl(b, q) == 0.0);  // 0 ln(0/0) = 0
  Table q2 = Table::from_linear({0}, {2}, {1.0, 0.0});
  CHECK(kl(b, q2) == kPosInf);  // 1 ln(1/0) = +inf
}

TEST_CASE("kl is nonnegative and zero only at equality") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> bv(5), qv(5);
    for (double& x : bv) x = unif(rng);
    for (double& x : qv) x = unif(rng);
    Table b = normalize(Table::from_linear({0}, {5}, bv)).table;
    Table q = normalize(Table::from_linear({0}, {5}, qv)).table;
    double d = kl(b, q);
    CHECK(d >= -1e-15);
    CHECK(kl(b, b) == doctest::Approx(0.0));
    if (max_abs_diff(b, q) > 1e-3) CHECK(d > 1e-9);
  }
}

TEST_CASE("log and linear pipelines agree on strictly positive tables") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> av(4), bv(4);
    for (double& x : av) x = unif(rng);
    for (double& x : bv) x = unif(rng);
    Table a = Table::from_linear({0, 1}, {2, 2}, av);
    Table b = Table::from_linear({1, 2}, {2, 2}, bv);

    Table lin = normalize(marginalize(product({a, b}, {0, 1, 2}, {2, 2, 2}), 2)).table;
    Table lg = normalize(marginalize(product({a.to_domain(Domain::Log),
                                              b.to_domain(Domain::Log)},
                                             {0, 1, 2}, {2, 2, 2}),
                                     2)).table;
    for (std::size_t k = 0; k < lin.size(); ++k) {
      double rel = std::abs(lin.linear_at(k) - lg.linear_at(k)) /
                   std::max(lin.linear_at(k), 1e-300);
      CHECK(rel < 1e-12);
    }
  }
}

TEST_CASE("marginal of a normalized table sums to one") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(12);
    for (double& x : v) x = unif(rng);
    v[0] = 0.0;  // allow zeros
    Table t = normalize(Table::from_linear({0, 1}, {3, 4}, v)).table;
    CHECK(marginalize(t, 0).mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(marginalize(t, 1).mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("joint state spaces beyond the cap are rejected") {
  std::vector<VarId> scope;
  std::vector<int> sizes;
  for (int i = 0; i < 21; ++i) {
    scope.push_back(i);
    sizes.push_back(2);
  }
  CHECK_THROWS_AS(Table::ones(scope, sizes), Error);
}

TEST_CASE("point mass and argmax tie rule") {
  Table t = Table::from_linear({0}, {3}, {0.5, 0.5, 0.1});
  CHECK(t.argmax() == 0);  // tie resolved to the lowest index
  Table pm = Table::point_mass(0, 3, 1);
  CHECK(pm.linear_at(1) == doctest::Approx(1.0));
  CHECK(pm.linear_at(0) == 0.0);
}
