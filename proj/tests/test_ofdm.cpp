#include <doctest.h>

#include <sstream>

#include "bpmf/ofdm.hpp"

using namespace bpmf;
using namespace bpmf::ofdm;

namespace {

OfdmScenario tiny_scenario() {
  OfdmScenario sc;
  sc.carriers = 16;
  sc.pilot_indices = OfdmScenario::evenly_spaced_pilots(16, 4);
  sc.constellation = Constellation::qpsk();
  sc.code_generators_octal = {7, 5};
  sc.max_outer = 8;
  sc.n_inner = 2;
  return sc;
}

}  // namespace

TEST_CASE("constellations are unit energy and Gray mapped") {
  for (const Constellation& c : {Constellation::qpsk(), Constellation::qam16()}) {
    double e = 0.0;
    for (cplx s : c.points) e += std::norm(s);
    CHECK(e / c.points.size() == doctest::Approx(1.0).epsilon(1e-12));
    // nearest neighbors differ in exactly one bit
    for (std::size_t a = 0; a < c.points.size(); ++a) {
      double dmin = 1e9;
      for (std::size_t b = 0; b < c.points.size(); ++b)
        if (b != a) dmin = std::min(dmin, std::abs(c.points[a] - c.points[b]));
      for (std::size_t b = 0; b < c.points.size(); ++b) {
        if (b == a) continue;
        if (std::abs(c.points[a] - c.points[b]) < dmin * 1.001)
          CHECK(__builtin_popcount(unsigned(a ^ b)) == 1);
      }
    }
  }
}

TEST_CASE("runtime sizes for the desk and large configurations") {
  OfdmScenario desk;  // 64 carriers, qpsk, rate 1/2
  desk.pilot_indices = OfdmScenario::evenly_spaced_pilots(64, 12);
  ScenarioRuntime rt(desk);
  CHECK(rt.num_data() == 52);
  CHECK(rt.coded_len() == 104);
  CHECK(rt.info_len() == 50);  // (52*2)/2 - memory
  CHECK(rt.pad_len() == 0);
  CHECK(rt.code_rate() == doctest::Approx(50.0 / 104.0));

  OfdmScenario big;
  big.carriers = 300;
  big.pilot_indices = OfdmScenario::evenly_spaced_pilots(300, 13);
  big.constellation = Constellation::qam16();
  big.code_generators_octal = {133, 171, 165};
  ScenarioRuntime brt(big);
  CHECK(brt.num_data() == 287);
  CHECK(brt.coded_len() == 287 * 4);
  CHECK(brt.info_len() == (287 * 4) / 3 - 6);
  CHECK(brt.pad_len() == 287 * 4 - (brt.info_len() + 6) * 3);
  CHECK(brt.code_rate() == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("all-zero info gives the all-zero codeword and a constant symbol") {
  ScenarioRuntime rt(tiny_scenario());
  std::vector<std::uint8_t> u(rt.info_len(), 0);
  Transmission tx = transmit(rt, u);
  for (std::uint8_t c : tx.coded_bits) CHECK(c == 0);
  for (int n = 0; n < rt.num_data(); ++n) CHECK(tx.symbol_index[n] == 0);
}

TEST_CASE("loopback: noiseless flat channel decodes exactly") {
  ScenarioRuntime rt(tiny_scenario());
  Rng rng(99);
  for (int t = 0; t < 5; ++t) {
    std::vector<std::uint8_t> u = random_info_bits(rt, rng);
    Transmission tx = transmit(rt, u);
    Eigen::VectorXcd h = Eigen::VectorXcd::Ones(16);
    double gamma = 1e9;  // effectively noise-free
    TrialRecord rec = run_perfect_csi(rt, tx.x, gamma, h);
    CHECK(rec.decoded_bits == u);
  }
}

TEST_CASE("channel draws are reproducible and follow the prior") {
  ScenarioRuntime rt(tiny_scenario());
  Rng ra(7), rb(7);
  Eigen::VectorXcd x = Eigen::VectorXcd::Ones(16);
  ChannelDraw a = apply_channel(rt, x, 2.0, ra);
  ChannelDraw b = apply_channel(rt, x, 2.0, rb);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.h - b.h).cwiseAbs().maxCoeff() == 0.0);

  // empirical covariance across draws approaches the prior covariance
  int draws = 20000;
  Rng rng(123);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(16, 16);
  for (int k = 0; k < draws; ++k) {
    ChannelDraw d = apply_channel(rt, x, 1e6, rng);
    acc += d.h * d.h.adjoint();
  }
  acc /= draws;
  double rel = (acc - rt.prior_covariance()).norm() /
               rt.prior_covariance().norm();
  CHECK(rel < 0.05);
}

TEST_CASE("noisy decode at high snr is error free") {
  ScenarioRuntime rt(tiny_scenario());
  Rng rng(5);
  double gamma = rt.gamma_for_ebn0_db(14.0);
  int errs = 0;
  for (int t = 0; t < 5; ++t) {
    std::vector<std::uint8_t> u = random_info_bits(rt, rng);
    Transmission tx = transmit(rt, u);
    ChannelDraw d = apply_channel(rt, tx.x, gamma, rng);
    TrialRecord rec = run_bpmf_receiver(rt, d.y, gamma);
    for (int k = 0; k < rt.info_len(); ++k) errs += rec.decoded_bits[k] != u[k];
    CHECK(std::isfinite(rec.final_free_energy));
    CHECK(rec.outer_iters >= 1);
  }
  CHECK(errs <= 2);
}

TEST_CASE("symbol beliefs keep the extrinsic/APP split") {
  // the message toward the observation factor is the full product; the
  // message into the modulation factor is the evidence alone, so
  // app = ext + evidence up to one normalizing constant per carrier
  ScenarioRuntime rt(tiny_scenario());
  Rng rng(31);
  std::vector<std::uint8_t> u = random_info_bits(rt, rng);
  Transmission tx = transmit(rt, u);
  double gamma = rt.gamma_for_ebn0_db(6.0);
  ChannelDraw d = apply_channel(rt, tx.x, gamma, rng);

  SymbolDecoder dec(rt);
  std::vector<std::vector<double>> evidence(rt.num_data());
  for (int n = 0; n < rt.num_data(); ++n) {
    int i = rt.data_indices()[n];
    evidence[n].resize(4);
    for (int s = 0; s < 4; ++s)
      evidence[n][s] =
          -gamma * std::norm(d.y[i] - d.h[i] * rt.sc().constellation.points[s]);
  }
  dec.run(evidence, 2);
  for (int n = 0; n < rt.num_data(); ++n) {
    const auto& app = dec.symbol_app()[n];
    const auto& ext = dec.symbol_ext()[n];
    double shift = app[0] - ext[0] - evidence[n][0];
    for (int s = 1; s < 4; ++s)
      CHECK(app[s] - ext[s] - evidence[n][s] ==
            doctest::Approx(shift).epsilon(1e-10));
    // and the modulation reply is what separates them
    std::vector<double> reply = dec.mod_reply(n);
    double shift2 = app[0] - evidence[n][0] - reply[0];
    for (int s = 1; s < 4; ++s)
      CHECK(app[s] - evidence[n][s] - reply[s] ==
            doctest::Approx(shift2).epsilon(1e-10));
  }
}

TEST_CASE("mixture collapse degenerates correctly") {
  std::vector<cplx> pts = Constellation::qpsk().points;
  double gamma = 3.0;
  cplx y(0.4, -0.9);
  // point mass on symbol 2: the collapse must match the exact evidence
  std::vector<double> pm(4, kNegInf);
  pm[2] = 0.0;
  CollapsedEvidence ce = collapse_observation_mixture(pts, pm, y, gamma);
  CHECK(ce.lambda == doctest::Approx(gamma * std::norm(pts[2])).epsilon(1e-10));
  cplx expect = gamma * y * std::conj(pts[2]);
  CHECK(std::abs(ce.lambda_mu - expect) < 1e-10);

  // uniform weights with y = 0: zero-mean collapse by symmetry
  std::vector<double> un(4, -std::log(4.0));
  CollapsedEvidence cu = collapse_observation_mixture(pts, un, cplx(0, 0), gamma);
  CHECK(std::abs(cu.lambda_mu) < 1e-12);
}

TEST_CASE("ber sweep output is deterministic and well formed") {
  OfdmScenario sc = tiny_scenario();
  sc.trials = 3;
  sc.ebn0_db = {2.0, 8.0};
  ScenarioRuntime rt(sc);
  std::vector<Receiver> rcv{Receiver::BpMf, Receiver::BpGauss,
                            Receiver::PerfectCsi};
  auto rows1 = run_ber_sweep(rt, rcv, 42, 2);
  auto rows2 = run_ber_sweep(rt, rcv, 42, 2);
  REQUIRE(rows1.size() == 6);
  std::ostringstream a, b;
  write_ber_csv(rows1, a);
  write_ber_csv(rows2, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("snr_db,receiver,trials,bit_errors,ber,"
                      "mean_outer_iters",
                      0) == 0);
}

TEST_CASE("scenario json parsing") {
  OfdmScenario sc = parse_scenario(R"({
    "carriers": 32,
    "pilot_count": 8,
    "constellation": "16qam",
    "code_generators_octal": [7, 5],
    "ebn0_db": [0, 4],
    "trials": 10,
    "tau_rms_us": 2.0
  })");
  CHECK(sc.carriers == 32);
  CHECK(sc.pilot_indices.size() == 8);
  CHECK(sc.constellation.bits == 4);
  CHECK(sc.tau_rms_s == doctest::Approx(2e-6));
  CHECK_THROWS_AS(parse_scenario("{}"), ParseError);
  CHECK_THROWS_AS(parse_scenario("not json"), ParseError);
}
