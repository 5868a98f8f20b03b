#include "bpmf/ofdm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

#include <json.hpp>

namespace bpmf {
namespace ofdm {

namespace {
constexpr double kGrayPam4[4] = {-3.0, -1.0, 1.0, 3.0};  // indexed by 2-bit Gray code
inline int gray2(int b0, int b1) { return (b0 << 1) | (b0 ^ b1); }
}  // namespace

Constellation Constellation::qpsk() {
  Constellation c;
  c.name = "qpsk";
  c.bits = 2;
  double s = M_SQRT1_2;
  c.points.resize(4);
  for (int idx = 0; idx < 4; ++idx) {
    int b0 = (idx >> 1) & 1, b1 = idx & 1;
    c.points[idx] = cplx((1 - 2 * b0) * s, (1 - 2 * b1) * s);
  }
  return c;
}

Constellation Constellation::qam16() {
  Constellation c;
  c.name = "16qam";
  c.bits = 4;
  double s = 1.0 / std::sqrt(10.0);
  c.points.resize(16);
  for (int idx = 0; idx < 16; ++idx) {
    int b0 = (idx >> 3) & 1, b1 = (idx >> 2) & 1;
    int b2 = (idx >> 1) & 1, b3 = idx & 1;
    c.points[idx] =
        cplx(kGrayPam4[gray2(b0, b1)] * s, kGrayPam4[gray2(b2, b3)] * s);
  }
  return c;
}

Constellation Constellation::by_name(const std::string& name) {
  if (name == "qpsk") return qpsk();
  if (name == "16qam" || name == "qam16") return qam16();
  throw Error("unknown constellation '" + name + "'");
}

std::vector<int> OfdmScenario::evenly_spaced_pilots(int carriers, int count) {
  std::vector<int> idx(count);
  for (int k = 0; k < count; ++k)
    idx[k] = static_cast<int>(
        std::llround(static_cast<double>(k) * carriers / count));
  return idx;
}

OfdmScenario parse_scenario(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  OfdmScenario sc;
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc[key].get<std::decay_t<decltype(field)>>();
  };
  get("carriers", sc.carriers);
  if (doc.contains("pilot_indices"))
    sc.pilot_indices = doc["pilot_indices"].get<std::vector<int>>();
  else if (doc.contains("pilot_count"))
    sc.pilot_indices = OfdmScenario::evenly_spaced_pilots(
        sc.carriers, doc["pilot_count"].get<int>());
  else
    throw ParseError("scenario: needs 'pilot_indices' or 'pilot_count'");
  if (!doc.contains("constellation"))
    throw ParseError("scenario: missing 'constellation'");
  sc.constellation =
      Constellation::by_name(doc["constellation"].get<std::string>());
  if (doc.contains("code_generators_octal"))
    sc.code_generators_octal =
        doc["code_generators_octal"].get<std::vector<unsigned>>();
  get("interleaver_seed", sc.interleaver_seed);
  get("pilot_seed", sc.pilot_seed);
  get("subcarrier_spacing_hz", sc.subcarrier_spacing_hz);
  if (doc.contains("tau_rms_us")) sc.tau_rms_s = doc["tau_rms_us"].get<double>() * 1e-6;
  get("diag_loading", sc.diag_loading);
  if (doc.contains("ebn0_db")) sc.ebn0_db = doc["ebn0_db"].get<std::vector<double>>();
  get("trials", sc.trials);
  get("max_outer", sc.max_outer);
  get("channel_delta_tol", sc.channel_delta_tol);
  get("n_inner", sc.n_inner);
  return sc;
}

OfdmScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_scenario(text);
}

ScenarioRuntime::ScenarioRuntime(OfdmScenario sc) : sc_(std::move(sc)) {
  if (sc_.carriers < 2) throw Error("scenario: need at least two carriers");
  if (sc_.pilot_indices.empty()) throw Error("scenario: no pilots");
  if (sc_.trials < 1 || sc_.max_outer < 1 || sc_.n_inner < 1)
    throw Error("scenario: counts must be positive");

  pilot_pos_.assign(sc_.carriers, -1);
  for (std::size_t k = 0; k < sc_.pilot_indices.size(); ++k) {
    int idx = sc_.pilot_indices[k];
    if (idx < 0 || idx >= sc_.carriers)
      throw Error("scenario: pilot index out of range");
    if (pilot_pos_[idx] >= 0) throw Error("scenario: duplicate pilot index");
    pilot_pos_[idx] = static_cast<int>(k);
  }
  for (int i = 0; i < sc_.carriers; ++i)
    if (pilot_pos_[i] < 0) data_indices_.push_back(i);
  if (data_indices_.empty()) throw Error("scenario: no data carriers");

  code_ = ConvCode::from_octal(sc_.code_generators_octal);
  int L = sc_.constellation.bits;
  coded_len_ = static_cast<int>(data_indices_.size()) * L;
  int n = code_.n_out();
  info_len_ = coded_len_ / n - code_.memory;
  if (info_len_ < 1)
    throw Error("scenario: too few data carriers for the code");
  pad_len_ = coded_len_ - (info_len_ + code_.memory) * n;

  // random interleaver over the coded stream
  perm_.resize(coded_len_);
  for (int q = 0; q < coded_len_; ++q) perm_[q] = q;
  Rng irng(sc_.interleaver_seed);
  for (int q = coded_len_ - 1; q > 0; --q)
    std::swap(perm_[q], perm_[irng.uniform_int(q + 1)]);

  // pseudo-random unit-energy QPSK pilots
  Constellation qp = Constellation::qpsk();
  Rng prng(sc_.pilot_seed);
  pilot_syms_.resize(static_cast<int>(sc_.pilot_indices.size()));
  for (int k = 0; k < pilot_syms_.size(); ++k)
    pilot_syms_[k] = qp.points[prng.uniform_int(4)];

  // frequency-correlation of an exponential power-delay profile, unit
  // diagonal after loading
  int M = sc_.carriers;
  cov_.resize(M, M);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b) {
      double d = static_cast<double>(a - b) * sc_.subcarrier_spacing_hz;
      cov_(a, b) = 1.0 / cplx(1.0, 2.0 * M_PI * d * sc_.tau_rms_s);
    }
  cov_ = (cov_ + sc_.diag_loading *
                     Eigen::MatrixXcd::Identity(M, M)) /
         (1.0 + sc_.diag_loading);
  Eigen::LLT<Eigen::MatrixXcd> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw Error("scenario: channel covariance is not positive definite");
  chol_ = llt.matrixL();
  prior_.mean = Eigen::VectorXcd::Zero(M);
  prior_.precision = llt.solve(Eigen::MatrixXcd::Identity(M, M));
  // symmetrize against roundoff
  prior_.precision = 0.5 * (prior_.precision + prior_.precision.adjoint().eval());
}

double ScenarioRuntime::gamma_for_ebn0_db(double ebn0_db) const {
  double ebn0 = std::pow(10.0, ebn0_db / 10.0);
  return ebn0 * code_rate() * sc_.constellation.bits;
}

std::vector<std::uint8_t> random_info_bits(const ScenarioRuntime& rt, Rng& rng) {
  std::vector<std::uint8_t> u(rt.info_len());
  for (auto& b : u) b = static_cast<std::uint8_t>(rng.next() & 1u);
  return u;
}

Transmission transmit(const ScenarioRuntime& rt,
                      const std::vector<std::uint8_t>& info) {
  if (static_cast<int>(info.size()) != rt.info_len())
    throw Error("transmit: expected " + std::to_string(rt.info_len()) +
                " info bits");
  const OfdmScenario& sc = rt.sc();
  Transmission tx;
  tx.info_bits = info;
  tx.coded_bits = rt.code().encode(info);
  tx.coded_bits.resize(rt.coded_len(), 0);  // known zero padding

  int L = sc.constellation.bits;
  tx.symbol_index.resize(rt.num_data());
  tx.x.resize(sc.carriers);
  for (std::size_t k = 0; k < sc.pilot_indices.size(); ++k)
    tx.x[sc.pilot_indices[k]] = rt.pilot_symbols()[static_cast<int>(k)];
  for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
    int idx = 0;
    for (int l = 0; l < L; ++l) {
      int stream_pos = nsym * L + l;
      idx = (idx << 1) | tx.coded_bits[rt.interleaver()[stream_pos]];
    }
    tx.symbol_index[nsym] = idx;
    tx.x[rt.data_indices()[nsym]] = sc.constellation.points[idx];
  }
  return tx;
}

ChannelDraw apply_channel(const ScenarioRuntime& rt, const Eigen::VectorXcd& x,
                          double gamma, Rng& rng) {
  int M = rt.sc().carriers;
  if (x.size() != M) throw Error("apply_channel: carrier count mismatch");
  ChannelDraw d;
  Eigen::VectorXcd w(M);
  for (int i = 0; i < M; ++i) w[i] = rng.cnormal();
  d.h = rt.sampling_chol() * w;
  d.y.resize(M);
  double sigma = std::sqrt(1.0 / gamma);
  for (int i = 0; i < M; ++i) d.y[i] = d.h[i] * x[i] + sigma * rng.cnormal();
  return d;
}

ComplexGaussian pilot_posterior(const ScenarioRuntime& rt,
                                const Eigen::VectorXcd& y, double gamma) {
  QuadraticEvidence ev = QuadraticEvidence::zero(rt.sc().carriers);
  for (std::size_t k = 0; k < rt.sc().pilot_indices.size(); ++k) {
    int i = rt.sc().pilot_indices[k];
    cplx xp = rt.pilot_symbols()[static_cast<int>(k)];
    ev.add(i, gamma * std::norm(xp), gamma * y[i] * std::conj(xp));
  }
  return posterior_update(rt.channel_prior(), ev);
}

namespace {

double log_entropy(const std::vector<double>& logp) {
  double h = 0.0;
  for (double l : logp)
    if (l != kNegInf) h -= std::exp(l) * l;
  return h;
}

SymbolStats stats_from_log(const std::vector<double>& logp,
                           const std::vector<cplx>& pts) {
  cplx mu = 0.0;
  for (std::size_t k = 0; k < logp.size(); ++k)
    mu += std::exp(logp[k]) * pts[k];
  double var = 0.0;
  for (std::size_t k = 0; k < logp.size(); ++k)
    var += std::exp(logp[k]) * std::norm(pts[k] - mu);
  return {mu, var};
}

void normalize_log(std::vector<double>& lg) {
  double z = log_sum_exp(lg);
  for (double& v : lg) v -= z;
}

struct ChannelMoments {
  Eigen::VectorXcd mean;
  Eigen::VectorXd var;  // per-coordinate marginal variance
};

ChannelMoments channel_moments(const ComplexGaussian& b) {
  Eigen::LLT<Eigen::MatrixXcd> llt(b.precision);
  if (llt.info() != Eigen::Success)
    throw Error("channel posterior precision is not positive definite");
  Eigen::MatrixXcd cov =
      llt.solve(Eigen::MatrixXcd::Identity(b.dim(), b.dim()));
  ChannelMoments m;
  m.mean = b.mean;
  m.var = cov.diagonal().real();
  return m;
}

// MF message from the observation factor to the symbol variable, up to a
// constant: -gamma (|s|^2 (var+|mu|^2) - 2 Re(conj(y) mu s)).
std::vector<double> mf_symbol_evidence(const std::vector<cplx>& pts, cplx y,
                                       cplx mu, double var, double gamma) {
  double eh2 = var + std::norm(mu);
  std::vector<double> lg(pts.size());
  for (std::size_t s = 0; s < pts.size(); ++s)
    lg[s] = -gamma * (std::norm(pts[s]) * eh2 -
                      2.0 * std::real(std::conj(y) * mu * pts[s]));
  return lg;
}

// Exact single-observation likelihood given a Gaussian channel estimate:
// y | s ~ CN(mu s, var |s|^2 + 1/gamma).
std::vector<double> marginal_symbol_evidence(const std::vector<cplx>& pts,
                                             cplx y, cplx mu, double var,
                                             double gamma) {
  std::vector<double> lg(pts.size());
  for (std::size_t s = 0; s < pts.size(); ++s) {
    double v = var * std::norm(pts[s]) + 1.0 / gamma;
    lg[s] = -std::log(v) - std::norm(y - mu * pts[s]) / v;
  }
  return lg;
}

double combined_free_energy_ofdm(const ScenarioRuntime& rt,
                                 const Eigen::VectorXcd& y, double gamma,
                                 const SymbolDecoder& dec,
                                 const ComplexGaussian& b_h,
                                 const ChannelMoments& mom,
                                 const std::vector<SymbolStats>& stats) {
  double fe = dec.bp_free_energy_terms();
  fe -= b_h.entropy();
  GaussianPriorPotential prior{rt.channel_prior().mean,
                               rt.channel_prior().precision};
  fe -= expected_log_gaussian_prior(prior, b_h);
  for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
    int i = rt.data_indices()[nsym];
    ScalarObservationPotential obs{y[i], gamma, i, rt.sc().constellation.points};
    fe -= expected_log_observation(obs, {mom.mean[i], mom.var[i]}, stats[nsym]);
  }
  for (std::size_t k = 0; k < rt.sc().pilot_indices.size(); ++k) {
    int i = rt.sc().pilot_indices[k];
    cplx xp = rt.pilot_symbols()[static_cast<int>(k)];
    ScalarObservationPotential obs{y[i], gamma, i, {xp}};
    fe -= expected_log_observation(obs, {mom.mean[i], mom.var[i]}, {xp, 0.0});
  }
  return fe;
}

}  // namespace

SymbolDecoder::SymbolDecoder(const ScenarioRuntime& rt) : rt_(rt) {
  int LN = rt_.coded_len();
  inv_perm_.assign(LN, 0);
  for (int q = 0; q < LN; ++q) inv_perm_[rt_.interleaver()[q]] = q;
  reset();
}

void SymbolDecoder::reset() {
  int LN = rt_.coded_len();
  msg_code_to_bit_.assign(LN, BitLog{-M_LN2, -M_LN2});
  int trellis_bits = (rt_.info_len() + rt_.code().memory) * rt_.code().n_out();
  for (int jc = trellis_bits; jc < LN; ++jc)
    msg_code_to_bit_[inv_perm_[jc]] = BitLog{0.0, kNegInf};  // known pad bit
}

void SymbolDecoder::run(const std::vector<std::vector<double>>& evidence,
                        int rounds) {
  if (static_cast<int>(evidence.size()) != rt_.num_data())
    throw Error("decoder: one evidence table per data carrier required");
  for (int r = 0; r < rounds; ++r) {
    demap(evidence);
    decode();
  }
  demap(evidence);  // refresh the symbol side with the newest code messages
  finalize(evidence);
}

std::vector<std::uint8_t> SymbolDecoder::decide_info() const {
  std::vector<std::uint8_t> u(rt_.info_len());
  for (int t = 0; t < rt_.info_len(); ++t)
    u[t] = last_.info_app[t][1] > last_.info_app[t][0] ? 1 : 0;
  return u;
}

double SymbolDecoder::bp_free_energy_terms() const {
  double fe = 0.0;
  // modulation-factor KL terms: -H of each symbol belief
  for (const auto& app : app_) fe -= log_entropy(app);
  // code-factor KL: -H of the path posterior
  fe -= last_.path_entropy;
  // info-prior KL terms and the matching entropy terms
  for (int t = 0; t < rt_.info_len(); ++t) {
    std::vector<double> b{last_.info_app[t][0], last_.info_app[t][1]};
    fe += -log_entropy(b) + M_LN2;  // KL(b || uniform)
    fe += log_entropy(b);           // (|N_BP| - 1) H with two neighbors
  }
  // coded-bit entropy terms (two BP neighbors each)
  for (const auto& step : last_.coded_app)
    for (const auto& bit : step) {
      std::vector<double> b{bit[0], bit[1]};
      fe += log_entropy(b);
    }
  return fe;
}

std::vector<double> SymbolDecoder::bits_to_symbol(int nsym) const {
  int L = rt_.sc().constellation.bits;
  int Q = 1 << L;
  std::vector<double> out(Q, 0.0);
  for (int s = 0; s < Q; ++s)
    for (int l = 0; l < L; ++l)
      out[s] += msg_code_to_bit_[nsym * L + l][(s >> (L - 1 - l)) & 1];
  return out;
}

void SymbolDecoder::demap(const std::vector<std::vector<double>>& evidence) {
  int L = rt_.sc().constellation.bits;
  int Q = 1 << L;
  mod_ext_.assign(rt_.coded_len(), BitLog{kNegInf, kNegInf});
  auto lse_acc = [](double acc, double v) {
    if (v == kNegInf) return acc;
    if (acc == kNegInf) return v;
    return std::max(acc, v) + std::log1p(std::exp(-std::abs(acc - v)));
  };
  for (int nsym = 0; nsym < rt_.num_data(); ++nsym) {
    for (int l = 0; l < L; ++l) {
      // division-free extrinsic: the target bit's own message is left out of
      // the rebuilt branch sum (pad bits carry exact zeros)
      BitLog ext{kNegInf, kNegInf};
      for (int s = 0; s < Q; ++s) {
        double v = evidence[nsym][s];
        for (int l2 = 0; l2 < L; ++l2) {
          if (l2 == l) continue;
          v += msg_code_to_bit_[nsym * L + l2][(s >> (L - 1 - l2)) & 1];
        }
        int c = (s >> (L - 1 - l)) & 1;
        ext[c] = lse_acc(ext[c], v);
      }
      double z = lse_acc(ext[0], ext[1]);
      mod_ext_[nsym * L + l] = {ext[0] - z, ext[1] - z};
    }
  }
}

void SymbolDecoder::decode() {
  const ConvCode& code = rt_.code();
  int T = rt_.info_len() + code.memory;
  int n = code.n_out();
  std::vector<std::vector<BitLog>> coded_msgs(T, std::vector<BitLog>(n));
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < n; ++j)
      coded_msgs[t][j] = mod_ext_[inv_perm_[t * n + j]];
  std::vector<BitLog> info_priors(rt_.info_len(), BitLog{-M_LN2, -M_LN2});
  last_ = bcjr(code, rt_.info_len(), coded_msgs, info_priors);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < n; ++j)
      msg_code_to_bit_[inv_perm_[t * n + j]] = last_.coded_ext[t][j];
}

void SymbolDecoder::finalize(const std::vector<std::vector<double>>& evidence) {
  int Q = 1 << rt_.sc().constellation.bits;
  app_.assign(rt_.num_data(), {});
  ext_.assign(rt_.num_data(), {});
  for (int nsym = 0; nsym < rt_.num_data(); ++nsym) {
    std::vector<double> reply = bits_to_symbol(nsym);
    std::vector<double> app(Q), ext(Q);
    for (int s = 0; s < Q; ++s) {
      ext[s] = reply[s];
      app[s] = reply[s] + evidence[nsym][s];
    }
    normalize_log(app);
    normalize_log(ext);
    app_[nsym] = std::move(app);
    ext_[nsym] = std::move(ext);
  }
}

CollapsedEvidence collapse_observation_mixture(const std::vector<cplx>& points,
                                               const std::vector<double>& ext_log,
                                               cplx y, double gamma) {
  if (points.size() != ext_log.size())
    throw Error("collapse: weight count must match the constellation");
  // mixture component for symbol s: CN(h; y s*/|s|^2, 1/(gamma |s|^2)) with
  // mass proportional to w_s / |s|^2
  double wmax = kNegInf;
  std::vector<double> lw(points.size());
  for (std::size_t s = 0; s < points.size(); ++s) {
    lw[s] = ext_log[s] - std::log(std::norm(points[s]));
    wmax = std::max(wmax, lw[s]);
  }
  double tot = 0.0;
  for (double& v : lw) {
    v = std::exp(v - wmax);
    tot += v;
  }
  cplx m1 = 0.0;
  double eh2 = 0.0;
  for (std::size_t s = 0; s < points.size(); ++s) {
    double w = lw[s] / tot;
    cplx mu_s = y * std::conj(points[s]) / std::norm(points[s]);
    m1 += w * mu_s;
    eh2 += w * (1.0 / (gamma * std::norm(points[s])) + std::norm(mu_s));
  }
  double v = std::max(eh2 - std::norm(m1), 1e-15);
  return {1.0 / v, m1 / v};
}

TrialRecord run_bpmf_receiver(const ScenarioRuntime& rt,
                              const Eigen::VectorXcd& y, double gamma) {
  const auto& pts = rt.sc().constellation.points;
  ComplexGaussian b_h = pilot_posterior(rt, y, gamma);
  SymbolDecoder dec(rt);
  std::vector<SymbolStats> stats(rt.num_data());
  Eigen::VectorXcd prev_mu = b_h.mean;
  ChannelMoments mom;
  int iters = 0;
  for (int it = 1; it <= rt.sc().max_outer; ++it) {
    iters = it;
    mom = channel_moments(b_h);
    std::vector<std::vector<double>> evidence(rt.num_data());
    for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
      int i = rt.data_indices()[nsym];
      evidence[nsym] =
          mf_symbol_evidence(pts, y[i], mom.mean[i], mom.var[i], gamma);
    }
    dec.run(evidence, rt.sc().n_inner);

    QuadraticEvidence ev = QuadraticEvidence::zero(rt.sc().carriers);
    for (std::size_t k = 0; k < rt.sc().pilot_indices.size(); ++k) {
      int i = rt.sc().pilot_indices[k];
      cplx xp = rt.pilot_symbols()[static_cast<int>(k)];
      ev.add(i, gamma * std::norm(xp), gamma * y[i] * std::conj(xp));
    }
    for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
      int i = rt.data_indices()[nsym];
      stats[nsym] = stats_from_log(dec.symbol_app()[nsym], pts);
      double es2 = stats[nsym].var + std::norm(stats[nsym].mean);
      ev.add(i, gamma * es2, gamma * y[i] * std::conj(stats[nsym].mean));
    }
    b_h = posterior_update(rt.channel_prior(), ev);
    double delta = (b_h.mean - prev_mu).cwiseAbs().maxCoeff();
    prev_mu = b_h.mean;
    if (delta < rt.sc().channel_delta_tol) break;
  }
  TrialRecord rec;
  rec.decoded_bits = dec.decide_info();
  rec.outer_iters = iters;
  mom = channel_moments(b_h);
  rec.final_free_energy =
      combined_free_energy_ofdm(rt, y, gamma, dec, b_h, mom, stats);
  return rec;
}

TrialRecord run_bp_gauss_baseline(const ScenarioRuntime& rt,
                                  const Eigen::VectorXcd& y, double gamma) {
  const auto& pts = rt.sc().constellation.points;
  int M = rt.sc().carriers;
  SymbolDecoder dec(rt);

  QuadraticEvidence pilots = QuadraticEvidence::zero(M);
  for (std::size_t k = 0; k < rt.sc().pilot_indices.size(); ++k) {
    int i = rt.sc().pilot_indices[k];
    cplx xp = rt.pilot_symbols()[static_cast<int>(k)];
    pilots.add(i, gamma * std::norm(xp), gamma * y[i] * std::conj(xp));
  }
  Eigen::VectorXd data_lambda = Eigen::VectorXd::Zero(M);
  Eigen::VectorXcd data_lambda_mu = Eigen::VectorXcd::Zero(M);

  ComplexGaussian b_h = posterior_update(rt.channel_prior(), pilots);
  ChannelMoments mom = channel_moments(b_h);
  Eigen::VectorXcd prev_mu = b_h.mean;
  std::vector<SymbolStats> stats(rt.num_data());
  int iters = 0;
  for (int it = 1; it <= rt.sc().max_outer; ++it) {
    iters = it;
    std::vector<std::vector<double>> evidence(rt.num_data());
    for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
      int i = rt.data_indices()[nsym];
      // cavity estimate: remove this carrier's own evidence from the
      // posterior (rank-one downdate in closed form)
      double den = 1.0 - data_lambda[i] * mom.var[i];
      den = std::max(den, 1e-12);
      double var_ext = mom.var[i] / den;
      cplx mu_ext = (mom.mean[i] - mom.var[i] * data_lambda_mu[i]) / den;
      evidence[nsym] =
          marginal_symbol_evidence(pts, y[i], mu_ext, var_ext, gamma);
    }
    dec.run(evidence, rt.sc().n_inner);

    for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
      int i = rt.data_indices()[nsym];
      CollapsedEvidence ce = collapse_observation_mixture(
          pts, dec.symbol_ext()[nsym], y[i], gamma);
      data_lambda[i] = ce.lambda;
      data_lambda_mu[i] = ce.lambda_mu;
    }
    QuadraticEvidence ev = pilots;
    for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
      int i = rt.data_indices()[nsym];
      ev.add(i, data_lambda[i], data_lambda_mu[i]);
    }
    b_h = posterior_update(rt.channel_prior(), ev);
    mom = channel_moments(b_h);
    double delta = (b_h.mean - prev_mu).cwiseAbs().maxCoeff();
    prev_mu = b_h.mean;
    if (delta < rt.sc().channel_delta_tol) break;
  }
  TrialRecord rec;
  rec.decoded_bits = dec.decide_info();
  rec.outer_iters = iters;
  for (int nsym = 0; nsym < rt.num_data(); ++nsym)
    stats[nsym] = stats_from_log(dec.symbol_app()[nsym], pts);
  rec.final_free_energy =
      combined_free_energy_ofdm(rt, y, gamma, dec, b_h, mom, stats);
  return rec;
}

TrialRecord run_perfect_csi(const ScenarioRuntime& rt,
                            const Eigen::VectorXcd& y, double gamma,
                            const Eigen::VectorXcd& h_true) {
  const auto& pts = rt.sc().constellation.points;
  SymbolDecoder dec(rt);
  std::vector<std::vector<double>> evidence(rt.num_data());
  for (int nsym = 0; nsym < rt.num_data(); ++nsym) {
    int i = rt.data_indices()[nsym];
    evidence[nsym] = mf_symbol_evidence(pts, y[i], h_true[i], 0.0, gamma);
  }
  dec.run(evidence, rt.sc().n_inner);
  TrialRecord rec;
  rec.decoded_bits = dec.decide_info();
  rec.outer_iters = 1;
  rec.final_free_energy = std::nan("");  // no channel belief in this receiver
  return rec;
}

const char* receiver_name(Receiver r) {
  switch (r) {
    case Receiver::BpMf: return "bpmf";
    case Receiver::BpGauss: return "bp-gauss";
    case Receiver::PerfectCsi: return "perfect-csi";
  }
  return "?";
}

Receiver receiver_by_name(const std::string& name) {
  if (name == "bpmf") return Receiver::BpMf;
  if (name == "bp-gauss") return Receiver::BpGauss;
  if (name == "perfect-csi") return Receiver::PerfectCsi;
  throw Error("unknown receiver '" + name + "'");
}

std::vector<BerRow> run_ber_sweep(const ScenarioRuntime& rt,
                                  const std::vector<Receiver>& receivers,
                                  std::uint64_t master_seed, int jobs) {
  const int nsnr = static_cast<int>(rt.sc().ebn0_db.size());
  const int T = rt.sc().trials;
  const int R = static_cast<int>(receivers.size());
  if (nsnr == 0 || R == 0) return {};
  jobs = std::max(1, jobs);

  struct Cell {
    long errors = 0;
    int iters = 0;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(nsnr) * T * R);
  std::atomic<long> next{0};
  const long total = static_cast<long>(nsnr) * T;

  auto worker = [&]() {
    for (;;) {
      long f = next.fetch_add(1);
      if (f >= total) return;
      int si = static_cast<int>(f / T);
      int t = static_cast<int>(f % T);
      double gamma = rt.gamma_for_ebn0_db(rt.sc().ebn0_db[si]);

      // bits and channel are common across the SNR grid; noise is not
      Rng rng_tx(derive_seed(master_seed, static_cast<std::uint64_t>(t), 0xb175));
      std::vector<std::uint8_t> u = random_info_bits(rt, rng_tx);
      Transmission tx = transmit(rt, u);
      Eigen::VectorXcd w(rt.sc().carriers);
      for (int i = 0; i < rt.sc().carriers; ++i) w[i] = rng_tx.cnormal();
      Eigen::VectorXcd h = rt.sampling_chol() * w;
      Rng rng_noise(derive_seed(master_seed,
                                (static_cast<std::uint64_t>(si) << 32) |
                                    static_cast<std::uint64_t>(t),
                                0x401e));
      Eigen::VectorXcd y(rt.sc().carriers);
      double sigma = std::sqrt(1.0 / gamma);
      for (int i = 0; i < rt.sc().carriers; ++i)
        y[i] = h[i] * tx.x[i] + sigma * rng_noise.cnormal();

      for (int r = 0; r < R; ++r) {
        TrialRecord rec;
        switch (receivers[r]) {
          case Receiver::BpMf: rec = run_bpmf_receiver(rt, y, gamma); break;
          case Receiver::BpGauss: rec = run_bp_gauss_baseline(rt, y, gamma); break;
          case Receiver::PerfectCsi: rec = run_perfect_csi(rt, y, gamma, h); break;
        }
        long errs = 0;
        for (int k = 0; k < rt.info_len(); ++k)
          errs += rec.decoded_bits[k] != u[k] ? 1 : 0;
        Cell& c = cells[(static_cast<std::size_t>(si) * T + t) * R + r];
        c.errors = errs;
        c.iters = rec.outer_iters;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<BerRow> rows;
  for (int si = 0; si < nsnr; ++si)
    for (int r = 0; r < R; ++r) {
      BerRow row;
      row.ebn0_db = rt.sc().ebn0_db[si];
      row.receiver = receivers[r];
      row.trials = T;
      long iters = 0;
      for (int t = 0; t < T; ++t) {
        const Cell& c = cells[(static_cast<std::size_t>(si) * T + t) * R + r];
        row.bit_errors += c.errors;
        iters += c.iters;
      }
      row.ber = static_cast<double>(row.bit_errors) /
                (static_cast<double>(T) * rt.info_len());
      row.mean_outer_iters = static_cast<double>(iters) / T;
      rows.push_back(row);
    }
  return rows;
}

void write_ber_csv(const std::vector<BerRow>& rows, std::ostream& os) {
  os << "snr_db,receiver,trials,bit_errors,ber,mean_outer_iters\n";
  char buf[192];
  for (const BerRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%d,%ld,%.17g,%.17g\n", r.ebn0_db,
                  receiver_name(r.receiver), r.trials, r.bit_errors, r.ber,
                  r.mean_outer_iters);
    os << buf;
  }
}

}  // namespace ofdm
}  // namespace bpmf
