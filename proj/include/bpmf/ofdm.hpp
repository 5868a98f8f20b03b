#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bpmf/gaussian.hpp"
#include "bpmf/rng.hpp"
#include "bpmf/trellis.hpp"

namespace bpmf {
namespace ofdm {

struct Constellation {
  std::string name;
  int bits = 0;
  std::vector<cplx> points;  // index is the bit pattern, first bit = MSB

  static Constellation qpsk();
  static Constellation qam16();
  static Constellation by_name(const std::string& name);
};

struct OfdmScenario {
  int carriers = 64;
  std::vector<int> pilot_indices;  // evenly spaced when built from a count
  Constellation constellation = Constellation::qpsk();
  std::vector<unsigned> code_generators_octal{7, 5};
  std::uint64_t interleaver_seed = 1;
  std::uint64_t pilot_seed = 2;
  double subcarrier_spacing_hz = 15e3;
  double tau_rms_s = 1e-6;       // exponential power-delay profile spread
  double diag_loading = 1e-3;    // keeps the prior precision well conditioned
  std::vector<double> ebn0_db{0, 2, 4, 6, 8, 10, 12};
  int trials = 400;
  int max_outer = 20;
  double channel_delta_tol = 1e-5;  // stop on max |mu_H| change
  int n_inner = 3;                  // demap/decode exchanges per outer round

  static std::vector<int> evenly_spaced_pilots(int carriers, int count);
};

OfdmScenario load_scenario(const std::string& path);
OfdmScenario parse_scenario(const std::string& text);

// Everything derived from a scenario that trials share: pilot symbols,
// interleaver, channel prior, code tables.
class ScenarioRuntime {
 public:
  explicit ScenarioRuntime(OfdmScenario sc);

  const OfdmScenario& sc() const { return sc_; }
  const ConvCode& code() const { return code_; }
  int num_data() const { return static_cast<int>(data_indices_.size()); }
  int coded_len() const { return coded_len_; }  // L * N including padding
  int info_len() const { return info_len_; }    // K
  int pad_len() const { return pad_len_; }
  double code_rate() const {
    return static_cast<double>(info_len_) / static_cast<double>(coded_len_);
  }
  const std::vector<int>& data_indices() const { return data_indices_; }
  const std::vector<int>& interleaver() const { return perm_; }
  const Eigen::VectorXcd& pilot_symbols() const { return pilot_syms_; }
  const ComplexGaussian& channel_prior() const { return prior_; }
  const Eigen::MatrixXcd& prior_covariance() const { return cov_; }
  const Eigen::MatrixXcd& sampling_chol() const { return chol_; }
  bool is_pilot(int carrier) const { return pilot_pos_[carrier] >= 0; }
  int pilot_pos(int carrier) const { return pilot_pos_[carrier]; }
  double gamma_for_ebn0_db(double ebn0_db) const;

 private:
  OfdmScenario sc_;
  ConvCode code_;
  std::vector<int> data_indices_;
  std::vector<int> pilot_pos_;  // carrier -> pilot slot or -1
  std::vector<int> perm_;       // stream position -> coded bit index
  Eigen::VectorXcd pilot_syms_;
  Eigen::MatrixXcd cov_, chol_;
  ComplexGaussian prior_;
  int coded_len_ = 0, info_len_ = 0, pad_len_ = 0;
};

struct Transmission {
  std::vector<std::uint8_t> info_bits;
  std::vector<std::uint8_t> coded_bits;  // pre-interleaving, padding included
  std::vector<int> symbol_index;         // per data carrier
  Eigen::VectorXcd x;                    // all carriers, pilots included
};

Transmission transmit(const ScenarioRuntime& rt,
                      const std::vector<std::uint8_t>& info);
std::vector<std::uint8_t> random_info_bits(const ScenarioRuntime& rt, Rng& rng);

struct ChannelDraw {
  Eigen::VectorXcd h;
  Eigen::VectorXcd y;
};

// h ~ CN(0, prior covariance), z ~ CN(0, 1/gamma I), y = h .* x + z.
ChannelDraw apply_channel(const ScenarioRuntime& rt, const Eigen::VectorXcd& x,
                          double gamma, Rng& rng);

struct TrialRecord {
  std::vector<std::uint8_t> info_bits;     // filled by the harness
  std::vector<std::uint8_t> decoded_bits;
  int bit_errors = 0;
  int outer_iters = 0;
  double final_free_energy = 0.0;  // NaN for the perfect-CSI receiver
};

// Demapper/decoder plumbing of the BP part shared by the receivers: the
// per-carrier modulation factors exchange bit messages with the code factor
// through the interleaver; the code factor runs exact sum-product over the
// trellis. Padding bits carry exact point masses.
class SymbolDecoder {
 public:
  explicit SymbolDecoder(const ScenarioRuntime& rt);

  void reset();
  // `evidence[n]` is the log-domain symbol message on data carrier n (any
  // scale); runs `rounds` demap/decode exchanges, then refreshes the symbol
  // outputs with the newest code-side messages.
  void run(const std::vector<std::vector<double>>& evidence, int rounds);

  // normalized log beliefs: full product including the evidence (the message
  // toward the observation factor)...
  const std::vector<std::vector<double>>& symbol_app() const { return app_; }
  // ...and the code-side-only product (extrinsic, excluding the evidence)
  const std::vector<std::vector<double>>& symbol_ext() const { return ext_; }
  // unnormalized modulation-factor reply toward one symbol variable
  std::vector<double> mod_reply(int nsym) const { return bits_to_symbol(nsym); }
  const BcjrResult& bcjr_result() const { return last_; }

  std::vector<std::uint8_t> decide_info() const;
  // KL and entropy terms of the BP part for the free-energy bookkeeping
  double bp_free_energy_terms() const;

 private:
  std::vector<double> bits_to_symbol(int nsym) const;
  void demap(const std::vector<std::vector<double>>& evidence);
  void decode();
  void finalize(const std::vector<std::vector<double>>& evidence);

  const ScenarioRuntime& rt_;
  std::vector<int> inv_perm_;
  std::vector<BitLog> msg_code_to_bit_;  // post-interleave stream positions
  std::vector<BitLog> mod_ext_;
  std::vector<std::vector<double>> app_, ext_;
  BcjrResult last_;
};

// Moment matching of the observation reply toward the channel: a Gaussian
// mixture over the constellation, weighted by extrinsic symbol
// probabilities, collapsed to a single Gaussian. Returns the precision
// increment and precision-weighted mean for the carrier.
struct CollapsedEvidence {
  double lambda = 0.0;
  cplx lambda_mu{0.0, 0.0};
};
CollapsedEvidence collapse_observation_mixture(const std::vector<cplx>& points,
                                               const std::vector<double>& ext_log,
                                               cplx y, double gamma);

TrialRecord run_bpmf_receiver(const ScenarioRuntime& rt,
                              const Eigen::VectorXcd& y, double gamma);
TrialRecord run_bp_gauss_baseline(const ScenarioRuntime& rt,
                                  const Eigen::VectorXcd& y, double gamma);
TrialRecord run_perfect_csi(const ScenarioRuntime& rt,
                            const Eigen::VectorXcd& y, double gamma,
                            const Eigen::VectorXcd& h_true);

// Pilot-only channel posterior (the receivers' initialization); exposed for
// direct comparison against the covariance-form MMSE estimate.
ComplexGaussian pilot_posterior(const ScenarioRuntime& rt,
                                const Eigen::VectorXcd& y, double gamma);

enum class Receiver { BpMf, BpGauss, PerfectCsi };
const char* receiver_name(Receiver r);
Receiver receiver_by_name(const std::string& name);

struct BerRow {
  double ebn0_db = 0.0;
  Receiver receiver = Receiver::BpMf;
  int trials = 0;
  long bit_errors = 0;
  double ber = 0.0;
  double mean_outer_iters = 0.0;
};

// Deterministic under (scenario, master_seed, jobs): per-trial seeds derive
// from (master, trial) for bits/channel and (master, snr, trial) for noise;
// results are reduced in trial order.
std::vector<BerRow> run_ber_sweep(const ScenarioRuntime& rt,
                                  const std::vector<Receiver>& receivers,
                                  std::uint64_t master_seed, int jobs);

// Columns: snr_db,receiver,trials,bit_errors,ber,mean_outer_iters.
void write_ber_csv(const std::vector<BerRow>& rows, std::ostream& os);

}  // namespace ofdm
}  // namespace bpmf
