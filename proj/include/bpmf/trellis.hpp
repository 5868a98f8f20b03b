#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bpmf/common.hpp"

namespace bpmf {

// Nonrecursive feedforward convolutional code, rate 1/n, zero-tail
// terminated. Generator polynomials are given in octal; bit 0 of a
// polynomial taps the current input bit, bit k the input k steps back.
struct ConvCode {
  std::vector<unsigned> generators;  // binary-expanded polynomials
  int memory = 0;

  static ConvCode from_octal(const std::vector<unsigned>& octal);

  int n_out() const { return static_cast<int>(generators.size()); }
  int num_states() const { return 1 << memory; }

  // Encodes info bits followed by `memory` zero termination bits; output
  // length is (info.size() + memory) * n_out().
  std::vector<std::uint8_t> encode(const std::vector<std::uint8_t>& info) const;
};

using BitLog = std::array<double, 2>;  // log-domain message over one bit

struct BcjrResult {
  std::vector<BitLog> info_app;              // per info bit, normalized
  std::vector<std::vector<BitLog>> coded_ext;  // [step][output], normalized
  std::vector<std::vector<BitLog>> coded_app;  // [step][output], normalized
  double path_entropy = 0.0;  // entropy of the posterior over code paths
  double log_z = 0.0;         // log of the total trellis mass
};

// Exact sum-product over the terminated trellis. `coded_msgs[t][j]` is the
// log-domain incoming message for output bit j of step t (t runs over
// info_len + memory steps); `info_priors` has one entry per info bit.
// Extrinsic outputs exclude the target bit's own incoming message
// (division-free: the branch metric is re-assembled without it).
BcjrResult bcjr(const ConvCode& code, int info_len,
                const std::vector<std::vector<BitLog>>& coded_msgs,
                const std::vector<BitLog>& info_priors);

}  // namespace bpmf
