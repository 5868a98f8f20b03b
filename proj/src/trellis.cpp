#include "bpmf/trellis.hpp"

#include <algorithm>
#include <cmath>

namespace bpmf {

namespace {

inline int parity(unsigned v) { return __builtin_popcount(v) & 1; }

inline double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

ConvCode ConvCode::from_octal(const std::vector<unsigned>& octal) {
  if (octal.empty()) throw Error("conv code: no generators");
  ConvCode c;
  for (unsigned g8 : octal) {
    // octal digits to binary
    unsigned g = 0, place = 1, v = g8;
    while (v > 0) {
      g += (v % 10) * place;
      v /= 10;
      place *= 8;
    }
    if (g == 0) throw Error("conv code: zero generator");
    c.generators.push_back(g);
  }
  int top = 0;
  for (unsigned g : c.generators)
    top = std::max(top, 31 - __builtin_clz(g));
  c.memory = top;
  if (c.memory < 1) throw Error("conv code: memory must be >= 1");
  return c;
}

std::vector<std::uint8_t> ConvCode::encode(
    const std::vector<std::uint8_t>& info) const {
  std::vector<std::uint8_t> out;
  out.reserve((info.size() + memory) * generators.size());
  unsigned state = 0;
  unsigned mask = (1u << memory) - 1;
  auto step = [&](unsigned u) {
    unsigned reg = (state << 1) | u;
    for (unsigned g : generators)
      out.push_back(static_cast<std::uint8_t>(parity(g & reg)));
    state = reg & mask;
  };
  for (std::uint8_t u : info) step(u & 1u);
  for (int t = 0; t < memory; ++t) step(0);
  return out;
}

BcjrResult bcjr(const ConvCode& code, int info_len,
                const std::vector<std::vector<BitLog>>& coded_msgs,
                const std::vector<BitLog>& info_priors) {
  const int T = info_len + code.memory;
  const int S = code.num_states();
  const int n = code.n_out();
  const unsigned mask = (1u << code.memory) - 1;
  if (static_cast<int>(coded_msgs.size()) != T)
    throw Error("bcjr: coded message count does not match trellis length");
  if (static_cast<int>(info_priors.size()) != info_len)
    throw Error("bcjr: info prior count mismatch");

  auto out_bits = [&](int s, int u) {
    unsigned reg = (static_cast<unsigned>(s) << 1) | static_cast<unsigned>(u);
    unsigned bits = 0;
    for (int j = 0; j < n; ++j)
      bits |= static_cast<unsigned>(parity(code.generators[j] & reg)) << j;
    return bits;
  };
  auto next_state = [&](int s, int u) {
    return static_cast<int>(((static_cast<unsigned>(s) << 1) |
                             static_cast<unsigned>(u)) &
                            mask);
  };
  auto gamma = [&](int t, int s, int u) {
    double gsum = t < info_len ? info_priors[t][u] : (u == 0 ? 0.0 : kNegInf);
    if (gsum == kNegInf) return kNegInf;
    unsigned bits = out_bits(s, u);
    for (int j = 0; j < n; ++j) gsum += coded_msgs[t][j][(bits >> j) & 1u];
    return gsum;
  };

  std::vector<std::vector<double>> alpha(T + 1,
                                         std::vector<double>(S, kNegInf));
  std::vector<std::vector<double>> beta(T + 1, std::vector<double>(S, kNegInf));
  alpha[0][0] = 0.0;
  for (int t = 0; t < T; ++t)
    for (int s = 0; s < S; ++s) {
      if (alpha[t][s] == kNegInf) continue;
      int umax = t < info_len ? 1 : 0;
      for (int u = 0; u <= umax; ++u) {
        double gsum = gamma(t, s, u);
        if (gsum == kNegInf) continue;
        int s2 = next_state(s, u);
        alpha[t + 1][s2] = lse2(alpha[t + 1][s2], alpha[t][s] + gsum);
      }
    }
  beta[T][0] = 0.0;
  for (int t = T - 1; t >= 0; --t)
    for (int s = 0; s < S; ++s) {
      int umax = t < info_len ? 1 : 0;
      double acc = kNegInf;
      for (int u = 0; u <= umax; ++u) {
        double gsum = gamma(t, s, u);
        if (gsum == kNegInf) continue;
        acc = lse2(acc, gsum + beta[t + 1][next_state(s, u)]);
      }
      beta[t][s] = acc;
    }

  BcjrResult res;
  res.log_z = alpha[T][0];
  if (res.log_z == kNegInf)
    throw ContradictionError("bcjr: no path has positive mass");

  res.info_app.resize(info_len);
  res.coded_ext.assign(T, std::vector<BitLog>(n, {kNegInf, kNegInf}));
  res.coded_app.assign(T, std::vector<BitLog>(n, {kNegInf, kNegInf}));

  double edge_entropy = 0.0;
  for (int t = 0; t < T; ++t) {
    BitLog info_acc{kNegInf, kNegInf};
    std::vector<BitLog> ext(n, BitLog{kNegInf, kNegInf});
    std::vector<BitLog> app(n, BitLog{kNegInf, kNegInf});
    int umax = t < info_len ? 1 : 0;
    for (int s = 0; s < S; ++s) {
      if (alpha[t][s] == kNegInf) continue;
      for (int u = 0; u <= umax; ++u) {
        double prior = t < info_len ? info_priors[t][u] : 0.0;
        if (prior == kNegInf) continue;
        unsigned bits = out_bits(s, u);
        double msum = 0.0;
        for (int j = 0; j < n; ++j) msum += coded_msgs[t][j][(bits >> j) & 1u];
        if (msum == kNegInf) continue;
        double base = alpha[t][s] + prior + beta[t + 1][next_state(s, u)];
        if (base == kNegInf) continue;
        double full = base + msum;
        info_acc[u] = lse2(info_acc[u], full);
        if (full != kNegInf) {
          double pe = std::exp(full - res.log_z);
          edge_entropy -= xlogx(pe);
        }
        for (int j = 0; j < n; ++j) {
          int c = (bits >> j) & 1;
          app[j][c] = lse2(app[j][c], full);
          // branch metric without bit j's own message
          double without = base + msum - coded_msgs[t][j][c];
          ext[j][c] = lse2(ext[j][c], without);
        }
      }
    }
    if (t < info_len) {
      double z = lse2(info_acc[0], info_acc[1]);
      res.info_app[t] = {info_acc[0] - z, info_acc[1] - z};
    }
    for (int j = 0; j < n; ++j) {
      double ze = lse2(ext[j][0], ext[j][1]);
      double za = lse2(app[j][0], app[j][1]);
      res.coded_ext[t][j] = {ext[j][0] - ze, ext[j][1] - ze};
      res.coded_app[t][j] = {app[j][0] - za, app[j][1] - za};
    }
  }

  // Markov-chain entropy: sum of edge entropies minus the entropy of the
  // interior state marginals.
  double node_entropy = 0.0;
  for (int t = 1; t < T; ++t)
    for (int s = 0; s < S; ++s) {
      if (alpha[t][s] == kNegInf || beta[t][s] == kNegInf) continue;
      double pn = std::exp(alpha[t][s] + beta[t][s] - res.log_z);
      node_entropy -= xlogx(pn);
    }
  res.path_entropy = edge_entropy - node_entropy;
  return res;
}

}  // namespace bpmf
