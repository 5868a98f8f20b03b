#pragma once

#include <span>
#include <vector>

#include "bpmf/common.hpp"

namespace bpmf {

// Storage domain of a Table's value vector. Message arithmetic runs in the
// log domain with exact -inf for zeros; linear values appear at API edges.
enum class Domain { Linear, Log };

// Dense nonnegative tensor over a tuple of finite-alphabet variables.
// Layout is row-major in scope order: the first scope variable varies
// slowest, the last fastest.
class Table {
 public:
  // Joint-state hard cap. Factor potentials are further capped by
  // kMaxFactorStates at graph construction.
  static constexpr std::size_t kMaxStates = std::size_t(1) << 20;
  static constexpr std::size_t kMaxFactorStates = std::size_t(1) << 16;

  Table() = default;
  Table(std::vector<VarId> scope, std::vector<int> sizes, Domain domain,
        std::vector<double> values);

  static Table from_linear(std::vector<VarId> scope, std::vector<int> sizes,
                           std::vector<double> values);
  static Table from_log(std::vector<VarId> scope, std::vector<int> sizes,
                        std::vector<double> values);
  // All-ones table (multiplicative identity), in the given domain.
  static Table ones(std::vector<VarId> scope, std::vector<int> sizes,
                    Domain domain = Domain::Log);
  // Normalized uniform distribution.
  static Table uniform(std::vector<VarId> scope, std::vector<int> sizes,
                       Domain domain = Domain::Log);
  // Unary point mass.
  static Table point_mass(VarId var, int size, int state,
                          Domain domain = Domain::Log);

  const std::vector<VarId>& scope() const { return scope_; }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t size() const { return values_.size(); }
  Domain domain() const { return domain_; }
  const std::vector<double>& raw() const { return values_; }
  std::vector<double>& raw() { return values_; }

  bool is_unary() const { return scope_.size() == 1; }
  int scope_pos(VarId v) const;  // -1 if absent

  double linear_at(std::size_t k) const {
    return domain_ == Domain::Linear ? values_[k] : std::exp(values_[k]);
  }
  double log_at(std::size_t k) const {
    return domain_ == Domain::Log
               ? values_[k]
               : (values_[k] > 0.0 ? std::log(values_[k]) : kNegInf);
  }

  Table to_domain(Domain d) const;

  // Linear index of a full assignment given in scope order.
  std::size_t index_of(std::span<const int> assignment) const;
  // Decode a linear index into the digit for scope position `pos`.
  int digit_of(std::size_t index, int pos) const;

  // Sum of linear values.
  double mass() const;
  double max_linear() const;
  std::size_t argmax() const;  // ties resolved to the lowest index
  bool all_zero() const;

  // In-place pointwise multiply by a same-scope table.
  void multiply_inplace(const Table& other);
  // In-place multiply by a scalar (linear-domain constant c > 0).
  void scale_inplace(double c);

 private:
  std::vector<VarId> scope_;
  std::vector<int> sizes_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
  Domain domain_ = Domain::Linear;

  void init_strides();
};

// A message is a unary table. Soft messages are strictly positive; messages
// adjacent to hard constraints may carry exact zeros.
using Message = Table;

struct NormalizeResult {
  Table table;
  double normalizer;  // multiplicative constant applied (reciprocal mass)
};

// Rescale to unit mass. Errors on all-zero input.
NormalizeResult normalize(const Table& t);

// Pointwise product of `factors` broadcast over `target_scope`. Every input
// scope must be a subset of the target scope. Result is in the log domain if
// any input is, else linear.
Table product(std::span<const Table> factors,
              const std::vector<VarId>& target_scope,
              const std::vector<int>& target_sizes);
Table product(std::initializer_list<Table> factors,
              const std::vector<VarId>& target_scope,
              const std::vector<int>& target_sizes);

// Sum out every variable except `keep`.
Table marginalize(const Table& t, VarId keep);

// Entropy -sum b ln b (natural log, 0 ln 0 = 0).
double entropy(const Table& b);

// KL divergence with the conventions 0 ln 0 = 0, a ln(a/0) = +inf (a > 0),
// 0 ln(0/0) = 0. May return +inf.
double kl(const Table& b, const Table& q);

// Max absolute difference of linear values (same shape required).
double max_abs_diff(const Table& a, const Table& b);

// log(sum(exp(xs))) with max-subtraction; empty input and all -inf give -inf.
double log_sum_exp(std::span<const double> xs);

}  // namespace bpmf
