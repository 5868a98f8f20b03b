#include "bpmf/table.hpp"

#include <algorithm>
#include <cmath>

namespace bpmf {

namespace {

std::size_t checked_size(const std::vector<int>& sizes) {
  std::size_t n = 1;
  for (int s : sizes) {
    if (s < 1) throw Error("table: alphabet size must be >= 1");
    n *= static_cast<std::size_t>(s);
    if (n > Table::kMaxStates)
      throw Error("table: joint state space exceeds the 2^20 limit");
  }
  return n;
}

}  // namespace

Table::Table(std::vector<VarId> scope, std::vector<int> sizes, Domain domain,
             std::vector<double> values)
    : scope_(std::move(scope)),
      sizes_(std::move(sizes)),
      values_(std::move(values)),
      domain_(domain) {
  if (scope_.size() != sizes_.size())
    throw Error("table: scope/sizes length mismatch");
  for (std::size_t i = 0; i < scope_.size(); ++i)
    for (std::size_t j = i + 1; j < scope_.size(); ++j)
      if (scope_[i] == scope_[j])
        throw Error("table: duplicate variable in scope");
  std::size_t n = checked_size(sizes_);
  if (values_.size() != n) throw Error("table: value count does not match shape");
  if (domain_ == Domain::Linear) {
    for (double v : values_)
      if (!(v >= 0.0)) throw Error("table: negative or NaN entry");
  }
  init_strides();
}

void Table::init_strides() {
  strides_.assign(sizes_.size(), 1);
  for (int k = static_cast<int>(sizes_.size()) - 2; k >= 0; --k)
    strides_[k] = strides_[k + 1] * static_cast<std::size_t>(sizes_[k + 1]);
}

Table Table::from_linear(std::vector<VarId> scope, std::vector<int> sizes,
                         std::vector<double> values) {
  return Table(std::move(scope), std::move(sizes), Domain::Linear,
               std::move(values));
}

Table Table::from_log(std::vector<VarId> scope, std::vector<int> sizes,
                      std::vector<double> values) {
  return Table(std::move(scope), std::move(sizes), Domain::Log,
               std::move(values));
}

Table Table::ones(std::vector<VarId> scope, std::vector<int> sizes,
                  Domain domain) {
  std::size_t n = checked_size(sizes);
  std::vector<double> v(n, domain == Domain::Log ? 0.0 : 1.0);
  return Table(std::move(scope), std::move(sizes), domain, std::move(v));
}

Table Table::uniform(std::vector<VarId> scope, std::vector<int> sizes,
                     Domain domain) {
  std::size_t n = checked_size(sizes);
  double val = domain == Domain::Log ? -std::log(double(n)) : 1.0 / double(n);
  std::vector<double> v(n, val);
  return Table(std::move(scope), std::move(sizes), domain, std::move(v));
}

Table Table::point_mass(VarId var, int size, int state, Domain domain) {
  if (state < 0 || state >= size) throw Error("point_mass: state out of range");
  std::vector<double> v(static_cast<std::size_t>(size),
                        domain == Domain::Log ? kNegInf : 0.0);
  v[static_cast<std::size_t>(state)] = domain == Domain::Log ? 0.0 : 1.0;
  return Table({var}, {size}, domain, std::move(v));
}

int Table::scope_pos(VarId v) const {
  for (std::size_t i = 0; i < scope_.size(); ++i)
    if (scope_[i] == v) return static_cast<int>(i);
  return -1;
}

Table Table::to_domain(Domain d) const {
  if (d == domain_) return *this;
  std::vector<double> v(values_.size());
  if (d == Domain::Log) {
    for (std::size_t k = 0; k < values_.size(); ++k)
      v[k] = values_[k] > 0.0 ? std::log(values_[k]) : kNegInf;
  } else {
    for (std::size_t k = 0; k < values_.size(); ++k) v[k] = std::exp(values_[k]);
  }
  return Table(scope_, sizes_, d, std::move(v));
}

std::size_t Table::index_of(std::span<const int> assignment) const {
  if (assignment.size() != scope_.size())
    throw Error("table: assignment length mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < scope_.size(); ++k) {
    if (assignment[k] < 0 || assignment[k] >= sizes_[k])
      throw Error("table: assignment out of range");
    idx += static_cast<std::size_t>(assignment[k]) * strides_[k];
  }
  return idx;
}

int Table::digit_of(std::size_t index, int pos) const {
  return static_cast<int>((index / strides_[pos]) %
                          static_cast<std::size_t>(sizes_[pos]));
}

double Table::mass() const {
  double s = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) s += linear_at(k);
  return s;
}

double Table::max_linear() const {
  double m = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k)
    m = std::max(m, linear_at(k));
  return m;
}

std::size_t Table::argmax() const {
  std::size_t best = 0;
  double bv = domain_ == Domain::Log ? values_[0] : values_[0];
  for (std::size_t k = 1; k < values_.size(); ++k) {
    if (values_[k] > bv) {
      bv = values_[k];
      best = k;
    }
  }
  return best;
}

bool Table::all_zero() const {
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (domain_ == Domain::Log) {
      if (values_[k] != kNegInf) return false;
    } else {
      if (values_[k] != 0.0) return false;
    }
  }
  return true;
}

void Table::multiply_inplace(const Table& other) {
  if (other.scope_ != scope_) throw Error("multiply: scope mismatch");
  if (other.domain_ == domain_ && domain_ == Domain::Linear) {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] *= other.values_[k];
  } else {
    if (domain_ == Domain::Linear) *this = to_domain(Domain::Log);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.log_at(k);
  }
}

void Table::scale_inplace(double c) {
  if (!(c > 0.0)) throw Error("scale: constant must be positive");
  if (domain_ == Domain::Log) {
    double lc = std::log(c);
    for (double& v : values_) v += lc;
  } else {
    for (double& v : values_) v *= c;
  }
}

double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

NormalizeResult normalize(const Table& t) {
  if (t.domain() == Domain::Log) {
    double lm = log_sum_exp(t.raw());
    if (lm == kNegInf) throw ContradictionError("normalize: all-zero table");
    std::vector<double> v(t.raw());
    for (double& x : v) x -= lm;
    return {Table::from_log(t.scope(), t.sizes(), std::move(v)),
            std::exp(-lm)};
  }
  double m = t.mass();
  if (m <= 0.0) throw ContradictionError("normalize: all-zero table");
  std::vector<double> v(t.raw());
  for (double& x : v) x /= m;
  return {Table::from_linear(t.scope(), t.sizes(), std::move(v)), 1.0 / m};
}

namespace {

// Odometer walk over the target shape keeping per-operand offsets in sync.
struct Broadcast {
  std::vector<int> digits;
  const std::vector<int>& sizes;
  std::vector<std::vector<std::size_t>> op_strides;  // [op][target dim]
  std::vector<std::size_t> op_offset;

  Broadcast(const std::vector<VarId>& target_scope,
            const std::vector<int>& target_sizes,
            std::span<const Table> ops)
      : digits(target_scope.size(), 0), sizes(target_sizes) {
    op_strides.resize(ops.size());
    op_offset.assign(ops.size(), 0);
    for (std::size_t j = 0; j < ops.size(); ++j) {
      const Table& t = ops[j];
      op_strides[j].assign(target_scope.size(), 0);
      // per-operand strides, computed from that operand's own layout
      std::vector<std::size_t> own(t.scope().size(), 1);
      for (int k = static_cast<int>(t.scope().size()) - 2; k >= 0; --k)
        own[k] = own[k + 1] * static_cast<std::size_t>(t.sizes()[k + 1]);
      for (std::size_t p = 0; p < t.scope().size(); ++p) {
        bool found = false;
        for (std::size_t d = 0; d < target_scope.size(); ++d) {
          if (target_scope[d] == t.scope()[p]) {
            if (target_sizes[d] != t.sizes()[p])
              throw Error("product: alphabet size mismatch");
            op_strides[j][d] = own[p];
            found = true;
            break;
          }
        }
        if (!found) throw Error("product: operand scope not within target scope");
      }
    }
  }

  bool advance() {
    for (int d = static_cast<int>(digits.size()) - 1; d >= 0; --d) {
      ++digits[d];
      for (std::size_t j = 0; j < op_offset.size(); ++j)
        op_offset[j] += op_strides[j][d];
      if (digits[d] < sizes[d]) return true;
      for (std::size_t j = 0; j < op_offset.size(); ++j)
        op_offset[j] -= static_cast<std::size_t>(sizes[d]) * op_strides[j][d];
      digits[d] = 0;
    }
    return false;
  }
};

}  // namespace

Table product(std::span<const Table> factors,
              const std::vector<VarId>& target_scope,
              const std::vector<int>& target_sizes) {
  std::size_t n = 1;
  for (int s : target_sizes) n *= static_cast<std::size_t>(s);
  if (n > Table::kMaxStates)
    throw Error("product: joint state space exceeds the 2^20 limit");
  bool any_log = false;
  for (const Table& t : factors)
    if (t.domain() == Domain::Log) any_log = true;

  std::vector<double> out(n, any_log ? 0.0 : 1.0);
  if (factors.empty())
    return Table(target_scope, target_sizes,
                 any_log ? Domain::Log : Domain::Linear, std::move(out));

  Broadcast bc(target_scope, target_sizes, factors);
  std::size_t k = 0;
  do {
    if (any_log) {
      double acc = 0.0;
      for (std::size_t j = 0; j < factors.size(); ++j)
        acc += factors[j].log_at(bc.op_offset[j]);
      out[k] = acc;
    } else {
      double acc = 1.0;
      for (std::size_t j = 0; j < factors.size(); ++j)
        acc *= factors[j].raw()[bc.op_offset[j]];
      out[k] = acc;
    }
    ++k;
  } while (bc.advance());

  return Table(target_scope, target_sizes,
               any_log ? Domain::Log : Domain::Linear, std::move(out));
}

Table product(std::initializer_list<Table> factors,
              const std::vector<VarId>& target_scope,
              const std::vector<int>& target_sizes) {
  std::vector<Table> fs(factors);
  return product(std::span<const Table>(fs), target_scope, target_sizes);
}

Table marginalize(const Table& t, VarId keep) {
  int pos = t.scope_pos(keep);
  if (pos < 0) throw Error("marginalize: variable not in scope");
  int ks = t.sizes()[pos];
  if (t.domain() == Domain::Linear) {
    std::vector<double> out(static_cast<std::size_t>(ks), 0.0);
    for (std::size_t k = 0; k < t.size(); ++k)
      out[static_cast<std::size_t>(t.digit_of(k, pos))] += t.raw()[k];
    return Table::from_linear({keep}, {ks}, std::move(out));
  }
  // log domain: bucketed max-subtraction
  std::vector<double> mx(static_cast<std::size_t>(ks), kNegInf);
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::size_t b = static_cast<std::size_t>(t.digit_of(k, pos));
    mx[b] = std::max(mx[b], t.raw()[k]);
  }
  std::vector<double> acc(static_cast<std::size_t>(ks), 0.0);
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::size_t b = static_cast<std::size_t>(t.digit_of(k, pos));
    if (mx[b] != kNegInf) acc[b] += std::exp(t.raw()[k] - mx[b]);
  }
  std::vector<double> out(static_cast<std::size_t>(ks));
  for (std::size_t b = 0; b < out.size(); ++b)
    out[b] = mx[b] == kNegInf ? kNegInf : mx[b] + std::log(acc[b]);
  return Table::from_log({keep}, {ks}, std::move(out));
}

double entropy(const Table& b) {
  double h = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) h -= xlogx(b.linear_at(k));
  return h;
}

double kl(const Table& b, const Table& q) {
  if (b.size() != q.size()) throw Error("kl: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    double bk = b.linear_at(k);
    if (bk <= 0.0) continue;
    double lq = q.log_at(k);
    if (lq == kNegInf) return kPosInf;
    s += bk * (b.log_at(k) - lq);
  }
  return s;
}

double max_abs_diff(const Table& a, const Table& b) {
  if (a.size() != b.size()) throw Error("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, std::abs(a.linear_at(k) - b.linear_at(k)));
  return m;
}

}  // namespace bpmf
