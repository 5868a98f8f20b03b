#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bpmf {
namespace verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 1;
  int jobs = 1;
  bool include_ofdm = true;   // the desk-scale receiver experiment
  std::string table1_scenario;  // optional: path of the large scenario to
                                // smoke-run end to end
};

CheckResult check_tree_exactness(const Options& o);
CheckResult check_mf_monotonicity(const Options& o);
CheckResult check_combined_monotonicity(const Options& o);
CheckResult check_reductions(const Options& o);
CheckResult check_hard_constraints(const Options& o);
CheckResult check_rescaling(const Options& o);
CheckResult check_gaussian_closed_forms(const Options& o);
CheckResult check_em_specialization(const Options& o);
CheckResult check_ofdm_experiment(const Options& o);
CheckResult check_determinism(const Options& o);

std::vector<CheckResult> run_all(const Options& o);

// One line per check; returns the number of failures.
int print_report(const std::vector<CheckResult>& results, std::ostream& os);

}  // namespace verify
}  // namespace bpmf
