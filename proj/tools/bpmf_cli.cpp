#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpmf/graph_io.hpp"
#include "bpmf/ofdm.hpp"
#include "bpmf/scheduler.hpp"
#include "bpmf/verify.hpp"

namespace {

using namespace bpmf;

// exit codes: 0 converged/ok, 1 parse error, 2 not converged (iteration cap
// or divergence), 3 contradiction, 4 schedule not applicable without --loopy
enum ExitCode { kOk = 0, kParse = 1, kNotConverged = 2, kContradiction = 3,
                kNotApplicable = 4 };

nlohmann::json belief_to_json(const FactorGraph& g, const BeliefState& st,
                              VarId i) {
  nlohmann::json jv;
  jv["name"] = g.var(i).name;
  if (g.var(i).kind == VarKind::Discrete) {
    std::vector<double> b;
    for (std::size_t k = 0; k < st.var_beliefs[i].size(); ++k)
      b.push_back(st.var_beliefs[i].linear_at(k));
    jv["belief"] = b;
  } else {
    const ComplexGaussian& gb = st.gauss_beliefs[i];
    nlohmann::json mean = nlohmann::json::array();
    for (int k = 0; k < gb.dim(); ++k)
      mean.push_back({gb.mean[k].real(), gb.mean[k].imag()});
    nlohmann::json prec = nlohmann::json::array();
    for (int r = 0; r < gb.dim(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < gb.dim(); ++c)
        row.push_back({gb.precision(r, c).real(), gb.precision(r, c).imag()});
      prec.push_back(row);
    }
    jv["gaussian"] = {{"mean", mean}, {"precision", prec}};
  }
  return jv;
}

int cmd_infer(const std::string& config, const std::string& out,
              bool loopy_flag, const StopRule& stop) {
  LoadedGraph lg;
  try {
    lg = load_graph_json(config);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  }
  BpMfPartition part = partition(lg.graph, lg.bp_factors);
  Applicability ap = check_algorithm1_applicable(lg.graph, part);
  bool use_loopy = false;
  if (!ap.applicable) {
    if (ap.bad_mf_factor || !loopy_flag) {
      std::cerr << "convergent schedule not applicable: " << ap.reason << "\n";
      if (!ap.cycle_witness.empty()) {
        std::cerr << "cycle witness factors:";
        for (FactorId a : ap.cycle_witness)
          std::cerr << " " << lg.graph.factor(a).name;
        std::cerr << "\n";
      }
      if (!loopy_flag && !ap.bad_mf_factor)
        std::cerr << "rerun with --loopy to use the non-convergent variant\n";
      return kNotApplicable;
    }
    use_loopy = true;
  }
  UpdateConfig cfg;
  if (use_loopy) cfg.damping = 0.3;
  RunResult res;
  try {
    const EmConstraintSet* em = lg.em ? &*lg.em : nullptr;
    res = use_loopy ? run_loopy(lg.graph, part, cfg, stop, LoopyOptions{}, em)
                    : run_algorithm1(lg.graph, part, cfg, stop, em);
  } catch (const ContradictionError& e) {
    std::cerr << "contradiction: " << e.what() << "\n";
    return kContradiction;
  }

  nlohmann::json doc;
  doc["converged"] = res.trace.converged;
  doc["stop_reason"] = res.trace.stop_reason;
  doc["free_energy"] = res.trace.rows.empty()
                           ? 0.0
                           : res.trace.rows.back().free_energy;
  doc["variables"] = nlohmann::json::array();
  for (VarId i = 0; i < lg.graph.num_vars(); ++i)
    doc["variables"].push_back(belief_to_json(lg.graph, res.state, i));

  std::ofstream bf(out + ".beliefs.json");
  bf << doc.dump(2) << "\n";
  std::ofstream tf(out + ".trace.csv");
  write_trace_csv(res.trace, tf);
  std::cout << (res.trace.converged ? "converged" : res.trace.stop_reason)
            << " after " << res.trace.rows.size() << " outer iterations\n";
  if (res.trace.contradiction) return kContradiction;
  return res.trace.converged ? kOk : kNotConverged;
}

int cmd_ofdm_ber(const std::string& config, const std::string& out,
                 const std::string& receivers, std::uint64_t seed, int jobs) {
  ofdm::OfdmScenario sc;
  try {
    sc = ofdm::load_scenario(config);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  }
  std::vector<ofdm::Receiver> rcv;
  std::stringstream ss(receivers);
  std::string name;
  try {
    while (std::getline(ss, name, ','))
      if (!name.empty()) rcv.push_back(ofdm::receiver_by_name(name));
  } catch (const Error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  }
  ofdm::ScenarioRuntime rt(sc);
  std::vector<ofdm::BerRow> rows = ofdm::run_ber_sweep(rt, rcv, seed, jobs);
  if (out.empty()) {
    ofdm::write_ber_csv(rows, std::cout);
  } else {
    std::ofstream f(out);
    ofdm::write_ber_csv(rows, f);
  }
  return kOk;
}

int cmd_verify(const std::string& out, std::uint64_t seed, int jobs) {
  verify::Options opt;
  opt.seed = seed;
  opt.jobs = jobs;
  std::vector<verify::CheckResult> results = verify::run_all(opt);
  int failures;
  if (out.empty()) {
    failures = verify::print_report(results, std::cout);
  } else {
    std::ofstream f(out);
    failures = verify::print_report(results, f);
  }
  return failures == 0 ? kOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factor-graph inference: combined belief-propagation / "
               "mean-field engine with an iterative OFDM receiver"};
  app.require_subcommand(1);

  std::string config, out;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool loopy = false;
  std::string receivers = "bpmf,bp-gauss,perfect-csi";
  StopRule stop;

  CLI::App* infer = app.add_subcommand("infer", "run inference on a graph spec");
  infer->add_option("--config", config, "graph spec (json)")->required();
  infer->add_option("--out", out, "output prefix")->required();
  infer->add_flag("--loopy", loopy, "allow cycles in the bp part");
  infer->add_option("--max-outer", stop.max_outer, "outer iteration cap");
  infer->add_option("--fe-tol", stop.rel_fe_tol, "free-energy change tolerance");
  infer->add_option("--delta-tol", stop.msg_delta_tol, "message delta tolerance");

  CLI::App* ber = app.add_subcommand("ofdm-ber", "run the receiver BER sweep");
  ber->add_option("--config", config, "scenario (json)")->required();
  ber->add_option("--out", out, "output csv (default stdout)");
  ber->add_option("--seed", seed, "master seed");
  ber->add_option("--jobs", jobs, "parallel trials");
  ber->add_option("--receivers", receivers, "comma-separated receiver list");

  CLI::App* ver = app.add_subcommand("verify", "run the verification suite");
  ver->add_option("--out", out, "report file (default stdout)");
  ver->add_option("--seed", seed, "suite seed");
  ver->add_option("--jobs", jobs, "parallel trials");

  CLI11_PARSE(app, argc, argv);

  try {
    if (infer->parsed()) return cmd_infer(config, out, loopy, stop);
    if (ber->parsed()) return cmd_ofdm_ber(config, out, receivers, seed, jobs);
    if (ver->parsed()) return cmd_verify(out, seed, jobs);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const ContradictionError& e) {
    std::cerr << "contradiction: " << e.what() << "\n";
    return kContradiction;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  }
  return kOk;
}
