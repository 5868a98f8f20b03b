#pragma once

#include <optional>
#include <string>

#include "bpmf/factor_graph.hpp"
#include "bpmf/message_passing.hpp"

namespace bpmf {

struct LoadedGraph {
  FactorGraph graph;
  std::vector<FactorId> bp_factors;
  std::optional<EmConstraintSet> em;
};

// Parses a JSON graph spec:
//   {
//     "variables": [ {"name": "x0", "states": 2},
//                    {"name": "h", "gaussian_dim": 4} ],
//     "factors":   [ {"name": "f0", "scope": ["x0","x1"],
//                     "table": [..row-major, first scope var slowest..]},
//                    {"name": "p_h", "scope": ["h"],
//                     "gaussian_prior": {"mean": [[re,im],..],
//                                        "precision": [[[re,im],..],..]}},
//                    {"name": "o0", "scope": ["h","x0"],
//                     "observation": {"y": [re,im], "gamma": 1.5,
//                                     "coord": 0, "symbols": [[re,im],..]}} ],
//     "bp_factors": ["f0"],
//     "em_vars": ["x1"]          // optional
//   }
// Throws ParseError with the offending field in the message.
LoadedGraph load_graph_json(const std::string& path);
LoadedGraph parse_graph_json(const std::string& text);

}  // namespace bpmf
