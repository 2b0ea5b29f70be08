#pragma once

#include "oac/analysis.hpp"
#include "oac/graph.hpp"
#include "oac/harness.hpp"

#include <json.hpp>

#include <string>

namespace oac {

using json = nlohmann::json;

// Topology files: {"n_agents": N, "edges": [[i, j], ...]} (0-based), or
// shorthand {"kind": "complete"|"ring"|"path"|"bundled50", "n": N}.
json topology_to_json(const PhysicalTopology& t);
PhysicalTopology topology_from_json(const json& j);

// Sequences: {"base": topology, "window": L, "horizon": K,
//             "events": [{"k": k, "failed_nodes": [...], "failed_links": [[i,j],...]}]}
json sequence_to_json(const TopologySequence& s);
TopologySequence sequence_from_json(const json& j);

// Channel: {"rho": r, "p": x | [..], "sigma2": x | "-60dB" | [..],
//           "lambda": x | [[..]] | {"default": x, "overrides": [[i, j, v], ...]}}
// Noise powers in decibels convert as sigma^2 = 10^(dB/10).
json channel_to_json(const ChannelModel& m);
ChannelModel channel_from_json(const json& j, int n_agents);

double parse_power(const json& j); // number or "<x>dB" string

json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const json& j);
Scenario load_scenario(const std::string& path);

json moment_report_to_json(const MomentReport& r);
json bound_constants_to_json(const BoundConstants& b);
json aggregate_to_json(const AggregateReport& a, const Scenario& s);
json compare_to_json(const CompareReport& c);
json validation_to_json(const ValidationBundle& v);

} // namespace oac
