#pragma once

#include "oac/analysis.hpp"
#include "oac/channel.hpp"
#include "oac/graph.hpp"
#include "oac/protocol.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oac {

/// Step-size configuration before resolution: the scale may be the
/// string "auto_dmax" (1 / max abar row sum of the base topology).
struct ScheduleSpec {
    enum class Kind { power_law, explicit_values };
    Kind kind = Kind::power_law;
    double exponent = 0.75;
    double scale = 0.0;
    bool auto_scale = true;
    double perturb = 0.0;
    std::vector<double> values;
    // per-agent perturbation overrides (agent -> perturb), heterogeneous runs
    std::map<int, double> agent_perturb;

    StepsizeSchedule resolve(const ChannelModel& model, const PhysicalTopology& topo,
                             int agent = -1) const;
    std::vector<StepsizeSchedule> resolve_all(const ChannelModel& model,
                                              const PhysicalTopology& topo) const;
};

struct TopologySpec {
    enum class Kind { static_graph, sampled, sequence };
    Kind kind = Kind::static_graph;
    PhysicalTopology base;
    long window = 1;
    double q = 0.6;
    // explicit sequences: horizon + events
    long horizon = 0;
    std::map<long, TopologyEvent> events;
};

struct InitSpec {
    enum class Kind { explicit_values, uniform };
    Kind kind = Kind::explicit_values;
    std::vector<double> values;
    double lo = 0.0, hi = 1.0;
};

enum class ProtocolKind { proposed, heterogeneous, baseline };

struct Scenario {
    std::string name;
    TopologySpec topology;
    ChannelModel channel;
    ScheduleSpec schedule;
    ProtocolKind protocol = ProtocolKind::proposed;
    InitSpec init;
    long horizon = 0;
    long trials = 1;
    std::uint64_t seed = 0;
    bool seed_set = false; // the seed field is mandatory in scenario files
    std::string out_dir;
    long thin = 0; // 0 = auto: every step up to 1e4, then ceil(K/1e4)
    NegativityPolicy policy = NegativityPolicy::clamp;
    BoundMode bound_mode = BoundMode::convention_consistent;
    bool per_agent_mse = false;
    int threads = 0; // 0 = hardware concurrency

    void validate() const; // field-path-precise ConfigError on problems
    long effective_thin() const;
};

struct TrialResult {
    std::vector<double> final_x;
    MetricsTrace trace;
    double initial_mean = 0.0;
    long negativity_events = 0;
    long guard_events = 0;
    long clamp_warnings = 0;
    long hull_violations = 0;
    double wall_seconds = 0.0;
};

struct AggregateReport {
    long trials = 0;
    long horizon = 0;
    bool has_bounds = false;
    BoundConstants bounds; // static-path variance-bound constants (not for baseline)
    std::vector<double> v_mean;    // trial-mean V(k)
    std::vector<double> mse_mean;  // trial-mean of per-agent-mean squared error
    std::vector<double> mean_mean; // trial-mean network mean
    double final_mean_avg = 0.0;
    double final_mean_se = 0.0;
    double final_mean_var = 0.0;     // variance across trials of the final mean
    double final_mean_dev_var = 0.0; // variance of (final mean - initial mean)
    double final_mse_mean = 0.0;
    long negativity_total = 0;
    long guard_total = 0;
    long clamp_warning_total = 0;
    long hull_violation_total = 0;
    double wall_seconds = 0.0;
};

struct RunOptions {
    bool keep_trials = true;   // retain per-trial results in memory
    bool write_traces = true;  // write CSV traces when out_dir is set
    bool write_report = true;  // write aggregate JSON when out_dir is set
};

struct RunOutput {
    AggregateReport aggregate;
    std::vector<TrialResult> trials; // empty unless keep_trials
};

/// Execute the scenario: validate, fan trials out across workers with
/// per-trial streams derived from (seed, trial index), fold aggregates
/// in trial order, optionally write per-trial CSV traces plus an
/// aggregate JSON report into out_dir.
RunOutput run(const Scenario& scenario, const RunOptions& opts = {});

/// Run one trial in isolation (the unit the workers execute).
TrialResult run_trial(const Scenario& scenario, long trial_index);

struct CompareReport {
    std::string sweep_field;
    RunOutput a_run, b_run; // per-trial results retained for downstream stats
    long b_final_mse_greater = 0; // paired trials where b has higher final mse
    long pairs = 0;
    double fraction_b_greater = 0.0;
    std::vector<double> mse_diff; // b minus a, trial-mean curves

    const AggregateReport& a() const { return a_run.aggregate; }
    const AggregateReport& b() const { return b_run.aggregate; }
};

/// Run two scenarios that differ only in `sweep_field` (dot-separated
/// JSON path) with common random numbers and report paired statistics.
CompareReport compare(const Scenario& a, const Scenario& b, const std::string& sweep_field);

struct NamedVerdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationBundle {
    std::vector<NamedVerdict> verdicts;
    bool all_pass() const;
};

/// All admissibility and connectivity checks, no simulation: step-size
/// conditions (skipped for the baseline protocol), initial-state sanity,
/// and joint connectivity of the topology sequence.
ValidationBundle validate(const Scenario& scenario);

/// Certify every aligned window of a sequence; stride 1 checks sliding
/// windows instead.
ValidationBundle check_connectivity(const TopologySequence& seq, long horizon, long stride = 0);

} // namespace oac
