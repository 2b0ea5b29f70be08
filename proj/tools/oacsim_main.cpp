#include "oac/analysis.hpp"
#include "oac/errors.hpp"
#include "oac/harness.hpp"
#include "oac/io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using oac::json;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw oac::ConfigError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

// topology given either directly or wrapped scenario-style
oac::PhysicalTopology topology_like(const json& j) {
    if (j.contains("graph")) return oac::topology_from_json(j.at("graph"));
    if (j.contains("base")) return oac::topology_from_json(j.at("base"));
    return oac::topology_from_json(j);
}

void print_validation(const oac::ValidationBundle& bundle) {
    for (const auto& v : bundle.verdicts)
        std::cout << "[" << v.name << "] " << (v.pass ? "PASS" : "FAIL") << " — " << v.detail
                  << "\n";
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> trials;
    std::optional<std::string> out;
    std::optional<long> thin;
    std::optional<std::string> policy;
    std::optional<std::string> bound_mode;
    std::optional<int> threads;

    void apply(oac::Scenario& s) const {
        if (seed) {
            s.seed = *seed;
            s.seed_set = true;
        }
        if (trials) s.trials = *trials;
        if (out) s.out_dir = *out;
        if (thin) s.thin = *thin;
        if (threads) s.threads = *threads;
        if (policy) {
            if (*policy == "clamp")
                s.policy = oac::NegativityPolicy::clamp;
            else if (*policy == "abort")
                s.policy = oac::NegativityPolicy::abort_run;
            else if (*policy == "offset-warn")
                s.policy = oac::NegativityPolicy::offset_warn;
            else
                throw oac::ConfigError("--policy must be clamp|abort|offset-warn");
        }
        if (bound_mode) {
            if (*bound_mode == "paper")
                s.bound_mode = oac::BoundMode::paper_literal;
            else if (*bound_mode == "consistent")
                s.bound_mode = oac::BoundMode::convention_consistent;
            else
                throw oac::ConfigError("--bound-mode must be paper|consistent");
        }
    }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--seed", ov.seed, "override the scenario seed");
    cmd->add_option("--trials", ov.trials, "override the trial count");
    cmd->add_option("--out", ov.out, "output directory");
    cmd->add_option("--thin", ov.thin, "trace thinning stride (0 = auto)");
    cmd->add_option("--policy", ov.policy, "negativity policy: clamp|abort|offset-warn");
    cmd->add_option("--bound-mode", ov.bound_mode, "bound constants: paper|consistent");
    cmd->add_option("--threads", ov.threads, "worker threads (0 = hardware)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo simulator for average consensus over noisy, "
                 "non-coherent over-the-air aggregation"};
    app.require_subcommand(1);

    std::string scenario_path, scenario_b_path, sweep_field, sequence_path, model_path;
    long draws = 1000000;
    long horizon_arg = 0;
    long stride = 0;
    Overrides ov;

    auto* cmd_run = app.add_subcommand("run", "execute a scenario and write traces + report");
    cmd_run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    add_override_flags(cmd_run, ov);

    auto* cmd_cmp = app.add_subcommand("compare", "paired run of two scenarios (common seeds)");
    cmd_cmp->add_option("a", scenario_path, "first scenario")->required();
    cmd_cmp->add_option("b", scenario_b_path, "second scenario")->required();
    cmd_cmp->add_option("--sweep", sweep_field, "dot path of the single differing field")
        ->required();
    add_override_flags(cmd_cmp, ov);

    auto* cmd_val = app.add_subcommand("validate", "admissibility + connectivity checks only");
    cmd_val->add_option("scenario", scenario_path, "scenario JSON file")->required();
    add_override_flags(cmd_val, ov);

    auto* cmd_cc = app.add_subcommand("check-connectivity", "certify windows of a sequence file");
    cmd_cc->add_option("sequence", sequence_path, "sequence JSON file")->required();
    cmd_cc->add_option("--horizon", horizon_arg, "steps to check (default: sequence horizon)");
    cmd_cc->add_option("--stride", stride, "window stride (default: aligned windows)");

    auto* cmd_mom = app.add_subcommand("moments", "Monte Carlo moment report for a model");
    cmd_mom->add_option("model", model_path, "JSON with channel, topology, optional x")
        ->required();
    cmd_mom->add_option("--draws", draws, "number of rounds (default 1e6)");
    add_override_flags(cmd_mom, ov);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_run) {
            oac::Scenario s = oac::load_scenario(scenario_path);
            ov.apply(s);
            const auto out = oac::run(s, {.keep_trials = false});
            std::cout << oac::aggregate_to_json(out.aggregate, s).dump(2) << "\n";
            return 0;
        }
        if (*cmd_cmp) {
            oac::Scenario a = oac::load_scenario(scenario_path);
            oac::Scenario b = oac::load_scenario(scenario_b_path);
            ov.apply(a);
            ov.apply(b);
            const auto rep = oac::compare(a, b, sweep_field);
            std::cout << oac::compare_to_json(rep).dump(2) << "\n";
            return 0;
        }
        if (*cmd_val) {
            oac::Scenario s = oac::load_scenario(scenario_path);
            ov.apply(s);
            const auto bundle = oac::validate(s);
            print_validation(bundle);
            return bundle.all_pass() ? 0 : 1;
        }
        if (*cmd_cc) {
            const auto seq = oac::sequence_from_json(load_json(sequence_path));
            const long h = horizon_arg > 0 ? horizon_arg : seq.horizon();
            const auto bundle = oac::check_connectivity(seq, h, stride);
            print_validation(bundle);
            return bundle.all_pass() ? 0 : 1;
        }
        if (*cmd_mom) {
            const json j = load_json(model_path);
            const auto topo = topology_like(j.at("topology"));
            const auto model = oac::channel_from_json(j.at("channel"), topo.n_agents());
            std::vector<double> x;
            if (j.contains("x")) {
                x = j.at("x").get<std::vector<double>>();
            } else {
                x.resize(topo.n_agents());
                for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i + 1);
            }
            oac::Stream rng(ov.seed.value_or(j.value("seed", 1234u)));
            const auto report = oac::estimate_conditional_moments(model, topo, x, draws, rng);
            std::cout << oac::moment_report_to_json(report).dump(2) << "\n";
            return report.all_pass() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
