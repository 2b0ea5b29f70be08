#include "oac/harness.hpp"

#include "oac/errors.hpp"
#include "oac/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace oac {

namespace {

double max_abar_row_sum(const ChannelModel& model, const PhysicalTopology& topo) {
    double d = 0.0;
    for (int i = 0; i < topo.n_agents(); ++i) {
        double row = 0.0;
        for (int j : topo.neighbors(i)) row += model.abar(i, j);
        d = std::max(d, row);
    }
    return d;
}

} // namespace

StepsizeSchedule ScheduleSpec::resolve(const ChannelModel& model,
                                       const PhysicalTopology& topo, int agent) const {
    if (kind == Kind::explicit_values) return StepsizeSchedule::explicit_values(values);
    double sc = scale;
    if (auto_scale) {
        const double d_max = max_abar_row_sum(model, topo);
        if (!(d_max > 0.0))
            throw ConfigError("schedule.scale: auto_dmax needs a nonzero expected weight");
        sc = 1.0 / d_max;
    }
    double pert = perturb;
    if (agent >= 0) {
        auto it = agent_perturb.find(agent);
        if (it != agent_perturb.end()) pert = it->second;
    }
    return StepsizeSchedule::power_law(exponent, sc, pert);
}

std::vector<StepsizeSchedule> ScheduleSpec::resolve_all(const ChannelModel& model,
                                                        const PhysicalTopology& topo) const {
    std::vector<StepsizeSchedule> all;
    all.reserve(topo.n_agents());
    for (int i = 0; i < topo.n_agents(); ++i) all.push_back(resolve(model, topo, i));
    return all;
}

void Scenario::validate() const {
    const int n = topology.base.n_agents();
    if (n <= 0) throw ConfigError("topology: needs at least one agent");
    if (channel.n_agents() != n)
        throw ConfigError("channel: dimension " + std::to_string(channel.n_agents()) +
                          " does not match topology (" + std::to_string(n) + ")");
    channel.validate();
    if (init.kind == InitSpec::Kind::explicit_values &&
        static_cast<int>(init.values.size()) != n)
        throw ConfigError("init.values: expected " + std::to_string(n) + " entries, got " +
                          std::to_string(init.values.size()));
    if (init.kind == InitSpec::Kind::uniform && !(init.hi >= init.lo))
        throw ConfigError("init: lo must not exceed hi");
    if (horizon < 0) throw ConfigError("horizon: must be nonnegative");
    if (trials < 1) throw ConfigError("trials: must be at least 1");
    if (!seed_set) throw ConfigError("seed: mandatory for reproducibility");
    if (topology.kind == TopologySpec::Kind::sampled) {
        if (topology.window < 1) throw ConfigError("topology.L: must be >= 1");
        if (!(topology.q > 0.0 && topology.q < 1.0))
            throw ConfigError("topology.q: must lie in (0, 1)");
    }
    for (const auto& [agent, _] : schedule.agent_perturb)
        if (agent < 0 || agent >= n)
            throw ConfigError("schedule.agent_perturb: agent " + std::to_string(agent) +
                              " out of range");
}

long Scenario::effective_thin() const {
    if (thin > 0) return thin;
    if (horizon <= 10000) return 1;
    return (horizon + 9999) / 10000;
}

namespace {

TopologySequence build_sequence(const Scenario& s, Stream& rng) {
    switch (s.topology.kind) {
    case TopologySpec::Kind::static_graph:
        return TopologySequence::static_topology(s.topology.base);
    case TopologySpec::Kind::sampled:
        return generate_sampled_sequence(s.topology.base, s.topology.window, s.topology.q,
                                         s.horizon, rng);
    case TopologySpec::Kind::sequence: {
        TopologySequence seq(s.topology.base, s.topology.window,
                             std::max(s.topology.horizon, s.horizon));
        for (const auto& [k, ev] : s.topology.events) seq.set_event(k, ev);
        return seq;
    }
    }
    throw ConfigError("unknown topology kind");
}

StateVector build_initial_state(const Scenario& s, Stream& rng) {
    if (s.init.kind == InitSpec::Kind::explicit_values)
        return StateVector::from_values(s.init.values);
    return StateVector::uniform(s.topology.base.n_agents(), s.init.lo, s.init.hi, rng);
}

void record_step(const Scenario& s, const StateVector& st, double initial_mean,
                 long new_events, MetricsTrace& trace) {
    const auto& x = st.x;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    trace.v.push_back(lyapunov(x));
    trace.mean.push_back(mean);
    double mse = 0.0;
    for (double xi : x) mse += (xi - initial_mean) * (xi - initial_mean);
    trace.mse.push_back(mse / x.size());
    trace.events.push_back(new_events);
    if (s.per_agent_mse) {
        std::vector<double> row(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            row[i] = (x[i] - initial_mean) * (x[i] - initial_mean);
        trace.per_agent_sq_err.push_back(std::move(row));
    }
}

} // namespace

TrialResult run_trial(const Scenario& s, long trial_index) {
    const auto t0 = std::chrono::steady_clock::now();
    Stream rng = Stream::for_trial(s.seed, static_cast<std::uint64_t>(trial_index));

    const TopologySequence seq = build_sequence(s, rng);
    StateVector state = build_initial_state(s, rng);

    TrialResult out;
    out.initial_mean =
        std::accumulate(state.x.begin(), state.x.end(), 0.0) / state.x.size();
    record_step(s, state, out.initial_mean, 0, out.trace);

    const auto events_now = [&state] {
        return state.negativity_events + state.guard_events + state.clamp_warnings;
    };

    if (s.protocol == ProtocolKind::baseline) {
        for (long k = 0; k < s.horizon; ++k) {
            long before = events_now();
            step_baseline(s.channel, active_topology(seq, k), state, rng, s.policy);
            record_step(s, state, out.initial_mean, events_now() - before, out.trace);
        }
    } else {
        Stepper stepper =
            s.protocol == ProtocolKind::heterogeneous
                ? Stepper(s.channel, seq, s.schedule.resolve_all(s.channel, s.topology.base),
                          s.policy)
                : Stepper(s.channel, seq, s.schedule.resolve(s.channel, s.topology.base),
                          s.policy);
        for (long k = 0; k < s.horizon; ++k) {
            long before = events_now();
            stepper.advance(state, rng);
            record_step(s, state, out.initial_mean, events_now() - before, out.trace);
        }
    }

    out.final_x = state.x;
    out.negativity_events = state.negativity_events;
    out.guard_events = state.guard_events;
    out.clamp_warnings = state.clamp_warnings;
    out.hull_violations = state.hull_violations;
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

namespace {

void write_trace_csv(const Scenario& s, long trial_index, const TrialResult& r) {
    namespace fs = std::filesystem;
    fs::create_directories(s.out_dir);
    char name[64];
    std::snprintf(name, sizeof(name), "trial_%04ld.csv", trial_index);
    std::ofstream out(fs::path(s.out_dir) / name);

    out << "k,V,mean";
    const int n = s.topology.base.n_agents();
    if (s.per_agent_mse)
        for (int i = 1; i <= n; ++i) out << ",mse_" << i;
    else
        out << ",mse";
    out << ",events\n";

    const long thin = s.effective_thin();
    char buf[32];
    const auto emit = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    const long last = static_cast<long>(r.trace.v.size()) - 1;
    for (long k = 0; k <= last; ++k) {
        if (k % thin != 0 && k != last) continue;
        out << k << ',';
        emit(r.trace.v[k]);
        out << ',';
        emit(r.trace.mean[k]);
        if (s.per_agent_mse) {
            for (int i = 0; i < n; ++i) {
                out << ',';
                emit(r.trace.per_agent_sq_err[k][i]);
            }
        } else {
            out << ',';
            emit(r.trace.mse[k]);
        }
        out << ',' << r.trace.events[k] << "\n";
    }
}

} // namespace

RunOutput run(const Scenario& s, const RunOptions& opts) {
    s.validate();
    if (s.protocol != ProtocolKind::baseline) {
        const auto verdict =
            s.protocol == ProtocolKind::heterogeneous
                ? validate_schedules(s.schedule.resolve_all(s.channel, s.topology.base),
                                     s.channel, s.topology.base, ValidationMode::admissibility)
                : validate_schedule(s.schedule.resolve(s.channel, s.topology.base), s.channel,
                                    s.topology.base, ValidationMode::admissibility);
        if (!verdict.pass) throw InadmissibleSchedule("schedule: " + verdict.reason);
    }
    if (s.topology.kind == TopologySpec::Kind::sequence) {
        // aligned windows of a replayed sequence must certify up front
        TopologySequence full(s.topology.base, s.topology.window,
                              std::max(s.topology.horizon, s.horizon));
        for (const auto& [k, ev] : s.topology.events) full.set_event(k, ev);
        for (long w = 0; (w + 1) * s.topology.window <= s.horizon; ++w)
            if (!is_jointly_connected(full, w * s.topology.window, s.topology.window).connected)
                throw ConfigError("topology.sequence: window starting at step " +
                                  std::to_string(w * s.topology.window) +
                                  " is not jointly connected");
    }

    const auto t0 = std::chrono::steady_clock::now();
    const long m = s.trials;
    std::vector<TrialResult> results(m);

    int workers = s.threads > 0 ? s.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(m)));

    std::atomic<long> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto work = [&] {
        for (;;) {
            const long t = cursor.fetch_add(1);
            if (t >= m) return;
            try {
                results[t] = run_trial(s, t);
                if (opts.write_traces && !s.out_dir.empty()) write_trace_csv(s, t, results[t]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    // aggregate: deterministic fold in trial-index order
    AggregateReport agg;
    agg.trials = m;
    agg.horizon = s.horizon;
    const std::size_t points = results[0].trace.v.size();
    agg.v_mean.assign(points, 0.0);
    agg.mse_mean.assign(points, 0.0);
    agg.mean_mean.assign(points, 0.0);
    std::vector<double> final_means(m), final_devs(m);
    for (long t = 0; t < m; ++t) {
        const TrialResult& r = results[t];
        for (std::size_t k = 0; k < points; ++k) {
            agg.v_mean[k] += r.trace.v[k];
            agg.mse_mean[k] += r.trace.mse[k];
            agg.mean_mean[k] += r.trace.mean[k];
        }
        final_means[t] = r.trace.mean.back();
        final_devs[t] = r.trace.mean.back() - r.initial_mean;
        agg.negativity_total += r.negativity_events;
        agg.guard_total += r.guard_events;
        agg.clamp_warning_total += r.clamp_warnings;
        agg.hull_violation_total += r.hull_violations;
    }
    for (std::size_t k = 0; k < points; ++k) {
        agg.v_mean[k] /= m;
        agg.mse_mean[k] /= m;
        agg.mean_mean[k] /= m;
    }
    const auto sample_var = [m](const std::vector<double>& v) {
        if (m < 2) return 0.0;
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / m;
        double s2 = 0.0;
        for (double x : v) s2 += (x - mean) * (x - mean);
        return s2 / (m - 1);
    };
    agg.final_mean_avg = std::accumulate(final_means.begin(), final_means.end(), 0.0) / m;
    agg.final_mean_var = sample_var(final_means);
    agg.final_mean_se = std::sqrt(agg.final_mean_var / m);
    agg.final_mean_dev_var = sample_var(final_devs);
    agg.final_mse_mean = agg.mse_mean.back();
    if (s.protocol != ProtocolKind::baseline && s.horizon > 0) {
        // base-topology bound constants; uniform initial states are bounded
        // from above by their upper endpoint
        const std::vector<double> x0 =
            s.init.kind == InitSpec::Kind::explicit_values
                ? s.init.values
                : std::vector<double>(s.topology.base.n_agents(),
                                      std::max(std::abs(s.init.lo), std::abs(s.init.hi)));
        agg.bounds = bound_constants(s.channel, s.topology.base,
                                     s.schedule.resolve(s.channel, s.topology.base), x0,
                                     s.bound_mode, s.horizon);
        agg.has_bounds = true;
    }
    agg.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (opts.write_report && !s.out_dir.empty()) {
        std::filesystem::create_directories(s.out_dir);
        std::ofstream out(std::filesystem::path(s.out_dir) / "aggregate.json");
        out << aggregate_to_json(agg, s).dump(2) << "\n";
    }

    RunOutput output;
    output.aggregate = std::move(agg);
    if (opts.keep_trials) output.trials = std::move(results);
    return output;
}

namespace {

json without_field(json j, const std::string& dot_path) {
    json* node = &j;
    std::string last = dot_path;
    for (;;) {
        const std::size_t dot = last.find('.');
        if (dot == std::string::npos) break;
        const std::string head = last.substr(0, dot);
        last = last.substr(dot + 1);
        if (!node->contains(head)) return j; // path absent: nothing to strip
        node = &(*node)[head];
    }
    if (node->is_object()) node->erase(last);
    return j;
}

} // namespace

CompareReport compare(const Scenario& a, const Scenario& b, const std::string& sweep_field) {
    // presentation fields do not affect the dynamics and may differ
    json ja = without_field(scenario_to_json(a), sweep_field);
    json jb = without_field(scenario_to_json(b), sweep_field);
    for (const char* cosmetic : {"name", "out", "thin"}) {
        ja.erase(cosmetic);
        jb.erase(cosmetic);
    }
    if (ja != jb)
        throw ConfigError("compare: scenarios differ outside swept field '" + sweep_field + "'");

    RunOptions opts;
    opts.write_traces = false;
    opts.write_report = false;
    CompareReport rep;
    rep.sweep_field = sweep_field;
    rep.a_run = run(a, opts);
    rep.b_run = run(b, opts);
    rep.pairs = a.trials;
    for (long t = 0; t < a.trials; ++t) {
        const double ma = rep.a_run.trials[t].trace.mse.back();
        const double mb = rep.b_run.trials[t].trace.mse.back();
        if (mb > ma) ++rep.b_final_mse_greater;
    }
    rep.fraction_b_greater =
        rep.pairs > 0 ? static_cast<double>(rep.b_final_mse_greater) / rep.pairs : 0.0;
    rep.mse_diff.resize(rep.a_run.aggregate.mse_mean.size());
    for (std::size_t k = 0; k < rep.mse_diff.size(); ++k)
        rep.mse_diff[k] = rep.b_run.aggregate.mse_mean[k] - rep.a_run.aggregate.mse_mean[k];
    return rep;
}

bool ValidationBundle::all_pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(),
                       [](const NamedVerdict& v) { return v.pass; });
}

ValidationBundle check_connectivity(const TopologySequence& seq, long horizon, long stride) {
    ValidationBundle bundle;
    const long window = seq.window();
    const long step = stride > 0 ? stride : window;
    long checked = 0, failed = 0;
    double min_fiedler = std::numeric_limits<double>::infinity();
    for (long start = 0; start + window <= horizon; start += step) {
        const auto cert = is_jointly_connected(seq, start, window);
        ++checked;
        min_fiedler = std::min(min_fiedler, cert.fiedler_value);
        if (!cert.connected) {
            ++failed;
            if (failed <= 20)
                bundle.verdicts.push_back(
                    {"window@" + std::to_string(start), false,
                     "union over [" + std::to_string(start) + ", " +
                         std::to_string(start + window) + ") disconnected, fiedler = " +
                         std::to_string(cert.fiedler_value)});
        }
    }
    bundle.verdicts.push_back(
        {"joint-connectivity", failed == 0,
         std::to_string(checked - failed) + "/" + std::to_string(checked) +
             " windows connected, min fiedler = " +
             (checked ? std::to_string(min_fiedler) : std::string("n/a"))});
    return bundle;
}

ValidationBundle validate(const Scenario& s) {
    ValidationBundle bundle;
    try {
        s.validate();
        bundle.verdicts.push_back({"scenario-config", true, "fields consistent"});
    } catch (const std::exception& e) {
        bundle.verdicts.push_back({"scenario-config", false, e.what()});
        return bundle;
    }

    const bool time_varying = s.topology.kind != TopologySpec::Kind::static_graph;

    if (s.protocol != ProtocolKind::baseline) {
        const auto check = [&](ValidationMode mode, const std::string& name) {
            ScheduleVerdict v;
            if (s.protocol == ProtocolKind::heterogeneous)
                v = validate_schedules(s.schedule.resolve_all(s.channel, s.topology.base),
                                       s.channel, s.topology.base, mode);
            else
                v = validate_schedule(s.schedule.resolve(s.channel, s.topology.base),
                                      s.channel, s.topology.base, mode);
            bundle.verdicts.push_back({name, v.pass, v.reason});
        };
        check(ValidationMode::admissibility, "stepsize-admissibility");
        if (time_varying) check(ValidationMode::monotone, "stepsize-monotone");
        if (s.protocol == ProtocolKind::heterogeneous) {
            check(ValidationMode::spread_vanishes, "stepsize-spread-vanishes");
            check(ValidationMode::spread_summable, "stepsize-spread-summable");
        }
    } else {
        bundle.verdicts.push_back(
            {"stepsize-admissibility", true, "baseline protocol has no step size"});
    }

    switch (s.topology.kind) {
    case TopologySpec::Kind::static_graph:
        bundle.verdicts.push_back({"connectivity", s.topology.base.connected(),
                                   s.topology.base.connected()
                                       ? "base graph connected"
                                       : "base graph disconnected"});
        break;
    case TopologySpec::Kind::sampled: {
        try {
            Stream rng = Stream::for_trial(s.seed, 0);
            const TopologySequence seq = generate_sampled_sequence(
                s.topology.base, s.topology.window, s.topology.q, s.horizon, rng);
            const auto cc = check_connectivity(seq, s.horizon);
            bundle.verdicts.push_back({"joint-connectivity", cc.all_pass(),
                                       cc.verdicts.back().detail + " (trial-0 preview)"});
        } catch (const std::exception& e) {
            bundle.verdicts.push_back({"joint-connectivity", false, e.what()});
        }
        break;
    }
    case TopologySpec::Kind::sequence: {
        TopologySequence seq(s.topology.base, s.topology.window,
                             std::max(s.topology.horizon, s.horizon));
        for (const auto& [k, ev] : s.topology.events) seq.set_event(k, ev);
        const long h = s.horizon > 0 ? s.horizon : seq.horizon();
        const auto cc = check_connectivity(seq, h);
        bundle.verdicts.push_back(
            {"joint-connectivity", cc.all_pass(), cc.verdicts.back().detail});
        break;
    }
    }
    return bundle;
}

} // namespace oac
