#include "oac/io.hpp"

#include "oac/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace oac {

namespace {

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
    throw ConfigError(path + ": " + why);
}

double require_number(const json& j, const std::string& path) {
    if (!j.is_number()) bad_field(path, "expected a number");
    return j.get<double>();
}

} // namespace

json topology_to_json(const PhysicalTopology& t) {
    json edges = json::array();
    for (const auto& [i, j] : t.edges()) edges.push_back({i, j});
    return {{"n_agents", t.n_agents()}, {"edges", edges}};
}

PhysicalTopology topology_from_json(const json& j) {
    if (j.contains("kind")) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "bundled50") return PhysicalTopology::bundled50();
        const int n = j.at("n").get<int>();
        if (kind == "complete") return PhysicalTopology::complete(n);
        if (kind == "ring") return PhysicalTopology::ring(n);
        if (kind == "path") return PhysicalTopology::path(n);
        bad_field("topology.kind", "unknown kind '" + kind + "'");
    }
    if (!j.contains("n_agents")) bad_field("topology", "needs n_agents or kind");
    PhysicalTopology t(j.at("n_agents").get<int>());
    for (const auto& e : j.value("edges", json::array())) {
        if (!e.is_array() || e.size() != 2) bad_field("topology.edges", "entries must be [i, j]");
        t.add_edge(e[0].get<int>(), e[1].get<int>());
    }
    return t;
}

json sequence_to_json(const TopologySequence& s) {
    json events = json::array();
    for (const auto& [k, ev] : s.events()) {
        json links = json::array();
        for (const auto& [i, j] : ev.failed_links) links.push_back({i, j});
        events.push_back(
            {{"k", k}, {"failed_nodes", ev.failed_nodes}, {"failed_links", links}});
    }
    return {{"base", topology_to_json(s.base())},
            {"window", s.window()},
            {"horizon", s.horizon()},
            {"events", events}};
}

TopologySequence sequence_from_json(const json& j) {
    PhysicalTopology base = topology_from_json(j.at("base"));
    const long window = j.value("window", 1L);
    long horizon = j.value("horizon", 0L);
    const json events = j.value("events", json::array());
    for (const auto& ev : events) horizon = std::max(horizon, ev.at("k").get<long>() + 1);
    TopologySequence seq(std::move(base), window, horizon);
    for (const auto& ev : events) {
        TopologyEvent e;
        for (const auto& n : ev.value("failed_nodes", json::array()))
            e.failed_nodes.push_back(n.get<int>());
        for (const auto& l : ev.value("failed_links", json::array()))
            e.failed_links.emplace_back(l[0].get<int>(), l[1].get<int>());
        seq.set_event(ev.at("k").get<long>(), std::move(e));
    }
    return seq;
}

double parse_power(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        std::string lower;
        for (char c : s) lower.push_back(static_cast<char>(std::tolower(c)));
        const auto pos = lower.find("db");
        if (pos == std::string::npos)
            throw ConfigError("power string '" + s + "' must end in 'dB'");
        const double db = std::stod(lower.substr(0, pos));
        return std::pow(10.0, db / 10.0);
    }
    throw ConfigError("power must be a number or a 'dB' string");
}

json channel_to_json(const ChannelModel& m) {
    const int n = m.n_agents();
    json lambda = json::array();
    for (int i = 0; i < n; ++i) {
        json row = json::array();
        for (int j = 0; j < n; ++j) row.push_back(m.lambda(i, j));
        lambda.push_back(row);
    }
    return {{"rho", m.rho}, {"p", m.p}, {"sigma2", m.sigma2}, {"lambda", lambda}};
}

ChannelModel channel_from_json(const json& j, int n_agents) {
    ChannelModel m;
    const int n = n_agents;
    m.rho = j.value("rho", 1.0);

    const json& pj = j.at("p");
    if (pj.is_number())
        m.p.assign(n, pj.get<double>());
    else
        m.p = pj.get<std::vector<double>>();

    const json& sj = j.at("sigma2");
    if (sj.is_array()) {
        for (const auto& v : sj) m.sigma2.push_back(parse_power(v));
    } else {
        m.sigma2.assign(n, parse_power(sj));
    }

    const json& lj = j.at("lambda");
    m.lambda = Matrix(n, n);
    if (lj.is_number()) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (a != b) m.lambda(a, b) = lj.get<double>();
    } else if (lj.is_array()) {
        if (static_cast<int>(lj.size()) != n) bad_field("channel.lambda", "needs n rows");
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) m.lambda(a, b) = lj[a][b].get<double>();
    } else if (lj.is_object()) {
        const double dflt = lj.value("default", 0.0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (a != b) m.lambda(a, b) = dflt;
        for (const auto& ov : lj.value("overrides", json::array())) {
            const int a = ov[0].get<int>(), b = ov[1].get<int>();
            const double v = ov[2].get<double>();
            m.lambda(a, b) = v;
            m.lambda(b, a) = v;
        }
    } else {
        bad_field("channel.lambda", "number, matrix, or {default, overrides}");
    }
    m.validate();
    return m;
}

namespace {

ScheduleSpec schedule_from_json(const json& j) {
    ScheduleSpec s;
    const std::string kind = j.value("kind", std::string("power_law"));
    if (kind == "power_law") {
        s.kind = ScheduleSpec::Kind::power_law;
        s.exponent = j.value("p", 0.75);
        if (!j.contains("scale") || (j.at("scale").is_string() &&
                                     j.at("scale").get<std::string>() == "auto_dmax")) {
            s.auto_scale = true;
        } else {
            s.auto_scale = false;
            s.scale = require_number(j.at("scale"), "schedule.scale");
        }
        s.perturb = j.value("perturb", 0.0);
        for (const auto& ov : j.value("agent_perturb", json::array()))
            s.agent_perturb[ov.at("agent").get<int>()] = ov.at("perturb").get<double>();
    } else if (kind == "explicit") {
        s.kind = ScheduleSpec::Kind::explicit_values;
        s.values = j.at("values").get<std::vector<double>>();
    } else {
        bad_field("schedule.kind", "unknown kind '" + kind + "'");
    }
    return s;
}

json schedule_to_json(const ScheduleSpec& s) {
    if (s.kind == ScheduleSpec::Kind::explicit_values)
        return {{"kind", "explicit"}, {"values", s.values}};
    json out{{"kind", "power_law"}, {"p", s.exponent}, {"perturb", s.perturb}};
    if (s.auto_scale)
        out["scale"] = "auto_dmax";
    else
        out["scale"] = s.scale;
    if (!s.agent_perturb.empty()) {
        json ovs = json::array();
        for (const auto& [agent, perturb] : s.agent_perturb)
            ovs.push_back({{"agent", agent}, {"perturb", perturb}});
        out["agent_perturb"] = ovs;
    }
    return out;
}

} // namespace

json scenario_to_json(const Scenario& s) {
    json topo;
    switch (s.topology.kind) {
    case TopologySpec::Kind::static_graph:
        topo = {{"kind", "static"}, {"graph", topology_to_json(s.topology.base)}};
        break;
    case TopologySpec::Kind::sampled:
        topo = {{"kind", "sampled"},
                {"base", topology_to_json(s.topology.base)},
                {"L", s.topology.window},
                {"q", s.topology.q}};
        break;
    case TopologySpec::Kind::sequence: {
        TopologySequence seq(s.topology.base, s.topology.window, s.topology.horizon);
        for (const auto& [k, ev] : s.topology.events) seq.set_event(k, ev);
        topo = {{"kind", "sequence"}, {"sequence", sequence_to_json(seq)}};
        break;
    }
    }

    json init;
    if (s.init.kind == InitSpec::Kind::explicit_values)
        init = {{"kind", "explicit"}, {"values", s.init.values}};
    else
        init = {{"kind", "uniform"}, {"lo", s.init.lo}, {"hi", s.init.hi}};

    const char* proto = s.protocol == ProtocolKind::proposed       ? "proposed"
                        : s.protocol == ProtocolKind::heterogeneous ? "heterogeneous"
                                                                    : "baseline";
    const char* policy = s.policy == NegativityPolicy::clamp       ? "clamp"
                         : s.policy == NegativityPolicy::abort_run ? "abort"
                                                                   : "offset-warn";
    return {{"name", s.name},
            {"topology", topo},
            {"channel", channel_to_json(s.channel)},
            {"schedule", schedule_to_json(s.schedule)},
            {"protocol", proto},
            {"init", init},
            {"horizon", s.horizon},
            {"trials", s.trials},
            {"seed", s.seed},
            {"out", s.out_dir},
            {"thin", s.thin},
            {"policy", policy},
            {"bound_mode",
             s.bound_mode == BoundMode::paper_literal ? "paper" : "consistent"},
            {"per_agent_mse", s.per_agent_mse},
            {"threads", s.threads}};
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.name = j.value("name", std::string());

    const json& tj = j.at("topology");
    const std::string tkind = tj.value("kind", std::string("static"));
    if (tkind == "static") {
        s.topology.kind = TopologySpec::Kind::static_graph;
        s.topology.base = topology_from_json(tj.at("graph"));
    } else if (tkind == "sampled") {
        s.topology.kind = TopologySpec::Kind::sampled;
        s.topology.base = topology_from_json(tj.at("base"));
        s.topology.window = tj.at("L").get<long>();
        s.topology.q = tj.at("q").get<double>();
    } else if (tkind == "sequence") {
        s.topology.kind = TopologySpec::Kind::sequence;
        const TopologySequence seq = sequence_from_json(tj.at("sequence"));
        s.topology.base = seq.base();
        s.topology.window = seq.window();
        s.topology.horizon = seq.horizon();
        s.topology.events = seq.events();
    } else {
        bad_field("topology.kind", "unknown kind '" + tkind + "'");
    }

    s.channel = channel_from_json(j.at("channel"), s.topology.base.n_agents());
    s.schedule = schedule_from_json(j.value("schedule", json{{"kind", "power_law"}}));

    const std::string proto = j.value("protocol", std::string("proposed"));
    if (proto == "proposed")
        s.protocol = ProtocolKind::proposed;
    else if (proto == "heterogeneous")
        s.protocol = ProtocolKind::heterogeneous;
    else if (proto == "baseline")
        s.protocol = ProtocolKind::baseline;
    else
        bad_field("protocol", "unknown protocol '" + proto + "'");

    const json& ij = j.at("init");
    const std::string ikind = ij.value("kind", std::string("explicit"));
    if (ikind == "explicit") {
        s.init.kind = InitSpec::Kind::explicit_values;
        s.init.values = ij.at("values").get<std::vector<double>>();
    } else if (ikind == "uniform") {
        s.init.kind = InitSpec::Kind::uniform;
        s.init.lo = ij.at("lo").get<double>();
        s.init.hi = ij.at("hi").get<double>();
    } else {
        bad_field("init.kind", "unknown kind '" + ikind + "'");
    }

    s.horizon = j.at("horizon").get<long>();
    s.trials = j.value("trials", 1L);
    if (!j.contains("seed")) bad_field("seed", "a seed is mandatory for reproducibility");
    s.seed = j.at("seed").get<std::uint64_t>();
    s.seed_set = true;
    s.out_dir = j.value("out", std::string());
    s.thin = j.value("thin", 0L);

    const std::string policy = j.value("policy", std::string("clamp"));
    if (policy == "clamp")
        s.policy = NegativityPolicy::clamp;
    else if (policy == "abort")
        s.policy = NegativityPolicy::abort_run;
    else if (policy == "offset-warn")
        s.policy = NegativityPolicy::offset_warn;
    else
        bad_field("policy", "unknown policy '" + policy + "'");

    const std::string bm = j.value("bound_mode", std::string("consistent"));
    if (bm == "paper")
        s.bound_mode = BoundMode::paper_literal;
    else if (bm == "consistent")
        s.bound_mode = BoundMode::convention_consistent;
    else
        bad_field("bound_mode", "unknown mode '" + bm + "'");

    s.per_agent_mse = j.value("per_agent_mse", false);
    s.threads = j.value("threads", 0);
    s.validate();
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file " + path);
    json j;
    in >> j;
    return scenario_from_json(j);
}

json moment_report_to_json(const MomentReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"name", e.name},
                           {"empirical", e.empirical},
                           {"expected", e.expected},
                           {"std_error", e.std_error},
                           {"z", e.z},
                           {"rel_err", e.rel_err},
                           {"pass", e.pass}});
    return {{"draws", r.draws}, {"all_pass", r.all_pass()}, {"entries", entries}};
}

json bound_constants_to_json(const BoundConstants& b) {
    json out{{"mode", b.mode == BoundMode::paper_literal ? "paper" : "consistent"},
             {"c_l", b.c_l},
             {"c_m1", b.c_m1},
             {"c_m2", b.c_m2},
             {"lambda2", b.lambda2},
             {"norm_l_bar", b.norm_l_bar},
             {"sum_alpha_sq", {b.sum_alpha_sq_lo, b.sum_alpha_sq_hi}},
             {"m1_bar", {b.m1_bar_lo, b.m1_bar_hi}},
             {"warnings", b.warnings}};
    if (b.time_varying) {
        out["m_l"] = b.m_l;
        out["m2_bar"] = b.m2_bar;
        out["alpha_window_ratio"] = b.alpha_window_ratio;
    }
    return out;
}

json aggregate_to_json(const AggregateReport& a, const Scenario& s) {
    const long thin = s.effective_thin();
    const auto thinned = [&](const std::vector<double>& curve) {
        json out = json::array();
        for (std::size_t k = 0; k < curve.size(); k += thin) out.push_back(curve[k]);
        if (!curve.empty() && (curve.size() - 1) % thin != 0) out.push_back(curve.back());
        return out;
    };
    json out{{"scenario", scenario_to_json(s)},
             {"trials", a.trials},
             {"horizon", a.horizon},
             {"thin", thin},
             {"v_mean", thinned(a.v_mean)},
             {"mse_mean", thinned(a.mse_mean)},
             {"mean_mean", thinned(a.mean_mean)},
             {"final_mean", {{"avg", a.final_mean_avg},
                             {"se", a.final_mean_se},
                             {"var", a.final_mean_var},
                             {"dev_var", a.final_mean_dev_var}}},
             {"final_mse_mean", a.final_mse_mean},
             {"events", {{"negativity", a.negativity_total},
                         {"guards", a.guard_total},
                         {"clamp_warnings", a.clamp_warning_total},
                         {"hull_violations", a.hull_violation_total}}},
             {"wall_seconds", a.wall_seconds}};
    if (a.has_bounds) out["bounds"] = bound_constants_to_json(a.bounds);
    return out;
}

json compare_to_json(const CompareReport& c) {
    json diff = json::array();
    const std::size_t stride = std::max<std::size_t>(1, c.mse_diff.size() / 1000);
    for (std::size_t k = 0; k < c.mse_diff.size(); k += stride) diff.push_back(c.mse_diff[k]);
    return {{"sweep", c.sweep_field},
            {"pairs", c.pairs},
            {"b_final_mse_greater", c.b_final_mse_greater},
            {"fraction_b_greater", c.fraction_b_greater},
            {"a_final_mean_dev_var", c.a().final_mean_dev_var},
            {"b_final_mean_dev_var", c.b().final_mean_dev_var},
            {"a_final_mse_mean", c.a().final_mse_mean},
            {"b_final_mse_mean", c.b().final_mse_mean},
            {"mse_diff", diff}};
}

json validation_to_json(const ValidationBundle& v) {
    json verdicts = json::array();
    for (const auto& nv : v.verdicts)
        verdicts.push_back({{"name", nv.name}, {"pass", nv.pass}, {"detail", nv.detail}});
    return {{"all_pass", v.all_pass()}, {"verdicts", verdicts}};
}

} // namespace oac
