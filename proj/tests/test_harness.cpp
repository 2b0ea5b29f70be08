#include "oac/harness.hpp"

#include "oac/errors.hpp"
#include "oac/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace oac;
namespace fs = std::filesystem;

namespace {

Scenario tiny_scenario() {
    Scenario s;
    s.name = "tiny";
    s.topology.kind = TopologySpec::Kind::static_graph;
    s.topology.base = PhysicalTopology::complete(4);
    s.channel = ChannelModel::uniform(4, 1.0, 0.01);
    s.schedule.kind = ScheduleSpec::Kind::power_law;
    s.schedule.exponent = 0.75;
    s.schedule.auto_scale = true;
    s.init.kind = InitSpec::Kind::explicit_values;
    s.init.values = {1.0, 2.0, 3.0, 4.0};
    s.horizon = 50;
    s.trials = 4;
    s.seed = 2024;
    s.seed_set = true;
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("scenario JSON round-trip") {
    Scenario s = tiny_scenario();
    s.schedule.agent_perturb[1] = -0.05;
    s.protocol = ProtocolKind::heterogeneous;
    const json j = scenario_to_json(s);
    const Scenario s2 = scenario_from_json(j);
    CHECK(scenario_to_json(s2) == j);
}

TEST_CASE("scenario validation points at the offending field") {
    json j = scenario_to_json(tiny_scenario());
    SUBCASE("seed is mandatory") {
        j.erase("seed");
        CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("seed"), ConfigError);
    }
    SUBCASE("init dimension") {
        j["init"]["values"] = {1.0, 2.0};
        CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("init.values"),
                             ConfigError);
    }
    SUBCASE("trial count") {
        j["trials"] = 0;
        CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("trials"), ConfigError);
    }
    SUBCASE("sampling probability") {
        j["topology"] = {{"kind", "sampled"},
                         {"base", topology_to_json(PhysicalTopology::complete(4))},
                         {"L", 2},
                         {"q", 1.5}};
        CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("topology.q"),
                             ConfigError);
    }
}

TEST_CASE("zero-horizon run returns the initial state") {
    Scenario s = tiny_scenario();
    s.horizon = 0;
    s.trials = 1;
    const auto out = run(s);
    CHECK(out.trials[0].final_x == s.init.values);
    CHECK(out.aggregate.v_mean.size() == 1);
    CHECK(out.aggregate.final_mean_avg == doctest::Approx(2.5));
}

TEST_CASE("runs are deterministic and trials independent of scheduling") {
    Scenario s = tiny_scenario();
    s.threads = 2;
    const auto a = run(s);
    s.threads = 1;
    const auto b = run(s);
    for (long t = 0; t < s.trials; ++t) {
        CHECK(a.trials[t].final_x == b.trials[t].final_x); // bitwise
        CHECK(a.trials[t].trace.v == b.trials[t].trace.v);
    }
    CHECK(a.aggregate.v_mean == b.aggregate.v_mean);

    // a standalone replay of one trial matches the pooled run
    const auto solo = run_trial(s, 2);
    CHECK(solo.final_x == a.trials[2].final_x);
    CHECK(solo.trace.mean == a.trials[2].trace.mean);
}

TEST_CASE("trace files are byte-identical across runs") {
    Scenario s = tiny_scenario();
    const fs::path base = fs::temp_directory_path() / "oac_harness_test";
    fs::remove_all(base);
    s.out_dir = (base / "a").string();
    run(s, {.keep_trials = false});
    s.out_dir = (base / "b").string();
    run(s, {.keep_trials = false});
    for (long t = 0; t < s.trials; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "trial_%04ld.csv", t);
        const auto fa = slurp(base / "a" / name);
        CHECK(!fa.empty());
        CHECK(fa == slurp(base / "b" / name));
    }
    CHECK(fs::exists(base / "a" / "aggregate.json"));
    fs::remove_all(base);
}

TEST_CASE("aggregate curves equal the fold of per-trial traces") {
    Scenario s = tiny_scenario();
    const auto out = run(s);
    for (std::size_t k = 0; k < out.aggregate.v_mean.size(); ++k) {
        double v = 0.0, mse = 0.0;
        for (const auto& tr : out.trials) {
            v += tr.trace.v[k];
            mse += tr.trace.mse[k];
        }
        CHECK(std::abs(out.aggregate.v_mean[k] - v / s.trials) <= 1e-12);
        CHECK(std::abs(out.aggregate.mse_mean[k] - mse / s.trials) <= 1e-12);
    }
}

TEST_CASE("thinning policy") {
    Scenario s = tiny_scenario();
    CHECK(s.effective_thin() == 1);
    s.horizon = 25000;
    CHECK(s.effective_thin() == 3);
    s.thin = 7;
    CHECK(s.effective_thin() == 7);

    s = tiny_scenario();
    s.horizon = 10;
    s.trials = 1;
    const fs::path dir = fs::temp_directory_path() / "oac_thin_test";
    fs::remove_all(dir);
    s.out_dir = dir.string();
    run(s, {.keep_trials = false});
    std::ifstream in(dir / "trial_0000.csv");
    std::string line;
    long lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 12); // header + k = 0..10
    fs::remove_all(dir);
}

TEST_CASE("aborting policy surfaces the negative-state error") {
    Scenario s = tiny_scenario();
    s.policy = NegativityPolicy::abort_run;
    s.init.values = {-1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(run(s), NegativeStateUnderAbortPolicy);
}

TEST_CASE("inadmissible schedules are rejected before simulating") {
    Scenario s = tiny_scenario();
    s.schedule.exponent = 0.4;
    CHECK_THROWS_AS(run(s), InadmissibleSchedule);
    s.protocol = ProtocolKind::baseline; // baseline has no schedule precondition
    CHECK_NOTHROW(run(s, {.keep_trials = false}));
}

TEST_CASE("compare: identical scenarios give a zero curve") {
    const Scenario s = tiny_scenario();
    const auto rep = compare(s, s, "channel.sigma2");
    CHECK(rep.pairs == s.trials);
    CHECK(rep.b_final_mse_greater == 0);
    for (double d : rep.mse_diff) CHECK(d == 0.0);
}

TEST_CASE("compare rejects scenarios differing outside the swept field") {
    Scenario a = tiny_scenario();
    Scenario b = tiny_scenario();
    b.channel.sigma2.assign(4, 1.0);
    b.horizon = 60;
    CHECK_THROWS_AS(compare(a, b, "channel.sigma2"), ConfigError);
    b.horizon = a.horizon;
    CHECK_NOTHROW(compare(a, b, "channel.sigma2"));
}

TEST_CASE("validation bundle: time-varying scenario passes end to end") {
    Scenario s;
    s.name = "sampled";
    s.topology.kind = TopologySpec::Kind::sampled;
    s.topology.base = PhysicalTopology::bundled50();
    s.topology.window = 3;
    s.topology.q = 0.6;
    s.channel = ChannelModel::uniform(50, 2.0, 1.0);
    s.schedule.exponent = 0.75;
    s.init.kind = InitSpec::Kind::uniform;
    s.init.lo = 0.0;
    s.init.hi = 100.0;
    s.horizon = 60;
    s.trials = 2;
    s.seed = 7;
    s.seed_set = true;

    const auto bundle = validate(s);
    CHECK(bundle.all_pass());

    SUBCASE("slow-decay schedule flips the stepsize verdict") {
        s.schedule.exponent = 0.4;
        const auto bad = validate(s);
        CHECK_FALSE(bad.all_pass());
        bool found = false;
        for (const auto& v : bad.verdicts)
            if (v.name == "stepsize-admissibility") {
                found = true;
                CHECK_FALSE(v.pass);
            }
        CHECK(found);
    }
    SUBCASE("a permanently missing agent breaks joint connectivity") {
        Scenario bad = s;
        bad.topology.kind = TopologySpec::Kind::sequence;
        bad.topology.base = PhysicalTopology::complete(8);
        bad.channel = ChannelModel::uniform(8, 2.0, 1.0);
        bad.init.kind = InitSpec::Kind::explicit_values;
        bad.init.values.assign(8, 1.0);
        bad.topology.window = 2;
        bad.topology.horizon = 20;
        bad.horizon = 20;
        for (long k = 0; k < 20; ++k)
            bad.topology.events[k] = TopologyEvent{.failed_nodes = {7}, .failed_links = {}};
        const auto verdicts = validate(bad);
        CHECK_FALSE(verdicts.all_pass());
    }
}

TEST_CASE("aggregate report carries the variance-bound constants") {
    Scenario s = tiny_scenario();
    const auto out = run(s, {.keep_trials = false, .write_traces = false,
                             .write_report = false});
    REQUIRE(out.aggregate.has_bounds);
    CHECK(out.aggregate.bounds.m1_bar_hi >= out.aggregate.bounds.m1_bar_lo);
    CHECK(out.aggregate.bounds.c_l > 0.0);

    s.bound_mode = BoundMode::paper_literal;
    const auto literal = run(s, {.keep_trials = false, .write_traces = false,
                                 .write_report = false});
    CHECK(literal.aggregate.bounds.c_l > out.aggregate.bounds.c_l);
    const json j = aggregate_to_json(literal.aggregate, s);
    CHECK(j.at("bounds").at("mode") == "paper");

    s.protocol = ProtocolKind::baseline;
    const auto base = run(s, {.keep_trials = false, .write_traces = false,
                              .write_report = false});
    CHECK_FALSE(base.aggregate.has_bounds);
}

TEST_CASE("explicit schedule tables drive a run end to end") {
    Scenario s = tiny_scenario();
    s.schedule.kind = ScheduleSpec::Kind::explicit_values;
    s.schedule.values.resize(s.horizon);
    for (long k = 0; k < s.horizon; ++k)
        s.schedule.values[k] = 0.5 / std::pow(static_cast<double>(k + 1), 0.75);
    const json j = scenario_to_json(s);
    const Scenario s2 = scenario_from_json(j);
    CHECK(s2.schedule.values == s.schedule.values);
    const auto out = run(s2, {.write_traces = false, .write_report = false});
    CHECK(out.aggregate.v_mean.back() < out.aggregate.v_mean.front());
}

TEST_CASE("compare pairs trials through common random numbers") {
    Scenario a = tiny_scenario();
    a.init.kind = InitSpec::Kind::uniform;
    a.init.lo = 0.0;
    a.init.hi = 10.0;
    Scenario b = a;
    b.channel.sigma2.assign(4, 2.0);
    const auto rep = compare(a, b, "channel.sigma2");
    for (long t = 0; t < a.trials; ++t) {
        // same derived stream, so the initial draw is identical per trial
        CHECK(rep.a_run.trials[t].initial_mean == rep.b_run.trials[t].initial_mean);
        CHECK(rep.a_run.trials[t].trace.v[0] == rep.b_run.trials[t].trace.v[0]);
    }
}

TEST_CASE("per-agent mse columns appear when requested") {
    Scenario s = tiny_scenario();
    s.per_agent_mse = true;
    s.horizon = 3;
    s.trials = 1;
    const fs::path dir = fs::temp_directory_path() / "oac_mse_test";
    fs::remove_all(dir);
    s.out_dir = dir.string();
    run(s, {.keep_trials = false});
    std::ifstream in(dir / "trial_0000.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "k,V,mean,mse_1,mse_2,mse_3,mse_4,events");
    fs::remove_all(dir);
}
