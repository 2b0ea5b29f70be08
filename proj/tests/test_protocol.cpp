#include "oac/protocol.hpp"

#include "oac/analysis.hpp"
#include "oac/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace oac;

namespace {

const PhysicalTopology kRing10 = PhysicalTopology::ring(10);
const ChannelModel kRingModel = ChannelModel::uniform(10, 1.0, 0.01);

StepsizeSchedule ring_schedule(double perturb = 0.0) {
    // max abar row sum on the ring is 2 * 0.5 = 1
    return StepsizeSchedule::power_law(0.75, 1.0, perturb);
}

} // namespace

TEST_CASE("schedule evaluation and admissibility verdicts") {
    const auto s = StepsizeSchedule::power_law(0.75, 1.0);
    CHECK(s.alpha(0) == doctest::Approx(1.0));
    CHECK(s.alpha(15) == doctest::Approx(1.0 / std::pow(16.0, 0.75)));

    SUBCASE("recommended power law passes the stepsize assumptions") {
        const auto v = validate_schedule(ring_schedule(), kRingModel, kRing10,
                                         ValidationMode::admissibility);
        CHECK(v.pass);
        CHECK_FALSE(v.horizon_limited);
    }
    SUBCASE("slow decay fails square-summability") {
        const auto v = validate_schedule(StepsizeSchedule::power_law(0.4, 1.0), kRingModel,
                                         kRing10, ValidationMode::admissibility);
        CHECK_FALSE(v.pass);
    }
    SUBCASE("fast decay fails divergence of the sum") {
        const auto v = validate_schedule(StepsizeSchedule::power_law(1.2, 1.0), kRingModel,
                                         kRing10, ValidationMode::admissibility);
        CHECK_FALSE(v.pass);
    }
    SUBCASE("oversized scale breaks the contraction condition") {
        const auto v = validate_schedule(StepsizeSchedule::power_law(0.75, 1.5), kRingModel,
                                         kRing10, ValidationMode::admissibility);
        CHECK_FALSE(v.pass);
    }
    SUBCASE("harmonic-style schedule is monotone with bounded ratio") {
        const auto v = validate_schedule(StepsizeSchedule::power_law(1.0, 1.0), kRingModel,
                                         kRing10, ValidationMode::monotone);
        CHECK(v.pass);
    }
    SUBCASE("explicit tables are horizon-limited") {
        std::vector<double> vals(5000);
        for (std::size_t k = 0; k < vals.size(); ++k)
            vals[k] = 1.0 / std::pow(static_cast<double>(k + 1), 0.75);
        const auto v = validate_schedule(StepsizeSchedule::explicit_values(vals), kRingModel,
                                         kRing10, ValidationMode::admissibility);
        CHECK(v.pass);
        CHECK(v.horizon_limited);
        CHECK_THROWS_AS(StepsizeSchedule::explicit_values(vals).alpha(5000), ConfigError);
    }
}

TEST_CASE("per-agent schedule conditions") {
    // path 0-1-2: endpoint agents have weight row sum 0.5, the middle 1.0
    const auto path3 = PhysicalTopology::path(3);
    const auto model = ChannelModel::uniform(3, 1.0, 0.01);
    const auto base = StepsizeSchedule::power_law(0.75, 1.0);

    SUBCASE("upward perturbation on a non-maximal agent satisfies everything") {
        std::vector<StepsizeSchedule> s{StepsizeSchedule::power_law(0.75, 1.0, 0.1), base,
                                        base};
        CHECK(validate_schedules(s, model, path3, ValidationMode::admissibility).pass);
        CHECK(validate_schedules(s, model, path3, ValidationMode::spread_vanishes).pass);
        CHECK(validate_schedules(s, model, path3, ValidationMode::spread_summable).pass);
    }
    SUBCASE("the same perturbation on the max-degree agent breaks the contraction") {
        std::vector<StepsizeSchedule> s{base, StepsizeSchedule::power_law(0.75, 1.0, 0.1),
                                        base};
        CHECK_FALSE(validate_schedules(s, model, path3, ValidationMode::admissibility).pass);
    }
    SUBCASE("one slowly decaying agent fails square-summability") {
        std::vector<StepsizeSchedule> s{StepsizeSchedule::power_law(0.4, 1.0), base, base};
        CHECK_FALSE(validate_schedules(s, model, path3, ValidationMode::admissibility).pass);
    }
    SUBCASE("different scales leave a non-vanishing spread") {
        std::vector<StepsizeSchedule> s{StepsizeSchedule::power_law(0.75, 0.5), base, base};
        CHECK_FALSE(validate_schedules(s, model, path3, ValidationMode::spread_vanishes).pass);
        CHECK_FALSE(validate_schedules(s, model, path3, ValidationMode::spread_summable).pass);
    }
}

TEST_CASE("degenerate channel freezes the state") {
    // no fading, no noise: the update must be exactly the identity
    const auto model = ChannelModel::uniform(4, 0.0, 0.0);
    const auto seq = TopologySequence::static_topology(PhysicalTopology::complete(4));
    StateVector st = StateVector::from_values({1.0, 2.0, 3.0, 4.0});
    Stream rng(5);
    Stepper stepper(model, seq, StepsizeSchedule::power_law(0.75, 1.0));
    for (int k = 0; k < 5; ++k) stepper.advance(st, rng);
    CHECK(st.x == std::vector<double>{1.0, 2.0, 3.0, 4.0});
    CHECK(st.k == 5);
}

TEST_CASE("hand-checked single round on two agents") {
    const auto model = ChannelModel::uniform(2, 1.0, 0.0);
    const auto topo = PhysicalTopology::complete(2);

    RoundDraw d;
    d.n = 2;
    d.gamma = {1, 0};
    d.h.assign(4, {0.0, 0.0});
    d.h[0 * 2 + 1] = {1.0, 0.0};
    d.noise.assign(2, {0.0, 0.0});
    d.active = topo;

    StateVector st = StateVector::from_values({0.0, 4.0});
    NoiseDecomposition noise;
    apply_round(model, d, [](int) { return 1.0; }, {}, NegativityPolicy::clamp, st, &noise);

    // (1 - 1 * 0.5) * 0 + 1 * (|1 * sqrt(4)|^2 - 0) = 4
    CHECK(st.x[0] == doctest::Approx(4.0));
    CHECK(st.k == 1);
    // realized weight a_01 = |h|^2 = 1, abar = 0.5, so the noise split is
    // v = 0 and delta_L_x = (1 - 0.5) * 4 = 2
    CHECK(noise.v[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(noise.delta_L_x[0] == doctest::Approx(2.0));
}

TEST_CASE("compact-form residual is exact along a trajectory") {
    const auto topo = PhysicalTopology::complete(5);
    const auto model = ChannelModel::uniform(5, 1.0, 0.1);
    const auto seq = TopologySequence::static_topology(topo);
    const auto schedule = StepsizeSchedule::power_law(0.75, 0.5); // d_max = 2
    StateVector st = StateVector::from_values({1, 2, 3, 4, 5});
    Stream rng(6);
    Stepper stepper(model, seq, schedule);

    for (int k = 0; k < 200; ++k) {
        const std::vector<double> x_prev = st.x;
        StepResult out;
        stepper.advance(st, rng, &out);
        const double a = schedule.alpha(k);
        for (int i = 0; i < 5; ++i) {
            double lbar_x = 0.0, row = 0.0;
            for (int j : topo.neighbors(i)) {
                lbar_x += model.abar(i, j) * x_prev[j];
                row += model.abar(i, j);
            }
            const double predicted =
                (1.0 - a * row) * x_prev[i] + a * lbar_x + a * out.noise.w[i];
            CHECK(std::abs(st.x[i] - predicted) <= 1e-12 * std::max(1.0, std::abs(st.x[i])));
        }
    }
}

TEST_CASE("noise decomposition is a conditional martingale increment") {
    const auto topo = PhysicalTopology::complete(4);
    const auto model = ChannelModel::uniform(4, 1.0, 0.2);
    const auto seq = TopologySequence::static_topology(topo);
    const std::vector<double> frozen{1.0, 2.0, 0.5, 3.0};
    Stream rng(7);
    Stepper stepper(model, seq, StepsizeSchedule::power_law(0.75, 0.5));

    const long m = 100000;
    std::vector<double> sum(4, 0.0), sumsq(4, 0.0);
    for (long t = 0; t < m; ++t) {
        StateVector st = StateVector::from_values(frozen);
        StepResult out;
        stepper.advance(st, rng, &out);
        for (int i = 0; i < 4; ++i) {
            sum[i] += out.noise.w[i];
            sumsq[i] += out.noise.w[i] * out.noise.w[i];
        }
    }
    for (int i = 0; i < 4; ++i) {
        const double mean = sum[i] / m;
        const double var = sumsq[i] / m - mean * mean;
        const double se = std::sqrt(var / m);
        CHECK(std::abs(mean) < 3.0 * se);
    }
}

TEST_CASE("equal per-agent schedules reproduce the shared-schedule run bit-exactly") {
    const auto topo = PhysicalTopology::ring(6);
    const auto model = ChannelModel::uniform(6, 1.0, 0.05);
    const auto seq = TopologySequence::static_topology(topo);
    const auto schedule = StepsizeSchedule::power_law(0.75, 1.0);

    StateVector a = StateVector::from_values({1, 2, 3, 4, 5, 6});
    StateVector b = a;
    Stream ra(8), rb(8);
    Stepper hom(model, seq, schedule);
    Stepper het(model, seq, std::vector<StepsizeSchedule>(6, schedule));
    for (int k = 0; k < 50; ++k) {
        hom.advance(a, ra);
        het.advance(b, rb);
    }
    CHECK(a.x == b.x); // bitwise equality
}

TEST_CASE("failed nodes freeze exactly and drop out of neighbors' sums") {
    const auto model = ChannelModel::uniform(3, 1.0, 0.1);
    TopologySequence seq(PhysicalTopology::complete(3), 1, 10);
    seq.set_event(0, TopologyEvent{.failed_nodes = {1}, .failed_links = {}});

    StateVector st = StateVector::from_values({1.0, 2.0, 3.0});
    Stream rng(9);
    StepResult out;
    Stepper stepper(model, seq, StepsizeSchedule::power_law(0.75, 0.5));
    stepper.advance(st, rng, &out);

    CHECK(st.x[1] == 2.0); // exact hold
    CHECK(out.noise.v[1] == 0.0);
    CHECK(out.noise.w[1] == 0.0);
    CHECK_FALSE(out.draw.active.has_edge(0, 1));
    CHECK(out.draw.active.has_edge(0, 2));
}

TEST_CASE("baseline: noise-free identities") {
    SUBCASE("single transmitter hands over its state") {
        const auto model = ChannelModel::uniform(2, 1.0, 0.0);
        const auto topo = PhysicalTopology::complete(2);
        StateVector st = StateVector::from_values({7.0, 3.0});
        Stream rng(10);
        step_baseline(model, topo, st, rng);
        CHECK(st.x[0] == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(st.x[1] == doctest::Approx(7.0).epsilon(1e-12));
    }
    SUBCASE("consensus is a fixed point") {
        const auto model = ChannelModel::uniform(5, 1.0, 0.0);
        const auto topo = PhysicalTopology::complete(5);
        StateVector st = StateVector::from_values(std::vector<double>(5, 2.5));
        Stream rng(11);
        for (int k = 0; k < 10; ++k) step_baseline(model, topo, st, rng);
        for (double xi : st.x) CHECK(xi == doctest::Approx(2.5).epsilon(1e-9));
        CHECK(st.guard_events == 0);
    }
    SUBCASE("vanishing denominator trips the division guard and holds state") {
        const auto model = ChannelModel::uniform(3, 0.0, 0.0); // h = 0, n = 0
        const auto topo = PhysicalTopology::complete(3);
        StateVector st = StateVector::from_values({1.0, 2.0, 3.0});
        Stream rng(12);
        step_baseline(model, topo, st, rng);
        CHECK(st.x == std::vector<double>{1.0, 2.0, 3.0});
        CHECK(st.guard_events == 3);
        CHECK(st.k == 1);
    }
}

TEST_CASE("zero-noise rounds: nonnegativity holds, hull exits are counted") {
    // with no receiver noise every update term is nonnegative, so states
    // stay >= 0; the realized weights (and the non-coherent cross terms)
    // are unbounded, so leaving the state hull is possible and must be
    // counted rather than asserted away
    const auto topo = PhysicalTopology::complete(4);
    const auto model = ChannelModel::uniform(4, 1.0, 0.0);
    const auto seq = TopologySequence::static_topology(topo);
    const auto schedule = StepsizeSchedule::power_law(0.75, 1.0 / 1.5); // d_max = 1.5
    StateVector st = StateVector::from_values({1.0, 5.0, 2.0, 8.0});
    Stream rng(15);
    Stepper stepper(model, seq, schedule);
    long manual_exits = 0;
    for (long k = 0; k < 300; ++k) {
        const std::vector<double> prev = st.x;
        const double lo = *std::min_element(prev.begin(), prev.end());
        const double hi = *std::max_element(prev.begin(), prev.end());
        stepper.advance(st, rng);
        const double tol = 1e-9 * std::max(1.0, std::abs(hi) + std::abs(lo));
        for (int i = 0; i < 4; ++i) {
            CHECK(st.x[i] >= 0.0);
            if (st.x[i] > hi + tol || st.x[i] < lo - tol) ++manual_exits;
        }
    }
    CHECK(st.negativity_events == 0);
    CHECK(st.hull_violations == manual_exits);
    CHECK(manual_exits > 0); // the cross terms do push states outside
}

TEST_CASE("negativity accounting and state bounds") {
    Stream rng(13);
    const auto st = StateVector::uniform(100, 2.0, 5.0, rng);
    CHECK(st.x_min == 2.0);
    CHECK(st.x_max == 5.0);
    for (double v : st.x) {
        CHECK(v >= 2.0);
        CHECK(v < 5.0);
    }

    // sigma^2 large, states small: the very first update can go negative
    const auto model = ChannelModel::uniform(2, 1.0, 50.0);
    const auto seq = TopologySequence::static_topology(PhysicalTopology::complete(2));
    StateVector s2 = StateVector::from_values({0.01, 0.02});
    Stream r2(14);
    Stepper stepper(model, seq, StepsizeSchedule::power_law(0.75, 1.0));
    long negatives = 0;
    for (int k = 0; k < 200; ++k) {
        stepper.advance(s2, r2);
        negatives = s2.negativity_events;
    }
    CHECK(negatives > 0); // bookkeeping fires
}
