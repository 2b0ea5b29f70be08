#include "oac/protocol.hpp"

#include "oac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace oac {

StepsizeSchedule StepsizeSchedule::power_law(double exponent, double scale, double perturb) {
    if (!(scale > 0.0)) throw ConfigError("step-size scale must be positive");
    if (!(perturb > -1.0)) throw ConfigError("step-size perturbation must exceed -1");
    StepsizeSchedule s;
    s.kind_ = Kind::power_law;
    s.exponent_ = exponent;
    s.scale_ = scale;
    s.perturb_ = perturb;
    return s;
}

StepsizeSchedule StepsizeSchedule::explicit_values(std::vector<double> values) {
    if (values.empty()) throw ConfigError("explicit schedule needs at least one value");
    for (double v : values)
        if (!(v > 0.0)) throw ConfigError("explicit schedule values must be positive");
    StepsizeSchedule s;
    s.kind_ = Kind::explicit_values;
    s.values_ = std::move(values);
    return s;
}

double StepsizeSchedule::alpha(long k) const {
    if (kind_ == Kind::explicit_values) {
        if (k < 0 || k >= static_cast<long>(values_.size()))
            throw ConfigError("explicit schedule has no value for step " + std::to_string(k));
        return values_[static_cast<std::size_t>(k)];
    }
    const double t = static_cast<double>(k + 1);
    return scale_ * (1.0 + perturb_ / t) / std::pow(t, exponent_);
}

std::optional<double> StepsizeSchedule::alpha_sq_tail(long horizon) const {
    if (kind_ != Kind::power_law) return std::nullopt;
    if (exponent_ <= 0.5) return std::numeric_limits<double>::infinity();
    // alpha(k) <= c/(k+1)^p with c = scale*(1+max(perturb,0)); integral bound
    const double c = scale_ * (1.0 + std::max(perturb_, 0.0));
    const double p2 = 2.0 * exponent_;
    return c * c * std::pow(static_cast<double>(horizon), 1.0 - p2) / (p2 - 1.0);
}

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

ScheduleVerdict pass(std::string reason, bool limited = false) {
    return {true, limited, std::move(reason)};
}
ScheduleVerdict fail(std::string reason, bool limited = false) {
    return {false, limited, std::move(reason)};
}

// Least-squares slope of log(y) against log(k+1) over the last decade of
// the table; the heuristic exponent behind the horizon-limited verdicts.
double fitted_decay_exponent(const std::function<double(long)>& f, long horizon) {
    const long lo = std::max<long>(1, horizon / 10);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long m = 0;
    for (long k = lo; k < horizon; k += std::max<long>(1, (horizon - lo) / 200)) {
        const double y = f(k);
        if (y <= 0.0) return std::numeric_limits<double>::infinity();
        const double lx = std::log(static_cast<double>(k + 1));
        const double ly = std::log(y);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++m;
    }
    if (m < 2) return 0.0;
    const double denom = m * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return -(m * sxy - sx * sy) / denom;
}

double sup_alpha(const StepsizeSchedule& s, long horizon) {
    const long upto = s.kind() == StepsizeSchedule::Kind::explicit_values
                          ? s.explicit_horizon()
                          : std::min<long>(horizon, 100000);
    double m = 0.0;
    for (long k = 0; k < upto; ++k) m = std::max(m, s.alpha(k));
    return m;
}

// `weight` is the abar row sum the schedule must contract against: the
// network maximum for a shared schedule, the agent's own row sum for a
// per-agent one.
ScheduleVerdict check_admissibility(const StepsizeSchedule& s, double weight, long horizon) {
    const double sup_ad = sup_alpha(s, horizon) * weight;
    // The recommended alpha(k) = 1/(d_max (k+1)^p) attains equality at
    // k = 0, so the contraction check is non-strict.
    if (sup_ad > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "sup_k alpha(k) * max row weight = " << sup_ad << " exceeds 1";
        return fail(os.str(), s.kind() == StepsizeSchedule::Kind::explicit_values);
    }
    if (s.kind() == StepsizeSchedule::Kind::power_law) {
        if (s.exponent() > 1.0)
            return fail("exponent > 1: step sizes are summable, sum alpha(k) < inf");
        if (s.exponent() <= 0.5)
            return fail("exponent <= 0.5: sum alpha(k)^2 diverges");
        return pass("power law with exponent in (0.5, 1] and bounded weight contraction");
    }
    const double p_hat = fitted_decay_exponent([&](long k) { return s.alpha(k); },
                                               s.explicit_horizon());
    if (p_hat > 1.0 + 0.05)
        return fail("fitted decay exponent " + std::to_string(p_hat) +
                        " > 1 suggests sum alpha(k) converges",
                    true);
    if (p_hat <= 0.5)
        return fail("fitted decay exponent " + std::to_string(p_hat) +
                        " <= 0.5 suggests sum alpha(k)^2 diverges",
                    true);
    return pass("finite table consistent with exponent in (0.5, 1]; horizon-limited", true);
}

ScheduleVerdict check_monotone(const StepsizeSchedule& s, long horizon) {
    const long upto = s.kind() == StepsizeSchedule::Kind::explicit_values
                          ? s.explicit_horizon()
                          : std::min<long>(horizon, 100000);
    double max_ratio = 0.0;
    for (long k = 0; k + 1 < upto; ++k) {
        const double a0 = s.alpha(k), a1 = s.alpha(k + 1);
        if (a1 > a0 * (1.0 + 1e-12))
            return fail("schedule increases at step " + std::to_string(k),
                        s.kind() == StepsizeSchedule::Kind::explicit_values);
        max_ratio = std::max(max_ratio, a0 / a1);
    }
    std::ostringstream os;
    os << "nonincreasing; max alpha(k)/alpha(k+1) = " << max_ratio;
    if (s.kind() == StepsizeSchedule::Kind::power_law) {
        // the ratio tends to 1 for any power law, so limsup is finite
        return pass(os.str());
    }
    return pass(os.str() + "; horizon-limited", true);
}

struct DiffStats {
    bool identical = true;
    bool analytic = true;  // all power-law, equal exponent and scale
    double exponent = 0.0; // common exponent when analytic
};

DiffStats diff_structure(const std::vector<StepsizeSchedule>& s) {
    DiffStats d;
    for (const auto& si : s) {
        if (si.kind() != StepsizeSchedule::Kind::power_law) d.analytic = false;
        if (!(si == s.front())) d.identical = false;
    }
    if (d.analytic) {
        d.exponent = s.front().exponent();
        for (const auto& si : s)
            if (si.exponent() != s.front().exponent() || si.scale() != s.front().scale())
                d.analytic = false;
    }
    return d;
}

double max_diff_at(const std::vector<StepsizeSchedule>& s, long k) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& si : s) {
        const double a = si.alpha(k);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    return hi - lo;
}

double alpha_sum_at(const std::vector<StepsizeSchedule>& s, long k) {
    double t = 0.0;
    for (const auto& si : s) t += si.alpha(k);
    return t;
}

long usable_horizon(const std::vector<StepsizeSchedule>& s, long horizon) {
    long h = horizon;
    for (const auto& si : s)
        if (si.kind() == StepsizeSchedule::Kind::explicit_values)
            h = std::min(h, si.explicit_horizon());
    return h;
}

ScheduleVerdict check_spread_vanishes(const std::vector<StepsizeSchedule>& s, long horizon) {
    const DiffStats d = diff_structure(s);
    if (d.identical) return pass("schedules identical; spread is exactly zero");
    if (d.analytic)
        return pass("common power law; spread decays one order faster than the sum");
    const long h = usable_horizon(s, horizon);
    const auto ratio = [&](long k) {
        const double sum = alpha_sum_at(s, k);
        return sum > 0.0 ? max_diff_at(s, k) / sum : 0.0;
    };
    const double r0 = ratio(std::max<long>(1, h / 100));
    const double r1 = ratio(h - 1);
    if (r0 == 0.0 && r1 == 0.0) return pass("spread is zero over the horizon", true);
    if (r1 < 0.1 * r0)
        return pass("spread/sum ratio shrank by >10x over the horizon; horizon-limited", true);
    std::ostringstream os;
    os << "spread/sum ratio does not vanish (" << r0 << " -> " << r1 << ")";
    return fail(os.str(), true);
}

ScheduleVerdict check_spread_summable(const std::vector<StepsizeSchedule>& s, long horizon) {
    const DiffStats d = diff_structure(s);
    if (d.identical) return pass("schedules identical; spread sums to zero");
    if (d.analytic)
        return pass("common power law: spread decays like (k+1)^-(p+1), summable");
    const long h = usable_horizon(s, horizon);
    const double q_hat = fitted_decay_exponent([&](long k) { return max_diff_at(s, k); }, h);
    if (q_hat > 1.0 + 0.05)
        return pass("fitted spread decay exponent " + std::to_string(q_hat) +
                        " > 1, spread summable; horizon-limited",
                    true);
    return fail("fitted spread decay exponent " + std::to_string(q_hat) +
                    " <= 1, spread sum appears to diverge",
                true);
}

double abar_row_sum(const ChannelModel& model, const PhysicalTopology& topo, int agent) {
    double row = 0.0;
    for (int j : topo.neighbors(agent)) row += model.abar(agent, j);
    return row;
}

} // namespace

ScheduleVerdict validate_schedule(const StepsizeSchedule& s, const ChannelModel& model,
                                  const PhysicalTopology& topo, ValidationMode mode,
                                  long horizon) {
    switch (mode) {
    case ValidationMode::admissibility:
        return check_admissibility(s, max_abar_row_sum(model, topo), horizon);
    case ValidationMode::monotone:
        return check_monotone(s, horizon);
    case ValidationMode::spread_vanishes:
    case ValidationMode::spread_summable:
        return validate_schedules(std::vector<StepsizeSchedule>{s}, model, topo, mode, horizon);
    }
    return ScheduleVerdict{false, false, "unknown validation mode"};
}

ScheduleVerdict validate_schedules(const std::vector<StepsizeSchedule>& s,
                                   const ChannelModel& model, const PhysicalTopology& topo,
                                   ValidationMode mode, long horizon) {
    if (s.empty()) return ScheduleVerdict{false, false, "no schedules given"};
    switch (mode) {
    case ValidationMode::admissibility:
    case ValidationMode::monotone: {
        const bool per_agent = s.size() == static_cast<std::size_t>(topo.n_agents());
        for (std::size_t i = 0; i < s.size(); ++i) {
            // condition (b) binds each agent's schedule against its own row sum
            const double weight = per_agent
                                      ? abar_row_sum(model, topo, static_cast<int>(i))
                                      : max_abar_row_sum(model, topo);
            const auto v = mode == ValidationMode::admissibility
                               ? check_admissibility(s[i], weight, horizon)
                               : check_monotone(s[i], horizon);
            if (!v.pass)
                return ScheduleVerdict{false, v.horizon_limited,
                                       "agent " + std::to_string(i) + ": " + v.reason};
        }
        return ScheduleVerdict{true, false, "all per-agent schedules pass"};
    }
    case ValidationMode::spread_vanishes:
        return check_spread_vanishes(s, horizon);
    case ValidationMode::spread_summable:
        return check_spread_summable(s, horizon);
    }
    return ScheduleVerdict{false, false, "unknown validation mode"};
}

StateVector StateVector::from_values(std::vector<double> values) {
    StateVector st;
    st.x = std::move(values);
    if (st.x.empty()) throw ConfigError("state vector must not be empty");
    st.x_min = *std::min_element(st.x.begin(), st.x.end());
    st.x_max = *std::max_element(st.x.begin(), st.x.end());
    return st;
}

StateVector StateVector::uniform(int n, double lo, double hi, Stream& rng) {
    if (n <= 0) throw ConfigError("state vector must not be empty");
    if (!(hi >= lo)) throw ConfigError("initial state bounds must satisfy lo <= hi");
    StateVector st;
    st.x.resize(n);
    for (auto& v : st.x) v = rng.uniform(lo, hi);
    st.x_min = lo;
    st.x_max = hi;
    return st;
}

namespace {

void apply_round_impl(const ChannelModel& model, const RoundDraw& draw,
                      const std::function<double(int)>& alpha_of_agent,
                      const std::vector<int>& failed_nodes, NegativityPolicy policy,
                      StateVector& state, std::vector<double>& next_x,
                      NoiseDecomposition* noise_out) {
    const int n = model.n_agents();
    if (static_cast<int>(state.x.size()) != n)
        throw ConfigError("state dimension does not match the channel model");

    next_x.resize(n);
    if (noise_out) {
        noise_out->v.assign(n, 0.0);
        noise_out->delta_L_x.assign(n, 0.0);
        noise_out->w.assign(n, 0.0);
    }

    const double cur_min = *std::min_element(state.x.begin(), state.x.end());
    const double cur_max = *std::max_element(state.x.begin(), state.x.end());
    const double hull_tol = 1e-9 * std::max(1.0, std::abs(cur_max) + std::abs(cur_min));

    for (int i = 0; i < n; ++i) {
        if (std::binary_search(failed_nodes.begin(), failed_nodes.end(), i)) {
            next_x[i] = state.x[i]; // failed agents hold their state
            continue;
        }
        double row_sum = 0.0;
        for (int j : draw.active.neighbors(i)) row_sum += model.abar(i, j);

        const double a = alpha_of_agent(i);
        const double power =
            received_power_direct(model, draw, state.x, i, policy, &state.clamp_warnings);
        next_x[i] = (1.0 - a * row_sum) * state.x[i] + a * (power - model.sigma2[i]);

        if (next_x[i] < 0.0) ++state.negativity_events;
        if (next_x[i] < cur_min - hull_tol || next_x[i] > cur_max + hull_tol)
            ++state.hull_violations;

        if (noise_out) {
            double realized = 0.0, expected = 0.0;
            for (int j : draw.active.neighbors(i)) {
                const double a_ij =
                    draw.gamma_product(i, j)
                        ? model.rho * std::norm(draw.h_at(i, j))
                        : 0.0;
                realized += a_ij * state.x[j];
                expected += model.abar(i, j) * state.x[j];
            }
            noise_out->v[i] = (power - model.sigma2[i]) - realized;
            noise_out->delta_L_x[i] = realized - expected;
            noise_out->w[i] = noise_out->v[i] + noise_out->delta_L_x[i];
        }
    }

    state.x.swap(next_x);
    ++state.k;
}

const std::vector<int> kNoFailures;

const std::vector<int>& failures_at(const TopologySequence& seq, long k) {
    auto it = seq.events().find(k);
    return it == seq.events().end() ? kNoFailures : it->second.failed_nodes;
}

} // namespace

void apply_round(const ChannelModel& model, const RoundDraw& draw,
                 const std::function<double(int)>& alpha_of_agent,
                 const std::vector<int>& failed_nodes, NegativityPolicy policy,
                 StateVector& state, NoiseDecomposition* noise_out) {
    std::vector<double> scratch;
    std::vector<int> failed = failed_nodes;
    std::sort(failed.begin(), failed.end());
    apply_round_impl(model, draw, alpha_of_agent, failed, policy, state, scratch, noise_out);
}

Stepper::Stepper(const ChannelModel& model, const TopologySequence& seq,
                 StepsizeSchedule schedule, NegativityPolicy policy)
    : model_(model), seq_(seq), schedules_{std::move(schedule)}, policy_(policy) {}

Stepper::Stepper(const ChannelModel& model, const TopologySequence& seq,
                 std::vector<StepsizeSchedule> schedules, NegativityPolicy policy)
    : model_(model), seq_(seq), schedules_(std::move(schedules)), policy_(policy) {
    if (schedules_.size() != 1 &&
        schedules_.size() != static_cast<std::size_t>(model.n_agents()))
        throw ConfigError("need one schedule, or one per agent");
}

double Stepper::alpha_for(int agent, long k) const {
    const std::size_t idx = schedules_.size() == 1 ? 0 : static_cast<std::size_t>(agent);
    return schedules_[idx].alpha(k);
}

void Stepper::advance(StateVector& state, Stream& rng, StepResult* out) {
    const long k = state.k;
    const PhysicalTopology topo_k = active_topology(seq_, k);
    draw_round_into(model_, topo_k, rng, draw_);
    apply_round_impl(
        model_, draw_, [this, k](int i) { return alpha_for(i, k); }, failures_at(seq_, k),
        policy_, state, next_x_, out ? &out->noise : nullptr);
    if (out) out->draw = draw_;
}

StepResult step(const ChannelModel& model, const TopologySequence& seq,
                const StepsizeSchedule& schedule, StateVector& state, Stream& rng,
                NegativityPolicy policy) {
    Stepper st(model, seq, schedule, policy);
    StepResult out;
    st.advance(state, rng, &out);
    return out;
}

StepResult step_heterogeneous(const ChannelModel& model, const TopologySequence& seq,
                              const std::vector<StepsizeSchedule>& schedules,
                              StateVector& state, Stream& rng, NegativityPolicy policy) {
    Stepper st(model, seq, schedules, policy);
    StepResult out;
    st.advance(state, rng, &out);
    return out;
}

void step_baseline(const ChannelModel& model, const PhysicalTopology& topo,
                   StateVector& state, Stream& rng, NegativityPolicy policy) {
    const int n = model.n_agents();
    if (topo.n_agents() != n || static_cast<int>(state.x.size()) != n)
        throw ConfigError("baseline step: dimension mismatch");

    // One channel realization serves both messages of the round: fading
    // row-major over active ordered pairs, then one noise value per agent.
    std::vector<std::complex<double>> h(static_cast<std::size_t>(n) * n);
    std::vector<std::complex<double>> noise(n);
    for (int i = 0; i < n; ++i)
        for (int j : topo.neighbors(i))
            h[static_cast<std::size_t>(i) * n + j] = rng.complex_gaussian(model.lambda(i, j));
    for (int i = 0; i < n; ++i) noise[i] = rng.complex_gaussian(model.sigma2[i]);

    std::vector<double> next(n);
    for (int i = 0; i < n; ++i) {
        std::complex<double> y1 = noise[i];
        std::complex<double> y2 = noise[i];
        for (int j : topo.neighbors(i)) {
            const auto& hij = h[static_cast<std::size_t>(i) * n + j];
            y1 += hij * std::sqrt(transmit_value(state.x[j], policy, &state.clamp_warnings));
            y2 += hij;
        }
        const double denom = std::norm(y2);
        if (denom < kBaselineGuard) {
            ++state.guard_events;
            next[i] = state.x[i];
        } else {
            next[i] = std::norm(y1) / denom;
        }
    }
    state.x.swap(next);
    ++state.k;
}

} // namespace oac
