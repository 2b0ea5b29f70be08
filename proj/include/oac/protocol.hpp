#pragma once

#include "oac/channel.hpp"
#include "oac/graph.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace oac {

/// Decreasing step-size sequence. Power-law kind:
///   alpha(k) = scale * (1 + perturb / (k + 1)) / (k + 1)^exponent
/// (the k+1 shift keeps k = 0 finite; perturb defaults to 0). The
/// explicit kind carries a finite table and is only usable up to its
/// horizon.
class StepsizeSchedule {
public:
    enum class Kind { power_law, explicit_values };

    static StepsizeSchedule power_law(double exponent, double scale, double perturb = 0.0);
    static StepsizeSchedule explicit_values(std::vector<double> values);

    double alpha(long k) const;

    Kind kind() const { return kind_; }
    double exponent() const { return exponent_; }
    double scale() const { return scale_; }
    double perturb() const { return perturb_; }
    const std::vector<double>& values() const { return values_; }
    long explicit_horizon() const { return static_cast<long>(values_.size()); }

    /// Analytic tail of sum_{k >= horizon} alpha(k)^2 for power-law kinds
    /// (integral bound); nullopt for explicit kinds.
    std::optional<double> alpha_sq_tail(long horizon) const;

    bool operator==(const StepsizeSchedule&) const = default;

private:
    Kind kind_ = Kind::power_law;
    double exponent_ = 1.0;
    double scale_ = 1.0;
    double perturb_ = 0.0;
    std::vector<double> values_;
};

enum class ValidationMode {
    admissibility,    // sum alpha = inf, sum alpha^2 < inf, alpha(k)*weight <= 1
    monotone,         // nonincreasing with bounded ratio
    spread_vanishes,  // max_ij |alpha_i - alpha_j| = o(sum_i alpha_i)
    spread_summable,  // sum_k max_ij |alpha_i - alpha_j| < inf
};

struct ScheduleVerdict {
    bool pass = false;
    bool horizon_limited = false; // explicit kinds: only the finite table was checked
    std::string reason;
};

/// Admissibility of a single shared schedule. Power-law kinds get analytic
/// verdicts; explicit kinds are checked over their finite table (slope fit
/// of log alpha against log k on the last decade) and flagged.
ScheduleVerdict validate_schedule(const StepsizeSchedule& s, const ChannelModel& model,
                                  const PhysicalTopology& topo, ValidationMode mode,
                                  long horizon = 100000);

/// Cross-agent conditions (spread_vanishes / spread_summable) for per-agent
/// schedules; assumption modes are applied to every agent's schedule.
ScheduleVerdict validate_schedules(const std::vector<StepsizeSchedule>& s,
                                   const ChannelModel& model, const PhysicalTopology& topo,
                                   ValidationMode mode, long horizon = 100000);

/// Agent information states plus bookkeeping.
struct StateVector {
    std::vector<double> x;
    long k = 0;
    long negativity_events = 0; // (agent, step) pairs with x < 0 after an update
    long guard_events = 0;      // baseline division guards taken
    long clamp_warnings = 0;    // offset_warn transmissions that clamped
    long hull_violations = 0;   // updates leaving the current state hull
    double x_min = 0.0, x_max = 0.0;

    static StateVector from_values(std::vector<double> values);
    static StateVector uniform(int n, double lo, double hi, Stream& rng);
};

/// Realized per-round noise split: x(k+1) = (I - alpha L_bar(k)) x(k)
/// + alpha w(k) holds exactly with w = delta_L_x + v.
struct NoiseDecomposition {
    std::vector<double> v;
    std::vector<double> delta_L_x;
    std::vector<double> w;
};

struct StepResult {
    RoundDraw draw;
    NoiseDecomposition noise;
};

/// Drives the consensus protocol over a topology sequence. Holds the
/// per-round draw buffer so stepping does not allocate; one Stepper per
/// trial worker.
class Stepper {
public:
    /// Shared schedule for every agent.
    Stepper(const ChannelModel& model, const TopologySequence& seq, StepsizeSchedule schedule,
            NegativityPolicy policy = NegativityPolicy::clamp);
    /// Per-agent schedules (size must equal the agent count).
    Stepper(const ChannelModel& model, const TopologySequence& seq,
            std::vector<StepsizeSchedule> schedules,
            NegativityPolicy policy = NegativityPolicy::clamp);

    /// One protocol round: draw randomness on the active topology, update
    /// every non-failed agent, advance state.k. When out is non-null the
    /// realized draw and noise decomposition are copied there.
    void advance(StateVector& state, Stream& rng, StepResult* out = nullptr);

private:
    double alpha_for(int agent, long k) const;

    const ChannelModel& model_;
    const TopologySequence& seq_;
    std::vector<StepsizeSchedule> schedules_; // size 1 = homogeneous
    NegativityPolicy policy_;
    RoundDraw draw_;
    std::vector<double> next_x_;
};

/// Single protocol round as a pure-ish convenience (allocates; tests and
/// small callers).
StepResult step(const ChannelModel& model, const TopologySequence& seq,
                const StepsizeSchedule& schedule, StateVector& state, Stream& rng,
                NegativityPolicy policy = NegativityPolicy::clamp);

StepResult step_heterogeneous(const ChannelModel& model, const TopologySequence& seq,
                              const std::vector<StepsizeSchedule>& schedules,
                              StateVector& state, Stream& rng,
                              NegativityPolicy policy = NegativityPolicy::clamp);

/// Update rule applied to an externally supplied draw (exposes the exact
/// arithmetic for tests that force specific fading/slot realizations).
void apply_round(const ChannelModel& model, const RoundDraw& draw,
                 const std::function<double(int)>& alpha_of_agent,
                 const std::vector<int>& failed_nodes, NegativityPolicy policy,
                 StateVector& state, NoiseDecomposition* noise_out);

/// Threshold below which the baseline's denominator power counts as a
/// division guard: the step is skipped and the state held.
inline constexpr double kBaselineGuard = 1e-30;

/// One round of the ratio-of-powers reference protocol: each agent
/// transmits its state and a unit constant through the same channel
/// realization, then sets x <- |y1|^2 / |y2|^2. Sums run over the
/// topology neighbors; one fading/noise draw is shared by both messages.
void step_baseline(const ChannelModel& model, const PhysicalTopology& topo,
                   StateVector& state, Stream& rng,
                   NegativityPolicy policy = NegativityPolicy::clamp);

} // namespace oac
