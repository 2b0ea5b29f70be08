#pragma once

#include "oac/graph.hpp"
#include "oac/matrix.hpp"
#include "oac/rng.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace oac {

/// What a transmitter does when its stored state is negative. The stored
/// state itself is never modified; only the transmitted amplitude is.
enum class NegativityPolicy {
    clamp,       ///< transmit sqrt(rho * max(x, 0)) silently
    abort_run,   ///< throw NegativeStateUnderAbortPolicy
    offset_warn, ///< clamp, but count a warning (consider offsetting x(0) upward)
};

/// Fading/noise/slot statistics of the wireless medium.
///
/// lambda(i,j) is the variance of the complex fading coefficient between
/// the receive antenna of i and the transmit antenna of j (symmetric,
/// diagonal unused). sigma2[i] is receiver i's noise power, rho the
/// transmit power coefficient, p[i] the probability agent i transmits in
/// the first of the two half-duplex slots.
struct ChannelModel {
    Matrix lambda;
    std::vector<double> sigma2;
    double rho = 1.0;
    std::vector<double> p;

    int n_agents() const { return static_cast<int>(p.size()); }

    /// Same fading variance, noise power and slot probability everywhere.
    static ChannelModel uniform(int n, double lambda_value, double sigma2_value,
                                double rho_value = 1.0, double p_value = 0.5);

    void validate() const; // throws ConfigError on any violated constraint

    /// P(i and j end up in opposite slots) = p_i(1-p_j) + p_j(1-p_i).
    double gamma_bar(int i, int j) const {
        return p[i] * (1.0 - p[j]) + p[j] * (1.0 - p[i]);
    }

    /// Expected aggregation weight between i and j, ignoring topology:
    /// rho * gamma_bar(i,j) * lambda(i,j). Callers gate by the edge set.
    double abar(int i, int j) const { return rho * gamma_bar(i, j) * lambda(i, j); }
};

/// One time step's realized randomness. Only h entries for ordered pairs
/// (i, j) with an active edge are populated; consumers must iterate the
/// active topology, never the raw matrix.
///
/// Draw order within a round is fixed so traces replay bit-identically:
/// gamma for agents 0..n-1, then h row-major over active ordered pairs
/// (receiver-major, transmitter ascending), then noise for agents 0..n-1.
struct RoundDraw {
    int n = 0;
    std::vector<std::uint8_t> gamma;
    std::vector<std::complex<double>> h; // n*n row-major, h[i*n + j]
    std::vector<std::complex<double>> noise;
    PhysicalTopology active;

    /// Half-duplex pairing indicator: 1 iff i and j chose opposite slots.
    /// Always 0 on the diagonal.
    int gamma_product(int i, int j) const {
        if (i == j) return 0;
        return (gamma[i] ^ gamma[j]) ? 1 : 0;
    }

    const std::complex<double>& h_at(int i, int j) const { return h[i * n + j]; }
};

/// Draw one round into a reusable buffer (hot path; no allocation when
/// the buffer already has the right size).
void draw_round_into(const ChannelModel& model, const PhysicalTopology& topo,
                     Stream& rng, RoundDraw& out);

RoundDraw draw_round(const ChannelModel& model, const PhysicalTopology& topo, Stream& rng);

/// The four terms of the received-power expansion. power equals the sum
/// of the others exactly (algebraic identity), up to roundoff.
struct SignalBreakdown {
    double power = 0.0;         // |y_i|^2
    double linear_term = 0.0;   // sum_j rho x_j Gamma_ij |h_ij|^2
    double noise_sq = 0.0;      // |n_i|^2
    double cross_fading = 0.0;  // pairwise fading cross terms
    double cross_noise = 0.0;   // fading-noise cross terms (doubled)
};

/// |y_i|^2 by direct complex accumulation over the active neighbors.
double received_power_direct(const ChannelModel& model, const RoundDraw& draw,
                             std::span<const double> x, int i,
                             NegativityPolicy policy = NegativityPolicy::clamp,
                             long* warn_counter = nullptr);

/// |y_i|^2 term by term; SignalBreakdown invariant holds against the
/// direct computation.
SignalBreakdown received_power_expanded(const ChannelModel& model, const RoundDraw& draw,
                                        std::span<const double> x, int i,
                                        NegativityPolicy policy = NegativityPolicy::clamp,
                                        long* warn_counter = nullptr);

/// Closed-form conditional mean of |y_i|^2 given the states:
/// sum over active neighbors of abar_ij x_j, plus sigma_i^2.
double conditional_mean_power(const ChannelModel& model, const PhysicalTopology& topo,
                              std::span<const double> x, int i);

/// Amplitude-squared actually transmitted for state value x under the
/// policy (max(x,0); aborts or counts per policy when x < 0).
double transmit_value(double x, NegativityPolicy policy, long* warn_counter);

} // namespace oac
