#pragma once

#include "oac/channel.hpp"
#include "oac/graph.hpp"
#include "oac/matrix.hpp"
#include "oac/protocol.hpp"

#include <string>
#include <vector>

namespace oac {

/// Expected weight matrix and Laplacian of the aggregation dynamics.
struct LaplacianSet {
    Matrix a_bar;               // expected weights, zero off the edge set
    std::vector<double> degree; // row sums of a_bar
    Matrix l_bar;               // diag(degree) - a_bar
    double lambda2 = 0.0;       // algebraic connectivity of l_bar
    double norm2 = 0.0;         // spectral norm of l_bar
};

LaplacianSet expected_laplacian(const ChannelModel& model, const PhysicalTopology& topo);

/// Realized weight matrix A(k) of one round: rho * Gamma_ij * |h_ij|^2 on
/// active edges. The realized Laplacian is diag(abar row sums) - A(k),
/// so L_bar - L(k) reduces to A(k) - A_bar.
Matrix realized_weight_matrix(const ChannelModel& model, const RoundDraw& draw);

/// Second-smallest eigenvalue of a symmetric matrix. Throws NotSymmetric
/// when the input is asymmetric beyond 1e-10.
double fiedler(const Matrix& l);

/// Disagreement functional: squared distance of x from consensus,
/// ||x - mean(x) 1||^2.
double lyapunov(std::span<const double> x);

/// Per-step metrics of one trial.
struct MetricsTrace {
    std::vector<double> v;    // disagreement V(k), k = 0..K
    std::vector<double> mean; // network mean
    std::vector<double> mse;  // mean over agents of (x_i - initial average)^2
    std::vector<long> events; // per-step negativity + guard + warn count
    std::vector<std::vector<double>> per_agent_sq_err; // optional, row per step
};

enum class BoundMode {
    paper_literal,          // fourth-moment constants 8*Lambda^2 and 7*sigma^4
    convention_consistent,  // 2*Lambda^2 and sigma^4 (matches E|h|^2 = Lambda)
};

/// Variance-bound constants. Infinite sums and sups are truncated at the
/// construction horizon; sum_alpha_sq carries the analytic power-law tail
/// as an interval, and m1_bar inherits it. Warnings flag truncations that
/// could not be certified (for instance a growth factor still above 1 at
/// the end of the horizon).
struct BoundConstants {
    BoundMode mode = BoundMode::convention_consistent;
    double c_l = 0.0;
    double c_m1 = 0.0;
    double c_m2 = 0.0;
    double lambda2 = 0.0;
    double norm_l_bar = 0.0;
    double sum_alpha_sq_lo = 0.0;
    double sum_alpha_sq_hi = 0.0;
    double m1_bar_lo = 0.0;
    double m1_bar_hi = 0.0;
    // time-varying extras (populated when built from a sequence)
    bool time_varying = false;
    double alpha_window_ratio = 0.0; // sup_m alpha(mL)/alpha((m+1)L)
    double m_l = 0.0;
    double m2_bar = 0.0;
    std::vector<std::string> warnings;
};

/// Constants for a static topology.
BoundConstants bound_constants(const ChannelModel& model, const PhysicalTopology& topo,
                               const StepsizeSchedule& schedule,
                               std::span<const double> x0, BoundMode mode, long horizon);

/// Constants for a time-varying sequence (adds the window-product terms).
BoundConstants bound_constants(const ChannelModel& model, const TopologySequence& seq,
                               const StepsizeSchedule& schedule,
                               std::span<const double> x0, BoundMode mode, long horizon);

/// One line of a Monte Carlo moment report.
struct MomentEntry {
    std::string name;
    double empirical = 0.0;
    double expected = 0.0;
    double std_error = 0.0;
    double z = 0.0;        // |empirical - expected| / std_error
    double rel_err = 0.0;  // |empirical - expected| / max(1e-300, |expected|)
    bool pass = false;
};

struct MomentReport {
    long draws = 0;
    std::vector<MomentEntry> entries;
    bool all_pass() const;
    const MomentEntry& find(const std::string& name) const;
};

/// Freeze the states and draw M rounds; report empirical means of the
/// per-round noise v_i, the received power against its closed-form
/// conditional mean, the realized weights against abar, the slot-pairing
/// second moment, the fading product moment, and the noise-power
/// variance against both bound modes. Gates are 3 standard errors.
MomentReport estimate_conditional_moments(const ChannelModel& model,
                                          const PhysicalTopology& topo,
                                          std::span<const double> x, long draws, Stream& rng);

} // namespace oac
