#include "oac/channel.hpp"

#include "oac/errors.hpp"

#include <cmath>
#include <string>

namespace oac {

ChannelModel ChannelModel::uniform(int n, double lambda_value, double sigma2_value,
                                   double rho_value, double p_value) {
    ChannelModel m;
    m.lambda = Matrix(n, n, lambda_value);
    for (int i = 0; i < n; ++i) m.lambda(i, i) = 0.0;
    m.sigma2.assign(n, sigma2_value);
    m.rho = rho_value;
    m.p.assign(n, p_value);
    m.validate();
    return m;
}

void ChannelModel::validate() const {
    const int n = n_agents();
    if (n <= 0) throw ConfigError("channel model needs at least one agent");
    if (lambda.rows() != static_cast<std::size_t>(n) ||
        lambda.cols() != static_cast<std::size_t>(n))
        throw ConfigError("lambda must be n x n");
    if (!lambda.is_symmetric(0.0)) throw ConfigError("lambda must be symmetric");
    if (sigma2.size() != static_cast<std::size_t>(n))
        throw ConfigError("sigma2 must have one entry per agent");
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    for (int i = 0; i < n; ++i) {
        if (!(p[i] > 0.0 && p[i] < 1.0))
            throw ConfigError("slot probability p[" + std::to_string(i) +
                              "] must be strictly inside (0, 1)");
        if (sigma2[i] < 0.0)
            throw ConfigError("noise power sigma2[" + std::to_string(i) +
                              "] must be nonnegative");
        for (int j = 0; j < n; ++j)
            if (lambda(i, j) < 0.0) throw ConfigError("fading variances must be nonnegative");
    }
}

void draw_round_into(const ChannelModel& model, const PhysicalTopology& topo,
                     Stream& rng, RoundDraw& out) {
    const int n = model.n_agents();
    if (topo.n_agents() != n)
        throw ConfigError("channel model is for " + std::to_string(n) +
                          " agents, topology has " + std::to_string(topo.n_agents()));

    out.n = n;
    out.gamma.resize(n);
    out.h.resize(static_cast<std::size_t>(n) * n);
    out.noise.resize(n);
    out.active = topo;

    for (int i = 0; i < n; ++i) out.gamma[i] = rng.bernoulli(model.p[i]) ? 1 : 0;
    for (int i = 0; i < n; ++i)
        for (int j : topo.neighbors(i))
            out.h[static_cast<std::size_t>(i) * n + j] = rng.complex_gaussian(model.lambda(i, j));
    for (int i = 0; i < n; ++i) out.noise[i] = rng.complex_gaussian(model.sigma2[i]);
}

RoundDraw draw_round(const ChannelModel& model, const PhysicalTopology& topo, Stream& rng) {
    RoundDraw d;
    draw_round_into(model, topo, rng, d);
    return d;
}

double transmit_value(double x, NegativityPolicy policy, long* warn_counter) {
    if (x >= 0.0) return x;
    switch (policy) {
    case NegativityPolicy::abort_run:
        throw NegativeStateUnderAbortPolicy("negative state in transmission under abort policy");
    case NegativityPolicy::offset_warn:
        if (warn_counter) ++*warn_counter;
        return 0.0;
    case NegativityPolicy::clamp:
    default:
        return 0.0;
    }
}

double received_power_direct(const ChannelModel& model, const RoundDraw& draw,
                             std::span<const double> x, int i, NegativityPolicy policy,
                             long* warn_counter) {
    std::complex<double> y = 0.0;
    for (int j : draw.active.neighbors(i)) {
        if (!draw.gamma_product(i, j)) continue;
        const double xt = transmit_value(x[j], policy, warn_counter);
        y += draw.h_at(i, j) * std::sqrt(model.rho * xt);
    }
    y += draw.noise[i];
    return std::norm(y);
}

SignalBreakdown received_power_expanded(const ChannelModel& model, const RoundDraw& draw,
                                        std::span<const double> x, int i,
                                        NegativityPolicy policy, long* warn_counter) {
    SignalBreakdown b;
    const auto& nbrs = draw.active.neighbors(i);
    const std::complex<double> ni = draw.noise[i];

    for (int j : nbrs) {
        if (!draw.gamma_product(i, j)) continue;
        const double xj = transmit_value(x[j], policy, warn_counter);
        const std::complex<double>& hij = draw.h_at(i, j);
        b.linear_term += model.rho * xj * std::norm(hij);
        b.cross_noise += 2.0 * std::sqrt(model.rho * xj) *
                         (hij.real() * ni.real() + hij.imag() * ni.imag());
        for (int l : nbrs) {
            if (l == j || !draw.gamma_product(i, l)) continue;
            const double xl = transmit_value(x[l], policy, nullptr);
            const std::complex<double>& hil = draw.h_at(i, l);
            b.cross_fading += model.rho * std::sqrt(xj * xl) *
                              (hij.real() * hil.real() + hij.imag() * hil.imag());
        }
    }
    b.noise_sq = std::norm(ni);
    b.power = b.linear_term + b.noise_sq + b.cross_fading + b.cross_noise;
    return b;
}

double conditional_mean_power(const ChannelModel& model, const PhysicalTopology& topo,
                              std::span<const double> x, int i) {
    double s = model.sigma2[i];
    for (int j : topo.neighbors(i)) s += model.abar(i, j) * x[j];
    return s;
}

} // namespace oac
