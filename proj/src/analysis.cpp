#include "oac/analysis.hpp"

#include "oac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace oac {

LaplacianSet expected_laplacian(const ChannelModel& model, const PhysicalTopology& topo) {
    const int n = model.n_agents();
    if (topo.n_agents() != n) throw ConfigError("expected_laplacian: dimension mismatch");

    LaplacianSet set;
    set.a_bar = Matrix(n, n);
    set.degree.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j : topo.neighbors(i)) {
            set.a_bar(i, j) = model.abar(i, j);
            set.degree[i] += set.a_bar(i, j);
        }
    set.l_bar = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        set.l_bar(i, i) = set.degree[i];
        for (int j = 0; j < n; ++j)
            if (j != i) set.l_bar(i, j) = -set.a_bar(i, j);
    }
    const auto eig = symmetric_eigenvalues(set.l_bar);
    set.lambda2 = n >= 2 ? eig[1] : 0.0;
    set.norm2 = std::max(std::abs(eig.front()), std::abs(eig.back()));
    return set;
}

Matrix realized_weight_matrix(const ChannelModel& model, const RoundDraw& draw) {
    const int n = draw.n;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j : draw.active.neighbors(i))
            if (draw.gamma_product(i, j))
                a(i, j) = model.rho * std::norm(draw.h_at(i, j));
    return a;
}

double fiedler(const Matrix& l) {
    if (l.rows() != l.cols() || !l.is_symmetric(1e-10))
        throw NotSymmetric("fiedler needs a symmetric matrix");
    if (l.rows() < 2) return 0.0;
    return symmetric_eigenvalues(l)[1];
}

double lyapunov(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s;
}

namespace {

struct ModeFactors {
    double fourth_moment; // E|h|^4 = factor * Lambda^2
    double noise_var;     // E[(|n|^2 - sigma^2)^2] = factor * sigma^4
};

ModeFactors factors_for(BoundMode mode) {
    if (mode == BoundMode::paper_literal) return {8.0, 7.0};
    return {2.0, 1.0};
}

// C_L, C_M1, C_M2 on a given edge set.
void base_constants(const ChannelModel& model, const PhysicalTopology& topo, BoundMode mode,
                    double max_x0, BoundConstants& out) {
    const auto f = factors_for(mode);
    const int n = model.n_agents();
    out.c_l = 0.0;
    out.c_m1 = 0.0;
    out.c_m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double m2_row = 0.0;
        for (int j : topo.neighbors(i)) {
            const double gb = model.gamma_bar(i, j);
            const double lam = model.lambda(i, j);
            const double abar = model.abar(i, j);
            out.c_l += f.fourth_moment * lam * lam * model.rho * model.rho * gb - abar * abar;
            m2_row += 0.5 * model.rho * lam * model.sigma2[i] * gb;
            for (int l : topo.neighbors(i)) {
                if (l == j) continue;
                out.c_m1 += 0.5 * model.rho * model.rho * lam * model.lambda(i, l) * gb *
                            model.gamma_bar(i, l);
            }
        }
        out.c_m2 += f.noise_var * model.sigma2[i] * model.sigma2[i] + 2.0 * m2_row * max_x0;
    }
}

double norm_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

} // namespace

BoundConstants bound_constants(const ChannelModel& model, const PhysicalTopology& topo,
                               const StepsizeSchedule& schedule, std::span<const double> x0,
                               BoundMode mode, long horizon) {
    if (horizon < 1) throw ConfigError("bound horizon must be >= 1");
    BoundConstants out;
    out.mode = mode;
    const double max_x0 = x0.empty() ? 0.0 : *std::max_element(x0.begin(), x0.end());
    base_constants(model, topo, mode, max_x0, out);

    const LaplacianSet lap = expected_laplacian(model, topo);
    out.lambda2 = lap.lambda2;
    out.norm_l_bar = lap.norm2;

    double s2 = 0.0;
    for (long t = 0; t < horizon; ++t) {
        const double a = schedule.alpha(t);
        s2 += a * a;
    }
    out.sum_alpha_sq_lo = s2;
    if (const auto tail = schedule.alpha_sq_tail(horizon)) {
        out.sum_alpha_sq_hi = s2 + *tail;
        if (!std::isfinite(*tail))
            out.warnings.push_back("sum alpha^2 diverges for this schedule");
    } else {
        out.sum_alpha_sq_hi = s2;
        out.warnings.push_back("explicit schedule: sum alpha^2 tail unknown, horizon-limited");
    }

    // growth factor of the second-moment recursion
    const double quad = out.norm_l_bar * out.norm_l_bar + out.c_l + out.c_m1;
    double prefix = 1.0, sup_prefix = 1.0;   // sup_l of product from step 0
    double ending = 1.0, sup_window = 1.0;   // sup over contiguous products
    double last_factor = 1.0;
    for (long t = 0; t < horizon; ++t) {
        const double a = schedule.alpha(t);
        const double f = 1.0 - 2.0 * a * out.lambda2 + a * a * quad;
        last_factor = f;
        prefix *= f;
        sup_prefix = std::max(sup_prefix, prefix);
        ending = std::max(f, ending * f);
        sup_window = std::max(sup_window, ending);
    }
    if (last_factor > 1.0 + 1e-15)
        out.warnings.push_back(
            "horizon too small to bound the moment products: growth factor still above 1 "
            "at the end of the horizon");

    const double xx = norm_sq(x0);
    out.m1_bar_lo =
        (out.c_l + out.c_m1) * (sup_prefix * xx + sup_window * out.c_m2 * out.sum_alpha_sq_lo) +
        out.c_m2;
    out.m1_bar_hi =
        (out.c_l + out.c_m1) * (sup_prefix * xx + sup_window * out.c_m2 * out.sum_alpha_sq_hi) +
        out.c_m2;
    return out;
}

BoundConstants bound_constants(const ChannelModel& model, const TopologySequence& seq,
                               const StepsizeSchedule& schedule, std::span<const double> x0,
                               BoundMode mode, long horizon) {
    BoundConstants out = bound_constants(model, seq.base(), schedule, x0, mode, horizon);
    out.time_varying = true;

    const long window = seq.window();
    const long steps = horizon - horizon % window;
    const long n_windows = steps / window;
    if (n_windows < 1) throw ConfigError("bound horizon shorter than one topology window");

    // per-step expected Laplacians; reuse the base-graph one for event-free steps
    const LaplacianSet base_lap = expected_laplacian(model, seq.base());
    std::vector<double> alpha(steps), alpha_sq(steps), norm_k(steps);
    std::vector<Matrix> l_bar_k(steps);
    double sup_norm = 0.0;
    for (long k = 0; k < steps; ++k) {
        alpha[k] = schedule.alpha(k);
        alpha_sq[k] = alpha[k] * alpha[k];
        if (seq.events().count(k) == 0) {
            l_bar_k[k] = base_lap.l_bar;
            norm_k[k] = base_lap.norm2;
        } else {
            const LaplacianSet lk = expected_laplacian(model, active_topology(seq, k));
            l_bar_k[k] = lk.l_bar;
            norm_k[k] = lk.norm2;
        }
        sup_norm = std::max(sup_norm, norm_k[k]);
    }

    // alpha(mL) <= C alpha((m+1)L)
    double c_ratio = 1.0;
    for (long m = 0; m + 1 < n_windows; ++m)
        c_ratio = std::max(c_ratio, alpha[m * window] / alpha[(m + 1) * window]);
    out.alpha_window_ratio = c_ratio;

    const double pow2 = std::pow(2.0, 2.0 * static_cast<double>(window));
    out.m_l = c_ratio * c_ratio * (pow2 - 2.0 * static_cast<double>(window) - 1.0) *
              std::pow(std::max(sup_norm, 1.0), 2.0 * static_cast<double>(window));

    const double cc = out.c_l + out.c_m1;
    const double b1 = out.m_l + c_ratio * c_ratio * cc;

    // inf over aligned windows of lambda2 of the window-summed Laplacian;
    // event-free windows reuse window * lambda2(base)
    double lambda2_inf = std::numeric_limits<double>::infinity();
    for (long m = 0; m < n_windows; ++m) {
        bool event_free = true;
        for (long i = m * window; i < (m + 1) * window; ++i)
            if (seq.events().count(i)) event_free = false;
        if (event_free) {
            lambda2_inf = std::min(lambda2_inf, window * base_lap.lambda2);
            continue;
        }
        Matrix sum = l_bar_k[m * window];
        for (long i = m * window + 1; i < (m + 1) * window; ++i) sum += l_bar_k[i];
        lambda2_inf = std::min(lambda2_inf, symmetric_eigenvalues(sum)[1]);
    }

    // g(i): per-step factor of the norm recursion; >= 1 because L_bar has
    // a zero eigenvalue, so ||I - a L_bar|| = max(1, |1 - a lambda_max|)
    std::vector<double> g(steps);
    for (long i = 0; i < steps; ++i) {
        const double nrm = std::max(1.0, std::abs(1.0 - alpha[i] * norm_k[i]));
        g[i] = nrm * nrm + alpha_sq[i] * cc;
    }
    std::vector<double> g_prefix(steps + 1, 1.0); // g_prefix[k] = prod_{i<k} g(i)
    for (long i = 0; i < steps; ++i) g_prefix[i + 1] = g_prefix[i] * g[i];

    // window factor of the windowed recursion; the last entry is never
    // consumed (products stop one window earlier), so no alpha is needed
    // beyond the horizon
    std::vector<double> q(n_windows, 1.0);
    for (long j = 0; j + 1 < n_windows; ++j) {
        const double a = alpha[(j + 1) * window];
        q[j] = 1.0 - 2.0 * lambda2_inf * a + a * a * b1;
    }

    // T(l) = sum over window l of alpha^2(i) / g_prefix(i), so the inner
    // weighted sum below is sum_l Phi2(m-1:l) * C_M2 * G(mL) * T(l).
    std::vector<double> t_win(n_windows, 0.0);
    for (long l = 0; l < n_windows; ++l)
        for (long i = l * window; i < (l + 1) * window; ++i)
            t_win[l] += alpha_sq[i] / g_prefix[i];

    const double xx = norm_sq(x0);
    double sup_total = 0.0;
    long arg_sup = 0;
    for (long m = 0; m < n_windows; ++m) {
        // products of g over [mL, mL+k0); g >= 1 so k0 = L-1 dominates
        double p1 = 1.0;
        for (long i = m * window; i < m * window + window - 1; ++i) p1 *= g[i];

        double phi2 = 1.0; // Phi2(m-1 : l), built backward from l = m-1
        double weighted = 0.0;
        for (long l = m - 1; l >= 0; --l) {
            phi2 *= q[l];
            weighted += phi2 * out.c_m2 * g_prefix[m * window] * t_win[l];
        }
        const double phi2_full = m == 0 ? 1.0 : phi2;

        double tail = 0.0, tail_sup = 0.0; // sup over k0 of the trailing sum
        for (long i = m * window; i < m * window + window - 1; ++i) {
            tail += alpha_sq[i] * out.c_m2 * g_prefix[m * window + window - 1] / g_prefix[i];
            tail_sup = std::max(tail_sup, tail);
        }

        const double total = p1 * (phi2_full * xx + weighted) + tail_sup;
        if (total > sup_total) {
            sup_total = total;
            arg_sup = m;
        }
    }
    out.m2_bar = cc * sup_total + out.c_m2;
    if (arg_sup == n_windows - 1 && n_windows > 1)
        out.warnings.push_back(
            "time-varying bound sup attained at the last window; value may be horizon-limited");
    if (!std::isfinite(out.m2_bar))
        out.warnings.push_back(
            "time-varying bound overflowed; the norm-recursion products diverge at this "
            "horizon");
    return out;
}

bool MomentReport::all_pass() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const MomentEntry& e) { return e.pass; });
}

const MomentEntry& MomentReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw ConfigError("no moment entry named " + name);
}

namespace {

struct Welford {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double v) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double std_error() const { return n > 0 ? std::sqrt(variance() / n) : 0.0; }
};

MomentEntry make_entry(std::string name, const Welford& acc, double expected,
                       bool pass_means_reject = false) {
    MomentEntry e;
    e.name = std::move(name);
    e.empirical = acc.mean;
    e.expected = expected;
    e.std_error = acc.std_error();
    e.z = e.std_error > 0.0 ? std::abs(e.empirical - e.expected) / e.std_error
                            : (e.empirical == e.expected ? 0.0 : 1e300);
    e.rel_err = std::abs(e.empirical - e.expected) / std::max(1e-300, std::abs(expected));
    e.pass = pass_means_reject ? e.z > 3.0 : e.z <= 3.0;
    return e;
}

} // namespace

MomentReport estimate_conditional_moments(const ChannelModel& model,
                                          const PhysicalTopology& topo,
                                          std::span<const double> x, long draws, Stream& rng) {
    if (draws < 10000) throw ConfigError("moment estimation needs at least 1e4 draws");
    const int n = model.n_agents();

    std::vector<Welford> v_acc(n), power_acc(n), y1_acc(n), y2_acc(n), noise_var_acc(n);
    std::vector<std::pair<int, int>> edges = topo.edges();
    std::vector<Welford> gamma2_acc(edges.size()), a_acc(edges.size());
    // one fading-product probe per agent with at least two neighbors
    std::vector<Welford> hprod_acc(n);

    RoundDraw draw;
    for (long m = 0; m < draws; ++m) {
        draw_round_into(model, topo, rng, draw);
        for (int i = 0; i < n; ++i) {
            const SignalBreakdown b = received_power_expanded(model, draw, x, i);
            power_acc[i].add(b.power);
            v_acc[i].add(b.noise_sq - model.sigma2[i] + b.cross_fading + b.cross_noise);
            y1_acc[i].add(b.cross_fading);
            y2_acc[i].add(0.5 * b.cross_noise);
            const double centered = std::norm(draw.noise[i]) - model.sigma2[i];
            noise_var_acc[i].add(centered * centered);
            const auto& nbrs = topo.neighbors(i);
            if (nbrs.size() >= 2) {
                const auto& hj = draw.h_at(i, nbrs[0]);
                const auto& hl = draw.h_at(i, nbrs[1]);
                const double prod = hj.real() * hl.real() + hj.imag() * hl.imag();
                hprod_acc[i].add(prod * prod);
            }
        }
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto [i, j] = edges[e];
            const int g = draw.gamma_product(i, j);
            gamma2_acc[e].add(static_cast<double>(g));
            a_acc[e].add(g ? model.rho * std::norm(draw.h_at(i, j)) : 0.0);
        }
    }

    MomentReport report;
    report.draws = draws;
    for (int i = 0; i < n; ++i) {
        const std::string tag = std::to_string(i);
        report.entries.push_back(make_entry("v_mean[" + tag + "]", v_acc[i], 0.0));
        report.entries.push_back(make_entry("power_mean[" + tag + "]", power_acc[i],
                                            conditional_mean_power(model, topo, x, i)));
        report.entries.push_back(make_entry("cross_fading_mean[" + tag + "]", y1_acc[i], 0.0));
        report.entries.push_back(make_entry("cross_noise_mean[" + tag + "]", y2_acc[i], 0.0));
        const double s4 = model.sigma2[i] * model.sigma2[i];
        report.entries.push_back(
            make_entry("noise_power_var[" + tag + "]", noise_var_acc[i], s4));
        if (s4 > 0.0)
            report.entries.push_back(make_entry(
                "noise_power_var_rejects_paper_literal[" + tag + "]", noise_var_acc[i],
                7.0 * s4, /*pass_means_reject=*/true));
        const auto& nbrs = topo.neighbors(i);
        if (nbrs.size() >= 2) {
            const double expected =
                0.5 * model.lambda(i, nbrs[0]) * model.lambda(i, nbrs[1]);
            report.entries.push_back(
                make_entry("fading_product_moment[" + tag + "]", hprod_acc[i], expected));
        }
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [i, j] = edges[e];
        const std::string tag = std::to_string(i) + "," + std::to_string(j);
        report.entries.push_back(
            make_entry("gamma_sq_mean[" + tag + "]", gamma2_acc[e], model.gamma_bar(i, j)));
        report.entries.push_back(
            make_entry("weight_mean[" + tag + "]", a_acc[e], model.abar(i, j)));
    }
    return report;
}

} // namespace oac
