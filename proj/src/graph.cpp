#include "oac/graph.hpp"

#include "oac/errors.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace oac {

PhysicalTopology::PhysicalTopology(int n_agents) : n_(n_agents), adj_(n_agents) {
    if (n_agents <= 0) throw ConfigError("topology needs a positive agent count");
}

PhysicalTopology PhysicalTopology::complete(int n) {
    PhysicalTopology t(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) t.add_edge(i, j);
    return t;
}

PhysicalTopology PhysicalTopology::ring(int n) {
    PhysicalTopology t(n);
    if (n == 1) return t;
    for (int i = 0; i < n; ++i) t.add_edge(i, (i + 1) % n);
    return t;
}

PhysicalTopology PhysicalTopology::path(int n) {
    PhysicalTopology t(n);
    for (int i = 0; i + 1 < n; ++i) t.add_edge(i, i + 1);
    return t;
}

PhysicalTopology PhysicalTopology::bundled50() {
    // Dense enough that sampled windows certify reliably: each agent links
    // to its six nearest ring neighbors per side plus two long-chord
    // families. 400 edges, regular degree 16.
    PhysicalTopology t(50);
    for (int i = 0; i < 50; ++i) {
        for (int d = 1; d <= 6; ++d) t.add_edge(i, (i + d) % 50);
        t.add_edge(i, (i + 17) % 50);
        t.add_edge(i, (i + 23) % 50);
    }
    return t;
}

void PhysicalTopology::check_agent(int i) const {
    if (i < 0 || i >= n_)
        throw ConfigError("agent index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(n_) + ")");
}

void PhysicalTopology::add_edge(int i, int j) {
    check_agent(i);
    check_agent(j);
    if (i == j) throw ConfigError("self-loops are not allowed");
    auto& ni = adj_[i];
    auto it = std::lower_bound(ni.begin(), ni.end(), j);
    if (it != ni.end() && *it == j) return; // already present
    ni.insert(it, j);
    auto& nj = adj_[j];
    nj.insert(std::lower_bound(nj.begin(), nj.end(), i), i);
    ++edge_count_;
}

void PhysicalTopology::remove_edge(int i, int j) {
    check_agent(i);
    check_agent(j);
    auto& ni = adj_[i];
    auto it = std::lower_bound(ni.begin(), ni.end(), j);
    if (it == ni.end() || *it != j) return;
    ni.erase(it);
    auto& nj = adj_[j];
    nj.erase(std::lower_bound(nj.begin(), nj.end(), i));
    --edge_count_;
}

bool PhysicalTopology::has_edge(int i, int j) const {
    if (i < 0 || i >= n_ || j < 0 || j >= n_ || i == j) return false;
    const auto& ni = adj_[i];
    return std::binary_search(ni.begin(), ni.end(), j);
}

std::vector<std::pair<int, int>> PhysicalTopology::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(edge_count_);
    for (int i = 0; i < n_; ++i)
        for (int j : adj_[i])
            if (j > i) out.emplace_back(i, j);
    return out;
}

bool PhysicalTopology::connected() const {
    if (n_ == 0) return false;
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj_[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == n_;
}

Matrix PhysicalTopology::laplacian() const {
    Matrix l(n_, n_);
    for (int i = 0; i < n_; ++i) {
        l(i, i) = static_cast<double>(adj_[i].size());
        for (int j : adj_[i]) l(i, j) = -1.0;
    }
    return l;
}

TopologySequence TopologySequence::static_topology(PhysicalTopology base) {
    TopologySequence s;
    s.base_ = std::move(base);
    s.window_ = 1;
    s.horizon_ = 0;
    return s;
}

TopologySequence::TopologySequence(PhysicalTopology base, long window, long horizon)
    : base_(std::move(base)), window_(window), horizon_(horizon) {
    if (window < 1) throw ConfigError("window length must be >= 1");
    if (horizon < 0) throw ConfigError("horizon must be >= 0");
}

void TopologySequence::set_event(long k, TopologyEvent ev) {
    for (int i : ev.failed_nodes)
        if (i < 0 || i >= base_.n_agents())
            throw ConfigError("failed node out of range at step " + std::to_string(k));
    std::sort(ev.failed_nodes.begin(), ev.failed_nodes.end());
    events_[k] = std::move(ev);
}

void TopologySequence::clear_event(long k) { events_.erase(k); }

bool TopologySequence::node_failed(long k, int i) const {
    auto it = events_.find(k);
    if (it == events_.end()) return false;
    const auto& f = it->second.failed_nodes;
    return std::binary_search(f.begin(), f.end(), i);
}

PhysicalTopology active_topology(const TopologySequence& seq, long k) {
    const auto& events = seq.events();
    auto it = events.find(k);
    if (it == events.end()) return seq.base();

    const TopologyEvent& ev = it->second;
    PhysicalTopology g = seq.base();
    for (const auto& [i, j] : ev.failed_links) {
        g.remove_edge(i, j);
    }
    for (int i : ev.failed_nodes) {
        // copy: remove_edge mutates the adjacency we'd be iterating
        const std::vector<int> nbrs = g.neighbors(i);
        for (int j : nbrs) g.remove_edge(i, j);
    }
    return g;
}

ConnectivityCertificate is_jointly_connected(const TopologySequence& seq,
                                             long window_start, long window_len) {
    const int n = seq.base().n_agents();
    PhysicalTopology joint(n);
    for (long k = window_start; k < window_start + window_len; ++k) {
        const PhysicalTopology g = active_topology(seq, k);
        for (const auto& [i, j] : g.edges()) joint.add_edge(i, j);
    }

    ConnectivityCertificate cert;
    cert.window_start = window_start;
    cert.window_len = window_len;
    if (n == 1) {
        cert.fiedler_value = 0.0;
        cert.connected = true;
        return cert;
    }
    const auto eig = symmetric_eigenvalues(joint.laplacian());
    cert.fiedler_value = eig[1];
    cert.connected = cert.fiedler_value > kConnectivityTol;

    if (cert.connected != joint.connected())
        throw std::logic_error("spectral and BFS connectivity verdicts disagree");
    return cert;
}

namespace {

// Cheap connectivity pre-screen of one window's union graph; the
// spectral certificate runs only on windows that pass this.
bool union_connected_bfs(const TopologySequence& seq, long window_start, long window_len) {
    const int n = seq.base().n_agents();
    PhysicalTopology joint(n);
    for (long k = window_start; k < window_start + window_len; ++k)
        for (const auto& [i, j] : active_topology(seq, k).edges()) joint.add_edge(i, j);
    return joint.connected();
}

// Picked-set sampling for one aligned window [w*L, (w+1)*L). Closing-step
// rule: agents unseen so far in the window must transmit, plus one
// uniformly chosen agent from the rest (when the rest is non-empty).
void sample_window(const PhysicalTopology& base, long window_start, long window_len,
                   double q, long horizon, Stream& rng, TopologySequence& seq) {
    const int n = base.n_agents();
    std::vector<char> picked_before(n, 0);
    for (long k = window_start; k < std::min(window_start + window_len, horizon); ++k) {
        const bool closing = (k + 1) % window_len == 0;
        std::vector<int> failed;
        if (!closing) {
            for (int i = 0; i < n; ++i) {
                if (rng.bernoulli(q))
                    picked_before[i] = 1;
                else
                    failed.push_back(i);
            }
        } else {
            std::vector<int> already;
            for (int i = 0; i < n; ++i)
                if (picked_before[i]) already.push_back(i);
            if (!already.empty()) {
                const auto extra =
                    already[static_cast<std::size_t>(rng.uniform01() * already.size())];
                for (int i : already)
                    if (i != extra) failed.push_back(i);
            }
        }
        TopologyEvent ev;
        ev.failed_nodes = std::move(failed);
        seq.set_event(k, std::move(ev));
    }
}

} // namespace

TopologySequence generate_sampled_sequence(const PhysicalTopology& base, long window,
                                           double q, long horizon, Stream& rng) {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("pick probability q must be in (0, 1)");
    if (window < 1) throw ConfigError("window length must be >= 1");
    if (!base.connected()) throw BaseDisconnected("sampled sequence needs a connected base graph");

    constexpr int kRetryCap = 100;
    TopologySequence seq(base, window, horizon);

    const long full_windows = horizon / window;
    for (long w = 0; w < full_windows; ++w) {
        const long start = w * window;
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt >= kRetryCap)
                throw CertificationFailed("window at step " + std::to_string(start) +
                                          " failed joint-connectivity after " +
                                          std::to_string(kRetryCap) + " attempts");
            sample_window(base, start, window, q, horizon, rng, seq);
            if (!union_connected_bfs(seq, start, window)) continue;
            if (is_jointly_connected(seq, start, window).connected) break;
        }
    }
    // trailing partial window, if any: plain sampling, nothing to certify
    if (full_windows * window < horizon)
        sample_window(base, full_windows * window, window, q, horizon, rng, seq);
    return seq;
}

} // namespace oac
