#pragma once

#include "oac/matrix.hpp"
#include "oac/rng.hpp"

#include <map>
#include <utility>
#include <vector>

namespace oac {

/// Undirected physical communication graph. Edges are unordered pairs,
/// self-loops are rejected, and the potential neighbor set of agent i is
/// neighbors(i).
class PhysicalTopology {
public:
    PhysicalTopology() = default;
    explicit PhysicalTopology(int n_agents);

    static PhysicalTopology complete(int n);
    static PhysicalTopology ring(int n);
    static PhysicalTopology path(int n);
    /// The repo's default 50-agent base graph: six nearest ring neighbors
    /// per side plus two long-chord families. Deterministic, connected,
    /// regular degree 16.
    static PhysicalTopology bundled50();

    int n_agents() const { return n_; }
    std::size_t edge_count() const { return edge_count_; }

    void add_edge(int i, int j); // idempotent; throws on self-loop / range
    void remove_edge(int i, int j);
    bool has_edge(int i, int j) const;

    /// Sorted potential-neighbor list of agent i.
    const std::vector<int>& neighbors(int i) const { return adj_[i]; }

    /// Edge list with i < j, lexicographically sorted.
    std::vector<std::pair<int, int>> edges() const;

    bool connected() const; // breadth-first search

    /// Unweighted graph Laplacian D - A.
    Matrix laplacian() const;

    bool operator==(const PhysicalTopology& o) const {
        return n_ == o.n_ && adj_ == o.adj_;
    }

private:
    void check_agent(int i) const;

    int n_ = 0;
    std::size_t edge_count_ = 0;
    std::vector<std::vector<int>> adj_;
};

/// One step's failure record: nodes that are down and links that are down.
struct TopologyEvent {
    std::vector<int> failed_nodes;
    std::vector<std::pair<int, int>> failed_links;
};

/// A time-varying topology: a base graph plus per-step failure events.
/// Steps without an event use the full base graph. Immutable once built,
/// so sequences can be shared across concurrent trial workers.
class TopologySequence {
public:
    TopologySequence() = default;

    static TopologySequence static_topology(PhysicalTopology base);
    TopologySequence(PhysicalTopology base, long window, long horizon);

    const PhysicalTopology& base() const { return base_; }
    long window() const { return window_; }
    long horizon() const { return horizon_; }

    void set_event(long k, TopologyEvent ev);
    void clear_event(long k);
    const std::map<long, TopologyEvent>& events() const { return events_; }

    bool node_failed(long k, int i) const;

private:
    PhysicalTopology base_;
    long window_ = 1;
    long horizon_ = 0; // 0 means unbounded (static)
    std::map<long, TopologyEvent> events_;
};

/// Joint-connectivity verdict for one window of a sequence.
struct ConnectivityCertificate {
    long window_start = 0;
    long window_len = 0;
    double fiedler_value = 0.0;
    bool connected = false;
};

/// Smallest nonzero Fiedler value any connected graph of practical size
/// can have is orders of magnitude above this.
inline constexpr double kConnectivityTol = 1e-9;

/// Graph in effect at step k: base edges minus failed links minus all
/// edges incident to failed nodes. Node failure dominates link state.
PhysicalTopology active_topology(const TopologySequence& seq, long k);

/// Union the active graphs over [window_start, window_start + window_len),
/// then decide connectivity twice: spectrally (Fiedler value of the
/// unweighted union Laplacian) and by breadth-first search. The two
/// verdicts disagreeing is a bug, not a result.
ConnectivityCertificate is_jointly_connected(const TopologySequence& seq,
                                             long window_start, long window_len);

/// Build a sampled time-varying sequence: at steps not closing a window,
/// each agent is picked independently with probability q and the active
/// graph is the subgraph induced by the picked set; at window-closing
/// steps (k = n*window - 1) the picked set is every agent not picked
/// earlier in the window plus one uniformly chosen other agent. Each
/// aligned window is certified jointly connected before return, with up
/// to 100 regenerations per window.
TopologySequence generate_sampled_sequence(const PhysicalTopology& base, long window,
                                           double q, long horizon, Stream& rng);

} // namespace oac
