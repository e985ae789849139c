#pragma once

// k-server generalization. Waiting phases keep one counter table per server
// (each fed as if its server were alone); the phase ends when any server's
// major element saturates. The serving phase plans key edges and the
// traversal set with the trigger server's counters, then executes with the
// active-cover rule: all servers with an unblocked path to the next key
// edge's top move simultaneously at equal speed, the first to arrive
// crosses, tours the preemption subtree below, and returns to the key edge's
// base. Servers may end up parked in the middle of an edge.

#include "osd/ps.hpp"

#include <numeric>

namespace osd {

struct NoServers : std::runtime_error {
    NoServers() : std::runtime_error("active cover needs at least one server") {}
};
struct UnknownServer : std::runtime_error {
    explicit UnknownServer(int s) : std::runtime_error("unknown server " + std::to_string(s)) {}
};

// A point on the tree: a node or a point on an edge at `offset` from the
// child endpoint.
struct TreePoint {
    int node = -1;
    int edge_child = -1;
    Rat offset;

    static TreePoint at(int v) { return {v, -1, Rat(0)}; }
    static TreePoint of(const ServerPos& p) { return {p.node, p.edge_child, p.offset}; }
    ServerPos as_pos(const Hst& t) const {
        if (node >= 0) return ServerPos::at(node);
        if (offset == 0) return ServerPos::at(edge_child);
        if (offset == t.edge_len(edge_child)) return ServerPos::at(t.parent[edge_child]);
        return ServerPos::on_edge(edge_child, offset);
    }
    bool at_node() const { return node >= 0; }
    bool operator==(const TreePoint&) const = default;
};

namespace detail {

// Distance from a tree point to a node.
inline Rat point_node_dist(const Hst& t, const TreePoint& p, int target) {
    if (p.at_node()) return t.dist(p.node, target);
    int child = p.edge_child, top = t.parent[p.edge_child];
    if (t.is_ancestor(child, target)) return p.offset + t.dist(child, target);
    return (t.edge_len(child) - p.offset) + t.dist(top, target);
}

// Next node on the path from p toward target, plus its distance from p.
inline std::pair<int, Rat> next_node_toward(const Hst& t, const TreePoint& p, int target) {
    if (!p.at_node()) {
        int child = p.edge_child, top = t.parent[p.edge_child];
        if (t.is_ancestor(child, target) && target != top)
            return {child, p.offset};
        return {top, t.edge_len(child) - p.offset};
    }
    if (p.node == target) return {target, Rat(0)};
    auto path = t.path_edges(p.node, target);
    int first = path.front();
    // Moving up or down? The first path edge's child endpoint tells us.
    if (first == p.node) return {t.parent[p.node], t.edge_len(first)};
    return {first, t.edge_len(first)};
}

// Advance a point a given distance toward target (distance must not
// overshoot the next node).
inline TreePoint advance_point(const Hst& t, const TreePoint& p, int target, const Rat& dist) {
    if (dist == 0) return p;
    auto [nxt, gap] = next_node_toward(t, p, target);
    if (dist == gap) return TreePoint::at(nxt);
    // Stay on the edge between p and nxt.
    if (!p.at_node()) {
        int child = p.edge_child;
        bool toward_child = t.is_ancestor(child, target) && nxt == child;
        Rat off = toward_child ? p.offset - dist : p.offset + dist;
        return {-1, child, off};
    }
    // Leaving a node: the edge is (p.node up) or (down to nxt).
    if (nxt == t.parent[p.node]) return {-1, p.node, t.edge_len(p.node) - dist};
    return {-1, nxt, t.edge_len(nxt) - dist};
}

// Distance between two tree points.
inline Rat point_point_dist(const Hst& t, const TreePoint& p, const TreePoint& q) {
    if (q.at_node()) return point_node_dist(t, p, q.node);
    if (p.at_node()) return point_node_dist(t, q, p.node);
    if (p.edge_child == q.edge_child) return boost::multiprecision::abs(Rat(p.offset - q.offset));
    Rat via_child = point_node_dist(t, p, q.edge_child) + q.offset;
    Rat via_top =
        point_node_dist(t, p, t.parent[q.edge_child]) + (t.edge_len(q.edge_child) - q.offset);
    return std::min(via_child, via_top);
}

// True when q lies strictly inside the path from p to the node `target`.
inline bool blocks(const Hst& t, const TreePoint& p, const TreePoint& q, int target) {
    if (p == q) return false;
    Rat dp = point_node_dist(t, p, target);
    Rat dq = point_node_dist(t, q, target);
    if (dq >= dp) return false;
    return point_point_dist(t, p, q) + dq == dp;
}

// Record the real edges fully crossed while walking from `from` a given
// distance toward node `target`. Partial entries (a server parking mid-edge)
// do not count as traversals.
inline void note_leg_crossings(const Hst& t, TreePoint from, int target, Rat dist,
                               std::set<int>& traversed) {
    while (dist > 0 && !(from.at_node() && from.node == target)) {
        auto [nxt, gap] = next_node_toward(t, from, target);
        if (dist >= gap) {
            if (from.at_node()) {
                int edge = nxt == t.parent[from.node] ? from.node : nxt;
                if (gap == t.edge_len(edge)) traversed.insert(edge);
            }
            dist -= gap;
            from = TreePoint::at(nxt);
        } else {
            from = advance_point(t, from, target, dist);
            dist = 0;
        }
    }
}

}  // namespace detail

struct CoverMove {
    std::vector<Rat> moved;      // per-server distance
    int arriver = -1;
    std::vector<std::pair<TreePoint, TreePoint>> legs;  // per-server from/to
};

// Moves every active server at unit speed toward `target` until one arrives.
// A server is active when no other server lies strictly between it and the
// target (co-located servers: the lowest id leads). Activity is re-evaluated
// whenever a server reaches a node.
inline CoverMove active_cover_move(const Hst& t, std::vector<TreePoint>& pts, int target) {
    int k = static_cast<int>(pts.size());
    if (k == 0) throw NoServers();
    CoverMove out;
    out.moved.assign(k, Rat(0));
    for (int s = 0; s < k; ++s) out.legs.push_back({pts[s], pts[s]});

    auto active_set = [&]() {
        std::vector<bool> act(k, true);
        for (int s = 0; s < k; ++s) {
            for (int o = 0; o < k && act[s]; ++o) {
                if (o == s) continue;
                if (pts[o] == pts[s]) {
                    if (o < s) act[s] = false;
                } else if (detail::blocks(t, pts[s], pts[o], target)) {
                    act[s] = false;
                }
            }
        }
        return act;
    };

    while (true) {
        for (int s = 0; s < k; ++s)
            if (pts[s].at_node() && pts[s].node == target) {
                out.arriver = s;
                for (int i = 0; i < k; ++i) out.legs[i].second = pts[i];
                return out;
            }
        auto act = active_set();
        // Step: smallest distance at which an active server reaches a node.
        std::optional<Rat> step;
        for (int s = 0; s < k; ++s) {
            if (!act[s]) continue;
            auto [nxt, gap] = detail::next_node_toward(t, pts[s], target);
            (void)nxt;
            if (!step || gap < *step) step = gap;
        }
        if (!step) throw NoServers();  // nobody active: impossible with k >= 1
        for (int s = 0; s < k; ++s)
            if (act[s]) {
                pts[s] = detail::advance_point(t, pts[s], target, *step);
                out.moved[s] += *step;
            }
    }
}

struct KPhaseOutcome {
    Rat cost;
    std::vector<int> traversed_edges;  // fully crossed edges, sorted unique
    std::vector<std::string> moves;    // printable per-leg summary
};

// Executes a serving phase with k servers: visit key edges in DFS order
// (siblings by non-decreasing length), active-cover to each key edge's outer
// endpoint, have the arriver cross and tour the preemption subtree below,
// then return to the key edge's base and resume.
inline KPhaseOutcome serve_with_cover(CounterState& st, const ServicePlan& plan,
                                      CheckLog* checks) {
    const Hst& t = *st.tree;
    const Scope& scope = plan.scope;
    KPhaseOutcome out;
    std::set<int> traversed;

    std::vector<TreePoint> pts;
    for (const auto& sv : st.servers) pts.push_back(TreePoint::of(sv.pos));

    // Record full-edge crossings of a straight move from a point to a node.
    auto note_crossings = [&](const TreePoint& from, int to_node) {
        TreePoint p = from;
        while (!(p.at_node() && p.node == to_node)) {
            auto [nxt, gap] = detail::next_node_toward(t, p, to_node);
            if (p.at_node()) {
                int edge = nxt == t.parent[p.node] ? p.node : nxt;
                if (gap == t.edge_len(edge)) traversed.insert(edge);
            }
            p = detail::advance_point(t, p, to_node, gap);
        }
    };

    // Key edges in DFS order; the major element alone when the cut is the root.
    std::vector<int> keys;
    for (int e : plan.dfs_order)
        if (std::count(plan.key_edges.begin(), plan.key_edges.end(), e)) keys.push_back(e);

    auto tour_below = [&](int server, int base) {
        // Round-trip DFS over the plan edges strictly below `base`.
        Rat len(0);
        for (int e : plan.s_edges)
            if (e != base && t.is_ancestor(base, e)) {
                len += t.edge_len(e);
                traversed.insert(e);
            }
        out.cost += len * 2;
        (void)server;
    };

    if (keys.empty()) {
        // The major element is the unique key edge. Its outer endpoint is on
        // the servers' side, its base is the attach node of the scope.
        int outer_node;
        if (st.is_segment(plan.trigger.elem)) {
            // The segment's outer end is the trigger server's own position.
            outer_node = -1;
        } else {
            outer_node = scope.sibling_config ? plan.trigger.elem : t.parent[plan.trigger.elem];
        }
        int arriver;
        if (outer_node >= 0) {
            for (int s = 0; s < static_cast<int>(pts.size()); ++s) out.moves.push_back("");
            CoverMove mv = active_cover_move(t, pts, outer_node);
            for (int s = 0; s < static_cast<int>(pts.size()); ++s) {
                out.cost += mv.moved[s];
                note_crossings(mv.legs[s].first, -2), (void)0;
            }
            for (int s = 0; s < static_cast<int>(pts.size()); ++s)
                if (mv.moved[s] > 0) note_path(t, mv.legs[s].first, mv.legs[s].second, traversed);
            arriver = mv.arriver;
        } else {
            arriver = plan.trigger.server;
        }
        out.cost += scope.root_len;
        if (!st.is_segment(plan.trigger.elem)) traversed.insert(plan.trigger.elem);
        pts[arriver] = TreePoint::at(scope.attach);
        tour_below(arriver, scope.attach);
        for (size_t s = 0; s < pts.size(); ++s)
            st.servers[s].pos = pts[s].as_pos(t);
        st.rebuild_paths();
        out.traversed_edges.assign(traversed.begin(), traversed.end());
        return out;
    }

    for (int kidx = 0; kidx < static_cast<int>(keys.size()); ++kidx) {
        int kedge = keys[kidx];
        int outer = t.parent[kedge];
        CoverMove mv = active_cover_move(t, pts, outer);
        for (int s = 0; s < static_cast<int>(pts.size()); ++s) {
            out.cost += mv.moved[s];
            if (mv.moved[s] > 0) note_path(t, mv.legs[s].first, mv.legs[s].second, traversed);
        }
        int arriver = mv.arriver;
        out.cost += t.edge_len(kedge);  // cross
        traversed.insert(kedge);
        pts[arriver] = TreePoint::at(kedge);
        tour_below(arriver, kedge);
        out.moves.push_back("server " + std::to_string(arriver) + " -> edge " +
                            std::to_string(kedge));
    }
    for (size_t s = 0; s < pts.size(); ++s)
        st.servers[s].pos = pts[s].as_pos(t);
    st.rebuild_paths();
    if (checks) {
        // No key edge left uncrossed.
        for (int kedge : keys)
            checks->require(traversed.count(kedge) > 0, "key edge never crossed");
    }
    out.traversed_edges.assign(traversed.begin(), traversed.end());
    return out;
}

}  // namespace osd
