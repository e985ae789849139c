#pragma once

// Hierarchically separated trees. Edge lengths are exact powers of two kept
// in exponent form; every child edge is at most half its parent edge. The
// edge entering node v from its parent is identified by v itself, so "edge
// id" and "child node id" coincide everywhere below.

#include "osd/rational.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace osd {

struct UnknownNode : std::runtime_error {
    explicit UnknownNode(int v) : std::runtime_error("unknown node " + std::to_string(v)) {}
};
struct NonTree : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RatioViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HstViolation {
    int node;          // offending node (edge = its parent edge) or -1
    std::string what;
};

struct Hst {
    // parent[root] == -1; len_exp[v] is the exponent of edge (parent[v], v).
    std::vector<int> parent;
    std::vector<int> len_exp;
    int root = 0;
    // Bijection between metric points and leaves, present on embedded trees.
    std::map<std::string, int> leaf_of_point;

    // Derived, filled in by finalize().
    std::vector<std::vector<int>> children;
    std::vector<int> depth_of;
    std::vector<int> tin, tout;  // Euler intervals for ancestor tests
    int height = 0;

    int size() const { return static_cast<int>(parent.size()); }
    bool valid_node(int v) const { return v >= 0 && v < size(); }
    bool is_leaf(int v) const { return children[v].empty(); }
    Rat edge_len(int v) const { return pow2(len_exp[v]); }
    int depth() const { return height; }

    void finalize() {
        int n = size();
        children.assign(n, {});
        for (int v = 0; v < n; ++v)
            if (v != root) {
                if (!valid_node(parent[v])) throw NonTree("bad parent of node " + std::to_string(v));
                children[parent[v]].push_back(v);
            }
        for (auto& c : children) std::sort(c.begin(), c.end());
        depth_of.assign(n, 0);
        tin.assign(n, 0);
        tout.assign(n, 0);
        height = 0;
        int timer = 0;
        std::vector<int> stack{root}, state(n, 0);
        std::vector<size_t> child_idx(n, 0);
        int visited = 0;
        while (!stack.empty()) {
            int v = stack.back();
            if (state[v] == 0) {
                state[v] = 1;
                ++visited;
                tin[v] = timer++;
                height = std::max(height, depth_of[v]);
            }
            if (child_idx[v] < children[v].size()) {
                int c = children[v][child_idx[v]++];
                depth_of[c] = depth_of[v] + 1;
                stack.push_back(c);
            } else {
                tout[v] = timer++;
                stack.pop_back();
            }
        }
        if (visited != n) throw NonTree("disconnected or cyclic parent structure");
    }

    // Is a an ancestor of v (inclusive)?
    bool is_ancestor(int a, int v) const { return tin[a] <= tin[v] && tout[v] <= tout[a]; }

    int lca(int u, int v) const {
        while (!is_ancestor(u, v)) u = parent[u];
        return u;
    }

    // Edges (child node ids) on the u->v path, ordered from the u side.
    std::vector<int> path_edges(int u, int v) const {
        if (!valid_node(u)) throw UnknownNode(u);
        if (!valid_node(v)) throw UnknownNode(v);
        int a = lca(u, v);
        std::vector<int> up, down;
        for (int x = u; x != a; x = parent[x]) up.push_back(x);
        for (int x = v; x != a; x = parent[x]) down.push_back(x);
        std::reverse(down.begin(), down.end());
        up.insert(up.end(), down.begin(), down.end());
        return up;
    }

    Rat dist(int u, int v) const {
        Rat d(0);
        for (int e : path_edges(u, v)) d += edge_len(e);
        return d;
    }

    std::vector<int> leaves() const {
        std::vector<int> out;
        for (int v = 0; v < size(); ++v)
            if (is_leaf(v)) out.push_back(v);
        return out;
    }

    // All nodes of the subtree rooted at v, ascending.
    std::vector<int> subtree_nodes(int v) const {
        std::vector<int> out;
        for (int x = 0; x < size(); ++x)
            if (is_ancestor(v, x)) out.push_back(x);
        return out;
    }

    // Lowest-id leaf below v (v itself when v is a leaf); used when a tree
    // position has to be realized as an actual metric point.
    int representative_leaf(int v) const {
        while (!is_leaf(v)) v = children[v].front();
        return v;
    }

    Rat total_edge_length() const {
        Rat t(0);
        for (int v = 0; v < size(); ++v)
            if (v != root) t += edge_len(v);
        return t;
    }
};

inline std::vector<HstViolation> validate_hst(const Hst& t) {
    std::vector<HstViolation> out;
    for (int v = 0; v < t.size(); ++v) {
        if (v == t.root) continue;
        if (t.len_exp[v] < 0)
            out.push_back({v, "edge length exponent is negative (length not a power of two >= 1)"});
        int p = t.parent[v];
        if (p != t.root && p >= 0 && t.len_exp[v] > t.len_exp[p] - 1)
            out.push_back({v, "edge longer than half of its parent edge"});
    }
    for (const auto& [pt, leaf] : t.leaf_of_point) {
        if (!t.valid_node(leaf))
            out.push_back({leaf, "leaf map entry '" + pt + "' is not a node"});
        else if (!t.is_leaf(leaf))
            out.push_back({leaf, "leaf map entry '" + pt + "' is not a leaf"});
    }
    return out;
}

// Rooted tree with arbitrary positive rational edge lengths, the input to
// round_edges_down.
struct RawTree {
    std::vector<int> parent;       // parent[root] == -1
    std::vector<Rat> length;       // length[v] of edge (parent[v], v)
    int root = 0;
    std::map<std::string, int> leaf_of_point;
};

// Rounds every edge length down to the nearest power of two. Requires the
// parent/child length ratio to be >= 2 beforehand so the rounding cannot
// break the separation property; leaf-to-leaf distances shrink by at most 2x.
inline Hst round_edges_down(const RawTree& raw) {
    Hst t;
    t.parent = raw.parent;
    t.root = raw.root;
    t.leaf_of_point = raw.leaf_of_point;
    t.len_exp.assign(raw.parent.size(), 0);
    for (size_t v = 0; v < raw.parent.size(); ++v) {
        if (static_cast<int>(v) == raw.root) continue;
        if (raw.length[v] <= 0) throw RatioViolation("nonpositive edge length");
        if (raw.length[v] < 1) throw RatioViolation("edge length below 1 cannot round to 2^i with i >= 0");
        t.len_exp[v] = static_cast<int>(floor_log2(raw.length[v]));
    }
    t.finalize();
    for (size_t v = 0; v < raw.parent.size(); ++v) {
        int p = raw.parent[v];
        if (static_cast<int>(v) == raw.root || p == raw.root) continue;
        if (raw.length[v] * 2 > raw.length[p])
            throw RatioViolation("input ratio below 2 at node " + std::to_string(v));
        if (t.len_exp[v] > t.len_exp[p] - 1)
            throw RatioViolation("rounding broke the factor-2 rule at node " + std::to_string(v));
    }
    return t;
}

inline Rat tree_distance(const Hst& t, int u, int v) { return t.dist(u, v); }

}  // namespace osd
