#pragma once

// Serving-phase planning, shared by the single-server and k-server
// algorithms. From a triggering major element this derives:
//   - the relevant subtree (the region whose requests have that major),
//   - the critical subtree (saturated paths to critical requests),
//   - the key edges (maximum-length cut of the critical subtree),
//   - the traversal set S via recursive time forwarding with exact
//     budget splitting on each recursion layer.
//
// Time forwarding runs on cloned counters; real counters are only mutated
// when a plan is applied.

#include "osd/counters.hpp"
#include "osd/subset.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <vector>

namespace osd {

struct UnknownEdge : std::runtime_error {
    explicit UnknownEdge(int e) : std::runtime_error("unknown edge " + std::to_string(e)) {}
};
struct NotSaturated : std::runtime_error {
    NotSaturated() : std::runtime_error("critical subtree requested below an unsaturated element") {}
};

// The service area X hanging below a service element, with the element
// rendered as parent of the area's first layer. For an ordinary edge this is
// the subtree below it; for a major element whose server sits below it (or
// for a mid-edge segment), it is the region of strictly smaller siblings.
struct Scope {
    int root_elem = -1;
    Rat root_len;
    int attach = -1;
    bool sibling_config = false;
    std::vector<int> verts;       // sorted, includes attach
    std::vector<int> first_layer; // edges hanging at attach inside the area
    std::set<int> vert_set;

    bool contains_node(int v) const { return vert_set.count(v) > 0; }
};

namespace detail {
inline Scope make_scope(const Hst& t, int root_elem, const Rat& root_len, int attach,
                        bool sibling, std::vector<int> first_layer) {
    Scope sc;
    sc.root_elem = root_elem;
    sc.root_len = root_len;
    sc.attach = attach;
    sc.sibling_config = sibling;
    sc.first_layer = std::move(first_layer);
    sc.verts.push_back(attach);
    for (int c : sc.first_layer)
        for (int v : t.subtree_nodes(c)) sc.verts.push_back(v);
    std::sort(sc.verts.begin(), sc.verts.end());
    sc.vert_set.insert(sc.verts.begin(), sc.verts.end());
    return sc;
}
}  // namespace detail

// Plain subtree scope of a real edge e: X = T_e.
inline Scope subtree_scope(const Hst& t, int e) {
    if (!t.valid_node(e) || e == t.root) throw UnknownEdge(e);
    return detail::make_scope(t, e, t.edge_len(e), e, false, t.children[e]);
}

// Relevant subtree of the major element for server s: the set of vertices
// whose major element (w.r.t. that server position) is the given one. The
// major element always attaches at the region's root; every edge inside is
// at most half the major's length.
inline Scope relevant_subtree(const CounterState& st, int s, int elem) {
    const Hst& t = *st.tree;
    if (!st.is_segment(elem)) {
        if (!t.valid_node(elem) || elem == t.root) throw UnknownEdge(elem);
        if (!st.server_in_subtree(s, elem)) return subtree_scope(t, elem);
        // Server below the edge: region = strictly smaller siblings under the
        // edge's top endpoint.
        int u = t.parent[elem];
        std::vector<int> layer;
        for (int c : t.children[u])
            if (c != elem && t.len_exp[c] < t.len_exp[elem]) layer.push_back(c);
        return detail::make_scope(t, elem, t.edge_len(elem), u, true, std::move(layer));
    }
    // Mid-edge segment: the region hangs off the endpoint on the request
    // side, made of branches strictly shorter than the segment.
    const ServerPos& p = st.servers[s].pos;
    int side = (elem - t.size()) % 2;
    Rat seg_len = st.elem_cap(s, elem);
    if (side == 0) {
        int v = p.edge_child;
        std::vector<int> layer;
        for (int c : t.children[v])
            if (t.edge_len(c) < seg_len) layer.push_back(c);
        return detail::make_scope(t, elem, seg_len, v, true, std::move(layer));
    }
    int u = t.parent[p.edge_child];
    std::vector<int> layer;
    for (int c : t.children[u])
        if (c != p.edge_child && t.edge_len(c) < seg_len) layer.push_back(c);
    return detail::make_scope(t, elem, seg_len, u, true, std::move(layer));
}

// Brute-force reference for the relevant subtree: per-vertex major scan.
// Used as a runtime oracle for the constructive version.
inline std::vector<int> relevant_subtree_bruteforce(const CounterState& st, int s, int elem) {
    const Hst& t = *st.tree;
    std::vector<int> out;
    for (int v = 0; v < t.size(); ++v) {
        auto path = st.build_path(v, s);
        if (path.empty()) continue;
        if (CounterState::major_of(path) == elem) out.push_back(v);
    }
    return out;
}

// Weight/saturation view a planner works against: either the live counters
// of one server or a forwarded simulation.
struct SatView {
    std::function<bool(int edge)> saturated;
};

struct CriticalSubtree {
    Scope scope;              // copy of the planning scope
    std::vector<int> edges;   // saturated edges linking criticals to attach (sorted)
    std::vector<int> criticals;  // internal request ids, ascending
};

// Requests in the scope connected to the attach point by saturated edges.
inline CriticalSubtree critical_subtree_view(const Hst& t, const Scope& scope,
                                             const SatView& sat,
                                             const std::vector<Request>& requests,
                                             const std::set<int>& unserved) {
    CriticalSubtree out;
    out.scope = scope;
    std::set<int> edges;
    for (int r : unserved) {
        int leaf = requests[r].where;
        if (!scope.contains_node(leaf)) continue;
        auto path = t.path_edges(leaf, scope.attach);
        bool ok = true;
        for (int e : path)
            if (!sat.saturated(e)) {
                ok = false;
                break;
            }
        if (!ok) continue;
        out.criticals.push_back(r);
        edges.insert(path.begin(), path.end());
    }
    out.edges.assign(edges.begin(), edges.end());
    return out;
}

inline CriticalSubtree critical_subtree(const CounterState& st, int s, const Scope& scope) {
    if (!st.is_segment(scope.root_elem) && !st.saturated(s, scope.root_elem)) throw NotSaturated();
    SatView sat{[&st, s](int e) { return st.saturated(s, e); }};
    return critical_subtree_view(*st.tree, scope, sat, st.requests, st.unserved);
}

// Maximum-total-length cut of the critical subtree: dynamic program
// M(e) = max(len(e), sum of children M), children preferred on ties so the
// cut sits as deep as possible. Returns the key edges; when cutting at the
// root element itself wins, returns the empty vector (caller treats the
// major element as the unique key edge).
inline std::vector<int> key_edges(const Hst& t, const CriticalSubtree& crit) {
    if (crit.edges.empty()) return {};
    std::set<int> in_crit(crit.edges.begin(), crit.edges.end());
    std::map<int, std::vector<int>> kids;  // edge -> child edges within crit
    std::vector<int> top;
    for (int e : crit.edges) {
        int p = t.parent[e];
        if (p == crit.scope.attach)
            top.push_back(e);
        else
            kids[p].push_back(e);
    }
    std::map<int, Rat> m;
    std::map<int, bool> use_children;
    std::function<void(int)> solve = [&](int e) {
        Rat child_sum(0);
        for (int c : kids[e]) {
            solve(c);
            child_sum += m[c];
        }
        if (!kids[e].empty() && child_sum >= t.edge_len(e)) {
            m[e] = child_sum;
            use_children[e] = true;
        } else {
            m[e] = t.edge_len(e);
            use_children[e] = false;
        }
    };
    Rat top_sum(0);
    for (int e : top) {
        solve(e);
        top_sum += m[e];
    }
    if (top_sum < crit.scope.root_len) return {};  // the major element is the cut
    std::vector<int> cut;
    std::function<void(int)> collect = [&](int e) {
        if (use_children[e])
            for (int c : kids[e]) collect(c);
        else
            cut.push_back(e);
    };
    for (int e : top) collect(e);
    std::sort(cut.begin(), cut.end());
    return cut;
}

// f-recursion over a scope: f(e) = max(len(e), sum of f over child edges)
// when e is saturated, else 0. Over-saturation comes in two flavours:
// by children (the sum dominates) and by exhaustion (every request below is
// already connected through saturated edges).
struct FView {
    std::map<int, Rat> f;             // per area edge
    std::set<int> oversat_children;   // area edges over-saturated by children
    std::set<int> all_critical;       // area edges with every request below critical
    Rat root_children_sum;            // sum of f over the first layer
    bool root_oversat_children = false;
    bool root_all_critical = false;
    int area_requests = 0;
    std::vector<int> criticals;       // area requests critical w.r.t. attach
};

inline FView compute_f_view(const Hst& t, const Scope& scope, const SatView& sat,
                            const std::vector<Request>& requests,
                            const std::set<int>& unserved) {
    FView out;
    std::function<void(int)> solve = [&](int e) {
        Rat child_sum(0);
        for (int c : t.children[e]) {
            solve(c);
            child_sum += out.f[c];
        }
        if (!sat.saturated(e)) {
            out.f[e] = 0;
            return;
        }
        out.f[e] = std::max(Rat(t.edge_len(e)), child_sum);
        if (child_sum >= t.edge_len(e)) out.oversat_children.insert(e);
    };
    out.root_children_sum = 0;
    for (int c : scope.first_layer) {
        solve(c);
        out.root_children_sum += out.f[c];
    }
    out.root_oversat_children = out.root_children_sum >= scope.root_len;

    // Criticality w.r.t. the attach point. A request sitting at the attach
    // node itself has an empty path and is trivially critical.
    for (int r : unserved) {
        int leaf = requests[r].where;
        if (!scope.contains_node(leaf)) continue;
        ++out.area_requests;
        bool all_sat = true;
        for (int e : t.path_edges(leaf, scope.attach))
            if (!sat.saturated(e)) {
                all_sat = false;
                break;
            }
        if (all_sat) out.criticals.push_back(r);
    }
    // An edge is exhausted when every unserved request below it reaches it
    // through saturated edges (vacuously, when nothing lives below it).
    for (int e : scope.verts) {
        if (e == scope.attach || !sat.saturated(e)) continue;
        bool all_crit = true;
        for (int r : unserved) {
            int leaf = requests[r].where;
            if (!t.is_ancestor(e, leaf)) continue;
            for (int x : t.path_edges(leaf, e))
                if (!sat.saturated(x)) {
                    all_crit = false;
                    break;
                }
            if (!all_crit) break;
        }
        if (all_crit) out.all_critical.insert(e);
    }
    out.root_all_critical =
        static_cast<int>(out.criticals.size()) == out.area_requests;
    return out;
}

// Forward simulation of one server's counters inside a scope: the scope's
// unserved requests feed the nearest unsaturated edge on their path to the
// attach point. Runs on copies; never touches live counters.
struct TfSim {
    const Hst* tree = nullptr;
    const std::vector<Request>* requests = nullptr;
    const std::set<int>* unserved = nullptr;
    Rat clock;
    std::map<int, Rat> w;
    std::set<int> saturated;

    bool sat(int e) const { return saturated.count(e) > 0; }
    Rat weight(int e) const {
        auto it = w.find(e);
        return it == w.end() ? Rat(0) : it->second;
    }
    SatView view() const {
        return SatView{[this](int e) { return sat(e); }};
    }

    static TfSim from_live(const CounterState& st, int s) {
        TfSim sim;
        sim.tree = st.tree;
        sim.requests = &st.requests;
        sim.unserved = &st.unserved;
        sim.clock = st.clock;
        for (const auto& [e, wt] : st.servers[s].w)
            if (!st.is_segment(e)) sim.w[e] = wt;
        for (int e : st.servers[s].saturated)
            if (!st.is_segment(e)) sim.saturated.insert(e);
        return sim;
    }

    enum class Stop { OverSaturated, NoEvents, TimeLimit };

    // Advances the forward simulation. Stops at the first instant the
    // scope's root element is over-saturated (by children, or by every scope
    // request being critical) when `stop_on_oversat`; stops at `limit` when
    // given; reports NoEvents when the remaining penalties are flat forever.
    Stop advance(const Scope& scope, std::optional<Rat> limit, bool stop_on_oversat) {
        const Hst& t = *tree;
        while (true) {
            FView fv = compute_f_view(t, scope, view(), *requests, *unserved);
            if (stop_on_oversat && (fv.root_oversat_children || fv.root_all_critical))
                return Stop::OverSaturated;
            if (limit && clock >= *limit) return Stop::TimeLimit;
            std::set<int> crit(fv.criticals.begin(), fv.criticals.end());

            // Deadline cascades: a due deadline saturates the whole remaining
            // path to the attach point at this instant.
            bool cascaded = false;
            for (int r : *unserved) {
                if (crit.count(r)) continue;
                const Request& rq = (*requests)[r];
                if (!scope.contains_node(rq.where) || !rq.penalty.deadline) continue;
                if (clock - rq.arrival >= *rq.penalty.deadline) {
                    for (int e : t.path_edges(rq.where, scope.attach))
                        if (!sat(e)) {
                            w[e] = t.edge_len(e);
                            saturated.insert(e);
                        }
                    cascaded = true;
                }
            }
            if (cascaded) continue;

            std::map<int, Rat> inflow;
            std::optional<Rat> t_next;
            auto consider = [&](const Rat& cand) {
                if (cand > clock && (!t_next || cand < *t_next)) t_next = cand;
            };
            for (int r : *unserved) {
                const Request& rq = (*requests)[r];
                if (!scope.contains_node(rq.where) || crit.count(r)) continue;
                Rat delay = clock - rq.arrival;
                auto rate = rq.penalty.rate_at(delay);
                if (rate && *rate > 0) {
                    for (int e : t.path_edges(rq.where, scope.attach))
                        if (!sat(e)) {
                            inflow[e] += *rate;
                            break;
                        }
                }
                if (auto bp = rq.penalty.next_breakpoint_after(delay))
                    consider(rq.arrival + *bp);
            }
            for (const auto& [e, rate] : inflow)
                consider(clock + (t.edge_len(e) - weight(e)) / rate);
            if (!t_next) return Stop::NoEvents;
            if (limit && *t_next > *limit) t_next = *limit;
            Rat dt = *t_next - clock;
            for (const auto& [e, rate] : inflow) {
                w[e] = weight(e) + rate * dt;
                if (w[e] == t.edge_len(e)) saturated.insert(e);
            }
            clock = *t_next;
        }
    }

    Stop advance_to_oversaturation(const Scope& scope) {
        return advance(scope, std::nullopt, true);
    }
};

struct TfStats {
    int root_elem = -1;
    Rat root_len;
    Rat forwarded_to;
    bool never_oversaturated = false;
    bool recursed = false;
    Rat g_sum, h_sum;
    std::vector<int> g_edges, h_edges;
};

struct TfResult {
    std::set<int> edges;
    std::vector<TfStats> stats;
};

namespace detail {
// Brute-force maximum cut of the saturated subtree (small areas only):
// every antichain separating the saturated boundary from the root.
inline Rat max_saturated_cut(const Hst& t, const Scope& scope, const SatView& sat) {
    std::function<Rat(int)> best = [&](int e) -> Rat {
        if (!sat.saturated(e)) return Rat(0);
        Rat child_sum(0);
        for (int c : t.children[e]) child_sum += best(c);
        return std::max(Rat(t.edge_len(e)), child_sum);
    };
    Rat total(0);
    for (int c : scope.first_layer) total += best(c);
    return total;
}
}  // namespace detail

inline TfResult time_forwarding(const Scope& scope, TfSim sim, CheckLog* checks) {
    const Hst& t = *sim.tree;
    TfResult out;
    TfStats st;
    st.root_elem = scope.root_elem;
    st.root_len = scope.root_len;

    TfSim::Stop stop = sim.advance_to_oversaturation(scope);
    st.forwarded_to = sim.clock;
    st.never_oversaturated = stop == TfSim::Stop::NoEvents;

    FView fv = compute_f_view(t, scope, sim.view(), *sim.requests, *sim.unserved);
    for (int r : fv.criticals) {
        auto path = t.path_edges((*sim.requests)[r].where, scope.attach);
        out.edges.insert(path.begin(), path.end());
    }

    bool all_critical = fv.root_all_critical;
    if (!all_critical && !st.never_oversaturated) {
        if (checks)
            checks->require(fv.root_oversat_children,
                            "recursion reached without over-saturation by children");
        // Boundary of the over-saturated region: saturated edges, themselves
        // not over-saturated by children, reachable from the root through
        // edges that are.
        std::vector<int> g;
        std::function<void(int)> walk = [&](int e) {
            if (!sim.sat(e)) return;
            if (!fv.oversat_children.count(e)) {
                g.push_back(e);
                return;
            }
            for (int c : t.children[e]) walk(c);
        };
        for (int c : scope.first_layer) walk(c);
        std::sort(g.begin(), g.end());

        Rat g_sum(0);
        std::vector<std::pair<int, Rat>> g_items;
        for (int e : g) {
            g_sum += t.edge_len(e);
            g_items.push_back({e, t.edge_len(e)});
        }
        st.g_sum = g_sum;
        st.g_edges = g;
        if (checks) {
            checks->require(g_sum == fv.root_children_sum,
                            "boundary cut total differs from the f recursion");
            checks->require(g_sum >= scope.root_len, "boundary cut below the root budget");
            checks->require(g_sum <= scope.root_len * 3 / 2,
                            "boundary cut exceeds 3/2 of the root budget");
            if (scope.verts.size() <= 24)
                checks->require(g_sum == detail::max_saturated_cut(t, scope, sim.view()),
                                "boundary cut is not the maximum saturated cut");
            for (size_t i = 0; i < g.size(); ++i)
                for (size_t j = i + 1; j < g.size(); ++j)
                    checks->require(!t.is_ancestor(g[i], g[j]) && !t.is_ancestor(g[j], g[i]),
                                    "boundary cut is not an antichain");
        }

        Rat target = is_power_of_two(scope.root_len)
                         ? scope.root_len
                         : pow2(floor_log2(scope.root_len));
        std::vector<int> h = subset_exact_ids(g_items, target);
        Rat h_sum(0);
        for (int e : h) h_sum += t.edge_len(e);
        st.h_sum = h_sum;
        st.h_edges = h;
        st.recursed = true;
        if (checks) checks->require(h_sum == target, "selected sub-cut does not meet the budget exactly");

        out.stats.push_back(st);
        for (int e : h) {
            // Connectors from the attach point down to the recursion root are
            // traversed too; they are over-saturated, hence saturated.
            auto conn = t.path_edges(scope.attach, e);
            out.edges.insert(conn.begin(), conn.end());
            TfResult sub = time_forwarding(subtree_scope(t, e), sim, checks);
            out.edges.insert(sub.edges.begin(), sub.edges.end());
            out.stats.insert(out.stats.end(), sub.stats.begin(), sub.stats.end());
        }
        return out;
    }
    out.stats.push_back(st);
    return out;
}

// Spec-style probe used by tests: forward server s's counters to `at_time`
// inside the subtree scope of edge e and report the f values and flags.
inline FView compute_f(const CounterState& st, int s, int e, const Rat& at_time) {
    Scope scope = subtree_scope(*st.tree, e);
    TfSim sim = TfSim::from_live(st, s);
    sim.advance(scope, at_time, false);
    return compute_f_view(*st.tree, scope, sim.view(), st.requests, st.unserved);
}

}  // namespace osd
