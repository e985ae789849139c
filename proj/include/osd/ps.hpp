#pragma once

// Preemptive service on an HST, single server. Waiting phases accrue
// penalty weight onto edge counters (counters.hpp); when a major element
// saturates, a serving phase plans critical service plus preemptive service
// chosen by recursive time forwarding (planner.hpp), executes it as an
// instantaneous DFS, resets traversed counters, and parks the server at the
// far end of the last key edge visited.

#include "osd/planner.hpp"
#include "osd/sim.hpp"

#include <map>
#include <sstream>

namespace osd {

struct PlanStateMismatch : std::runtime_error {
    PlanStateMismatch() : std::runtime_error("plan applied to a different state") {}
};

struct ServicePlan {
    Trigger trigger;
    Scope scope;
    CriticalSubtree crit;
    std::vector<int> key_edges;  // empty: the major element is the unique key edge
    std::set<int> s_edges;       // area edges to traverse (major element excluded)
    std::vector<int> dfs_order;  // s_edges in DFS entry order from the attach node
    std::vector<int> served;     // internal request indices
    int final_node = -1;         // far endpoint of the last key edge in DFS order
    std::vector<TfStats> tf_stats;
};

namespace detail {

// DFS entry order over an edge set hanging below `attach`; sibling edges by
// (length ascending, id ascending) to match the k-server execution order.
inline std::vector<int> dfs_entry_order(const Hst& t, int attach, const std::set<int>& edges) {
    std::vector<int> order;
    std::function<void(int)> walk = [&](int node) {
        std::vector<int> kids;
        for (int c : t.children[node])
            if (edges.count(c)) kids.push_back(c);
        std::sort(kids.begin(), kids.end(), [&](int a, int b) {
            if (t.len_exp[a] != t.len_exp[b]) return t.len_exp[a] < t.len_exp[b];
            return a < b;
        });
        for (int c : kids) {
            order.push_back(c);
            walk(c);
        }
    };
    walk(attach);
    return order;
}

inline std::set<int> covered_nodes(const Scope& scope, const std::set<int>& s_edges) {
    std::set<int> nodes{scope.attach};
    for (int e : s_edges) nodes.insert(e);
    return nodes;
}

}  // namespace detail

// Derives the serving-phase plan from the live counters of `server`. When
// `preemptive` is false only critical service is planned (the variant legal
// without knowledge of future penalties).
inline ServicePlan build_plan(const CounterState& st, const Trigger& trig, CheckLog* checks,
                              bool preemptive = true, const Rat& diag_constant = Rat(64)) {
    const Hst& t = *st.tree;
    ServicePlan plan;
    plan.trigger = trig;
    plan.scope = relevant_subtree(st, trig.server, trig.elem);
    const Scope& scope = plan.scope;

    if (checks) {
        auto brute = relevant_subtree_bruteforce(st, trig.server, trig.elem);
        checks->require(brute == scope.verts,
                        "relevant subtree disagrees with the per-vertex major scan");
        for (int e : scope.verts)
            if (e != scope.attach)
                checks->require(t.edge_len(e) * 2 <= scope.root_len,
                                "relevant subtree edge longer than half the major element");
    }

    plan.crit = critical_subtree(st, trig.server, scope);
    if (checks)
        checks->require(!plan.crit.criticals.empty(),
                        "serving phase triggered without any critical request");

    plan.key_edges = key_edges(t, plan.crit);
    if (checks && !plan.key_edges.empty()) {
        Rat ksum(0);
        for (int k : plan.key_edges) ksum += t.edge_len(k);
        checks->require(ksum >= scope.root_len, "key-edge cut below the major length");
        Rat csum = scope.root_len;
        for (int e : plan.crit.edges) csum += t.edge_len(e);
        checks->require(ksum * std::max(1, t.depth()) >= csum,
                        "key-edge cut below 1/h of the critical subtree");
        for (size_t i = 0; i < plan.key_edges.size(); ++i)
            for (size_t j = i + 1; j < plan.key_edges.size(); ++j)
                checks->require(!t.is_ancestor(plan.key_edges[i], plan.key_edges[j]) &&
                                    !t.is_ancestor(plan.key_edges[j], plan.key_edges[i]),
                                "key edges are not an antichain");
        for (int r : plan.crit.criticals) {
            bool cut = false;
            for (int e : t.path_edges(st.requests[r].where, scope.attach))
                if (std::count(plan.key_edges.begin(), plan.key_edges.end(), e)) {
                    cut = true;
                    break;
                }
            checks->require(cut, "key edges do not disconnect a critical request");
        }
    }

    // Edges between the major element and the key edges, both inclusive (the
    // major element itself is traversed implicitly).
    for (int k : plan.key_edges) {
        auto conn = t.path_edges(scope.attach, k);
        plan.s_edges.insert(conn.begin(), conn.end());
    }

    if (preemptive) {
        int h = std::max(1, t.depth());
        auto run_tf = [&](const Scope& sc) {
            TfResult tf = time_forwarding(sc, TfSim::from_live(st, trig.server), checks);
            Rat inside(0);
            for (int e : tf.edges) inside += t.edge_len(e);
            if (checks)
                checks->diag(inside * 2 <= diag_constant * h * h * sc.root_len,
                             "preemptive traversal exceeded the h^2 diagnostic bound");
            plan.s_edges.insert(tf.edges.begin(), tf.edges.end());
            plan.tf_stats.insert(plan.tf_stats.end(), tf.stats.begin(), tf.stats.end());
        };
        if (plan.key_edges.empty())
            run_tf(scope);
        else
            for (int k : plan.key_edges) run_tf(subtree_scope(t, k));
    } else {
        // Critical service only.
        plan.s_edges.insert(plan.crit.edges.begin(), plan.crit.edges.end());
    }

    auto nodes = detail::covered_nodes(scope, plan.s_edges);
    for (int r : st.unserved)
        if (nodes.count(st.requests[r].where)) plan.served.push_back(r);
    if (checks)
        for (int r : plan.crit.criticals)
            checks->require(std::count(plan.served.begin(), plan.served.end(), r) > 0,
                            "a critical request escaped the serving phase");

    plan.dfs_order = detail::dfs_entry_order(t, scope.attach, plan.s_edges);
    if (checks)
        checks->require(plan.dfs_order.size() == plan.s_edges.size(),
                        "traversal set is not connected to the attach node");

    if (plan.key_edges.empty()) {
        plan.final_node = scope.attach;
    } else {
        int last = -1;
        for (int e : plan.dfs_order)
            if (std::count(plan.key_edges.begin(), plan.key_edges.end(), e)) last = e;
        plan.final_node = last;
    }
    return plan;
}

struct ApplyResult {
    Rat cost;
    std::vector<int> traversed;  // real edge ids, sorted
};

// Executes the plan on the live state: walk to the major element, cross it,
// DFS the traversal set ending at the bottom of the last key edge, serve
// everything reached, reset every traversed counter.
inline ApplyResult apply_plan(CounterState& st, const ServicePlan& plan, CheckLog* checks) {
    const Hst& t = *st.tree;
    const Scope& scope = plan.scope;
    const ServerPos& pos = st.servers[plan.trigger.server].pos;
    if (!pos.at_node()) throw PlanStateMismatch();

    ApplyResult res;
    std::set<int> traversed;

    int near = scope.sibling_config ? plan.trigger.elem : t.parent[plan.trigger.elem];
    if (st.is_segment(plan.trigger.elem)) throw PlanStateMismatch();  // single-server: nodes only
    for (int e : t.path_edges(pos.node, near)) {
        res.cost += t.edge_len(e);
        traversed.insert(e);
    }
    res.cost += scope.root_len;  // cross the major element
    traversed.insert(plan.trigger.elem);

    Rat s_total(0);
    for (int e : plan.s_edges) {
        s_total += t.edge_len(e);
        traversed.insert(e);
    }
    Rat once(0);
    if (plan.final_node != scope.attach)
        for (int e : t.path_edges(scope.attach, plan.final_node)) once += t.edge_len(e);
    res.cost += s_total * 2 - once;

    for (int e : traversed) st.reset_edge_for_all(e);
    for (int r : plan.served) st.mark_served(r);
    if (checks)
        for (int r : plan.served)
            for (const auto& sv : st.servers)
                for (const auto& [elem, by_req] : sv.contrib)
                    checks->require(!by_req.count(r),
                                    "served request left counter weight on an untraversed edge");

    st.move_server(plan.trigger.server, ServerPos::at(plan.final_node));
    res.traversed.assign(traversed.begin(), traversed.end());
    return res;
}

// Engine port. In nonclairvoyant mode the preemptive planner is off: time
// forwarding reads future penalty values, which that mode forbids.
class PsAlgorithm : public AlgorithmPort {
public:
    explicit PsAlgorithm(bool preemptive = true) : preemptive_(preemptive) {}

    CounterState state;  // exposed for tests and the k=1 comparison

    void start(const Instance& inst, ClairvoyanceMode mode, CheckLog* checks) override {
        if (inst.kind != SpaceKind::Tree)
            throw std::invalid_argument("preemptive service runs on tree instances");
        if (inst.k != 1) throw std::invalid_argument("single-server algorithm with k != 1");
        if (mode == ClairvoyanceMode::Nonclairvoyant) preemptive_ = false;
        state.checks = checks;
        checks_ = checks;
        state.init(*inst.tree, {ServerPos::at(inst.start[0])});
    }

    std::vector<int> on_arrival(const Request& r, const Rat& now) override {
        sync_to(now);
        int idx = state.add_request(r);
        if (state.servers[0].pos.at_node() && state.servers[0].pos.node == r.where) {
            state.mark_served(idx);
            return {r.id};
        }
        return {};
    }

    std::optional<Rat> next_decision_time(const Rat& now, const Rat& limit) override {
        sync_to(now);
        if (auto trig = state.current_trigger()) return now;
        CounterState probe = state;
        probe.checks = nullptr;
        if (auto trig = probe.accrue(limit)) return trig->time;
        return std::nullopt;
    }

    PhaseOutcome on_decision(const Rat& now) override {
        sync_to(now);
        auto trig = state.current_trigger();
        if (!trig) throw std::logic_error("decision requested without a pending trigger");
        ServicePlan plan = build_plan(state, *trig, checks_, preemptive_);
        ApplyResult applied = apply_plan(state, plan, checks_);

        PhaseOutcome out;
        out.cost = applied.cost;
        PhaseRecord rec;
        rec.time = now;
        rec.major = "edge " + std::to_string(trig->elem);
        rec.key_edges = plan.key_edges.empty() ? std::vector<int>{trig->elem} : plan.key_edges;
        rec.traversed = applied.traversed;
        rec.cost = applied.cost;
        for (int r : plan.served) {
            int ext = state.requests[r].id;
            rec.served.push_back(ext);
            out.served.push_back({ext, now});
        }
        out.events.push_back({now, "phase", "major edge " + std::to_string(trig->elem) + ", " +
                                                std::to_string(plan.served.size()) + " served"});
        out.record = std::move(rec);
        last_plan_ = std::move(plan);
        return out;
    }

    void amend_deadline(int external_id, const Rat& deadline) {
        for (size_t i = 0; i < state.requests.size(); ++i)
            if (state.requests[i].id == external_id) {
                state.requests[i].penalty.deadline = deadline;
                return;
            }
    }

    std::string name() const override { return preemptive_ ? "ps" : "ps-critical"; }

    const ServicePlan& last_plan() const { return last_plan_; }

private:
    bool preemptive_;
    CheckLog* checks_ = nullptr;
    ServicePlan last_plan_;

    void sync_to(const Rat& now) {
        if (state.clock > now) throw PastTime();
        if (state.clock < now) {
            auto trig = state.accrue(now);
            if (trig && trig->time < now)
                throw std::logic_error("trigger passed before the engine acted on it");
        }
    }
};

}  // namespace osd
