#pragma once

// Waiting-phase state: one counter table per server. Every unserved request
// feeds its instantaneous penalty rate into the nearest unsaturated element
// on its path to each server, switching elements exactly when one saturates.
// A waiting phase ends the moment some unserved request's major element (the
// longest on its path, ties to the request side) is saturated.
//
// Servers may sit in the middle of an edge; the residual piece of that edge,
// as seen from the request's side, then acts as a path element of its own
// with capacity equal to its length.

#include "osd/checks.hpp"
#include "osd/hst.hpp"
#include "osd/instance.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace osd {

struct PastTime : std::runtime_error {
    PastTime() : std::runtime_error("accrue target is in the past") {}
};
struct PathFullySaturated : std::runtime_error {
    PathFullySaturated() : std::runtime_error("request path fully saturated without a trigger") {}
};

struct ServerPos {
    int node = -1;        // >= 0 when at a node
    int edge_child = -1;  // >= 0 when on edge (parent, edge_child)
    Rat offset;           // distance from the child endpoint, in (0, len)

    bool at_node() const { return node >= 0; }
    bool operator==(const ServerPos&) const = default;
    static ServerPos at(int v) { return {v, -1, Rat(0)}; }
    static ServerPos on_edge(int child, Rat off) { return {-1, child, std::move(off)}; }
};

struct PathElem {
    int id;   // real edge: child node id; segment: seg_id()
    Rat cap;  // edge length or segment length
    bool segment = false;
};

struct Trigger {
    Rat time;
    int server;
    int elem;
    bool operator==(const Trigger&) const = default;
};

class CounterState {
public:
    const Hst* tree = nullptr;
    Rat clock;
    std::vector<Request> requests;  // by position; ids must match positions
    std::set<int> unserved;

    struct PerServer {
        ServerPos pos;
        std::map<int, Rat> w;
        std::set<int> saturated;
        std::map<int, std::map<int, Rat>> contrib;  // elem -> request -> amount
    };
    std::vector<PerServer> servers;

    CheckLog* checks = nullptr;  // optional

    int seg_id(int server, int side) const { return tree->size() + 2 * server + side; }
    bool is_segment(int elem) const { return elem >= tree->size(); }

    void init(const Hst& t, const std::vector<ServerPos>& starts, Rat start_clock = Rat(0)) {
        tree = &t;
        clock = std::move(start_clock);
        servers.assign(starts.size(), {});
        for (size_t s = 0; s < starts.size(); ++s) servers[s].pos = starts[s];
        rebuild_paths();
    }

    // True when the server position lies in the subtree below edge v
    // (position on edge v itself counts as inside).
    bool server_in_subtree(int s, int v) const {
        const ServerPos& p = servers[s].pos;
        int probe = p.at_node() ? p.node : p.edge_child;
        return tree->is_ancestor(v, probe);
    }

    Rat elem_cap(int s, int elem) const {
        if (!is_segment(elem)) return tree->edge_len(elem);
        const ServerPos& p = servers[s].pos;
        int side = (elem - tree->size()) % 2;
        return side == 0 ? p.offset : tree->edge_len(p.edge_child) - p.offset;
    }

    const Rat& weight(int s, int elem) const {
        static const Rat zero(0);
        auto it = servers[s].w.find(elem);
        return it == servers[s].w.end() ? zero : it->second;
    }
    bool saturated(int s, int elem) const { return servers[s].saturated.count(elem) > 0; }

    // Path from a request's leaf toward server s, ordered from the request.
    std::vector<PathElem> build_path(int leaf, int s) const {
        const ServerPos& p = servers[s].pos;
        std::vector<PathElem> out;
        if (p.at_node()) {
            for (int e : tree->path_edges(leaf, p.node)) out.push_back({e, tree->edge_len(e)});
            return out;
        }
        int child = p.edge_child;
        if (tree->is_ancestor(child, leaf)) {
            for (int e : tree->path_edges(leaf, child)) out.push_back({e, tree->edge_len(e)});
            if (p.offset > 0) out.push_back({seg_id(s, 0), p.offset, true});
        } else {
            int top = tree->parent[child];
            for (int e : tree->path_edges(leaf, top)) out.push_back({e, tree->edge_len(e)});
            Rat above = tree->edge_len(child) - p.offset;
            if (above > 0) out.push_back({seg_id(s, 1), above, true});
        }
        return out;
    }

    // Longest element, ties resolved toward the request (first maximum).
    static int major_of(const std::vector<PathElem>& path) {
        int best = -1;
        const Rat* cap = nullptr;
        for (const auto& pe : path)
            if (!cap || pe.cap > *cap) {
                best = pe.id;
                cap = &pe.cap;
            }
        return best;
    }

    void rebuild_paths() {
        paths_.clear();
        majors_.clear();
        for (int r : unserved) index_request(r);
    }

    // Returns the internal index; `requests[idx].id` keeps the external id.
    int add_request(const Request& r) {
        int idx = static_cast<int>(requests.size());
        requests.push_back(r);
        unserved.insert(idx);
        index_request(idx);
        return idx;
    }

    // Unserved requests located exactly at some server's node position.
    std::vector<int> collocated_unserved() const {
        std::vector<int> out;
        for (int r : unserved)
            for (const auto& sv : servers)
                if (sv.pos.at_node() && sv.pos.node == requests[r].where) {
                    out.push_back(r);
                    break;
                }
        return out;
    }

    void mark_served(int r) {
        unserved.erase(r);
        paths_.erase(r);
        majors_.erase(r);
    }

    // Removes every counter contribution made by request r (used by the
    // k-server variant so that stale weight from served requests does not
    // linger on untraversed edges).
    void subtract_contributions(int r) {
        for (auto& sv : servers) {
            std::vector<int> dead;
            for (auto& [elem, by_req] : sv.contrib) {
                auto it = by_req.find(r);
                if (it == by_req.end()) continue;
                sv.w[elem] -= it->second;
                by_req.erase(it);
                if (sv.w[elem] < elem_cap(server_index(sv), elem)) sv.saturated.erase(elem);
                if (sv.w[elem] == 0) sv.w.erase(elem);
                if (by_req.empty()) dead.push_back(elem);
            }
            for (int e : dead) sv.contrib.erase(e);
        }
        frontier_dirty_ = true;
    }

    // Zeroes the counters of one real edge for every server.
    void reset_edge_for_all(int edge) {
        for (auto& sv : servers) {
            sv.w.erase(edge);
            sv.saturated.erase(edge);
            sv.contrib.erase(edge);
        }
        frontier_dirty_ = true;
    }

    // Drops segment counters of server s (meaningless once it moves).
    void drop_segments(int s) {
        for (int side = 0; side < 2; ++side) {
            int id = seg_id(s, side);
            servers[s].w.erase(id);
            servers[s].saturated.erase(id);
            servers[s].contrib.erase(id);
        }
    }

    void move_server(int s, const ServerPos& to) {
        drop_segments(s);
        servers[s].pos = to;
        rebuild_paths();
    }

    const std::vector<PathElem>& path(int r, int s) const { return paths_.at(r)[s]; }
    int major(int r, int s) const { return majors_.at(r)[s]; }

    // Earliest pending trigger at the current clock, if any: a saturated
    // element that is the major of some unserved request; ties by
    // (server id, element id).
    std::optional<Trigger> current_trigger() const {
        std::optional<Trigger> best;
        for (int s = 0; s < static_cast<int>(servers.size()); ++s) {
            for (int r : unserved) {
                int m = majors_.at(r)[s];
                if (m < 0 || !saturated(s, m)) continue;
                if (!best || m < best->elem) best = Trigger{clock, s, m};
            }
            if (best) break;  // lower server id wins outright
        }
        return best;
    }

    // Advances the waiting phase to `until` or to the first trigger,
    // whichever is earlier. Penalty rates feed counters continuously;
    // deadlines saturate the remaining path up to the major element as a
    // zero-duration cascade.
    std::optional<Trigger> accrue(const Rat& until) {
        if (until < clock) throw PastTime();
        while (true) {
            run_deadline_cascades();
            if (auto t = current_trigger()) return t;
            if (clock >= until) return std::nullopt;

            // Constant-rate window: find the next event.
            std::map<std::pair<int, int>, Rat> inflow;  // (server, elem) -> rate
            std::vector<std::pair<int, Rat>> rates;     // (request, rate)
            for (int r : unserved) {
                Rat delay = clock - requests[r].arrival;
                auto rate = requests[r].penalty.rate_at(delay);
                if (!rate) throw std::logic_error("request past its deadline during accrual");
                if (*rate == 0) continue;
                rates.push_back({r, *rate});
                for (int s = 0; s < static_cast<int>(servers.size()); ++s) {
                    int elem = frontier_elem(r, s);
                    if (elem < 0) throw PathFullySaturated();
                    inflow[{s, elem}] += *rate;
                }
            }
            Rat t_next = until;
            for (const auto& [key, rate] : inflow) {
                Rat t_sat = clock + (elem_cap(key.first, key.second) - weight(key.first, key.second)) / rate;
                if (t_sat < t_next) t_next = t_sat;
            }
            for (int r : unserved) {
                auto bp = requests[r].penalty.next_breakpoint_after(clock - requests[r].arrival);
                if (bp) {
                    Rat t_bp = requests[r].arrival + *bp;
                    if (t_bp > clock && t_bp < t_next) t_next = t_bp;
                }
            }
            if (t_next > clock) {
                Rat dt = t_next - clock;
                for (const auto& [r, rate] : rates)
                    for (int s = 0; s < static_cast<int>(servers.size()); ++s)
                        push(s, frontier_elem(r, s), r, rate * dt);
                clock = t_next;
            }
            settle_saturations();
        }
    }

private:
    // paths_[r][s], majors_[r][s]
    std::map<int, std::vector<std::vector<PathElem>>> paths_;
    std::map<int, std::vector<int>> majors_;
    mutable std::map<std::pair<int, int>, size_t> frontier_;  // (r,s) -> path index hint
    mutable bool frontier_dirty_ = false;

    int server_index(const PerServer& sv) const {
        return static_cast<int>(&sv - servers.data());
    }

    void index_request(int r) {
        int k = static_cast<int>(servers.size());
        auto& ps = paths_[r];
        auto& ms = majors_[r];
        ps.assign(k, {});
        ms.assign(k, -1);
        for (int s = 0; s < k; ++s) {
            ps[s] = build_path(requests[r].where, s);
            ms[s] = major_of(ps[s]);
        }
        frontier_dirty_ = true;
    }

    int frontier_elem(int r, int s) const {
        if (frontier_dirty_) {
            frontier_.clear();
            frontier_dirty_ = false;
        }
        const auto& p = paths_.at(r)[s];
        size_t& hint = frontier_[{r, s}];
        if (hint > p.size()) hint = 0;
        while (hint < p.size() && saturated(s, p[hint].id)) ++hint;
        if (hint == p.size()) return -1;
        return p[hint].id;
    }

    void push(int s, int elem, int r, Rat amount) {
        if (amount == 0) return;
        if (checks && !is_segment(elem)) {
            if (server_in_subtree(s, elem))
                checks->require(majors_.at(r)[s] == elem,
                                "weight pushed onto an edge by a request outside its scope");
            else
                checks->require(tree->is_ancestor(elem, requests[r].where),
                                "weight pushed onto an edge by a request outside its subtree");
        }
        auto& sv = servers[s];
        sv.w[elem] += amount;
        sv.contrib[elem][r] += amount;
        if (checks)
            checks->require(sv.w[elem] <= elem_cap(s, elem), "counter exceeded element capacity");
    }

    void settle_saturations() {
        for (int s = 0; s < static_cast<int>(servers.size()); ++s)
            for (const auto& [elem, wt] : servers[s].w)
                if (wt == elem_cap(s, elem)) {
                    if (!servers[s].saturated.count(elem)) {
                        servers[s].saturated.insert(elem);
                        frontier_dirty_ = true;
                    }
                }
    }

    // Saturate every remaining element up to and including the major element
    // for requests whose deadline is due. Request-id then path order; all
    // servers' tables cascade at the same instant.
    void run_deadline_cascades() {
        for (int r : unserved) {
            const auto& pen = requests[r].penalty;
            if (!pen.deadline) continue;
            Rat delay = clock - requests[r].arrival;
            if (delay < *pen.deadline) continue;
            if (checks)
                checks->require(delay == *pen.deadline,
                                "unserved request strictly past its deadline");
            for (int s = 0; s < static_cast<int>(servers.size()); ++s) {
                const auto& p = paths_.at(r)[s];
                int m = majors_.at(r)[s];
                for (const auto& pe : p) {
                    if (!saturated(s, pe.id)) {
                        push(s, pe.id, r, elem_cap(s, pe.id) - weight(s, pe.id));
                        servers[s].saturated.insert(pe.id);
                        frontier_dirty_ = true;
                    }
                    if (pe.id == m) break;
                }
            }
        }
    }
};

}  // namespace osd
