#pragma once

// Deterministic event-driven engine. Time advances to the next of (request
// arrival, algorithm decision); arrivals win ties. Serving phases execute
// with zero elapsed simulated time. All accounting is exact.

#include "osd/checks.hpp"
#include "osd/instance.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace osd {

struct AlgorithmContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceEvent {
    Rat time;
    std::string kind;    // arrival, phase, traverse, serve, reset, note
    std::string detail;
};

struct PhaseRecord {
    Rat time;
    std::string major;            // printable description of the trigger
    std::vector<int> key_edges;
    std::vector<int> traversed;   // edge ids
    std::vector<int> served;      // external request ids
    Rat cost;
};

struct PhaseOutcome {
    Rat cost;
    std::vector<std::pair<int, Rat>> served;  // external request id, serve time
    std::optional<PhaseRecord> record;
    std::vector<TraceEvent> events;
};

// Callbacks the engine drives. The engine owns event ordering; the algorithm
// owns its counters and movement.
struct AlgorithmPort {
    virtual ~AlgorithmPort() = default;
    virtual void start(const Instance& inst, ClairvoyanceMode mode, CheckLog* checks) = 0;
    // Requests served immediately on arrival (collocated with a server).
    virtual std::vector<int> on_arrival(const Request& r, const Rat& now) = 0;
    // Earliest decision in (now, limit], if any. now itself is allowed.
    virtual std::optional<Rat> next_decision_time(const Rat& now, const Rat& limit) = 0;
    virtual PhaseOutcome on_decision(const Rat& now) = 0;
    virtual std::string name() const = 0;
};

struct CostReport {
    Rat service_cost;
    Rat delay_penalty;     // served requests only
    Rat horizon_penalty;   // unserved at the horizon, finite part
    bool penalty_infinite = false;  // an unserved request sat past its deadline
    Rat physical_cost;     // metric realization of tree movement, when applicable
    std::vector<PhaseRecord> phases;
    std::vector<int> unserved;  // external ids
    std::vector<std::string> violations;
    std::vector<std::string> diagnostics;

    Rat total() const { return service_cost + delay_penalty + horizon_penalty; }
};

using Trace = std::vector<TraceEvent>;

class Simulation {
public:
    Simulation(Instance inst, AlgorithmPort* alg, ClairvoyanceMode mode, Rat horizon,
               bool strict_checks = true)
        : inst_(std::move(inst)), alg_(alg), mode_(mode), horizon_(std::move(horizon)) {
        checks_.strict = strict_checks;
        alg_->start(inst_, mode_, &checks_);
        pending_ = inst_.requests;
    }

    const Rat& now() const { return now_; }
    const Instance& instance() const { return inst_; }
    const std::vector<std::pair<int, Rat>>& served() const { return served_; }
    CheckLog& checks() { return checks_; }
    Trace& trace() { return trace_; }

    // Adaptive interfaces (used by the adversary driver).
    void inject_request(Request r) {
        if (r.arrival < now_) throw std::logic_error("injected request arrives in the past");
        pending_.push_back(std::move(r));
        std::stable_sort(pending_.begin(), pending_.end(),
                         [](const Request& a, const Request& b) {
                             return a.arrival != b.arrival ? a.arrival < b.arrival
                                                          : a.id < b.id;
                         });
    }
    // Tightens an unserved request's penalty; only future values may change,
    // which is invisible to a nonclairvoyant algorithm. Already-arrived
    // requests are amended both here and inside the algorithm via the hook.
    void amend_deadline(int external_id, const Rat& deadline) {
        for (auto& r : pending_)
            if (r.id == external_id) {
                r.penalty.deadline = deadline;
                return;
            }
        for (auto& r : live_)
            if (r.id == external_id) {
                r.penalty.deadline = deadline;
                if (amend_hook_) amend_hook_(external_id, deadline);
                return;
            }
        throw std::logic_error("amend target not found");
    }
    void set_amend_hook(std::function<void(int, const Rat&)> h) { amend_hook_ = std::move(h); }

    // Runs until `until` (clamped to the horizon). Returns false once the
    // horizon is reached and everything is settled.
    bool run_until(const Rat& until_raw) {
        Rat until = std::min(until_raw, horizon_);
        if (until < now_) return until_raw < horizon_;
        while (true) {
            std::optional<Rat> arrival;
            if (next_arrival_ < pending_.size()) arrival = pending_[next_arrival_].arrival;
            std::optional<Rat> decision = alg_->next_decision_time(now_, until);
            if (decision && *decision < now_)
                throw AlgorithmContractViolation("decision time in the past");

            // Arrivals win ties, so they are checked last with <=.
            Rat t = until;
            bool take_arrival = false, take_decision = false;
            if (decision && *decision <= t) {
                t = *decision;
                take_decision = true;
            }
            if (arrival && *arrival <= t) {
                t = *arrival;
                take_arrival = true;
                take_decision = false;
            }

            now_ = t;
            if (take_arrival) {
                const Request& r = pending_[next_arrival_++];
                trace_.push_back({now_, "arrival", "request " + std::to_string(r.id)});
                live_.push_back(r);
                auto instant = alg_->on_arrival(r, now_);
                for (int id : instant) account_serve(id, now_);
                continue;
            }
            if (take_decision) {
                PhaseOutcome out = alg_->on_decision(now_);
                service_cost_ += out.cost;
                if (out.record) phases_.push_back(*out.record);
                for (const auto& ev : out.events) trace_.push_back(ev);
                for (const auto& [id, when] : out.served) {
                    if (when != now_)
                        throw AlgorithmContractViolation("serve time differs from decision time");
                    account_serve(id, when);
                }
                continue;
            }
            return until < horizon_;
        }
    }

    CostReport finish() {
        run_until(horizon_);
        CostReport rep;
        rep.service_cost = service_cost_;
        rep.delay_penalty = delay_penalty_;
        rep.physical_cost = physical_cost_;
        rep.phases = phases_;
        for (const auto& r : live_)
            if (!is_served(r.id)) {
                rep.unserved.push_back(r.id);
                Rat delay = horizon_ - r.arrival;
                if (r.penalty.infinite_at(delay)) rep.penalty_infinite = true;
                rep.horizon_penalty += r.penalty.finite_value(delay);
            }
        rep.violations = checks_.violations;
        rep.diagnostics = checks_.diagnostics;
        return rep;
    }

    void add_physical_cost(const Rat& c) { physical_cost_ += c; }

private:
    Instance inst_;
    AlgorithmPort* alg_;
    ClairvoyanceMode mode_;
    Rat horizon_;
    Rat now_;
    CheckLog checks_;
    std::vector<Request> pending_;  // sorted by arrival; next_arrival_ indexes it
    size_t next_arrival_ = 0;
    std::vector<Request> live_;     // arrived requests
    std::vector<std::pair<int, Rat>> served_;
    Rat service_cost_, delay_penalty_, physical_cost_;
    std::vector<PhaseRecord> phases_;
    Trace trace_;
    std::function<void(int, const Rat&)> amend_hook_;

    bool is_served(int id) const {
        for (const auto& [sid, _] : served_)
            if (sid == id) return true;
        return false;
    }

    const Request& live_request(int id) const {
        for (const auto& r : live_)
            if (r.id == id) return r;
        throw AlgorithmContractViolation("served a request that has not arrived");
    }

    void account_serve(int id, const Rat& when) {
        if (is_served(id)) throw AlgorithmContractViolation("request served twice");
        const Request& r = live_request(id);
        delay_penalty_ += r.penalty.served_value(when - r.arrival);
        served_.push_back({id, when});
        trace_.push_back({when, "serve", "request " + std::to_string(id)});
    }
};

// Convenience wrapper matching the one-shot contract.
inline std::pair<CostReport, Trace> run(const Instance& inst, AlgorithmPort* alg,
                                        ClairvoyanceMode mode, const Rat& horizon,
                                        bool strict_checks = true) {
    Simulation sim(inst, alg, mode, horizon, strict_checks);
    CostReport rep = sim.finish();
    Trace tr = std::move(sim.trace());
    return {std::move(rep), std::move(tr)};
}

}  // namespace osd
