#pragma once

// Delay-penalty functions: continuous piecewise-linear, nondecreasing,
// c(0) = 0, with an optional hard deadline after which the penalty is
// infinite. This class is closed under everything the simulator needs:
// saturation times come out of segment arithmetic in closed form.

#include "osd/rational.hpp"

#include <optional>
#include <vector>

namespace osd {

struct NegativeDelay : std::runtime_error {
    NegativeDelay() : std::runtime_error("negative delay") {}
};

struct PenaltySegment {
    Rat offset;  // delay at which this segment starts
    Rat slope;   // nonnegative
    bool operator==(const PenaltySegment&) const = default;
};

struct PenaltyFn {
    std::vector<PenaltySegment> segments;  // offsets strictly increasing, first is 0
    std::optional<Rat> deadline;           // penalty is +inf at delay >= deadline

    bool operator==(const PenaltyFn&) const = default;

    static PenaltyFn constant_rate(const Rat& slope) {
        return PenaltyFn{{{Rat(0), slope}}, std::nullopt};
    }
    static PenaltyFn deadline_only(const Rat& d) {
        return PenaltyFn{{{Rat(0), Rat(0)}}, d};
    }

    // Returns a description of the first broken invariant, if any.
    std::optional<std::string> check() const {
        if (segments.empty()) return "penalty has no segments";
        if (segments.front().offset != 0) return "first segment offset must be 0";
        for (size_t i = 0; i < segments.size(); ++i) {
            if (segments[i].slope < 0) return "negative slope";
            if (i > 0 && segments[i].offset <= segments[i - 1].offset)
                return "segment offsets not strictly increasing";
        }
        if (deadline && *deadline <= 0) return "deadline must be positive";
        return std::nullopt;
    }

    bool infinite_at(const Rat& delay) const { return deadline && delay >= *deadline; }

    // Piecewise-linear value ignoring the deadline; continuous in delay.
    Rat finite_value(const Rat& delay) const {
        if (delay < 0) throw NegativeDelay();
        Rat acc(0);
        for (size_t i = 0; i < segments.size(); ++i) {
            Rat seg_end = i + 1 < segments.size() ? segments[i + 1].offset : delay;
            if (seg_end > delay) seg_end = delay;
            if (seg_end <= segments[i].offset) break;
            acc += segments[i].slope * (seg_end - segments[i].offset);
        }
        return acc;
    }

    // Spec query semantics: nullopt encodes +inf (at or past the deadline).
    std::optional<Rat> value_at(const Rat& delay) const {
        if (delay < 0) throw NegativeDelay();
        if (infinite_at(delay)) return std::nullopt;
        return finite_value(delay);
    }

    // Right-derivative; nullopt encodes +inf at or past the deadline.
    std::optional<Rat> rate_at(const Rat& delay) const {
        if (delay < 0) throw NegativeDelay();
        if (infinite_at(delay)) return std::nullopt;
        Rat slope = segments.back().slope;
        for (size_t i = 0; i + 1 < segments.size(); ++i)
            if (delay < segments[i + 1].offset) { slope = segments[i].slope; break; }
        return slope;
    }

    // Accounting value for a request served with the given delay. Serving at
    // exactly the deadline is the last admissible instant and is charged the
    // finite limit; serving strictly later is not representable as a cost.
    Rat served_value(const Rat& delay) const {
        if (delay < 0) throw NegativeDelay();
        if (deadline && delay > *deadline)
            throw std::logic_error("request served strictly after its deadline");
        return finite_value(delay);
    }

    // Next delay > `delay` at which the rate changes (segment boundary or
    // deadline); nullopt when the current segment runs forever.
    std::optional<Rat> next_breakpoint_after(const Rat& delay) const {
        std::optional<Rat> best;
        for (size_t i = 1; i < segments.size(); ++i)
            if (segments[i].offset > delay) { best = segments[i].offset; break; }
        if (deadline && *deadline > delay && (!best || *deadline < *best)) best = *deadline;
        return best;
    }

    // First delay d >= from with finite_value(d) - finite_value(from) == amount,
    // ignoring the deadline. nullopt when the function flattens out before
    // accruing that much.
    std::optional<Rat> delay_for_accrual(const Rat& from, const Rat& amount) const {
        if (amount <= 0) return from;
        Rat need = amount;
        Rat at = from;
        for (size_t i = 0; i < segments.size(); ++i) {
            Rat seg_start = std::max(at, segments[i].offset);
            std::optional<Rat> seg_end;
            if (i + 1 < segments.size()) seg_end = segments[i + 1].offset;
            if (seg_end && *seg_end <= at) continue;
            const Rat& s = segments[i].slope;
            if (s > 0) {
                Rat reach = seg_start + need / s;
                if (!seg_end || reach <= *seg_end) return reach;
                need -= s * (*seg_end - seg_start);
            }
            if (seg_end) at = *seg_end;
        }
        return std::nullopt;
    }
};

// Free-function forms used throughout tests.
inline std::optional<Rat> penalty_at(const PenaltyFn& p, const Rat& delay) {
    return p.value_at(delay);
}
inline std::optional<Rat> penalty_rate_at(const PenaltyFn& p, const Rat& delay) {
    return p.rate_at(delay);
}

}  // namespace osd
