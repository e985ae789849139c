#pragma once

// Problem instances: a space (tree, metric, or a set of pages for the
// uniform case), k servers with start positions, and timed requests with
// delay-penalty functions.

#include "osd/hst.hpp"
#include "osd/metric.hpp"
#include "osd/penalty.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace osd {

enum class SpaceKind { Tree, MetricSpace, Pages };

enum class ClairvoyanceMode { Clairvoyant, Nonclairvoyant };

struct ClairvoyanceViolation : std::runtime_error {
    ClairvoyanceViolation()
        : std::runtime_error("penalty queried beyond the current delay in nonclairvoyant mode") {}
};

struct Request {
    int id = 0;
    int where = 0;  // leaf node id (Tree), point index (MetricSpace), page index (Pages)
    Rat arrival;
    PenaltyFn penalty;
    bool operator==(const Request&) const = default;
};

struct Instance {
    SpaceKind kind = SpaceKind::Tree;
    std::optional<Hst> tree;
    std::optional<Metric> metric;
    std::vector<std::string> pages;
    int k = 1;
    std::vector<int> start;  // node ids / point indices / page indices, size k
    std::vector<Request> requests;  // sorted by (arrival, id)

    bool operator==(const Instance& o) const {
        if (kind != o.kind || k != o.k || start != o.start || requests != o.requests ||
            pages != o.pages)
            return false;
        if (kind == SpaceKind::Tree)
            return tree->parent == o.tree->parent && tree->len_exp == o.tree->len_exp &&
                   tree->root == o.tree->root && tree->leaf_of_point == o.tree->leaf_of_point;
        if (kind == SpaceKind::MetricSpace)
            return metric->points == o.metric->points && metric->dist == o.metric->dist;
        return true;
    }

    int location_count() const {
        switch (kind) {
            case SpaceKind::Tree: return tree->size();
            case SpaceKind::MetricSpace: return metric->size();
            case SpaceKind::Pages: return static_cast<int>(pages.size());
        }
        return 0;
    }

    std::vector<std::string> check() const {
        std::vector<std::string> out;
        if (k < 1) out.push_back("k must be >= 1");
        if (kind == SpaceKind::Tree) {
            for (const auto& v : validate_hst(*tree)) out.push_back(v.what);
        } else if (kind == SpaceKind::MetricSpace) {
            for (const auto& s : metric->check()) out.push_back(s);
        } else if (pages.empty()) {
            out.push_back("pages space with no pages");
        }
        if (static_cast<int>(start.size()) != k)
            out.push_back("start must list exactly k positions");
        for (int s : start)
            if (s < 0 || s >= location_count()) out.push_back("start position out of range");
        Rat prev(-1);
        for (const auto& r : requests) {
            if (r.where < 0 || r.where >= location_count())
                out.push_back("request " + std::to_string(r.id) + " references unknown location");
            else if (kind == SpaceKind::Tree && !tree->is_leaf(r.where))
                out.push_back("request " + std::to_string(r.id) + " is not at a leaf");
            if (r.arrival < 0) out.push_back("request " + std::to_string(r.id) + " arrives before 0");
            if (auto bad = r.penalty.check())
                out.push_back("request " + std::to_string(r.id) + ": " + *bad);
            if (r.arrival < prev) out.push_back("requests not sorted by arrival");
            prev = r.arrival;
        }
        return out;
    }

    void sort_requests() {
        std::stable_sort(requests.begin(), requests.end(),
                         [](const Request& a, const Request& b) {
                             return a.arrival != b.arrival ? a.arrival < b.arrival : a.id < b.id;
                         });
    }
};

// Read guard handed to algorithms: in nonclairvoyant mode only the penalty
// values accrued so far may be observed.
struct PenaltyView {
    const PenaltyFn* fn;
    Rat arrival;
    ClairvoyanceMode mode;

    void guard(const Rat& delay, const Rat& now) const {
        if (mode == ClairvoyanceMode::Nonclairvoyant && delay > now - arrival)
            throw ClairvoyanceViolation();
    }
    std::optional<Rat> value_at(const Rat& delay, const Rat& now) const {
        guard(delay, now);
        return fn->value_at(delay);
    }
    std::optional<Rat> rate_at(const Rat& delay, const Rat& now) const {
        guard(delay, now);
        return fn->rate_at(delay);
    }
};

}  // namespace osd
