#pragma once

// Exact subset selection for powers of two: given a multiset of values 2^i,
// each below a target 2^j, whose sum is at least 2^j, pick a sub-multiset
// summing to exactly 2^j. Construction: trim the set until its sum is below
// (3/2)*2^j (each discarded element is at most 2^(j-1), so the sum cannot
// jump below 2^j), then induct on j with three cases on the number of
// elements of value 2^(j-1). Greedy steps walk values in non-increasing
// order, which makes every greedy prefix land on the half-target exactly:
// partial sums stay multiples of the next element.

#include "osd/rational.hpp"

#include <algorithm>
#include <map>
#include <vector>

namespace osd {

struct InsufficientSum : std::runtime_error {
    InsufficientSum() : std::runtime_error("element sum below target") {}
};
struct NonPowerOfTwo : std::runtime_error {
    explicit NonPowerOfTwo(const std::string& w) : std::runtime_error(w) {}
};

namespace detail {

// items: exponents sorted non-increasing, each < j, sum >= 2^j. Appends the
// chosen exponents to `out`.
inline void subset_exact_exps(std::vector<int> items, int j, std::vector<int>& out) {
    auto sum_of = [](const std::vector<int>& v) {
        Rat s(0);
        for (int e : v) s += pow2(e);
        return s;
    };
    Rat target = pow2(j);
    Rat sum = sum_of(items);
    if (sum < target) throw InsufficientSum();

    // Trim: discard smallest-first until the sum is below (3/2)*2^j.
    while (sum >= target * 3 / 2) {
        sum -= pow2(items.back());
        items.pop_back();
    }

    if (j <= 0) throw std::logic_error("subset target below 2 with nonempty input");
    if (j == 1) {
        // Only 1s possible; the trimmed sum lies in [2,3), i.e. two elements.
        out.push_back(0);
        out.push_back(0);
        return;
    }

    int halves = static_cast<int>(std::count(items.begin(), items.end(), j - 1));
    if (halves >= 2) {
        out.push_back(j - 1);
        out.push_back(j - 1);
        return;
    }
    if (halves == 1) {
        out.push_back(j - 1);
        std::vector<int> rest;
        bool skipped = false;
        for (int e : items) {
            if (e == j - 1 && !skipped) { skipped = true; continue; }
            rest.push_back(e);
        }
        subset_exact_exps(std::move(rest), j - 1, out);
        return;
    }
    // No element of value 2^(j-1): greedily peel two groups, each summing to
    // exactly 2^(j-1) (non-increasing order cannot overshoot), and recurse.
    std::vector<int> group_a, group_b;
    Rat acc(0);
    size_t idx = 0;
    for (; idx < items.size() && acc < pow2(j - 1); ++idx) {
        group_a.push_back(items[idx]);
        acc += pow2(items[idx]);
    }
    Rat accb(0);
    for (; idx < items.size() && accb < pow2(j - 1); ++idx) {
        group_b.push_back(items[idx]);
        accb += pow2(items[idx]);
    }
    subset_exact_exps(std::move(group_a), j - 1, out);
    subset_exact_exps(std::move(group_b), j - 1, out);
}

}  // namespace detail

// Same selection over labelled values; returns the chosen labels. Labels of
// equal value are consumed in ascending order, so the choice is
// deterministic.
inline std::vector<int> subset_exact_ids(const std::vector<std::pair<int, Rat>>& items,
                                         const Rat& target);

// Values must be powers of two <= target (a value equal to the target is
// returned alone); target must be a power of two; sum(values) >= target.
inline std::vector<Rat> subset_exact(std::vector<Rat> values, const Rat& target) {
    if (!is_power_of_two(target)) throw NonPowerOfTwo("target is not a power of two");
    Rat sum(0);
    std::vector<int> exps;
    int j = static_cast<int>(floor_log2(target));
    for (const auto& v : values) {
        if (!is_power_of_two(v)) throw NonPowerOfTwo("element is not a power of two");
        if (v == target) return {v};
        if (v > target) throw NonPowerOfTwo("element exceeds target");
        exps.push_back(static_cast<int>(floor_log2(v)));
        sum += v;
    }
    if (sum < target) throw InsufficientSum();
    std::sort(exps.begin(), exps.end(), std::greater<int>());
    std::vector<int> chosen;
    detail::subset_exact_exps(std::move(exps), j, chosen);
    std::vector<Rat> out;
    for (int e : chosen) out.push_back(pow2(e));
    return out;
}

inline std::vector<int> subset_exact_ids(const std::vector<std::pair<int, Rat>>& items,
                                         const Rat& target) {
    std::vector<Rat> values;
    values.reserve(items.size());
    for (const auto& [id, v] : items) values.push_back(v);
    std::vector<Rat> chosen = subset_exact(values, target);
    // Count how many of each value were chosen, then hand out ids ascending.
    std::map<Rat, int> want;
    for (const auto& v : chosen) ++want[v];
    std::vector<std::pair<Rat, int>> pool;  // (value, id)
    for (const auto& [id, v] : items) pool.push_back({v, id});
    std::sort(pool.begin(), pool.end());
    std::vector<int> out;
    for (const auto& [v, id] : pool) {
        auto it = want.find(v);
        if (it != want.end() && it->second > 0) {
            out.push_back(id);
            --it->second;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace osd
