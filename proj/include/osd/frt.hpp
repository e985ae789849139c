#pragma once

// Probabilistic embedding of a finite metric into a 2-HST by random
// hierarchical decomposition: a random permutation fixes center priorities,
// a random radius multiplier beta in [1,2) (log-uniform) scales every level,
// and each point joins the first center in permutation order within the
// level radius. Tree distances dominate metric distances on every sample.

#include "osd/hst.hpp"
#include "osd/metric.hpp"

#include <numeric>
#include <random>

namespace osd {

struct EmptyMetric : std::runtime_error {
    EmptyMetric() : std::runtime_error("cannot embed an empty metric") {}
};

struct EmbeddingSample {
    Hst hst;
    std::uint64_t seed = 0;
    Rat scale = 1;  // distances were multiplied by this before embedding
    // Per unordered pair (i < j): metric distance (original units) and tree
    // distance in tree units; tree/ (metric*scale) is the distortion.
    struct PairStat {
        int u, v;
        Rat d_metric;
        Rat d_tree;
    };
    std::vector<PairStat> pairs;
};

namespace detail {
// Dyadic approximation of 2^u for u in [0,1), quantized to 2^-20 steps; the
// exact distribution of beta only affects the distortion constant, not the
// domination or tree-validity guarantees.
inline Rat beta_from(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint64_t> bits(0, (1u << 20) - 1);
    double u = static_cast<double>(bits(rng)) / static_cast<double>(1u << 20);
    double b = std::exp2(u);
    auto num = static_cast<long long>(b * (1 << 20));
    Rat beta(num, 1 << 20);
    if (beta < 1) beta = 1;
    if (beta >= 2) beta = Rat((1 << 21) - 1, 1 << 20);
    return beta;
}
}  // namespace detail

inline EmbeddingSample frt_embed(const Metric& m, std::uint64_t seed) {
    int n = m.size();
    if (n == 0) throw EmptyMetric();

    EmbeddingSample sample;
    sample.seed = seed;

    if (n == 1) {
        Hst t;
        t.parent = {-1};
        t.len_exp = {0};
        t.leaf_of_point[m.points[0]] = 0;
        t.finalize();
        sample.hst = std::move(t);
        return sample;
    }

    // Scale so the minimum distance is >= 1 (power-of-two scale).
    Rat mn = m.min_positive_distance();
    Rat scale(1);
    if (mn < 1) scale = pow2(-floor_log2(mn));
    sample.scale = scale;
    auto d = [&](int a, int b) { return m.d(a, b) * scale; };

    Rat diam = m.max_distance() * scale;
    long top = floor_log2(diam) + 2;  // beta*2^(top-1) >= diameter for any beta >= 1

    std::mt19937_64 rng(seed);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        std::uniform_int_distribution<int> pick(0, i);
        std::swap(perm[i], perm[pick(rng)]);
    }
    Rat beta = detail::beta_from(rng);

    // Level-by-level refinement. A cluster at level L splits into children at
    // level L-1 using radius beta*2^(L-1); by level 0 all clusters are
    // singletons because beta/2 < 1 <= min distance.
    Hst t;
    t.parent.push_back(-1);
    t.len_exp.push_back(0);
    struct Cluster {
        int node;
        long level;
        std::vector<int> members;
    };
    std::vector<Cluster> work;
    {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        work.push_back({0, top, std::move(all)});
    }
    std::vector<int> leaf_node(n, -1);
    while (!work.empty()) {
        Cluster c = std::move(work.back());
        work.pop_back();
        if (c.level == 0) {
            leaf_node[c.members[0]] = c.node;
            continue;
        }
        // Children live at level c.level-1 and are carved with radius
        // beta*2^(level-2), so level-0 clusters see radius beta/2 < 1 and are
        // singletons.
        Rat radius = beta * pow2(c.level - 2);
        // Group members by their first admissible center in permutation order.
        std::map<int, std::vector<int>> groups;  // key: position in perm
        for (int p : c.members) {
            for (int pos = 0; pos < n; ++pos) {
                if (d(p, perm[pos]) <= radius) {
                    groups[pos].push_back(p);
                    break;
                }
            }
        }
        for (auto& [pos, pts] : groups) {
            int child = t.size();
            t.parent.push_back(c.node);
            t.len_exp.push_back(static_cast<int>(c.level));
            work.push_back({child, c.level - 1, std::move(pts)});
        }
    }
    for (int p = 0; p < n; ++p) t.leaf_of_point[m.points[p]] = leaf_node[p];
    t.finalize();

    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            sample.pairs.push_back({u, v, m.d(u, v), t.dist(leaf_node[u], leaf_node[v])});
    sample.hst = std::move(t);
    return sample;
}

}  // namespace osd
