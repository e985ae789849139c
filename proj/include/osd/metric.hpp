#pragma once

// Finite metric spaces given by an explicit distance matrix.

#include "osd/rational.hpp"

#include <string>
#include <vector>

namespace osd {

struct Metric {
    std::vector<std::string> points;
    std::vector<std::vector<Rat>> dist;

    int size() const { return static_cast<int>(points.size()); }
    const Rat& d(int u, int v) const { return dist[u][v]; }

    int index_of(const std::string& p) const {
        for (int i = 0; i < size(); ++i)
            if (points[i] == p) return i;
        return -1;
    }

    // Symmetry, zero diagonal, positivity, triangle inequality. The triangle
    // check allows slack 1e-9 so that matrices produced from decimal data pass.
    std::vector<std::string> check() const {
        std::vector<std::string> out;
        int n = size();
        if (static_cast<int>(dist.size()) != n) {
            out.push_back("distance matrix row count mismatch");
            return out;
        }
        for (int i = 0; i < n; ++i)
            if (static_cast<int>(dist[i].size()) != n) {
                out.push_back("distance matrix column count mismatch");
                return out;
            }
        const Rat tol(1, 1000000000);
        for (int i = 0; i < n; ++i) {
            if (dist[i][i] != 0) out.push_back("nonzero self-distance at " + points[i]);
            for (int j = i + 1; j < n; ++j) {
                if (dist[i][j] != dist[j][i])
                    out.push_back("asymmetric distance " + points[i] + "," + points[j]);
                if (dist[i][j] <= 0)
                    out.push_back("nonpositive distance " + points[i] + "," + points[j]);
            }
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    if (dist[i][j] > dist[i][k] + dist[k][j] + tol) {
                        out.push_back("triangle violation " + points[i] + "," + points[j] +
                                      " via " + points[k]);
                        return out;
                    }
        return out;
    }

    Rat min_positive_distance() const {
        Rat m(0);
        for (int i = 0; i < size(); ++i)
            for (int j = i + 1; j < size(); ++j)
                if (m == 0 || dist[i][j] < m) m = dist[i][j];
        return m;
    }

    Rat max_distance() const {
        Rat m(0);
        for (int i = 0; i < size(); ++i)
            for (int j = i + 1; j < size(); ++j)
                if (dist[i][j] > m) m = dist[i][j];
        return m;
    }

    Rat aspect_ratio() const {
        Rat mn = min_positive_distance();
        return mn == 0 ? Rat(1) : max_distance() / mn;
    }
};

}  // namespace osd
