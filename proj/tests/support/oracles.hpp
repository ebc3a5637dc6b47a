#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "kselect/dtree.hpp"

namespace oracle {

/// Labels correct under the best constant prediction of `idx`.
inline std::size_t majority_hits(std::span<const std::size_t> y, const std::vector<std::size_t>& idx,
                                 std::size_t n_classes)
{
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t i : idx) {
        ++counts[y[i]];
    }
    return idx.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
}

/// Candidate thresholds: every midpoint between consecutive distinct values.
inline std::vector<double> thresholds(const kselect::dtree::FeatureMatrix& x, const std::vector<std::size_t>& idx,
                                      std::size_t f)
{
    std::vector<double> v;
    for (std::size_t i : idx) {
        v.push_back(x.at(i, f));
    }
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    std::vector<double> t;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        t.push_back(v[i] + (v[i + 1] - v[i]) / 2);
    }
    return t;
}

/// Most training samples any threshold tree of depth <= `depth` classifies
/// correctly, by exhaustive enumeration.
inline std::size_t best_hits(const kselect::dtree::FeatureMatrix& x, std::span<const std::size_t> y,
                             const std::vector<std::size_t>& idx, std::size_t n_classes, int depth)
{
    std::size_t best = majority_hits(y, idx, n_classes);
    if (depth == 0 || idx.size() < 2) {
        return best;
    }
    for (std::size_t f = 0; f < x.n_features(); ++f) {
        for (double t : thresholds(x, idx, f)) {
            std::vector<std::size_t> l, r;
            for (std::size_t i : idx) {
                (x.at(i, f) <= t ? l : r).push_back(i);
            }
            best = std::max(best, best_hits(x, y, l, n_classes, depth - 1) + best_hits(x, y, r, n_classes, depth - 1));
        }
    }
    return best;
}

inline double best_depth2_accuracy(const kselect::dtree::FeatureMatrix& x, std::span<const std::size_t> y,
                                   std::size_t n_classes)
{
    std::vector<std::size_t> idx(y.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    return static_cast<double>(best_hits(x, y, idx, n_classes, 2)) / static_cast<double>(y.size());
}

/// 1 - sum p^2 from a class histogram.
inline double gini_direct(std::span<const std::size_t> labels)
{
    std::map<std::size_t, double> counts;
    for (std::size_t l : labels) {
        counts[l] += 1.0;
    }
    double s = 0.0;
    for (const auto& [_, c] : counts) {
        s += (c / static_cast<double>(labels.size())) * (c / static_cast<double>(labels.size()));
    }
    return 1.0 - s;
}

/// Kendall tau-b from pair counts, with tie corrections from group sizes.
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    std::int64_t c = 0, d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx * dy > 0) {
                ++c;
            } else if (dx * dy < 0) {
                ++d;
            }
        }
    }
    auto tied_pairs = [](std::span<const double> v) {
        std::map<double, std::int64_t> groups;
        for (double e : v) {
            ++groups[e];
        }
        std::int64_t t = 0;
        for (const auto& [_, g] : groups) {
            t += g * (g - 1) / 2;
        }
        return t;
    };
    const std::int64_t n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
    const std::int64_t ux = n0 - tied_pairs(x);
    const std::int64_t uy = n0 - tied_pairs(y);
    if (ux == 0 || uy == 0) {
        throw std::domain_error("all tied");
    }
    return static_cast<double>(c - d) / std::sqrt(static_cast<double>(ux) * static_cast<double>(uy));
}

} // namespace oracle
