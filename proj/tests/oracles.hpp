#pragma once

// Test-only reference implementations. These stay deliberately independent
// of the library's computation paths: the AUC oracle enumerates every
// ordered pair, the AP oracle recounts the confusion table from scratch at
// each threshold, and the persistence oracle builds the conditioning set
// explicitly.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mmu/core.hpp"

namespace oracle {

inline double roc_auc(const std::vector<double>& forget, const std::vector<double>& retain) {
    long long wins2 = 0;
    for (double f : forget) {
        for (double r : retain) {
            if (f > r) {
                wins2 += 2;
            } else if (f == r) {
                wins2 += 1;
            }
        }
    }
    return static_cast<double>(wins2) /
           static_cast<double>(2 * static_cast<long long>(forget.size()) *
                               static_cast<long long>(retain.size()));
}

inline double average_precision(const std::vector<double>& forget,
                                const std::vector<double>& retain) {
    std::vector<double> thresholds;
    thresholds.reserve(forget.size() + retain.size());
    thresholds.insert(thresholds.end(), forget.begin(), forget.end());
    thresholds.insert(thresholds.end(), retain.begin(), retain.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const double n_pos = static_cast<double>(forget.size());
    double ap = 0.0;
    double recall_prev = 0.0;
    for (double threshold : thresholds) {
        long long tp = 0;
        long long fp = 0;
        for (double f : forget) {
            if (f >= threshold) ++tp;
        }
        for (double r : retain) {
            if (r >= threshold) ++fp;
        }
        const double recall = static_cast<double>(tp) / n_pos;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - recall_prev) * precision;
        recall_prev = recall;
    }
    return ap;
}

/// Numerator and denominator of ps(l1, l2) by direct set construction.
struct PersistenceCounts {
    std::set<std::string> forgotten_in_l1;            // I(l1)
    std::set<std::string> forgotten_l1_retained_l2;   // numerator set
};

inline PersistenceCounts persistence_sets(const mmu::EvalMatrix& matrix, const std::string& l1,
                                          const std::string& l2) {
    PersistenceCounts counts;
    for (const auto& id : matrix.spec().forget_ids()) {
        if (*matrix.at(id, l1).se == 0) {
            counts.forgotten_in_l1.insert(id);
            if (*matrix.at(id, l2).se == 1) {
                counts.forgotten_l1_retained_l2.insert(id);
            }
        }
    }
    return counts;
}

} // namespace oracle
