#pragma once

// Independent reference computations, written without the library's helpers.

#include "devfp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace devfp::testing {

/// Entropy straight from the definition: -sum p log2 p over nonzero counts.
inline double oracle_entropy(const std::vector<double>& counts)
{
    double n = 0;
    for (double c : counts)
        n += c;
    double h = 0;
    for (double c : counts)
        if (c > 0)
            h -= (c / n) * std::log2(c / n);
    return h;
}

struct OracleScore {
    double gain_ratio = 0;
    double info_gain = 0; // scaled by present fraction
    bool has_threshold = false;
    double threshold = 0;
};

/// Gain ratio of the best single threshold, recounting every candidate from scratch.
inline OracleScore oracle_gain_ratio(const std::vector<Cell>& column, const std::vector<std::size_t>& labels,
                                     std::size_t classes)
{
    std::vector<double> values;
    std::vector<double> parent(classes, 0);
    std::size_t present = 0;
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (!column[i])
            continue;
        values.push_back(*column[i]);
        parent[labels[i]] += 1;
        ++present;
    }
    OracleScore out;
    if (present < 2)
        return out;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const auto nonzero = std::count_if(parent.begin(), parent.end(), [](double c) { return c > 0; });
    if (values.size() < 2 || nonzero < 2)
        return out;

    const double h_parent = oracle_entropy(parent);
    double best_gain = -1, best_split_info = 0;
    for (std::size_t t = 0; t + 1 < values.size(); ++t) {
        const double threshold = (values[t] + values[t + 1]) / 2;
        std::vector<double> left(classes, 0), right(classes, 0);
        double nl = 0, nr = 0;
        for (std::size_t i = 0; i < column.size(); ++i) {
            if (!column[i])
                continue;
            if (*column[i] <= threshold) {
                left[labels[i]] += 1;
                nl += 1;
            } else {
                right[labels[i]] += 1;
                nr += 1;
            }
        }
        const double n = nl + nr;
        const double gain = h_parent - nl / n * oracle_entropy(left) - nr / n * oracle_entropy(right);
        if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best_split_info = oracle_entropy({nl, nr});
            out.has_threshold = true;
            out.threshold = threshold;
        }
    }
    const double fraction = static_cast<double>(present) / static_cast<double>(column.size());
    out.info_gain = std::max(0.0, best_gain * fraction);
    out.gain_ratio = out.info_gain > 1e-12 ? out.info_gain / best_split_info : 0.0;
    return out;
}

} // namespace devfp::testing
