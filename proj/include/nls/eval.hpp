#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "parallel.hpp"

namespace nls {

/// Permutation search is exhaustive, so both labelings may use at most this many labels.
inline constexpr int kMaxMatchedLabels = 10;

/// Fraction of points mislabeled under the best one-to-one matching of
/// predicted to true labels.
inline double misclassification_rate(const Labeling& pred, const Labeling& truth) {
    if (pred.size() != truth.size())
        throw DimensionError("label vectors differ in length (" + std::to_string(pred.size()) + " vs " +
                             std::to_string(truth.size()) + ")");
    if (pred.empty()) throw InputError("cannot score empty labelings");

    auto compress = [](const Labeling& l) {
        std::vector<int> ids(l.begin(), l.end());
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        std::vector<int> out(l.size());
        for (std::size_t i = 0; i < l.size(); ++i)
            out[i] = static_cast<int>(std::lower_bound(ids.begin(), ids.end(), l[i]) - ids.begin());
        return std::pair{out, static_cast<int>(ids.size())};
    };
    const auto [p, np] = compress(pred);
    const auto [t, nt] = compress(truth);
    const int size = std::max(np, nt);
    if (size > kMaxMatchedLabels)
        throw ParameterError("misclassification rate supports at most " + std::to_string(kMaxMatchedLabels) +
                             " labels");

    std::vector<std::int64_t> confusion(static_cast<std::size_t>(size * size), 0);
    for (std::size_t i = 0; i < p.size(); ++i) ++confusion[static_cast<std::size_t>(p[i] * size + t[i])];

    std::vector<int> perm(static_cast<std::size_t>(size));
    std::iota(perm.begin(), perm.end(), 0);
    std::int64_t best = 0;
    do {
        std::int64_t hit = 0;
        for (int k = 0; k < size; ++k) hit += confusion[static_cast<std::size_t>(k * size + perm[k])];
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));

    const auto total = static_cast<std::int64_t>(pred.size());
    return static_cast<double>(total - best) / static_cast<double>(total);
}

/// Squared chordal distance sum_l sin^2(theta_l) between every pair of local subspaces.
inline Matrix chordal_affinity(const LocalBasisSet& bases) {
    const auto n = static_cast<Eigen::Index>(bases.size());
    if (n == 0) return Matrix(0, 0);
    for (const auto& b : bases)
        if (b.dim() != bases.front().dim() || b.ambient_dim() != bases.front().ambient_dim())
            throw DimensionError("chordal affinity needs bases of one common dimension");

    Matrix out = Matrix::Zero(n, n);
    parallel_for(bases.size(), [&](std::size_t i) {
        for (std::size_t j = i + 1; j < bases.size(); ++j) {
            double s = 0.0;
            for (double theta : principal_angles(bases[i], bases[j])) s += std::sin(theta) * std::sin(theta);
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
        }
    });
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j) out(i, j) = out(j, i);
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct SequenceResult {
    std::string name;
    std::string group;  // checker | traffic | articulated | synthetic
    int num_motions = 0;
    double error_rate = 0.0;
};

struct GroupStats {
    std::string group;
    std::size_t count = 0;
    double average = 0.0;  // fractions, not percent
    double median = 0.0;
};

struct AggregateReport {
    std::vector<GroupStats> groups;  // fixed group order, only groups that occur
    GroupStats overall;
};

/// "1.00%" style rendering of a fraction.
inline std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
    return buf;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw InputError("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) throw InputError("mean of an empty list");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline GroupStats group_stats(const std::string& name, const std::vector<double>& errors) {
    return {name, errors.size(), mean_of(errors), median_of(errors)};
}

inline AggregateReport aggregate(const std::vector<SequenceResult>& results) {
    if (results.empty()) throw InputError("nothing to aggregate");
    static const std::vector<std::string> order{"checker", "traffic", "articulated", "synthetic"};

    std::map<std::string, std::vector<double>> by_group;
    std::vector<double> all;
    for (const auto& r : results) {
        if (!(r.error_rate >= 0.0 && r.error_rate <= 1.0))
            throw InputError("error rate of " + r.name + " is outside [0, 1]");
        by_group[r.group].push_back(r.error_rate);
        all.push_back(r.error_rate);
    }

    AggregateReport rep;
    for (const auto& g : order)
        if (auto it = by_group.find(g); it != by_group.end()) rep.groups.push_back(group_stats(g, it->second));
    for (const auto& [g, errs] : by_group)
        if (std::find(order.begin(), order.end(), g) == order.end()) rep.groups.push_back(group_stats(g, errs));
    rep.overall = group_stats("all", all);
    return rep;
}

// ---------------------------------------------------------------------------
// Robustness sweeps

struct ThresholdSweepPoint {
    double factor = 1.0;
    std::int64_t threshold_index = 0;
    double error = 0.0;
};

/// Reruns the pipeline with threshold index round(factor * T_d) for each factor.
inline std::vector<ThresholdSweepPoint> sweep_threshold(const Matrix& w, const NlsConfig& cfg,
                                                        const std::vector<double>& factors, const Labeling& truth) {
    for (double f : factors)
        if (!(f > 0.0)) throw ParameterError("threshold factors must be positive");
    std::vector<ThresholdSweepPoint> out(factors.size());
    parallel_for(factors.size(), [&](std::size_t i) {
        NlsConfig c = cfg;
        c.threshold_factor = factors[i];
        const Segmentation seg = nls_segment(w, c);
        out[i] = {factors[i], seg.diagnostics.threshold_index, misclassification_rate(seg.labels, truth)};
    });
    return out;
}

struct NeighborSweepPoint {
    int neighbors = 0;
    double error = 0.0;
};

inline std::vector<NeighborSweepPoint> sweep_neighbors(const Matrix& w, const NlsConfig& cfg,
                                                       const std::vector<int>& ks, const Labeling& truth) {
    for (int k : ks)
        if (k < cfg.subspace_dim - 1)
            throw ParameterError("neighbors k=" + std::to_string(k) + " must be at least d-1");
    std::vector<NeighborSweepPoint> out(ks.size());
    parallel_for(ks.size(), [&](std::size_t i) {
        NlsConfig c = cfg;
        c.neighbors = ks[i];
        out[i] = {ks[i], misclassification_rate(nls_segment(w, c).labels, truth)};
    });
    return out;
}

/// Default sweep grids: +-5/10/20% around T_d, and k = 3..5.
inline const std::vector<double> kDefaultThresholdFactors{0.8, 0.9, 0.95, 1.05, 1.10, 1.20};
inline const std::vector<int> kDefaultNeighborCounts{3, 4, 5};

}  // namespace nls
