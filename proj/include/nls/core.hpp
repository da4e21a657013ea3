#pragma once

// Nearness-to-local-subspace segmentation.
//
// Pipeline: SVD reduction of the data matrix to its top r right singular
// vectors, column normalization, k nearest neighbors per point, a least-squares
// d-dimensional local subspace per point, the symmetric point-to-local-subspace
// distance matrix H, a data-driven threshold on the sorted entries of H, a
// binary similarity S, l1 row normalization, and finally k-means on the top-n
// spectral coordinates of the row-normalized similarity.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "parallel.hpp"

namespace nls {

struct KnownRank {
    int rank = 8;
};
struct EstimatedRank {
    double kappa = 0.1;
};
using RankMode = std::variant<KnownRank, EstimatedRank>;

struct NlsConfig {
    int subspace_dim = 4;  // d
    int num_clusters = 2;  // n
    int neighbors = 3;     // k
    RankMode rank_mode = EstimatedRank{};
    double norm_p = 2.0;
    std::uint64_t seed = 0;
    int kmeans_restarts = 10;
    int kmeans_max_iter = 100;
    /// Multiplies the data-driven threshold index (1.0 = use it unchanged).
    double threshold_factor = 1.0;
    /// Number of singular triplets kept before the final k-means; 0 means num_clusters.
    int segment_rank = 0;

    void validate() const {
        if (subspace_dim < 1) throw ParameterError("subspace dimension d must be >= 1");
        if (num_clusters < 1) throw ParameterError("number of clusters n must be >= 1");
        if (neighbors < subspace_dim - 1 || neighbors < 0)
            throw ParameterError("neighbors k=" + std::to_string(neighbors) + " must be at least d-1=" +
                                 std::to_string(subspace_dim - 1));
        if (!(norm_p >= 1.0)) throw ParameterError("norm p must be >= 1");
        if (const auto* k = std::get_if<KnownRank>(&rank_mode); k && k->rank < 1)
            throw ParameterError("rank must be >= 1");
        if (const auto* e = std::get_if<EstimatedRank>(&rank_mode); e && !(e->kappa > 0.0))
            throw ParameterError("kappa must be positive");
        if (kmeans_restarts < 1 || kmeans_max_iter < 1)
            throw ParameterError("k-means restarts and iterations must be positive");
        if (!(threshold_factor > 0.0)) throw ParameterError("threshold factor must be positive");
        if (segment_rank < 0) throw ParameterError("segment rank must be >= 0");
    }
};

/// Reduced data: r x N, every column of unit p-norm.
struct ReducedData {
    Matrix matrix;
    double norm_p = 2.0;
    Vector singular_values;  // of the original data matrix

    Eigen::Index rank() const { return matrix.rows(); }
    Eigen::Index size() const { return matrix.cols(); }
};

using NeighborSets = std::vector<std::vector<int>>;
using LocalBasisSet = std::vector<OrthonormalBasis>;

/// Model-selection rank: argmin_r s_{r+1}^2 / sum_{i<=r} s_i^2 + kappa r over r in [1, l-1].
inline int estimate_rank(const Vector& singular_values, double kappa) {
    const Eigen::Index l = singular_values.size();
    if (l < 2) throw ParameterError("rank estimation needs at least two singular values");
    if (!(kappa > 0.0)) throw ParameterError("kappa must be positive");
    if (!(singular_values[0] > 0.0)) throw DegenerateError("all singular values are zero");

    int best = 1;
    double best_cost = std::numeric_limits<double>::infinity();
    double energy = 0.0;
    for (Eigen::Index r = 1; r < l; ++r) {
        energy += singular_values[r - 1] * singular_values[r - 1];
        const double next = singular_values[r];
        const double cost = next * next / energy + kappa * static_cast<double>(r);
        if (cost < best_cost) {
            best_cost = cost;
            best = static_cast<int>(r);
        }
    }
    return best;
}

/// Replaces W (m x N) by the first r rows of V^t and normalizes each column to unit p-norm.
inline ReducedData reduce_and_normalize(const Matrix& w, const NlsConfig& cfg) {
    require_finite(w, "data matrix");
    if (w.rows() < 1 || w.cols() < 1) throw InputError("data matrix is empty");
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        if (w.col(j).isZero(0.0)) throw InputError("data column " + std::to_string(j) + " is zero");

    SvdResult f = svd(w);
    const Eigen::Index l = f.singular_values.size();
    Eigen::Index r = 0;
    if (const auto* known = std::get_if<KnownRank>(&cfg.rank_mode)) {
        r = known->rank;
    } else {
        if (l < 2) throw ParameterError("rank estimation needs min(rows, cols) >= 2");
        r = estimate_rank(f.singular_values, std::get<EstimatedRank>(cfg.rank_mode).kappa);
    }
    if (r < 1 || r > l)
        throw ParameterError("rank " + std::to_string(r) + " exceeds min(rows, cols) = " + std::to_string(l));

    ReducedData out;
    out.norm_p = cfg.norm_p;
    out.singular_values = f.singular_values;
    out.matrix = f.right.leftCols(r).transpose();
    for (Eigen::Index j = 0; j < out.matrix.cols(); ++j) {
        const double nrm = p_norm(out.matrix.col(j), cfg.norm_p);
        if (!(nrm > 0.0))
            throw DegenerateError("column " + std::to_string(j) + " vanishes in the rank-" + std::to_string(r) +
                                  " reduction");
        out.matrix.col(j) /= nrm;
    }
    return out;
}

/// Pairwise point distance used for neighbor search: the angle for p = 2,
/// otherwise the l_p distance.
inline Matrix point_distances(const ReducedData& y) {
    const Eigen::Index n = y.size();
    Matrix dist(n, n);
    if (y.norm_p == 2.0) {
        Matrix gram = y.matrix.transpose() * y.matrix;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) dist(i, j) = std::acos(std::clamp(gram(i, j), -1.0, 1.0));
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                dist(i, j) = p_norm(y.matrix.col(i) - y.matrix.col(j), y.norm_p);
    }
    return dist;
}

/// For each point, the k other points closest to it, sorted by (distance, index).
inline NeighborSets neighbor_sets(const ReducedData& y, int k) {
    const Eigen::Index n = y.size();
    if (k < 0 || k >= n)
        throw ParameterError("neighbors k=" + std::to_string(k) + " must be below the number of points " +
                             std::to_string(n));
    const Matrix dist = point_distances(y);
    NeighborSets out(static_cast<std::size_t>(n));
    std::vector<int> order;
    for (Eigen::Index i = 0; i < n; ++i) {
        order.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) order.push_back(static_cast<int>(j));
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
            const double da = dist(i, a), db = dist(i, b);
            return da < db || (da == db && a < b);
        });
        out[i].assign(order.begin(), order.begin() + k);
    }
    return out;
}

/// Least-squares d-dimensional subspace through each point and its neighbors.
inline LocalBasisSet fit_all_local_subspaces(const ReducedData& y, const NeighborSets& neighbors, int d) {
    if (static_cast<Eigen::Index>(neighbors.size()) != y.size())
        throw DimensionError("one neighbor set per point is required");
    LocalBasisSet bases(neighbors.size());
    parallel_for(neighbors.size(), [&](std::size_t i) {
        const auto& nb = neighbors[i];
        Matrix x(y.rank(), static_cast<Eigen::Index>(nb.size()) + 1);
        x.col(0) = y.matrix.col(static_cast<Eigen::Index>(i));
        for (std::size_t t = 0; t < nb.size(); ++t) x.col(static_cast<Eigen::Index>(t) + 1) = y.matrix.col(nb[t]);
        bases[i] = fit_local_basis(x, d);
    });
    return bases;
}

/// H(i,j) = (||y_j - A_i A_i^t y_j||_p + ||y_i - A_j A_j^t y_i||_p) / 2.
inline Matrix distance_matrix(const ReducedData& y, const LocalBasisSet& bases, double p) {
    const Eigen::Index n = y.size();
    if (static_cast<Eigen::Index>(bases.size()) != n) throw DimensionError("one local basis per point is required");
    Matrix to_local(n, n);  // (i, j): distance of y_j to the local subspace of point i
    parallel_for(bases.size(), [&](std::size_t i) {
        const Matrix& a = bases[i].vectors();
        if (a.rows() != y.rank()) throw DimensionError("local basis ambient dimension mismatch");
        const Matrix res = y.matrix - a * (a.transpose() * y.matrix);
        for (Eigen::Index j = 0; j < n; ++j)
            to_local(static_cast<Eigen::Index>(i), j) = p_norm(res.col(j), p);
    });
    Matrix h(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) h(i, j) = (to_local(i, j) + to_local(j, i)) / 2.0;
    return h;
}

/// Sorted entries of H rescaled to [0, 1] plus the affine map that produced them.
struct ThresholdProfile {
    std::vector<double> h;  // ascending, h.front() = 0, h.back() = 1
    double lo = 0.0;
    double hi = 1.0;

    double scale(double value) const { return (value - lo) / (hi - lo); }
};

struct Threshold {
    double eta = 0.0;         // in scaled units
    std::int64_t index = 1;   // 1-based position in the sorted profile
    double lo = 0.0;
    double hi = 1.0;

    double scale(double value) const { return (value - lo) / (hi - lo); }
};

inline ThresholdProfile threshold_profile(const Matrix& h) {
    require_finite(h, "distance matrix");
    ThresholdProfile prof;
    prof.h.assign(h.data(), h.data() + h.size());
    std::sort(prof.h.begin(), prof.h.end());
    prof.lo = prof.h.front();
    prof.hi = prof.h.back();
    if (!(prof.hi > prof.lo))
        throw DegenerateError("distance matrix is constant; near and far pairs cannot be separated");
    for (double& v : prof.h) v = prof.scale(v);
    return prof;
}

/// Threshold at a given 1-based index of the profile.
inline Threshold threshold_at(const ThresholdProfile& prof, std::int64_t index) {
    const auto total = static_cast<std::int64_t>(prof.h.size());
    index = std::clamp<std::int64_t>(index, 1, total);
    return {prof.h[static_cast<std::size_t>(index - 1)], index, prof.lo, prof.hi};
}

/// Index T minimizing sum_{i<T} h_i^2 + sum_{i>=T} (1 - h_i)^2 over the scaled
/// profile (smallest T on ties), found with prefix sums in one pass.
inline std::int64_t best_step_index(const std::vector<double>& h) {
    const std::size_t total = h.size();
    // suffix[i] = sum_{t>=i} (1 - h_t)^2, computed from the back
    std::vector<double> suffix(total + 1, 0.0);
    for (std::size_t i = total; i-- > 0;) suffix[i] = suffix[i + 1] + (1.0 - h[i]) * (1.0 - h[i]);

    std::int64_t best = 1;
    double best_cost = std::numeric_limits<double>::infinity();
    double prefix = 0.0;  // sum_{t<i} h_t^2
    for (std::size_t i = 0; i < total; ++i) {
        const double cost = prefix + suffix[i];
        if (cost < best_cost) {
            best_cost = cost;
            best = static_cast<std::int64_t>(i) + 1;
        }
        prefix += h[i] * h[i];
    }
    return best;
}

inline Threshold data_driven_threshold(const Matrix& h) {
    const ThresholdProfile prof = threshold_profile(h);
    return threshold_at(prof, best_step_index(prof.h));
}

/// s_ij = 1 when the scaled distance is strictly below eta. The diagonal is
/// always 1: a point is similar to itself even when noise lifts d_ii.
inline Matrix binary_similarity(const Matrix& h, const Threshold& t) {
    Matrix s(h.rows(), h.cols());
    for (Eigen::Index j = 0; j < h.cols(); ++j)
        for (Eigen::Index i = 0; i < h.rows(); ++i) s(i, j) = t.scale(h(i, j)) < t.eta ? 1.0 : 0.0;
    s.diagonal().setOnes();
    return s;
}

/// D^{-1} S with D the diagonal of row sums.
inline Matrix row_normalize_l1(const Matrix& s) {
    Matrix out = s;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double sum = s.row(i).sum();
        if (!(sum > 0.0)) throw InternalError("similarity row " + std::to_string(i) + " has zero sum");
        out.row(i) /= sum;
    }
    return out;
}

/// Clusters the rows of the row-stochastic similarity: top singular triplets of
/// its transpose, then k-means on the columns of Sigma_n V_n^t.
inline Labeling segment_rows(const Matrix& stochastic, int n, const NlsConfig& cfg) {
    const Eigen::Index count = stochastic.rows();
    if (n < 1 || n > count) throw ParameterError("cluster count must lie in [1, N]");
    const int keep = cfg.segment_rank > 0 ? cfg.segment_rank : n;
    SvdResult f = svd(stochastic.transpose());
    if (keep > f.singular_values.size()) throw ParameterError("segment rank exceeds the number of points");
    Matrix coords = f.singular_values.head(keep).asDiagonal() * f.right.leftCols(keep).transpose();
    return kmeans(coords, n, cfg.seed, cfg.kmeans_restarts, cfg.kmeans_max_iter);
}

struct Diagnostics {
    int rank = 0;
    double eta = 0.0;
    std::int64_t threshold_index = 0;       // index actually used
    std::int64_t data_driven_index = 0;     // T_d before any factor is applied
    Matrix distances;                       // H
    Matrix similarity;                      // S
};

struct Segmentation {
    Labeling labels;
    Diagnostics diagnostics;
};

/// Full pipeline on the m x N data matrix W (points are columns).
inline Segmentation nls_segment(const Matrix& w, const NlsConfig& cfg) {
    cfg.validate();
    if (cfg.num_clusters > w.cols()) throw ParameterError("more clusters than points");

    const ReducedData y = reduce_and_normalize(w, cfg);
    if (cfg.subspace_dim >= y.rank())
        throw ConfigurationError("local subspaces of dimension " + std::to_string(cfg.subspace_dim) +
                                 " fill the reduced space of dimension " + std::to_string(y.rank()) +
                                 "; distances are identically zero");

    const NeighborSets nb = neighbor_sets(y, cfg.neighbors);
    const LocalBasisSet bases = fit_all_local_subspaces(y, nb, cfg.subspace_dim);

    Segmentation out;
    Diagnostics& diag = out.diagnostics;
    diag.rank = static_cast<int>(y.rank());
    diag.distances = distance_matrix(y, bases, cfg.norm_p);

    const ThresholdProfile prof = threshold_profile(diag.distances);
    diag.data_driven_index = best_step_index(prof.h);
    std::int64_t index = diag.data_driven_index;
    if (cfg.threshold_factor != 1.0)
        index = std::llround(cfg.threshold_factor * static_cast<double>(diag.data_driven_index));
    const Threshold t = threshold_at(prof, index);
    diag.threshold_index = t.index;
    diag.eta = t.eta;

    diag.similarity = binary_similarity(diag.distances, t);
    out.labels = segment_rows(row_normalize_l1(diag.similarity), cfg.num_clusters, cfg);
    return out;
}

}  // namespace nls
