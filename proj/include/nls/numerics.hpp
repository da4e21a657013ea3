#pragma once

// Dense linear-algebra kernels and k-means used by the segmentation pipeline.
// Matrices are Eigen column-major; data points are always columns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "errors.hpp"
#include "parallel.hpp"

namespace nls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Cluster id per data point, values in [0, n).
using Labeling = std::vector<int>;

struct SvdResult {
    Matrix left;             // m x l
    Vector singular_values;  // l, nonincreasing
    Matrix right;            // N x l
};

/// Column-orthonormal basis of a subspace of R^ambient_dim.
class OrthonormalBasis {
public:
    OrthonormalBasis() = default;
    explicit OrthonormalBasis(Matrix vectors) : vectors_(std::move(vectors)) {}

    Eigen::Index ambient_dim() const { return vectors_.rows(); }
    Eigen::Index dim() const { return vectors_.cols(); }
    const Matrix& vectors() const { return vectors_; }

    /// Largest deviation of B^t B from the identity.
    double orthonormality_error() const {
        Matrix gram = vectors_.transpose() * vectors_;
        gram -= Matrix::Identity(dim(), dim());
        return gram.cwiseAbs().maxCoeff();
    }

private:
    Matrix vectors_;
};

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw InputError(std::string(what) + " contains non-finite entries");
}

namespace detail {

// Small problems go through one-sided Jacobi, which always returns fully
// orthonormal factors (also for zero singular values); larger ones use
// divide and conquer.
constexpr Eigen::Index kJacobiCutoff = 64;

inline void fix_signs(SvdResult& r) {
    for (Eigen::Index j = 0; j < r.right.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < r.right.rows(); ++i) {
            const double a = std::abs(r.right(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (r.right(arg, j) < 0.0) {
            r.right.col(j) *= -1.0;
            r.left.col(j) *= -1.0;
        }
    }
}

}  // namespace detail

/// Thin SVD M = U diag(s) V^t with l = min(m, N) triplets.
/// Sign convention: the largest-magnitude entry of every right singular vector
/// is nonnegative (lowest index wins ties); the left vector is flipped with it.
inline SvdResult svd(const Matrix& m) {
    require_finite(m, "matrix");
    if (m.rows() == 0 || m.cols() == 0) throw DimensionError("svd of an empty matrix");

    SvdResult r;
    if (std::min(m.rows(), m.cols()) <= detail::kJacobiCutoff) {
        Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        r.left = solver.matrixU();
        r.singular_values = solver.singularValues();
        r.right = solver.matrixV();
    } else {
        Eigen::BDCSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        r.left = solver.matrixU();
        r.singular_values = solver.singularValues();
        r.right = solver.matrixV();
    }
    detail::fix_signs(r);
    return r;
}

inline Vector singular_values(const Matrix& m) {
    require_finite(m, "matrix");
    if (std::min(m.rows(), m.cols()) <= detail::kJacobiCutoff)
        return Eigen::JacobiSVD<Matrix>(m).singularValues();
    return Eigen::BDCSVD<Matrix>(m).singularValues();
}

/// l_p norm for real p >= 1.
inline double p_norm(const Vector& v, double p) {
    if (p == 2.0) return v.norm();
    if (p == 1.0) return v.lpNorm<1>();
    if (std::isinf(p)) return v.lpNorm<Eigen::Infinity>();
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p);
    return std::pow(s, 1.0 / p);
}

/// Best-fit d-dimensional subspace (least squares) through the columns of X:
/// the first d left singular vectors.
inline OrthonormalBasis fit_local_basis(const Matrix& x, Eigen::Index d) {
    if (d < 1) throw ParameterError("subspace dimension must be at least 1");
    if (d > std::min(x.rows(), x.cols()))
        throw DimensionError("cannot fit a " + std::to_string(d) + "-dimensional subspace to a " +
                             std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " matrix");
    SvdResult f = svd(x);
    return OrthonormalBasis(f.left.leftCols(d));
}

/// Residual x - B B^t x of projecting x onto span(B).
inline Vector projection_residual(const Vector& x, const OrthonormalBasis& b) {
    if (x.size() != b.ambient_dim())
        throw DimensionError("vector length " + std::to_string(x.size()) + " does not match ambient dimension " +
                             std::to_string(b.ambient_dim()));
    return x - b.vectors() * (b.vectors().transpose() * x);
}

/// Distance ||x - B B^t x||_p from x to the subspace spanned by B.
inline double residual_distance(const Vector& x, const OrthonormalBasis& b, double p = 2.0) {
    return p_norm(projection_residual(x, b), p);
}

/// Principal angles between span(B1) and span(B2), nondecreasing, in [0, pi/2].
///
/// Cosines come from the singular values of B1^t B2. Angles below pi/4 are
/// taken from the sines instead (singular values of the part of the smaller
/// basis orthogonal to the larger one), since arccos loses half the digits
/// near 1.
inline std::vector<double> principal_angles(const OrthonormalBasis& b1, const OrthonormalBasis& b2) {
    if (b1.ambient_dim() != b2.ambient_dim())
        throw DimensionError("principal angles need bases of the same ambient dimension");
    const OrthonormalBasis& big = b1.dim() >= b2.dim() ? b1 : b2;
    const OrthonormalBasis& small = b1.dim() >= b2.dim() ? b2 : b1;
    const Eigen::Index count = small.dim();

    Vector cosines = singular_values(big.vectors().transpose() * small.vectors());
    Matrix orth = small.vectors() - big.vectors() * (big.vectors().transpose() * small.vectors());
    Vector sines = singular_values(orth);
    std::sort(sines.data(), sines.data() + sines.size());

    std::vector<double> angles(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i) {
        const double c = std::clamp(cosines[i], 0.0, 1.0);
        const double s = std::clamp(sines[i], 0.0, 1.0);
        angles[static_cast<std::size_t>(i)] = (c * c >= 0.5) ? std::asin(s) : std::acos(c);
    }
    std::sort(angles.begin(), angles.end());
    return angles;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansOptions {
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 100;
};

struct KMeansResult {
    Labeling labels;
    double inertia = 0.0;  // within-cluster sum of squared distances
    int best_restart = 0;
};

namespace detail {

inline Matrix cluster_means(const Matrix& pts, const Labeling& labels, int n) {
    Matrix c = Matrix::Zero(pts.rows(), n);
    std::vector<int> count(static_cast<std::size_t>(n), 0);
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        c.col(labels[j]) += pts.col(j);
        ++count[labels[j]];
    }
    for (int k = 0; k < n; ++k)
        if (count[k] > 0) c.col(k) /= count[k];
    return c;
}

inline Labeling assign_nearest(const Matrix& pts, const Matrix& centroids) {
    Labeling labels(static_cast<std::size_t>(pts.cols()));
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < centroids.cols(); ++k) {
            const double dd = (pts.col(j) - centroids.col(k)).squaredNorm();
            if (dd < best_d) {
                best_d = dd;
                best = static_cast<int>(k);
            }
        }
        labels[j] = best;
    }
    return labels;
}

// Moves, for each empty cluster, the point farthest from its centroid
// (taken only from clusters with at least two members) into it.
inline void repair_empty_clusters(const Matrix& pts, Labeling& labels, Matrix& centroids, int n) {
    for (;;) {
        std::vector<int> count(static_cast<std::size_t>(n), 0);
        for (int l : labels) ++count[l];
        int empty = -1;
        for (int k = 0; k < n; ++k)
            if (count[k] == 0) {
                empty = k;
                break;
            }
        if (empty < 0) return;

        Eigen::Index far = -1;
        double far_d = -1.0;
        for (Eigen::Index j = 0; j < pts.cols(); ++j) {
            if (count[labels[j]] < 2) continue;
            const double dd = (pts.col(j) - centroids.col(labels[j])).squaredNorm();
            if (dd > far_d) {
                far_d = dd;
                far = j;
            }
        }
        if (far < 0) throw InternalError("k-means repair found no donor point");
        labels[far] = empty;
        centroids = cluster_means(pts, labels, n);
    }
}

inline Matrix seed_plus_plus(const Matrix& pts, int n, std::mt19937_64& rng) {
    const Eigen::Index count = pts.cols();
    Matrix c(pts.rows(), n);
    std::uniform_int_distribution<Eigen::Index> pick(0, count - 1);
    c.col(0) = pts.col(pick(rng));

    std::vector<double> d2(static_cast<std::size_t>(count), std::numeric_limits<double>::infinity());
    for (int k = 1; k < n; ++k) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < count; ++j) {
            d2[j] = std::min(d2[j], (pts.col(j) - c.col(k - 1)).squaredNorm());
            total += d2[j];
        }
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            chosen = count - 1;
            double acc = 0.0;
            for (Eigen::Index j = 0; j < count; ++j) {
                acc += d2[j];
                if (acc > target && d2[j] > 0.0) {
                    chosen = j;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        c.col(k) = pts.col(chosen);
    }
    return c;
}

inline double inertia(const Matrix& pts, const Labeling& labels, const Matrix& centroids) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) s += (pts.col(j) - centroids.col(labels[j])).squaredNorm();
    return s;
}

inline KMeansResult lloyd(const Matrix& pts, int n, std::uint64_t seed, int max_iter) {
    std::mt19937_64 rng(seed);
    Matrix centroids = seed_plus_plus(pts, n, rng);
    Labeling labels = assign_nearest(pts, centroids);
    for (int it = 0; it < max_iter; ++it) {
        centroids = cluster_means(pts, labels, n);
        repair_empty_clusters(pts, labels, centroids, n);
        Labeling next = assign_nearest(pts, centroids);
        if (next == labels) break;
        labels = std::move(next);
    }
    centroids = cluster_means(pts, labels, n);
    repair_empty_clusters(pts, labels, centroids, n);
    return {labels, inertia(pts, labels, centroids), 0};
}

}  // namespace detail

/// Renames labels to 0, 1, ... in order of first appearance.
inline Labeling canonical_labels(const Labeling& labels) {
    std::vector<std::pair<int, int>> seen;
    Labeling out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == labels[i]; });
        if (it == seen.end()) {
            seen.emplace_back(labels[i], static_cast<int>(seen.size()));
            out[i] = seen.back().second;
        } else {
            out[i] = it->second;
        }
    }
    return out;
}

/// k-means on the columns of `points` with k-means++ seeding. Restart i uses
/// seed + i; the restart with the smallest inertia wins (lowest index on ties).
/// Labels are returned in canonical (first appearance) order.
inline KMeansResult kmeans_fit(const Matrix& points, int n, const KMeansOptions& opt = {}) {
    if (n < 1 || n > points.cols())
        throw ParameterError("k-means needs 1 <= n <= number of points (n=" + std::to_string(n) +
                             ", points=" + std::to_string(points.cols()) + ")");
    if (opt.restarts < 1 || opt.max_iter < 1) throw ParameterError("k-means restarts and max_iter must be positive");
    require_finite(points, "k-means input");

    std::vector<KMeansResult> runs(static_cast<std::size_t>(opt.restarts));
    parallel_for(runs.size(), [&](std::size_t r) {
        runs[r] = detail::lloyd(points, n, opt.seed + r, opt.max_iter);
        runs[r].best_restart = static_cast<int>(r);
    });

    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;
    KMeansResult out = std::move(runs[best]);
    out.labels = canonical_labels(out.labels);
    return out;
}

inline Labeling kmeans(const Matrix& points, int n, std::uint64_t seed, int restarts = 10, int max_iter = 100) {
    return kmeans_fit(points, n, {seed, restarts, max_iter}).labels;
}

}  // namespace nls
