#pragma once

// Ground-truthed synthetic data: unions of random subspaces and feature
// tracks of rigid objects seen by an affine camera.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "errors.hpp"
#include "numerics.hpp"

namespace nls {

struct UnionSpec {
    int ambient_dim = 30;
    int subspace_dim = 4;
    int num_subspaces = 2;
    std::vector<int> points_per_subspace{40, 40};
    double noise_sigma = 0.0;
    /// Smallest admissible principal angle between any two subspaces (radians).
    std::optional<double> min_principal_angle;
    std::uint64_t seed = 0;
};

struct UnionSample {
    Matrix points;  // ambient_dim x N
    Labeling labels;
    std::vector<OrthonormalBasis> bases;
};

inline constexpr int kMaxRejectionAttempts = 10000;

/// Orthonormalized Gaussian m x d matrix.
inline OrthonormalBasis random_basis(int m, int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix a(m, d);
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = g(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(m, d);
    return OrthonormalBasis(std::move(q));
}

inline UnionSample sample_union(const UnionSpec& spec) {
    const int m = spec.ambient_dim, d = spec.subspace_dim, n = spec.num_subspaces;
    if (m < 1 || d < 1 || n < 1) throw ParameterError("union spec dimensions must be positive");
    if (d > m) throw ParameterError("subspace dimension exceeds ambient dimension");
    if (static_cast<int>(spec.points_per_subspace.size()) != n)
        throw ParameterError("points_per_subspace must list one count per subspace");
    for (int c : spec.points_per_subspace)
        if (c < 1) throw ParameterError("each subspace needs at least one point");
    if (!(spec.noise_sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");

    std::mt19937_64 rng(spec.seed);
    UnionSample out;

    const double half_pi = std::numbers::pi / 2.0;
    const bool orthogonal = spec.min_principal_angle && *spec.min_principal_angle >= half_pi - 1e-12;
    if (orthogonal) {
        if (static_cast<long>(d) * n > m)
            throw ParameterError("mutually orthogonal subspaces need d*n <= ambient dimension");
        OrthonormalBasis all = random_basis(m, d * n, rng);
        for (int s = 0; s < n; ++s) out.bases.emplace_back(all.vectors().middleCols(s * d, d));
    } else {
        int attempts = 0;
        while (static_cast<int>(out.bases.size()) < n) {
            if (++attempts > kMaxRejectionAttempts)
                throw ParameterError("could not draw subspaces with the requested minimum principal angle within " +
                                     std::to_string(kMaxRejectionAttempts) + " attempts");
            OrthonormalBasis cand = random_basis(m, d, rng);
            bool ok = true;
            if (spec.min_principal_angle) {
                for (const auto& b : out.bases)
                    if (principal_angles(b, cand).front() < *spec.min_principal_angle) {
                        ok = false;
                        break;
                    }
            }
            if (ok) out.bases.push_back(std::move(cand));
        }
    }

    int total = 0;
    for (int c : spec.points_per_subspace) total += c;
    out.points.resize(m, total);
    out.labels.reserve(static_cast<std::size_t>(total));

    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::Index col = 0;
    for (int s = 0; s < n; ++s) {
        for (int p = 0; p < spec.points_per_subspace[s]; ++p, ++col) {
            Vector c(d);
            do {
                for (int i = 0; i < d; ++i) c[i] = g(rng);
            } while (c.norm() == 0.0);
            c.normalize();
            out.points.col(col) = out.bases[s].vectors() * c;
            out.labels.push_back(s);
        }
    }
    if (spec.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (Eigen::Index j = 0; j < out.points.cols(); ++j)
            for (Eigen::Index i = 0; i < out.points.rows(); ++i) out.points(i, j) += noise(rng);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Affine-camera motion

struct ImagePoint {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const ImagePoint&) const = default;
};

using Track = std::vector<ImagePoint>;

struct TrajectorySet {
    int frames = 0;
    std::vector<Track> tracks;
    std::optional<Labeling> labels;

    std::size_t size() const { return tracks.size(); }
};

/// A rigid point set moving by X -> R_f X + t_f in frame f.
struct RigidObject {
    Eigen::Matrix3Xd points;
    std::vector<Eigen::Matrix3d> rotations;
    std::vector<Eigen::Vector3d> translations;
};

using AffineCamera = Eigen::Matrix<double, 2, 4>;

inline TrajectorySet synth_affine_motion(int frames, const std::vector<RigidObject>& objects,
                                         const std::vector<AffineCamera>& cameras, double noise_sigma,
                                         std::uint64_t seed) {
    if (frames < 2) throw ParameterError("motion synthesis needs at least two frames");
    if (static_cast<int>(cameras.size()) != frames) throw ParameterError("one camera per frame is required");
    if (!(noise_sigma >= 0.0)) throw ParameterError("noise sigma must be nonnegative");
    for (std::size_t f = 0; f < cameras.size(); ++f)
        if (cameras[f].isZero(0.0)) throw InputError("camera of frame " + std::to_string(f) + " is the zero matrix");
    for (std::size_t o = 0; o < objects.size(); ++o) {
        const auto& obj = objects[o];
        if (obj.points.cols() < 4) throw ParameterError("object " + std::to_string(o) + " needs at least 4 points");
        if (static_cast<int>(obj.rotations.size()) != frames || static_cast<int>(obj.translations.size()) != frames)
            throw ParameterError("object " + std::to_string(o) + " needs one pose per frame");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);

    TrajectorySet ts;
    ts.frames = frames;
    Labeling labels;
    for (std::size_t o = 0; o < objects.size(); ++o) {
        const auto& obj = objects[o];
        for (Eigen::Index p = 0; p < obj.points.cols(); ++p) {
            Track track(static_cast<std::size_t>(frames));
            for (int f = 0; f < frames; ++f) {
                Eigen::Vector4d world;
                world << obj.rotations[f] * obj.points.col(p) + obj.translations[f], 1.0;
                const Eigen::Vector2d img = cameras[f] * world;
                track[f] = {img.x(), img.y()};
            }
            ts.tracks.push_back(std::move(track));
            labels.push_back(static_cast<int>(o));
        }
    }
    if (noise_sigma > 0.0) {
        for (auto& track : ts.tracks)
            for (auto& pt : track) {
                pt.x += noise(rng);
                pt.y += noise(rng);
            }
    }
    ts.labels = std::move(labels);
    return ts;
}

struct MotionSceneSpec {
    int frames = 30;
    int num_objects = 2;
    int points_per_object = 50;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Random scene: objects are point clouds in a unit cube that rotate about a
/// random axis at a random rate and drift linearly; the camera is a random
/// affine projection that also moves from frame to frame.
inline TrajectorySet random_motion_scene(const MotionSceneSpec& spec) {
    if (spec.num_objects < 1) throw ParameterError("scene needs at least one object");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    std::vector<RigidObject> objects(static_cast<std::size_t>(spec.num_objects));
    for (auto& obj : objects) {
        obj.points.resize(3, spec.points_per_object);
        for (Eigen::Index p = 0; p < obj.points.cols(); ++p) obj.points.col(p) << u(rng), u(rng), u(rng);
        Eigen::Vector3d axis(g(rng), g(rng), g(rng));
        axis.normalize();
        const double rate = 0.02 + 0.05 * (u(rng) + 1.0);
        const Eigen::Vector3d start(3.0 * u(rng), 3.0 * u(rng), 10.0 + u(rng));
        const Eigen::Vector3d drift(0.1 * u(rng), 0.1 * u(rng), 0.05 * u(rng));
        for (int f = 0; f < spec.frames; ++f) {
            obj.rotations.push_back(Eigen::AngleAxisd(rate * f, axis).toRotationMatrix());
            obj.translations.push_back(start + drift * f);
        }
    }

    std::vector<AffineCamera> cameras;
    AffineCamera base;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 4; ++j) base(i, j) = 50.0 * g(rng);
    AffineCamera step;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 4; ++j) step(i, j) = 0.5 * g(rng);
    for (int f = 0; f < spec.frames; ++f) cameras.push_back(base + f * step);

    return synth_affine_motion(spec.frames, objects, cameras, spec.noise_sigma, spec.seed + 1);
}

/// 2F x N matrix whose column j is (x_1, y_1, ..., x_F, y_F) of track j.
inline Matrix trajectory_matrix(const TrajectorySet& ts) {
    Matrix w(2 * ts.frames, static_cast<Eigen::Index>(ts.tracks.size()));
    for (std::size_t j = 0; j < ts.tracks.size(); ++j) {
        const auto& track = ts.tracks[j];
        if (static_cast<int>(track.size()) != ts.frames)
            throw InputError("track " + std::to_string(j) + " has " + std::to_string(track.size()) +
                             " samples, expected " + std::to_string(ts.frames));
        for (int f = 0; f < ts.frames; ++f) {
            w(2 * f, static_cast<Eigen::Index>(j)) = track[f].x;
            w(2 * f + 1, static_cast<Eigen::Index>(j)) = track[f].y;
        }
    }
    return w;
}

/// Inverse of trajectory_matrix.
inline TrajectorySet tracks_from_matrix(const Matrix& w) {
    if (w.rows() % 2 != 0) throw DimensionError("trajectory matrix needs an even number of rows");
    TrajectorySet ts;
    ts.frames = static_cast<int>(w.rows() / 2);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        Track t(static_cast<std::size_t>(ts.frames));
        for (int f = 0; f < ts.frames; ++f) t[f] = {w(2 * f, j), w(2 * f + 1, j)};
        ts.tracks.push_back(std::move(t));
    }
    return ts;
}

}  // namespace nls
