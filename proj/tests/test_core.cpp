#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "nls/core.hpp"
#include "nls/datagen.hpp"
#include "nls/eval.hpp"
#include "oracles.hpp"

using nls::Matrix;
using nls::NlsConfig;
using nls::Vector;

namespace {

nls::ReducedData reduced(Matrix m, double p = 2.0) {
    nls::ReducedData y;
    y.norm_p = p;
    for (Eigen::Index j = 0; j < m.cols(); ++j) m.col(j) /= nls::p_norm(m.col(j), p);
    y.matrix = std::move(m);
    return y;
}

Matrix circle_points(std::initializer_list<double> degrees) {
    Matrix m(2, static_cast<Eigen::Index>(degrees.size()));
    Eigen::Index j = 0;
    for (double d : degrees) {
        const double a = d * std::numbers::pi / 180.0;
        m.col(j++) << std::cos(a), std::sin(a);
    }
    return m;
}

NlsConfig known_rank_config(int d, int n, int k, int r) {
    NlsConfig c;
    c.subspace_dim = d;
    c.num_clusters = n;
    c.neighbors = k;
    c.rank_mode = nls::KnownRank{r};
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// estimate_rank

TEST(EstimateRank, ExactRankOne) {
    Vector s(3);
    s << 1, 0, 0;
    EXPECT_EQ(nls::estimate_rank(s, 0.01), 1);
}

TEST(EstimateRank, TwoDominantValues) {
    Vector s(4);
    s << 10, 10, 1e-6, 1e-6;
    EXPECT_EQ(oracle::rank({10, 10, 1e-6, 1e-6}, 0.01), 2);
    EXPECT_EQ(nls::estimate_rank(s, 0.01), 2);
}

TEST(EstimateRank, KappaInsensitiveOnControlledSpectrum) {
    Vector s(6);
    s << 5, 4.5, 1e-4, 1e-4, 1e-5, 1e-5;
    for (double kappa : {0.01, 0.05, 0.1, 0.2, 0.3, 0.5}) EXPECT_EQ(nls::estimate_rank(s, kappa), 2) << kappa;
}

TEST(EstimateRank, Errors) {
    EXPECT_THROW(nls::estimate_rank(Vector::Zero(3), 0.1), nls::DegenerateError);
    EXPECT_THROW(nls::estimate_rank(Vector::Ones(1), 0.1), nls::ParameterError);
}

// ---------------------------------------------------------------------------
// reduce_and_normalize

TEST(ReduceAndNormalize, OrthonormalColumnsKeepFullRank) {
    std::mt19937_64 rng(1);
    const Matrix w = oracle::gram_schmidt(oracle::gaussian(6, 4, rng));
    const auto y = nls::reduce_and_normalize(w, known_rank_config(1, 1, 0, 4));
    ASSERT_EQ(y.rank(), 4);
    for (Eigen::Index j = 0; j < y.size(); ++j) EXPECT_NEAR(y.matrix.col(j).norm(), 1.0, 1e-12);
}

TEST(ReduceAndNormalize, EstimatesExactRankTwo) {
    std::mt19937_64 rng(2);
    const Matrix w = oracle::gaussian(10, 2, rng) * oracle::gaussian(2, 12, rng);
    NlsConfig c;
    c.rank_mode = nls::EstimatedRank{0.1};
    const auto y = nls::reduce_and_normalize(w, c);
    Eigen::JacobiSVD<Matrix> sv(w);
    std::vector<double> s(sv.singularValues().data(), sv.singularValues().data() + sv.singularValues().size());
    EXPECT_EQ(oracle::rank(s, 0.1), 2);
    EXPECT_EQ(y.rank(), 2);
    EXPECT_EQ(y.size(), 12);
}

TEST(ReduceAndNormalize, PNormNormalization) {
    std::mt19937_64 rng(3);
    NlsConfig c = known_rank_config(1, 1, 0, 3);
    c.norm_p = 1.0;
    const auto y = nls::reduce_and_normalize(oracle::gaussian(5, 7, rng), c);
    for (Eigen::Index j = 0; j < y.size(); ++j) EXPECT_NEAR(y.matrix.col(j).lpNorm<1>(), 1.0, 1e-12);
}

TEST(ReduceAndNormalize, PreservesLinearCombinations) {
    std::mt19937_64 rng(4);
    Matrix w = oracle::gaussian(8, 6, rng);
    w.col(5) = 0.3 * w.col(0) - 1.2 * w.col(2);
    // rank 5: the right singular vector of the zero singular value is left out
    const auto y = nls::reduce_and_normalize(w, known_rank_config(1, 1, 0, 5));
    // normalization rescales columns but keeps span membership
    const Matrix sub = (Matrix(y.rank(), 2) << y.matrix.col(0), y.matrix.col(2)).finished();
    EXPECT_LE(oracle::span_residual(sub, y.matrix.col(5)), 1e-8);
    const Matrix other = (Matrix(y.rank(), 2) << y.matrix.col(1), y.matrix.col(3)).finished();
    EXPECT_GT(oracle::span_residual(other, y.matrix.col(5)), 1e-3);
}

TEST(ReduceAndNormalize, ZeroColumnNamed) {
    Matrix w = Matrix::Ones(3, 4);
    w.col(2).setZero();
    try {
        nls::reduce_and_normalize(w, known_rank_config(1, 1, 0, 1));
        FAIL();
    } catch (const nls::InputError& e) {
        EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos);
    }
}

TEST(ReduceAndNormalize, RankAboveMinDimension) {
    EXPECT_THROW(nls::reduce_and_normalize(Matrix::Identity(3, 3), known_rank_config(1, 1, 0, 4)), nls::ParameterError);
}

// ---------------------------------------------------------------------------
// neighbor_sets

TEST(NeighborSets, NearestByAngle) {
    const auto nb = nls::neighbor_sets(reduced(circle_points({0, 1, 90})), 1);
    EXPECT_EQ(nb[0], std::vector<int>{1});
    EXPECT_EQ(nb[2], std::vector<int>{1});
}

TEST(NeighborSets, DuplicateComesFirst) {
    const auto nb = nls::neighbor_sets(reduced(circle_points({30, 10, 30, 31})), 2);
    EXPECT_EQ(nb[0], (std::vector<int>{2, 3}));
    EXPECT_EQ(nb[2], (std::vector<int>{0, 3}));
}

TEST(NeighborSets, TiesBrokenByIndex) {
    const auto nb = nls::neighbor_sets(reduced(circle_points({0, 10, -10})), 2);
    EXPECT_EQ(nb[0], (std::vector<int>{1, 2}));
}

TEST(NeighborSets, MatchesExhaustiveSort) {
    std::mt19937_64 rng(5);
    const auto y = reduced(oracle::gaussian(4, 10, rng));
    EXPECT_EQ(nls::neighbor_sets(y, 3), oracle::neighbors(y.matrix, 3));
}

TEST(NeighborSets, PNormDistance) {
    Matrix m(2, 3);
    m << 1, 0.9, 0, 0, 0.1, 1;
    const auto nb = nls::neighbor_sets(reduced(m, 1.0), 1);
    EXPECT_EQ(nb[0], std::vector<int>{1});
    EXPECT_EQ(nb[2], std::vector<int>{1});
}

TEST(NeighborSets, TooManyNeighbors) {
    EXPECT_THROW(nls::neighbor_sets(reduced(circle_points({0, 1, 2})), 3), nls::ParameterError);
}

// ---------------------------------------------------------------------------
// local subspaces and distances

TEST(LocalSubspaces, SingleSubspaceHasZeroResiduals) {
    std::mt19937_64 rng(6);
    const Matrix basis = oracle::gram_schmidt(oracle::gaussian(6, 3, rng));
    const auto y = reduced(basis * oracle::gaussian(3, 15, rng));
    const auto bases = nls::fit_all_local_subspaces(y, nls::neighbor_sets(y, 2), 3);
    for (const auto& b : bases)
        for (Eigen::Index j = 0; j < y.size(); ++j) EXPECT_LE(nls::residual_distance(y.matrix.col(j), b), 1e-8);
}

TEST(LocalSubspaces, TwoOrthogonalLines) {
    Matrix m(2, 6);
    m << 1, 2, -1, 0, 0, 0, 0, 0, 0, 1, -3, 2;
    const auto y = reduced(m);
    const auto bases = nls::fit_all_local_subspaces(y, nls::neighbor_sets(y, 1), 1);
    for (int i = 0; i < 6; ++i) {
        const Vector axis = i < 3 ? Vector::Unit(2, 0) : Vector::Unit(2, 1);
        EXPECT_NEAR(std::abs(bases[i].vectors().col(0).dot(axis)), 1.0, 1e-12) << i;
    }
}

TEST(LocalSubspaces, FullDimensionalFitLeavesNoResidual) {
    std::mt19937_64 rng(7);
    const auto y = reduced(oracle::gaussian(3, 8, rng));
    const auto bases = nls::fit_all_local_subspaces(y, nls::neighbor_sets(y, 3), 3);
    const Matrix h = nls::distance_matrix(y, bases, 2.0);
    EXPECT_LE(h.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DistanceMatrix, SingleSubspaceIsZero) {
    std::mt19937_64 rng(8);
    const Matrix basis = oracle::gram_schmidt(oracle::gaussian(5, 2, rng));
    const auto y = reduced(basis * oracle::gaussian(2, 10, rng));
    const auto bases = nls::fit_all_local_subspaces(y, nls::neighbor_sets(y, 1), 2);
    EXPECT_LE(nls::distance_matrix(y, bases, 2.0).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(DistanceMatrix, MutuallyOrthogonalPointsAndSubspaces) {
    const auto y = reduced(Matrix::Identity(3, 2));
    const nls::LocalBasisSet bases{nls::OrthonormalBasis(Matrix(Vector::Unit(3, 0))),
                                   nls::OrthonormalBasis(Matrix(Vector::Unit(3, 1)))};
    const Matrix h = nls::distance_matrix(y, bases, 2.0);
    EXPECT_NEAR(h(0, 1), 1.0, 1e-15);
    EXPECT_NEAR(h(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(h(0, 0), 0.0, 1e-15);
}

TEST(DistanceMatrix, MatchesElementwiseResiduals) {
    std::mt19937_64 rng(9);
    for (double p : {2.0, 1.0, 3.0}) {
        const auto y = reduced(oracle::gaussian(6, 12, rng), p);
        const auto bases = nls::fit_all_local_subspaces(y, nls::neighbor_sets(y, 2), 2);
        const Matrix h = nls::distance_matrix(y, bases, p);
        for (Eigen::Index i = 0; i < 12; ++i)
            for (Eigen::Index j = 0; j < 12; ++j) {
                const double expect = (nls::residual_distance(y.matrix.col(j), bases[i], p) +
                                       nls::residual_distance(y.matrix.col(i), bases[j], p)) / 2.0;
                EXPECT_NEAR(h(i, j), expect, 1e-12);
                EXPECT_EQ(h(i, j), h(j, i));
            }
    }
}

// ---------------------------------------------------------------------------
// threshold

TEST(Threshold, PerfectStep) {
    Vector h(8);
    h << 0, 0, 0, 0, 1, 1, 1, 1;
    const auto t = nls::data_driven_threshold(h);
    EXPECT_EQ(t.index, 5);
    EXPECT_EQ(t.eta, 1.0);
}

TEST(Threshold, SortsAndRescales) {
    Vector h(8);
    h << 7, 3, 3, 7, 3, 7, 3, 7;  // scaled to the perfect step
    const auto t = nls::data_driven_threshold(h);
    EXPECT_EQ(t.index, 5);
    EXPECT_EQ(t.eta, 1.0);
    EXPECT_EQ(t.lo, 3.0);
    EXPECT_EQ(t.hi, 7.0);
}

TEST(Threshold, LinearRampMatchesExhaustiveScan) {
    std::vector<double> ramp;
    for (int i = 0; i < 9; ++i) ramp.push_back(i / 8.0);
    const auto t = nls::data_driven_threshold(Eigen::Map<Vector>(ramp.data(), 9));
    EXPECT_EQ(static_cast<std::size_t>(t.index), oracle::step_index(ramp));
    EXPECT_EQ(t.index, 5);  // first value with h >= 1/2
}

TEST(Threshold, JumpModelRecoversJump) {
    // zeros up to T-1, then a ramp from 0.6 to 1 (ratio >= 1/2)
    std::vector<double> h(30, 0.0);
    for (int i = 11; i < 30; ++i) h[i] = 0.6 + 0.4 * (i - 11) / 18.0;
    const auto t = nls::data_driven_threshold(Eigen::Map<Vector>(h.data(), 30));
    EXPECT_EQ(t.index, 12);
}

TEST(Threshold, ConstantIsDegenerate) {
    EXPECT_THROW(nls::data_driven_threshold(Matrix::Constant(3, 3, 0.4)), nls::DegenerateError);
}

TEST(BinarySimilarity, SingleOutlier) {
    Matrix h = Matrix::Zero(4, 4);
    h(1, 3) = h(3, 1) = 5.0;
    const auto t = nls::data_driven_threshold(h);
    const Matrix s = nls::binary_similarity(h, t);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(s(i, j), (i == 1 && j == 3) || (i == 3 && j == 1) ? 0.0 : 1.0);
}

TEST(BinarySimilarity, StrictInequalityAtTop) {
    Matrix h(2, 2);
    h << 0, 1, 0.5, 0;
    const nls::Threshold t{1.0, 4, 0.0, 1.0};
    const Matrix s = nls::binary_similarity(h, t);
    EXPECT_EQ(s(0, 1), 0.0);
    EXPECT_EQ(s(1, 0), 1.0);
}

TEST(BinarySimilarity, BlockStructure) {
    const int n = 12;
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> small(0.0, 0.05), large(0.8, 1.0);
    Matrix h(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) h(i, j) = h(j, i) = (i < 5) == (j < 5) ? small(rng) : large(rng);
    const Matrix s = nls::binary_similarity(h, nls::data_driven_threshold(h));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) EXPECT_EQ(s(i, j), (i < 5) == (j < 5) ? 1.0 : 0.0);
}

TEST(BinarySimilarity, DiagonalAlwaysOne) {
    Matrix h = Matrix::Constant(3, 3, 1.0);
    h(0, 1) = h(1, 0) = 0.0;
    const Matrix s = nls::binary_similarity(h, nls::data_driven_threshold(h));
    EXPECT_EQ(s.diagonal(), Vector::Ones(3));
}

// ---------------------------------------------------------------------------
// row normalization and final segmentation

TEST(RowNormalize, Identity) {
    EXPECT_EQ(nls::row_normalize_l1(Matrix::Identity(4, 4)), Matrix::Identity(4, 4));
}

TEST(RowNormalize, RowOfOnes) {
    const Matrix s = nls::row_normalize_l1(Matrix::Ones(3, 3));
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(s(0, j), 1.0 / 3.0);
}

TEST(RowNormalize, RandomBinaryRowsSumToOne) {
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin(0.3);
    Matrix s(25, 25);
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 25; ++j) s(i, j) = i == j || coin(rng) ? 1.0 : 0.0;
    const Matrix st = nls::row_normalize_l1(s);
    for (int i = 0; i < 25; ++i) EXPECT_NEAR(st.row(i).sum(), 1.0, 1e-12);
}

TEST(RowNormalize, ZeroRowIsInternalError) {
    EXPECT_THROW(nls::row_normalize_l1(Matrix::Zero(2, 2)), nls::InternalError);
}

namespace {

Matrix block_similarity(const std::vector<int>& truth) {
    const auto n = static_cast<Eigen::Index>(truth.size());
    Matrix s(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) s(i, j) = truth[i] == truth[j] ? 1.0 : 0.0;
    return s;
}

}  // namespace

TEST(SegmentRows, IdealBlocks) {
    std::vector<int> truth;
    for (int i = 0; i < 30; ++i) truth.push_back(i % 3 == 0 ? 1 : 0);
    NlsConfig c;
    const auto labels = nls::segment_rows(nls::row_normalize_l1(block_similarity(truth)), 2, c);
    EXPECT_EQ(nls::misclassification_rate(labels, truth), 0.0);
}

TEST(SegmentRows, SingleCluster) {
    NlsConfig c;
    const auto labels = nls::segment_rows(nls::row_normalize_l1(Matrix::Ones(5, 5)), 1, c);
    EXPECT_EQ(labels, nls::Labeling(5, 0));
}

TEST(SegmentRows, PerturbedBlocksOverTwentySeeds) {
    std::vector<int> truth;
    for (int i = 0; i < 60; ++i) truth.push_back(i < 25 ? 0 : 1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::bernoulli_distribution flip(0.02);
        Matrix s = block_similarity(truth);
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            for (Eigen::Index j = 0; j < s.cols(); ++j)
                if (i != j && flip(rng)) s(i, j) = 1.0 - s(i, j);
        NlsConfig c;
        c.seed = seed;
        EXPECT_EQ(nls::misclassification_rate(nls::segment_rows(nls::row_normalize_l1(s), 2, c), truth), 0.0)
            << "seed " << seed;
    }
}

// ---------------------------------------------------------------------------
// whole pipeline

TEST(NlsSegment, TwoOrthogonalSubspacesInR16) {
    nls::UnionSpec spec;
    spec.ambient_dim = 16;
    spec.subspace_dim = 4;
    spec.num_subspaces = 2;
    spec.points_per_subspace = {40, 40};
    spec.min_principal_angle = std::numbers::pi / 2;
    spec.seed = 3;
    const auto data = nls::sample_union(spec);
    const auto seg = nls::nls_segment(data.points, known_rank_config(4, 2, 3, 8));
    EXPECT_EQ(nls::misclassification_rate(seg.labels, data.labels), 0.0);
    EXPECT_EQ(seg.diagnostics.rank, 8);
    EXPECT_LE(seg.diagnostics.distances.diagonal().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(NlsSegment, SingleSubspaceOneCluster) {
    nls::UnionSpec spec;
    spec.ambient_dim = 10;
    spec.subspace_dim = 3;
    spec.num_subspaces = 1;
    spec.points_per_subspace = {20};
    spec.noise_sigma = 0.01;
    const auto data = nls::sample_union(spec);
    const auto seg = nls::nls_segment(data.points, known_rank_config(3, 1, 2, 5));
    EXPECT_EQ(seg.labels, nls::Labeling(20, 0));
}

TEST(NlsSegment, LocalDimensionFillingReducedSpaceIsRejected) {
    std::mt19937_64 rng(12);
    EXPECT_THROW(nls::nls_segment(oracle::gaussian(6, 20, rng), known_rank_config(4, 2, 3, 4)),
                 nls::ConfigurationError);
}

TEST(NlsSegment, TooFewNeighborsRejected) {
    std::mt19937_64 rng(13);
    EXPECT_THROW(nls::nls_segment(oracle::gaussian(6, 20, rng), known_rank_config(4, 2, 2, 6)), nls::ParameterError);
}

TEST(NlsSegment, ThresholdFactorOneIsBaseline) {
    nls::UnionSpec spec;
    spec.noise_sigma = 0.01;
    spec.seed = 4;
    const auto data = nls::sample_union(spec);
    NlsConfig c = known_rank_config(4, 2, 3, 8);
    const auto base = nls::nls_segment(data.points, c);
    c.threshold_factor = 1.0;
    const auto same = nls::nls_segment(data.points, c);
    EXPECT_EQ(base.labels, same.labels);
    c.threshold_factor = 0.8;
    const auto low = nls::nls_segment(data.points, c);
    EXPECT_EQ(low.diagnostics.threshold_index, std::llround(0.8 * base.diagnostics.data_driven_index));
}
