#include <gtest/gtest.h>

#include <random>

#include "momsip/moment_matrices.hpp"
#include "oracles.hpp"

using namespace momsip;

namespace {

// Example moment data: w on N^2_4 with H^(2)[w] as displayed in the source
// truncated-moment example (three unit-weight atoms).
TruncatedSequence example46_sequence() {
    std::vector<Eigen::VectorXd> atoms;
    Eigen::VectorXd u1(2), u2(2), u3(2);
    u1 << -2.0 / 3.0, 1.0 / 2.0;
    u2 << 1.0 / 3.0, 2.0 / 3.0;
    u3 << 1.0 / 3.0, -1.0 / 2.0;
    return TruncatedSequence::from_atoms(2, 4, {u1, u2, u3}, {1.0, 1.0, 1.0});
}

}  // namespace

TEST(MomentMatrix, DiracAtOrigin) {
    auto w = TruncatedSequence::from_atoms(2, 4, {Eigen::Vector2d(0, 0)}, {1.0});
    auto H = moment_matrix(w, 2);
    EXPECT_NEAR(H(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(H.norm(), 1.0, 1e-15);
}

TEST(MomentMatrix, Example46Entries) {
    auto w = example46_sequence();
    auto H = moment_matrix(w, 2);
    EXPECT_NEAR(H(0, 0), 3.0, 1e-12);
    EXPECT_NEAR(H(0, 3), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(H(5, 5), 209.0 / 648.0, 1e-12);
    EXPECT_NEAR(H(0, 2), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(H(1, 4), 13.0 / 54.0, 1e-12);
    EXPECT_NEAR(H(3, 4), -23.0 / 162.0, 1e-12);
    EXPECT_NEAR(H(4, 5), -17.0 / 648.0, 1e-12);
    EXPECT_NEAR((H - H.transpose()).norm(), 0.0, 1e-14);
}

TEST(MomentMatrix, RankOneSumForAtomicMeasures) {
    std::mt19937_64 rng(2);
    Eigen::VectorXd u1 = momsip::testing::random_unit_box_point(rng, 2);
    Eigen::VectorXd u2 = momsip::testing::random_unit_box_point(rng, 2);
    const double l1 = 0.4, l2 = 1.7;
    auto w = TruncatedSequence::from_atoms(2, 4, {u1, u2}, {l1, l2});
    auto H = moment_matrix(w, 2);
    // H = l1 [u1]_2 [u1]_2^T + l2 [u2]_2 [u2]_2^T
    auto lift = [](const Eigen::VectorXd& u) {
        Eigen::VectorXd v(6);
        v << 1, u(0), u(1), u(0) * u(0), u(0) * u(1), u(1) * u(1);
        return v;
    };
    Eigen::MatrixXd E = l1 * lift(u1) * lift(u1).transpose() + l2 * lift(u2) * lift(u2).transpose();
    EXPECT_NEAR((H - E).norm(), 0.0, 1e-12);
}

TEST(LocalizingMatrix, ConstantOneGivesMomentMatrix) {
    auto w = example46_sequence();
    auto L = localizing_matrix(w, Polynomial::constant(2, 0, 1.0), 2);
    EXPECT_NEAR((L - moment_matrix(w, 2)).norm(), 0.0, 1e-13);
}

TEST(LocalizingMatrix, RankOneLiftScaledByConstraint) {
    // c = x1 on the Dirac at (2,0): L = c(u) [u]_1 [u]_1^T
    auto w = TruncatedSequence::from_atoms(2, 4, {Eigen::Vector2d(2, 0)}, {1.0});
    auto L = localizing_matrix_sided(w, parse_polynomial("x1", 2, 0), 1);
    Eigen::VectorXd lift(3);
    lift << 1, 2, 0;
    EXPECT_NEAR((L - 2.0 * lift * lift.transpose()).norm(), 0.0, 1e-12);
}

TEST(LocalizingMatrix, VanishesWhenConstraintVanishesAtAtom) {
    auto w = TruncatedSequence::from_atoms(2, 4, {Eigen::Vector2d(1, 0)}, {1.0});
    auto L = localizing_matrix(w, parse_polynomial("1 - x1^2 - x2^2", 2, 0), 2);
    EXPECT_NEAR(L.norm(), 0.0, 1e-12);
}

TEST(LocalizingVector, ConstantGivesLeadingSegment) {
    auto w = example46_sequence();
    auto V = localizing_vector(w, Polynomial::constant(2, 0, 1.0), 4);
    EXPECT_NEAR((V - w.values()).norm(), 0.0, 1e-14);
}

TEST(LocalizingVector, VanishesOnAtomZeroSet) {
    Eigen::VectorXd u(2);
    u << 1.0, 5.0;
    auto w = TruncatedSequence::from_atoms(2, 4, {u}, {1.0});
    auto V = localizing_vector(w, parse_polynomial("x1 - 1", 2, 0), 4);
    EXPECT_NEAR(V.lpNorm<Eigen::Infinity>(), 0.0, 1e-11);
}

TEST(LocalizingVector, HandComputedEntries) {
    // c = x1, Dirac at (3,0), 2k = 2: R_w(x1 * {1, x1, x2}) = (3, 9, 0)
    auto w = TruncatedSequence::from_atoms(2, 2, {Eigen::Vector2d(3, 0)}, {1.0});
    auto V = localizing_vector(w, parse_polynomial("x1", 2, 0), 2);
    ASSERT_EQ(V.size(), 3);
    EXPECT_NEAR(V(0), 3.0, 1e-13);
    EXPECT_NEAR(V(1), 9.0, 1e-13);
    EXPECT_NEAR(V(2), 0.0, 1e-13);
}

TEST(YMatrix, TrivialMass) {
    auto Y = y_matrix(MeasureSpec::box({{-1.0, 1.0}}), Polynomial::constant(0, 1, 1.0), 0);
    ASSERT_EQ(Y.rows(), 1);
    EXPECT_NEAR(Y(0, 0), 1.0, 1e-15);
}

TEST(YMatrix, SymmetricBoxOrderOne) {
    auto Y = y_matrix(MeasureSpec::box({{-1.0, 1.0}}), Polynomial::constant(0, 1, 1.0), 1);
    Eigen::MatrixXd E(2, 2);
    E << 1.0, 0.0, 0.0, 1.0 / 3.0;
    EXPECT_NEAR((Y - E).norm(), 0.0, 1e-14);
}

TEST(YMatrix, SampleBackedMatchesDirectAverage) {
    auto pts = sample_quartic_curve(64, 23);
    auto spec = MeasureSpec::samples(pts);
    auto h = parse_polynomial("y1^2 - y2", 0, 2);
    const int lp = 2;
    auto Y = y_matrix(spec, h, lp);
    const auto monos = monomials_up_to(2, lp);
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
    for (const auto& u : pts) {
        Eigen::VectorXd lift(static_cast<Eigen::Index>(monos.size()));
        for (std::size_t i = 0; i < monos.size(); ++i) {
            double v = 1.0;
            for (int j = 0; j < 2; ++j)
                for (int q = 0; q < monos[i][j]; ++q) v *= u(j);
            lift(static_cast<Eigen::Index>(i)) = v;
        }
        E += h.eval(Eigen::VectorXd(0), u) * lift * lift.transpose();
    }
    E /= static_cast<double>(pts.size());
    EXPECT_NEAR((Y - E).lpNorm<Eigen::Infinity>(), 0.0, 1e-12);
}

TEST(Quantified, ConstantConstraintIsKroneckerOfYAndH) {
    auto w = example46_sequence();
    auto spec = MeasureSpec::box({{-1.0, 1.0}, {-1.0, 1.0}});
    auto Q = quantified_localizing_matrix(w, Polynomial::constant(2, 2, 1.0), spec, 2, 1);
    auto Y = y_matrix(spec, Polynomial::constant(0, 2, 1.0), 1);
    auto H = moment_matrix(w, 2);
    const Eigen::Index nx = H.rows();
    ASSERT_EQ(Q.assembled.rows(), Y.rows() * nx);
    for (Eigen::Index c = 0; c < Y.rows(); ++c)
        for (Eigen::Index d = 0; d < Y.cols(); ++d)
            EXPECT_NEAR((Q.assembled.block(c * nx, d * nx, nx, nx) - Y(c, d) * H).norm(), 0.0,
                        1e-12);
}

TEST(Quantified, SingleAtomBlockIsPsdWhenConstraintHolds) {
    // Dirac at origin; g(0, y) = 1 - y1^2 >= 0 on Q = [-1,1]
    auto w = TruncatedSequence::from_atoms(1, 4, {Eigen::VectorXd::Zero(1)}, {1.0});
    auto g = parse_polynomial("1 - y1^2 - x1^2", 1, 1);
    auto spec = MeasureSpec::box({{-1.0, 1.0}});
    auto Q = quantified_localizing_matrix(w, g, spec, 2, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.assembled, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * (1.0 + Q.assembled.norm()));
}

TEST(Quantified, MatchesBruteForceOracle) {
    std::mt19937_64 rng(31);
    auto spec = MeasureSpec::box({{-1.0, 1.0}});
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd vals(static_cast<Eigen::Index>(monomial_count(2, 4)));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = u(rng);
        TruncatedSequence w(2, 4, vals);
        auto g = parse_polynomial("x1*y1^2 + x2", 2, 1);
        auto Q = quantified_localizing_matrix(w, g, spec, 2, 2);
        auto E = momsip::testing::brute_force_quantified(w, g, spec, 2, 2);
        EXPECT_NEAR((Q.assembled - E).lpNorm<Eigen::Infinity>(), 0.0, 1e-10);
    }
}

TEST(Quantified, PsdForMeasuresSupportedInK) {
    // K = {x : 1 - x1^2 - x2^2 y1^2 >= 0 for all y in [-1,1]} contains the
    // closed unit disk; atomic measures there give PSD localizers.
    std::mt19937_64 rng(41);
    auto g = parse_polynomial("1 - x1^2 - x2^2*y1^2", 2, 1);
    auto spec = MeasureSpec::box({{-1.0, 1.0}});
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Eigen::VectorXd> atoms;
        std::vector<double> wts;
        const int r = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < r; ++i) {
            Eigen::VectorXd p = momsip::testing::random_unit_box_point(rng, 2);
            p *= 0.7 / std::max(1.0, p.norm());
            atoms.push_back(p);
            wts.push_back(0.2 + 0.8 * std::uniform_real_distribution<double>(0, 1)(rng));
        }
        auto w = TruncatedSequence::from_atoms(2, 6, atoms, wts);
        for (int k = 1; k <= 3; ++k) {
            auto Q = quantified_localizing_matrix(w, g, spec, k, k);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.assembled,
                                                              Eigen::EigenvaluesOnly);
            EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * (1.0 + Q.assembled.norm()));
        }
    }
}

TEST(Quantified, RankBoundForAtomicSequences) {
    std::mt19937_64 rng(51);
    for (int r = 1; r <= 3; ++r) {
        std::vector<Eigen::VectorXd> atoms;
        std::vector<double> wts;
        for (int i = 0; i < r; ++i) {
            atoms.push_back(momsip::testing::random_unit_box_point(rng, 2));
            wts.push_back(1.0);
        }
        auto w = TruncatedSequence::from_atoms(2, 6, atoms, wts);
        auto H = moment_matrix(w, 3);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(H);
        int rank = 0;
        for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()(i) > 1e-9 * svd.singularValues()(0)) ++rank;
        EXPECT_EQ(rank, r);
    }
}

TEST(Quantified, OrderTooSmallSignalled) {
    auto w = example46_sequence();
    auto g = parse_polynomial("x1^3*y1^4 + 1", 2, 1);
    EXPECT_THROW(quantified_localizing_matrix(w, g, MeasureSpec::box({{0.0, 1.0}}), 1, 1),
                 OrderTooSmall);
}

TEST(AffineBlocks, QuantifiedAffineMatchesAssembled) {
    std::mt19937_64 rng(61);
    auto spec = MeasureSpec::box({{0.0, 1.0}});
    auto g = parse_polynomial("x1*y1^2 + x2 - 0.5*y1", 2, 1);
    const int k = 2, l = 2, two_k = 4;
    auto blk = quantified_block_affine(2, two_k, g, spec, k, l);
    Eigen::VectorXd vals(static_cast<Eigen::Index>(monomial_count(2, two_k)));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = u(rng);
    TruncatedSequence w(2, two_k, vals);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(blk.side, blk.side);
    for (std::size_t ai = 0; ai < blk.F.size(); ++ai) {
        if (blk.F[ai].nonZeros() == 0) continue;
        G += vals(static_cast<Eigen::Index>(ai)) * Eigen::MatrixXd(blk.F[ai]);
    }
    auto Q = quantified_localizing_matrix(w, g, spec, k, l);
    EXPECT_NEAR((G - Q.assembled).lpNorm<Eigen::Infinity>(), 0.0, 1e-11);
}

TEST(AffineBlocks, LocalizingAffineMatchesDirect) {
    std::mt19937_64 rng(71);
    auto c = parse_polynomial("1 - x1^2 - x2^2", 2, 0);
    const int k = 2, two_k = 4;
    auto blk = localizing_block_affine(2, two_k, c, k);
    Eigen::VectorXd vals(static_cast<Eigen::Index>(monomial_count(2, two_k)));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = u(rng);
    TruncatedSequence w(2, two_k, vals);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(blk.side, blk.side);
    for (std::size_t ai = 0; ai < blk.F.size(); ++ai) {
        if (blk.F[ai].nonZeros() == 0) continue;
        G += vals(static_cast<Eigen::Index>(ai)) * Eigen::MatrixXd(blk.F[ai]);
    }
    EXPECT_NEAR((G - localizing_matrix(w, c, k)).lpNorm<Eigen::Infinity>(), 0.0, 1e-12);
}

TEST(Riesz, LinearInPolynomial) {
    auto w = example46_sequence();
    auto p = parse_polynomial("x1^2 - 2*x2", 2, 0);
    auto q = parse_polynomial("x1*x2 + 1", 2, 0);
    EXPECT_NEAR(w.riesz(p + q), w.riesz(p) + w.riesz(q), 1e-12);
    EXPECT_NEAR(w.riesz(p * 2.5), 2.5 * w.riesz(p), 1e-12);
}
