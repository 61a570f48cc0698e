#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fot/transport_operator.hpp"

using namespace fot;

namespace {

FunctionalSample make_sample(std::initializer_list<double> xs, std::initializer_list<double> ys) {
    FunctionalSample s;
    s.x = Eigen::Map<const Eigen::VectorXd>(std::data(xs), static_cast<Eigen::Index>(xs.size()));
    s.y = Eigen::Map<const Eigen::VectorXd>(std::data(ys), static_cast<Eigen::Index>(ys.size()));
    return s;
}

} // namespace

TEST_CASE("hs norm squared is the squared Frobenius norm") {
    const BasisSet b2 = BasisSet::brownian(2);
    const BasisSet b3 = BasisSet::brownian(3);
    CHECK(hs_norm_sq(OperatorCoeffs(Eigen::MatrixXd::Zero(3, 2), b2, b3)) == 0.0);
    CHECK(hs_norm_sq(OperatorCoeffs(Eigen::MatrixXd::Identity(3, 3), b3, b3)) == doctest::Approx(3.0));
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    const OperatorCoeffs op(m, b2, b2);
    CHECK(hs_norm_sq(op) == doctest::Approx(30.0));
    // Direct double loop over coefficient pairs.
    double acc = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) acc += m(i, j) * m(i, j);
    CHECK(hs_norm_sq(op) == doctest::Approx(acc));
}

TEST_CASE("zero operator pushes to the zero function") {
    const BasisSet b = BasisSet::brownian(3);
    const OperatorCoeffs op(Eigen::MatrixXd::Zero(3, 3), b, b);
    const auto f = make_sample({0.1, 0.4, 0.9}, {1.0, -2.0, 0.5});
    const auto pushed = pushforward(op, f, uniform_grid(0.0, 1.0, 7));
    CHECK(pushed.y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pushforward is linear in the input values") {
    const BasisSet b = BasisSet::brownian(4);
    Eigen::MatrixXd lambda(4, 4);
    lambda.setRandom();
    const OperatorCoeffs op(lambda, b, b);
    const auto f = make_sample({0.2, 0.5, 0.8}, {1.0, 2.0, -1.0});
    const auto g = make_sample({0.2, 0.5, 0.8}, {0.5, -1.0, 2.5});
    const auto grid = uniform_grid(0.0, 1.0, 9);

    auto fg = f;
    fg.y += g.y;
    const auto sum_push = pushforward(op, fg, grid);
    const Eigen::VectorXd push_sum = pushforward(op, f, grid).y + pushforward(op, g, grid).y;
    CHECK((sum_push.y - push_sum).cwiseAbs().maxCoeff() < 1e-12);

    auto af = f;
    af.y *= 3.5;
    CHECK((pushforward(op, af, grid).y - 3.5 * pushforward(op, f, grid).y).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("rank-one pushforward matches the hand matrix product") {
    // Lambda = [[1,0],[0,0]] keeps only the (phi_1 -> phi_1) channel.
    const BasisSet b = BasisSet::brownian(2);
    Eigen::MatrixXd lambda(2, 2);
    lambda << 1, 0, 0, 0;
    const OperatorCoeffs op(lambda, b, b);
    const auto f = make_sample({0.25, 0.5, 0.75}, {1.0, 1.0, 1.0});
    Eigen::VectorXd tgt(1);
    tgt << 0.5;
    const auto pushed = pushforward(op, f, tgt);
    const Eigen::MatrixXd U = b.evaluate(f.x, 2);
    const double coef = U.col(0).sum(); // sum phi_1(x_i) * 1
    const double phi1_at_half = b.evaluate(tgt, 1)(0, 0);
    CHECK(pushed.y(0) == doctest::Approx(phi1_at_half * coef).epsilon(1e-12));
}

TEST_CASE("cost matrix with zero operator is the target norm") {
    const BasisSet b = BasisSet::brownian(2);
    const OperatorCoeffs op(Eigen::MatrixXd::Zero(2, 2), b, b);
    FunctionalDataset src, tgt;
    src.samples = {make_sample({0.1, 0.9}, {1.0, 2.0}), make_sample({0.2, 0.8}, {0.0, 1.0})};
    tgt.samples = {make_sample({0.3, 0.6}, {3.0, 4.0}), make_sample({0.25, 0.5, 0.75}, {1.0, 1.0, 1.0})};
    const Eigen::MatrixXd C = cost_matrix(op, src, tgt);
    for (int l = 0; l < 2; ++l) {
        CHECK(C(l, 0) == doctest::Approx(25.0));
        CHECK(C(l, 1) == doctest::Approx(3.0));
    }
}

TEST_CASE("cost vanishes when the target is the exact pushforward") {
    const BasisSet b = BasisSet::brownian(3);
    Eigen::MatrixXd lambda(3, 3);
    lambda << 0.5, 0.1, 0, -0.2, 0.3, 0, 0, 0.4, 0.7;
    const OperatorCoeffs op(lambda, b, b);
    FunctionalDataset src;
    src.samples = {make_sample({0.1, 0.5, 0.9}, {1.0, -1.0, 2.0})};
    FunctionalDataset tgt;
    tgt.samples = {pushforward(op, src.samples[0], uniform_grid(0.05, 0.95, 6))};
    const Eigen::MatrixXd C = cost_matrix(op, src, tgt);
    CHECK(C(0, 0) < 1e-20);
}

TEST_CASE("variable-length targets each use their own design points") {
    const BasisSet b = BasisSet::brownian(2);
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Identity(2, 2);
    const OperatorCoeffs op(lambda, b, b);
    FunctionalDataset src, tgt;
    src.samples = {make_sample({0.2, 0.7}, {1.0, 0.5})};
    tgt.samples = {make_sample({0.1, 0.6}, {0.0, 0.0}),
                   make_sample({0.1, 0.4, 0.6, 0.8}, {0.0, 0.0, 0.0, 0.0})};
    const Eigen::MatrixXd C = cost_matrix(op, src, tgt);
    // Against zero targets, the cost is the squared pushed values at the
    // target's own points.
    Eigen::VectorXd t1(2);
    t1 << 0.1, 0.6;
    Eigen::VectorXd t2(4);
    t2 << 0.1, 0.4, 0.6, 0.8;
    CHECK(C(0, 0) == doctest::Approx(pushforward(op, src.samples[0], t1).y.squaredNorm()));
    CHECK(C(0, 1) == doctest::Approx(pushforward(op, src.samples[0], t2).y.squaredNorm()));
}

TEST_CASE("cost matrix is invariant under joint basis-pair permutation") {
    // Swapping two source basis indices together with the matching Lambda
    // columns leaves every C_lk unchanged, as does the analogous row swap.
    const BasisSet b = BasisSet::brownian(3);
    Eigen::MatrixXd lambda(3, 3);
    lambda << 0.5, 0.1, -0.3, -0.2, 0.3, 0.8, 0.05, 0.4, 0.7;
    FunctionalDataset src, tgt;
    src.samples = {make_sample({0.1, 0.5, 0.9}, {1.0, -1.0, 2.0}),
                   make_sample({0.3, 0.7}, {0.5, 0.5})};
    tgt.samples = {make_sample({0.2, 0.6}, {1.0, 0.0})};

    const OperatorCoeffs op(lambda, b, b);
    const Eigen::MatrixXd C = cost_matrix(op, src, tgt);

    // Oracle: rebuild the cost from scratch with columns permuted by hand.
    struct PermutedWorkspace {
        Eigen::MatrixXd lambda;
    };
    Eigen::MatrixXd perm_lambda = lambda;
    perm_lambda.col(0).swap(perm_lambda.col(2));
    // C depends on Lambda U^T y; permute the coefficient order identically.
    for (std::size_t i = 0; i < src.samples.size(); ++i) {
        const Eigen::MatrixXd U = b.evaluate(src.samples[i].x, 3);
        Eigen::VectorXd a = U.transpose() * src.samples[i].y;
        std::swap(a(0), a(2));
        const Eigen::MatrixXd V = b.evaluate(tgt.samples[0].x, 3);
        const double c = (V * (perm_lambda * a) - tgt.samples[0].y).squaredNorm();
        CHECK(C(static_cast<Eigen::Index>(i), 0) == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("pushforward dataset with zero truth gives zero curves") {
    const BasisSet b = BasisSet::brownian(2);
    const OperatorCoeffs op(Eigen::MatrixXd::Zero(2, 2), b, b);
    FunctionalDataset src;
    src.samples = {make_sample({0.1, 0.9}, {1.0, 2.0})};
    Rng rng(9);
    const auto tgt = pushforward_dataset(src, op, 3, 6, rng);
    CHECK(tgt.samples[0].y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pushforward dataset regeneration with the same seed is identical") {
    const BasisSet b = BasisSet::brownian(2);
    Eigen::MatrixXd lambda(2, 2);
    lambda << 1.0, 0.2, -0.1, 0.4;
    const OperatorCoeffs op(lambda, b, b);
    FunctionalDataset src;
    src.samples = {make_sample({0.1, 0.5, 0.9}, {1.0, 2.0, 0.5})};
    Rng r1(13), r2(13);
    const auto a = pushforward_dataset(src, op, 4, 8, r1);
    const auto c = pushforward_dataset(src, op, 4, 8, r2);
    CHECK(a.samples[0].x == c.samples[0].x);
    CHECK(a.samples[0].y == c.samples[0].y);
}

TEST_CASE("operator json round-trip preserves behavior") {
    const BasisSet src_b = BasisSet::squared_exponential(0.8, 1.1, 3);
    const BasisSet tgt_b = BasisSet::brownian(2);
    Eigen::MatrixXd lambda(2, 3);
    lambda << 0.1, -0.4, 0.9, 1.2, 0.0, -0.3;
    const OperatorCoeffs op(lambda, src_b, tgt_b);
    const OperatorCoeffs back = operator_from_json(operator_to_json(op));
    const auto f = make_sample({-0.5, 0.0, 0.7}, {1.0, 0.5, -2.0});
    const auto grid = uniform_grid(0.0, 1.0, 5);
    CHECK((pushforward(op, f, grid).y - pushforward(back, f, grid).y).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dimension errors are raised") {
    const BasisSet b2 = BasisSet::brownian(2);
    const BasisSet b3 = BasisSet::brownian(3);
    CHECK_THROWS_AS(OperatorCoeffs(Eigen::MatrixXd::Zero(2, 2), b3, b2), DimensionError);
    const OperatorCoeffs op(Eigen::MatrixXd::Zero(3, 2), b2, b3);
    const auto f = make_sample({0.1, 0.9}, {1.0, 2.0});
    CHECK_THROWS_AS(pushforward(op, f, Eigen::VectorXd()), DimensionError);
}

TEST_CASE("scalar sanity case: constant bases, 1x1 datasets") {
    // Empirical basis whose single eigenfunction is constant 1 on the grid
    // mimics phi == 1; with Lambda = [[1]] the cost is (2 - 3)^2 = 1 after
    // accounting for the plain-dot-product coefficient.
    Eigen::VectorXd grid(1);
    // A 1-point grid is not allowed by the sample invariant, so use the
    // direct workspace formula on 2-point constant curves instead.
    const BasisSet b = BasisSet::brownian(1);
    FunctionalDataset src, tgt;
    src.samples = {make_sample({0.4, 0.6}, {2.0, 2.0})};
    tgt.samples = {make_sample({0.4, 0.6}, {3.0, 3.0})};
    Eigen::MatrixXd lambda(1, 1);
    lambda << 1.0;
    const OperatorCoeffs op(lambda, b, b);
    const Eigen::MatrixXd U = b.evaluate(src.samples[0].x, 1);
    const Eigen::MatrixXd V = b.evaluate(tgt.samples[0].x, 1);
    const double expected = (V * lambda * U.transpose() * src.samples[0].y -
                             tgt.samples[0].y)
                                .squaredNorm();
    CHECK(cost_matrix(op, src, tgt)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}
