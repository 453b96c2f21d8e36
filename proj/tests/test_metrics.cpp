#include "lobench/error.hpp"
#include "lobench/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lobench;

namespace {

LossConfig default_cfg(int levels = 10) {
    LossConfig c;
    c.weights = WeightProfile::level_decay(levels);
    return c;
}

}  // namespace

TEST(Mse, BasicCases) {
    const RowMatrix x = RowMatrix::Zero(100, 40);
    EXPECT_EQ(mse(x, x), 0.0);
    EXPECT_EQ(mae(x, x), 0.0);
    const RowMatrix one = RowMatrix::Ones(100, 40);
    EXPECT_DOUBLE_EQ(mse(x, one), 1.0);
    EXPECT_DOUBLE_EQ(mae(x, one), 1.0);
    EXPECT_THROW(mse(x, RowMatrix::Zero(100, 36)), ValidationError);
    EXPECT_THROW(mae(x, RowMatrix::Zero(99, 40)), ValidationError);
}

TEST(Mse, LoopOracle) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) {
        const RowMatrix x = oracle::random_matrix(rng, 100, 40), y = oracle::random_matrix(rng, 100, 40);
        EXPECT_NEAR(mse(x, y), oracle::mse(x, y), 1e-12);
        EXPECT_NEAR(mae(x, y), oracle::mae(x, y), 1e-12);
    }
}

TEST(Wmse, UniformWeightsGiveTTimesMse) {
    std::mt19937_64 rng(2);
    const RowMatrix x = oracle::random_matrix(rng, 100, 40), y = oracle::random_matrix(rng, 100, 40);
    EXPECT_NEAR(wmse(x, y, WeightProfile::uniform(10)), 100 * mse(x, y), 1e-10);
}

TEST(Wmse, SingleColumnMass) {
    std::mt19937_64 rng(3);
    const RowMatrix x = oracle::random_matrix(rng, 20, 8), y = oracle::random_matrix(rng, 20, 8);
    WeightProfile p{Vector::Zero(8)};
    p.weights[5] = 2.0;
    double sum = 0;
    for (int i = 0; i < 20; ++i) sum += (x(i, 5) - y(i, 5)) * (x(i, 5) - y(i, 5));
    EXPECT_NEAR(wmse(x, y, p), sum, 1e-12);
    EXPECT_EQ(wmse(x, x, p), 0.0);
}

TEST(Wmse, DefaultProfileAndLoopOracle) {
    const auto p = WeightProfile::level_decay(10);
    EXPECT_DOUBLE_EQ(p.weights[0], 1.0);
    EXPECT_DOUBLE_EQ(p.weights[9], 0.1);
    EXPECT_DOUBLE_EQ(p.weights[29], 0.1);
    EXPECT_DOUBLE_EQ(p.weights[30], 1.0);
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
        const RowMatrix x = oracle::random_matrix(rng, 100, 40), y = oracle::random_matrix(rng, 100, 40);
        EXPECT_NEAR(wmse(x, y, p), oracle::wmse(x, y, oracle::level_weights(10)), 1e-11);
    }
}

TEST(Wmse, InvalidProfiles) {
    WeightProfile zero{Vector::Zero(40)};
    EXPECT_THROW(zero.validate(40), ValidationError);
    WeightProfile negative{Vector::Ones(40)};
    negative.weights[3] = -1;
    EXPECT_THROW(negative.validate(40), ValidationError);
    EXPECT_THROW(WeightProfile::uniform(10).validate(36), ValidationError);
}

TEST(PriceVolume, DisjointPartition) {
    RowMatrix x = RowMatrix::Zero(5, 40), y = RowMatrix::Zero(5, 40);
    EXPECT_EQ(price_volume_losses(x, y).price, 0.0);
    y(2, layout::bid_volume(10, 3)) = 2;
    const auto pv = price_volume_losses(x, y);
    EXPECT_EQ(pv.price, 0.0);
    EXPECT_DOUBLE_EQ(pv.volume, 4.0 / (5 * 20));
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        const RowMatrix a = oracle::random_matrix(rng, 30, 40), b = oracle::random_matrix(rng, 30, 40);
        const auto got = price_volume_losses(a, b);
        const auto want = oracle::price_volume(a, b);
        EXPECT_NEAR(got.price, want.first, 1e-12);
        EXPECT_NEAR(got.volume, want.second, 1e-12);
    }
}

TEST(LReg, OrderedPricesAreFree) {
    std::mt19937_64 rng(6);
    RowMatrix y(50, 40);
    for (int i = 0; i < 50; ++i) y.row(i) = flatten(oracle::random_snapshot(rng, 10)).transpose();
    EXPECT_EQ(l_reg(y), 0.0);
}

TEST(LReg, SingleInversionHandValue) {
    Snapshot s;
    for (int i = 0; i < 10; ++i) s.levels.push_back({10.00 - 0.01 * i, 100, 10.01 + 0.01 * i, 100});
    RowMatrix y = flatten(s).transpose();
    // push the best ask 0.19 below the best bid; only the (b_p[1], a_p[1]) pair inverts
    y(0, layout::ask_price(10, 0)) = y(0, layout::bid_price(10, 0)) - 0.19;
    EXPECT_NEAR(l_reg(y), 0.19 / 19, 1e-12);
    EXPECT_NEAR(l_reg(y), 0.01, 1e-12);
}

TEST(LReg, ShiftInvariantAndLoopOracle) {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 30; ++k) {
        const RowMatrix y = oracle::random_matrix(rng, 10, 40);
        RowMatrix shifted = y;
        for (int c : layout::ascending_price_columns(10)) shifted.col(c).array() += 3.25;
        EXPECT_NEAR(l_reg(shifted), l_reg(y), 1e-12);
        EXPECT_NEAR(l_reg(y), oracle::l_reg(y), 1e-12);
    }
}

TEST(LAll, DegenerateConfigs) {
    std::mt19937_64 rng(8);
    const RowMatrix x = oracle::random_matrix(rng, 20, 40), y = oracle::random_matrix(rng, 20, 40);
    LossConfig c = default_cfg();
    c.alpha = 1;
    c.lambda = 0;
    EXPECT_NEAR(l_all(x, y, c), mse(x, y), 1e-12);
    c.alpha = 0;
    c.lambda = 2;
    EXPECT_NEAR(l_all(x, y, c), wmse(x, y, c.weights) + 2 * l_reg(y), 1e-12);
}

TEST(LAll, ComposesIndependentOracles) {
    std::mt19937_64 rng(9);
    const auto w = oracle::level_weights(10);
    for (int k = 0; k < 100; ++k) {
        const RowMatrix x = oracle::random_matrix(rng, 100, 40), y = oracle::random_matrix(rng, 100, 40);
        const double want = 0.5 * oracle::mse(x, y) + 0.5 * oracle::wmse(x, y, w) + oracle::l_reg(y);
        EXPECT_NEAR(l_all(x, y, default_cfg()), want, 1e-12 * std::max(1.0, want));
    }
}

TEST(LAll, InvalidConfig) {
    LossConfig c = default_cfg();
    c.alpha = 1.5;
    EXPECT_THROW(c.validate(40), ValidationError);
    c.alpha = 0.5;
    c.lambda = -1;
    EXPECT_THROW(c.validate(40), ValidationError);
}

TEST(LAll, ErrorScalingIsQuadratic) {
    std::mt19937_64 rng(10);
    const RowMatrix x = oracle::random_matrix(rng, 20, 40), e = oracle::random_matrix(rng, 20, 40);
    const RowMatrix y1 = x + e, y3 = x + 3 * e;
    EXPECT_NEAR(mse(x, y3), 9 * mse(x, y1), 1e-10);
    EXPECT_NEAR(wmse(x, y3, WeightProfile::level_decay()), 9 * wmse(x, y1, WeightProfile::level_decay()), 1e-9);
}

TEST(LAllGradient, ZeroAtPerfectFitWithoutPenalty) {
    std::mt19937_64 rng(11);
    const RowMatrix x = oracle::random_matrix(rng, 10, 40);
    LossConfig c = default_cfg();
    c.lambda = 0;
    EXPECT_TRUE(l_all_gradient(x, x, c).isZero(0));
}

TEST(LAllGradient, HingeContributionByHand) {
    // T = 2, only one active pair in row 0
    Snapshot s;
    for (int i = 0; i < 10; ++i) s.levels.push_back({10.00 - 0.01 * i, 100, 10.01 + 0.01 * i, 100});
    RowMatrix x(2, 40);
    x.row(0) = flatten(s).transpose();
    x.row(1) = x.row(0);
    RowMatrix y = x;
    const int a1 = layout::ask_price(10, 0), b1 = layout::bid_price(10, 0);
    y(0, a1) = 9.90;
    LossConfig c = default_cfg();
    c.alpha = 0.5;
    c.lambda = 1;
    LossConfig no_reg = c;
    no_reg.lambda = 0;
    RowMatrix diff = l_all_gradient(x, y, c) - l_all_gradient(x, y, no_reg);
    const double expected = 1.0 / (19 * 2);
    EXPECT_NEAR(diff(0, b1), expected, 1e-15);
    EXPECT_NEAR(diff(0, a1), -expected, 1e-15);
    diff(0, b1) = diff(0, a1) = 0;
    EXPECT_TRUE(diff.isZero(0));
}

TEST(LAllGradient, FiniteDifferences) {
    std::mt19937_64 rng(12);
    const LossConfig c = default_cfg(2);
    int checked = 0;
    for (int k = 0; k < 100; ++k) {
        const RowMatrix x = oracle::random_matrix(rng, 4, 8);
        const RowMatrix y = oracle::random_matrix(rng, 4, 8);
        const RowMatrix g = l_all_gradient(x, y, c);
        const RowMatrix fd = oracle::finite_difference([&](const RowMatrix& z) { return l_all(x, z, c); }, y);
        for (long i = 0; i < g.rows(); ++i)
            for (long j = 0; j < g.cols(); ++j) {
                EXPECT_NEAR(g(i, j), fd(i, j), 1e-5 * std::max(1.0, std::fabs(fd(i, j))));
                ++checked;
            }
    }
    EXPECT_EQ(checked, 100 * 32);
}

TEST(CrossEntropy, KnownValues) {
    EXPECT_NEAR(cross_entropy(Eigen::Vector3d(0, 0, 0), Trend::steady), std::log(3.0), 1e-15);
    EXPECT_NEAR(cross_entropy(Eigen::Vector3d(7, 7, 7), Trend::up), std::log(3.0), 1e-15);
    EXPECT_LT(cross_entropy(Eigen::Vector3d(-50, 0, 50), Trend::up), 1e-20);
    EXPECT_TRUE(std::isfinite(cross_entropy(Eigen::Vector3d(1000, -1000, 0), Trend::down)));
    EXPECT_NEAR(cross_entropy(Eigen::Vector3d(1000, -1000, 0), Trend::steady), 2000, 1e-9);
}

TEST(CrossEntropy, LogSumExpOracleAndGradient) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0, 3);
    for (int k = 0; k < 100; ++k) {
        const double l[3] = {n(rng), n(rng), n(rng)};
        const Eigen::Vector3d v(l[0], l[1], l[2]);
        const int cls = static_cast<int>(rng() % 3);
        EXPECT_NEAR(cross_entropy(v, trend_from_class(cls)), oracle::cross_entropy(l, cls), 1e-12);
        const Eigen::Vector3d g = cross_entropy_gradient(v, trend_from_class(cls));
        for (int j = 0; j < 3; ++j) {
            Eigen::Vector3d up = v, down = v;
            up[j] += 1e-5;
            down[j] -= 1e-5;
            const double fd = (cross_entropy(up, trend_from_class(cls)) - cross_entropy(down, trend_from_class(cls))) / 2e-5;
            EXPECT_NEAR(g[j], fd, 1e-8);
        }
    }
}

TEST(MaskedMse, Cases) {
    std::mt19937_64 rng(14);
    const RowMatrix x = oracle::random_matrix(rng, 10, 8), y = oracle::random_matrix(rng, 10, 8);
    std::vector<int> all(10);
    std::iota(all.begin(), all.end(), 0);
    EXPECT_NEAR(masked_mse(x, y, all), mse(x, y), 1e-14);
    RowMatrix z = y;
    const std::vector<int> some{1, 4, 7};
    for (int r : some) z.row(r) = x.row(r);
    EXPECT_EQ(masked_mse(x, z, some), 0.0);
    EXPECT_THROW(masked_mse(x, y, std::vector<int>{}), ValidationError);
    EXPECT_THROW(masked_mse(x, y, std::vector<int>{10}), ValidationError);
    for (int k = 0; k < 50; ++k) {
        const RowMatrix a = oracle::random_matrix(rng, 20, 40), b = oracle::random_matrix(rng, 20, 40);
        const std::vector<int> m{0, 3, 5, 19};
        EXPECT_NEAR(masked_mse(a, b, m), oracle::masked_mse(a, b, m), 1e-12);
        const RowMatrix g = masked_mse_gradient(a, b, m);
        const RowMatrix fd = oracle::finite_difference([&](const RowMatrix& z2) { return masked_mse(a, z2, m); }, b);
        EXPECT_TRUE(g.isApprox(fd, 1e-6));
    }
}

TEST(MetricsReport, RecordRoundTrip) {
    MetricsReport r;
    r.samples = 12;
    r.mse = 0.1;
    r.l_all = 1.0 / 3.0;
    r.macro_recall = 0.7260;
    r.context = {{"task", "reconstruction"}};
    const std::string line = r.to_record();
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const MetricsReport back = MetricsReport::from_record(line);
    EXPECT_EQ(back.samples, 12u);
    EXPECT_EQ(*back.l_all, 1.0 / 3.0);
    EXPECT_FALSE(back.mae);
    EXPECT_EQ(back.to_record(), line);
}

TEST(MetricsReport, ReconstructionMeansPerWindow) {
    std::mt19937_64 rng(15);
    std::vector<RowMatrix> xs, ys;
    for (int k = 0; k < 4; ++k) {
        xs.push_back(oracle::random_matrix(rng, 5, 40));
        ys.push_back(oracle::random_matrix(rng, 5, 40));
    }
    const auto r = reconstruction_report(xs, ys, default_cfg());
    double m = 0, all = 0;
    for (int k = 0; k < 4; ++k) {
        m += oracle::mse(xs[k], ys[k]) / 4;
        all += l_all(xs[k], ys[k], default_cfg()) / 4;
    }
    EXPECT_NEAR(*r.mse, m, 1e-12);
    EXPECT_NEAR(*r.l_all, all, 1e-12);
    EXPECT_EQ(r.samples, 4u);
    for (const auto& v : {r.mse, r.mae, r.wmse, r.l_price, r.l_volume, r.l_reg, r.l_all}) EXPECT_GE(*v, 0.0);
}
