#include <gtest/gtest.h>

#include "support.hpp"

using namespace cogdiag;
using testing_support::random_model;

namespace {

ModelParams constant_output_model(double y) {
    Rng rng(1);
    auto p = random_model(2, 2, 2, 3, 2, rng);
    for (auto& v : p.W3.data()) v = 0.0;
    p.b3 = logit(y);
    return p;
}

std::vector<Observation> random_pairs(const ModelParams& p, std::size_t n, Rng& rng) {
    std::vector<Observation> pairs;
    for (std::size_t i = 0; i < n; ++i)
        pairs.push_back({rng.index(p.num_students()), rng.index(p.num_items()), static_cast<int>(rng.index(2))});
    return pairs;
}

// Visits every parameter entry of p together with the matching gradient entry.
template <typename Fn>
void each_entry(ModelParams& p, Gradients& g, Fn&& fn) {
    detail::for_each_tensor(p, g, [&](std::span<double> w, std::span<double> dw) {
        for (std::size_t i = 0; i < w.size(); ++i) fn(w[i], dw[i]);
    });
}

EncodedDataset synthetic(std::size_t N, std::size_t M, std::size_t K, std::size_t ipk, std::uint64_t seed) {
    SynthConfig c;
    c.N = N;
    c.M = M;
    c.K = K;
    c.items_per_kc = ipk;
    c.seed = seed;
    return generate(c).second;
}

}  // namespace

TEST(Loss, HalfProbabilityIsLn2) {
    const auto p = constant_output_model(0.5);
    const std::vector<Observation> one{{0, 0, 1}}, zero{{0, 0, 0}};
    EXPECT_NEAR(loss(p, one), 0.693147, 1e-6);
    EXPECT_NEAR(loss(p, zero), 0.693147, 1e-6);
    EXPECT_DOUBLE_EQ(loss(p, one), std::log(2.0));
}

TEST(Loss, ThreePairHandArithmetic) {
    const std::vector<double> ys{0.9, 0.2, 0.5};
    const std::vector<int> rs{1, 0, 1};
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::vector<Observation> pair{{0, 1, rs[i]}};
        total += loss(constant_output_model(ys[i]), pair);
    }
    EXPECT_NEAR(total, 1.021651, 1e-6);
    EXPECT_NEAR(total, -(std::log(0.9) + std::log(0.8) + std::log(0.5)), 1e-12);
}

TEST(Loss, SummedOverPairs) {
    Rng rng(2);
    const auto p = random_model(3, 4, 2, 3, 2, rng);
    const auto pairs = random_pairs(p, 7, rng);
    double sum = 0.0;
    for (const auto& o : pairs) sum += loss(p, std::vector<Observation>{o});
    EXPECT_NEAR(loss(p, pairs), sum, 1e-12);
    EXPECT_GE(loss(p, pairs), 0.0);
}

TEST(Loss, EmptyBatchAndRange) {
    Rng rng(3);
    const auto p = random_model(2, 2, 2, 3, 2, rng);
    try {
        loss(p, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyBatch);
    }
    EXPECT_THROW(gradients(p, {}), Error);
    EXPECT_THROW(loss(p, std::vector<Observation>{{5, 0, 1}}), Error);
}

TEST(Gradients, MatchCentralDifferences) {
    Rng rng(4);
    for (int model = 0; model < 24; ++model) {
        const std::size_t N = 1 + rng.index(5), M = 1 + rng.index(6), K = 1 + rng.index(3);
        const auto mode = model % 3 == 2 ? DiscriminationMode::per_kc : DiscriminationMode::scalar;
        auto p = random_model(N, M, K, 1 + rng.index(4), 1 + rng.index(3), rng, 1.5, true, mode);
        const auto pairs = random_pairs(p, 1 + rng.index(10), rng);
        auto g = gradients(p, pairs);
        const double h = 1e-5;
        each_entry(p, g, [&](double& w, double analytic) {
            const double saved = w;
            w = saved + h;
            const double up = loss(p, pairs);
            w = saved - h;
            const double down = loss(p, pairs);
            w = saved;
            const double numeric = (up - down) / (2 * h);
            EXPECT_TRUE(testing_support::fd_close(analytic, numeric)) << "model " << model << " analytic " << analytic
                                                                      << " numeric " << numeric;
        });
    }
}

TEST(Gradients, UntouchedStudentRowsAreZero) {
    Rng rng(5);
    const auto p = random_model(4, 3, 2, 3, 2, rng);
    const std::vector<Observation> pairs{{0, 0, 1}, {2, 1, 0}, {0, 2, 0}};
    const auto g = gradients(p, pairs);
    for (std::size_t s : {1u, 3u})
        for (double v : g.A.row(s)) EXPECT_EQ(v, 0.0);
}

TEST(Gradients, DuplicatePairDoubles) {
    Rng rng(6);
    const auto p = random_model(2, 3, 2, 3, 2, rng);
    const std::vector<Observation> one{{1, 2, 1}}, two{{1, 2, 1}, {1, 2, 1}};
    auto g1 = gradients(p, one);
    auto g2 = gradients(p, two);
    auto copy = p;
    std::vector<double> a, b;
    each_entry(copy, g1, [&](double&, double v) { a.push_back(v); });
    each_entry(copy, g2, [&](double&, double v) { b.push_back(v); });
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(b[i], 2.0 * a[i]);
}

TEST(Fit, ZeroEpochsReturnsInitialization) {
    const auto ds = testing_support::fixture_dataset("responses_2x3.csv", "qmatrix_3x2.csv");
    TrainConfig c;
    c.epochs = 0;
    c.seed = 9;
    const auto [p, report] = fit(ds, c);
    EXPECT_EQ(p, initialize(ds, c));
    EXPECT_EQ(report.epochs_run, 0u);
    EXPECT_EQ(report.steps_run, 0u);
    EXPECT_EQ(report.losses.size(), 1u);
}

TEST(Fit, InitializationRanges) {
    const auto ds = synthetic(10, 20, 4, 5, 1);
    TrainConfig c;
    c.init_scale = 0.3;
    const auto p = initialize(ds, c);
    for (const Matrix* m : {&p.A, &p.B, &p.D})
        for (double v : m->data()) EXPECT_TRUE(v >= -0.3 && v < 0.3);
    for (const Matrix* m : {&p.W1, &p.W2, &p.W3})
        for (double v : m->data()) EXPECT_TRUE(v >= 0.0 && v < 0.3);
    for (double v : p.b1) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(p.b3, 0.0);
}

TEST(Fit, Deterministic) {
    const auto ds = synthetic(12, 20, 3, 7, 2);
    TrainConfig c;
    c.epochs = 5;
    c.seed = 77;
    const auto a = fit(ds, c);
    const auto b = fit(ds, c);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
    c.seed = 78;
    EXPECT_FALSE(fit(ds, c).first == a.first);
}

TEST(Fit, NonnegativeAfterEveryStep) {
    const auto ds = synthetic(20, 30, 3, 10, 3);
    TrainConfig c;
    c.epochs = 50;
    c.learning_rate = 0.05;  // large steps push weights negative before clipping
    std::size_t steps = 0;
    double worst = 0.0;
    c.on_step = [&](const ModelParams& p, std::size_t) {
        ++steps;
        worst = std::min(worst, p.min_weight());
    };
    const auto [p, report] = fit(ds, c);
    EXPECT_EQ(steps, report.steps_run);
    EXPECT_GT(steps, 50u);
    EXPECT_GE(worst, 0.0);
    EXPECT_GE(p.min_weight(), 0.0);
}

TEST(Fit, FullBatchAndSgdOptions) {
    const auto ds = synthetic(10, 15, 3, 5, 4);
    TrainConfig c;
    c.epochs = 4;
    c.batch_size = 0;
    auto [p, report] = fit(ds, c);
    EXPECT_EQ(report.steps_run, 4u);
    c.optimizer = Optimizer::sgd;
    c.learning_rate = 0.5;
    std::tie(p, report) = fit(ds, c);
    EXPECT_LT(report.losses.back(), report.losses.front());
}

TEST(Fit, RejectsBadConfig) {
    const auto ds = synthetic(5, 10, 2, 5, 5);
    TrainConfig c;
    c.holdout_fraction = 0.5;
    EXPECT_THROW(fit(ds, c), Error);
    c.holdout_fraction = 0.1;
    c.learning_rate = 0.0;
    EXPECT_THROW(fit(ds, c), Error);
}

TEST(Fit, SyntheticLearnsBeyondMajorityRate) {
    const auto ds = synthetic(40, 50, 5, 10, 2024);
    TrainConfig c;
    c.seed = 1;
    const auto [p, report] = fit(ds, c);
    ASSERT_EQ(report.losses.size(), 51u);
    for (double l : report.losses) EXPECT_TRUE(std::isfinite(l) && l >= 0.0);
    EXPECT_LT(report.losses.back(), report.losses.front());

    const auto [train, hold] = split_holdout(ds, c.holdout_fraction, c.seed);
    ASSERT_EQ(hold.size(), report.holdout_records);
    double ones = 0.0;
    for (const auto& o : hold) ones += o.correct;
    const double majority = std::max(ones, hold.size() - ones) / static_cast<double>(hold.size());
    ASSERT_TRUE(report.holdout_accuracy);
    EXPECT_GT(*report.holdout_accuracy, majority);
}

TEST(SplitHoldout, PartitionsRecords) {
    const auto ds = synthetic(10, 10, 2, 5, 6);
    const auto [train, hold] = split_holdout(ds, 0.25, 3);
    EXPECT_EQ(train.size() + hold.size(), ds.records.size());
    EXPECT_EQ(hold.size(), 25u);
    const auto again = split_holdout(ds, 0.25, 3);
    EXPECT_EQ(again.second, hold);
}
