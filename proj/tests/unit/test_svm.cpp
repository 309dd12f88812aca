#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "geoact/errors.hpp"
#include "geoact/svm.hpp"

using namespace geoact;
using namespace geoact::svm;

namespace {

struct Data {
    std::vector<FeatureVector> X;
    std::vector<Label> y;
};

// Two Gaussian blobs in `dim` dimensions, centers at +/- sep along axis 0,
// with a fraction of labels flipped.
Data blobs(std::size_t n, std::size_t dim, double sep, double flip, std::uint64_t seed, double pos_share = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        const Label label = u(rng) < pos_share ? 1 : -1;
        std::vector<double> x(dim);
        for (auto& v : x) v = g(rng);
        x[0] += label * sep;
        d.X.push_back(FeatureVector::dense(x));
        d.y.push_back(u(rng) < flip ? -label : label);
    }
    return d;
}

}  // namespace

TEST(Decision, Arithmetic) {
    LinearModel m;
    m.weights = {1.0, -2.0, 0.0};
    m.bias = 0.5;
    const FeatureVector x{{0, 3.0}, {1, 1.0}};
    EXPECT_DOUBLE_EQ(decision(m, x), 1.5);
    EXPECT_EQ(classify(m, x), 1);
    m.threshold = 2.0;
    EXPECT_EQ(classify(m, x), -1);
    m.threshold = 1.5;
    EXPECT_EQ(classify(m, x), 1);  // sign(0) is +1
}

TEST(Decision, LinearInInput) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    LinearModel m;
    m.weights.resize(12);
    for (auto& w : m.weights) w = u(rng);
    m.bias = u(rng);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(12), b(12), ab(12);
        const double s = u(rng), t = u(rng);
        for (std::size_t k = 0; k < 12; ++k) {
            a[k] = u(rng);
            b[k] = u(rng);
            ab[k] = s * a[k] + t * b[k];
        }
        const double lhs = decision(m, FeatureVector::dense(ab)) - m.bias;
        const double rhs = s * (decision(m, FeatureVector::dense(a)) - m.bias) +
                           t * (decision(m, FeatureVector::dense(b)) - m.bias);
        EXPECT_NEAR(lhs, rhs, 1e-9);
    }
}

TEST(Train, SeparatesSeparableData) {
    const auto d = blobs(400, 5, 4.0, 0.0, 1);
    TrainConfig cfg;
    cfg.reg_lambda = 1e-3;
    const auto m = train(d.X, d.y, cfg);
    const auto metrics = evaluate(m, d.X, d.y);
    EXPECT_GE(metrics.f_score, 0.99);
    EXPECT_GT(m.weights[0], 0.0);
    for (std::size_t k = 1; k < 5; ++k) EXPECT_LT(std::abs(m.weights[k]), m.weights[0]);
}

TEST(Train, DeterministicInSeed) {
    const auto d = blobs(200, 4, 1.0, 0.1, 2);
    TrainConfig cfg;
    EXPECT_EQ(train(d.X, d.y, cfg), train(d.X, d.y, cfg));
    TrainConfig other = cfg;
    other.seed = 99;
    EXPECT_NE(train(d.X, d.y, cfg).weights, train(d.X, d.y, other).weights);
}

TEST(Train, ObjectiveSettles) {
    const auto d = blobs(500, 6, 1.0, 0.1, 3);
    TrainConfig cfg;
    cfg.reg_lambda = 1e-2;
    cfg.epochs = 30;
    TrainTrace trace;
    const auto m = train(d.X, d.y, cfg, &trace);
    ASSERT_EQ(trace.objective_per_epoch.size(), 30u);
    // The averaged iterate may wobble by a little between epochs but never
    // climbs, and ends close to where a much longer run lands.
    for (std::size_t e = 1; e < trace.objective_per_epoch.size(); ++e)
        EXPECT_LE(trace.objective_per_epoch[e], trace.objective_per_epoch[e - 1] + 1e-3) << "epoch " << e;
    EXPECT_DOUBLE_EQ(trace.objective_per_epoch.back(), objective(m, d.X, d.y, cfg));
    TrainConfig longer = cfg;
    longer.epochs = 200;
    const double best = objective(train(d.X, d.y, longer), d.X, d.y, cfg);
    EXPECT_LE(trace.objective_per_epoch.back(), best * 1.01 + 1e-6);
}

TEST(Train, ClassWeightsHandleImbalance) {
    const auto d = blobs(1000, 3, 1.5, 0.0, 4, 0.08);
    TrainConfig cfg;
    cfg.reg_lambda = 1e-3;
    const auto m = evaluate(train(d.X, d.y, cfg), d.X, d.y);
    EXPECT_GE(m.recall, 0.8);
}

TEST(Train, RejectsDegenerateInput) {
    std::vector<FeatureVector> X{{{0, 1.0}}, {{0, 2.0}}, {{0, 3.0}}};
    EXPECT_THROW(train(X, std::vector<Label>{1, 1, 1}, TrainConfig{}), DegenerateLabelsError);
    EXPECT_THROW(train(X, std::vector<Label>{1, 0, -1}, TrainConfig{}), DataError);
    EXPECT_THROW(train(X, std::vector<Label>{1, -1}, TrainConfig{}), DataError);
    TrainConfig bad;
    bad.reg_lambda = 0.0;
    EXPECT_THROW(train(X, std::vector<Label>{1, -1, 1}, bad), DataError);
}

TEST(Model, RoundTripsExactly) {
    const auto d = blobs(100, 8, 1.0, 0.05, 6);
    auto m = train(d.X, d.y, TrainConfig{});
    m.threshold = 0.123456789;
    std::stringstream ss;
    m.write(ss);
    ss << "trailing\n";
    const auto back = LinearModel::read(ss);
    EXPECT_EQ(back, m);
    std::string rest;
    std::getline(ss, rest);
    EXPECT_EQ(rest, "trailing");
}

TEST(Model, ReadRejectsBrokenFiles) {
    std::istringstream missing_end("bias\t0\nthreshold\t0\ndimension\t2\n0\t1\n");
    EXPECT_THROW(LinearModel::read(missing_end), DataError);
    std::istringstream beyond("bias\t0\nthreshold\t0\ndimension\t2\n5\t1\nend\n");
    EXPECT_THROW(LinearModel::read(beyond), ParseError);
    std::istringstream junk("bias\tabc\nend\n");
    EXPECT_THROW(LinearModel::read(junk), ParseError);
}

TEST(Metrics, FScore) {
    EXPECT_DOUBLE_EQ(harmonic_f(0.5, 1.0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(harmonic_f(0.0, 0.0), 0.0);
    const auto m = Metrics::from_counts(8, 2, 5, 4);
    EXPECT_DOUBLE_EQ(m.precision, 0.8);
    EXPECT_DOUBLE_EQ(m.recall, 8.0 / 12.0);
    EXPECT_DOUBLE_EQ(m.f_score, 2.0 * 0.8 * (8.0 / 12.0) / (0.8 + 8.0 / 12.0));
    const auto none = Metrics::from_counts(0, 0, 10, 0);
    EXPECT_EQ(none.f_score, 0.0);
}

TEST(Metrics, FromPredictions) {
    const std::vector<Label> truth{1, 1, -1, -1, 1};
    const std::vector<Label> pred{1, -1, 1, -1, 1};
    const auto m = evaluate_predictions(truth, pred);
    EXPECT_EQ(m.tp, 2u);
    EXPECT_EQ(m.fn, 1u);
    EXPECT_EQ(m.fp, 1u);
    EXPECT_EQ(m.tn, 1u);
}

TEST(Metrics, FLiesBetweenPrecisionAndRecall) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 500; ++i) {
        const auto m = Metrics::from_counts(rng() % 50 + 1, rng() % 50, rng() % 50, rng() % 50);
        EXPECT_LE(m.f_score, std::max(m.precision, m.recall) + 1e-12);
        EXPECT_GE(m.f_score, std::min(m.precision, m.recall) - 1e-12);
    }
}

TEST(Folds, StratifiedAndBalanced) {
    const auto d = blobs(503, 2, 1.0, 0.0, 9, 0.3);
    const auto fold = stratified_folds(d.y, 5, 1);
    std::array<std::size_t, 5> pos{}, neg{};
    for (std::size_t i = 0; i < d.y.size(); ++i) (d.y[i] > 0 ? pos : neg)[fold[i]]++;
    EXPECT_LE(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()), 1u);
    EXPECT_LE(*std::max_element(neg.begin(), neg.end()) - *std::min_element(neg.begin(), neg.end()), 1u);
}

TEST(Split, HoldsOutEachClass) {
    const auto d = blobs(1000, 2, 1.0, 0.0, 10, 0.2);
    const auto s = stratified_split(d.y, 0.8, 3);
    EXPECT_EQ(s.train.size() + s.test.size(), 1000u);
    std::size_t pos_all = std::count(d.y.begin(), d.y.end(), 1), pos_test = 0;
    for (auto i : s.test) pos_test += d.y[i] > 0;
    EXPECT_NEAR(static_cast<double>(pos_test), 0.2 * static_cast<double>(pos_all), 1.0);
    std::vector<std::size_t> all(s.train);
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(CrossValidate, PrefersModerateRegularization) {
    // Shared noise on both axes: x0 - x1 separates the classes, but the
    // class centroids differ along x0 only, which is all a heavily
    // regularized model can pick up.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 3.0);
    Data d;
    for (int i = 0; i < 400; ++i) {
        const Label label = i % 2 ? 1 : -1;
        const double n = g(rng);
        d.X.push_back(FeatureVector::dense(std::vector<double>{n + 0.5 * label, n}));
        d.y.push_back(label);
    }
    TrainConfig cfg;
    cfg.epochs = 30;
    const std::vector<double> grid{1e-3, 1e1};
    const auto cv = cross_validate(d.X, d.y, grid, cfg);
    ASSERT_EQ(cv.scores.size(), 2u);
    EXPECT_EQ(cv.best.reg_lambda, 1e-3);
    EXPECT_GT(cv.scores[0].mean.f_score, cv.scores[1].mean.f_score + 0.1);
    EXPECT_EQ(cv.scores[0].mean.tp + cv.scores[0].mean.fp + cv.scores[0].mean.tn + cv.scores[0].mean.fn, 400u);
}

TEST(CrossValidate, TooFewExamplesPerFold) {
    std::vector<FeatureVector> X(6, FeatureVector{{0, 1.0}});
    std::vector<Label> y{1, 1, -1, -1, -1, -1};
    TrainConfig cfg;
    cfg.folds = 5;
    const std::vector<double> grid{1e-3};
    EXPECT_THROW(cross_validate(X, y, grid, cfg), DegenerateLabelsError);
}
