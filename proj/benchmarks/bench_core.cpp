#include <benchmark/benchmark.h>

#include <random>

#include "geoact/cascade.hpp"
#include "geoact/homeloc.hpp"
#include "geoact/mobility.hpp"
#include "geoact/svm.hpp"
#include "geoact/synth.hpp"
#include "geoact/textprep.hpp"

using namespace geoact;

namespace {

const synth::World& world() {
    static const synth::World w = [] {
        synth::WorldSpec spec;
        spec.seed = 17;
        return synth::generate_world(spec);
    }();
    return w;
}

mobility::HourlyTrace trace_of(std::size_t hours, int cells, double fill, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> c(0, cells - 1);
    mobility::HourlyTrace t;
    t.user = "b";
    t.start_hour = 24 * 1000;
    t.slots.resize(hours);
    for (auto& s : t.slots)
        if (u(rng) < fill) s = GridCell{c(rng), 0};
    t.slots[0] = GridCell{0, 0};
    return t;
}

}  // namespace

static void BM_Normalize(benchmark::State& state) {
    const auto& tweets = world().tweets;
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(text::normalize(tweets[i % tweets.size()].text));
        ++i;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Normalize);

static void BM_ClassifyTweet(benchmark::State& state) {
    static const cascade::CascadeModel model = [] {
        std::vector<TweetRecord> labeled;
        for (const auto& t : world().tweets)
            if (t.gold) labeled.push_back(t);
        cascade::CascadeConfig cfg;
        cfg.lambda_grid = {1e-3};
        return cascade::train_cascade(labeled, cascade::KeywordFilter::defaults(), cfg).model;
    }();
    const auto& tweets = world().tweets;
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(cascade::classify_tweet(tweets[i % tweets.size()], model));
        ++i;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ClassifyTweet);

static void BM_SvmTrain(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<FeatureVector> X;
    std::vector<svm::Label> y;
    for (int i = 0; i < state.range(0); ++i) {
        const svm::Label label = i % 2 ? 1 : -1;
        std::vector<double> dense(32);
        for (std::size_t k = 0; k < dense.size(); ++k) dense[k] = n(rng) + (k < 4 ? 0.8 * label : 0.0);
        X.push_back(FeatureVector::dense(dense));
        y.push_back(label);
    }
    svm::TrainConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(svm::train(X, y, cfg));
    state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(cfg.epochs));
}
BENCHMARK(BM_SvmTrain)->Arg(1000)->Arg(10000);

static void BM_PageRank(benchmark::State& state) {
    const auto g = mobility::build_movement_graph(trace_of(24 * 28, static_cast<int>(state.range(0)), 0.3, 5));
    for (auto _ : state) benchmark::DoNotOptimize(mobility::weighted_pagerank(g));
}
BENCHMARK(BM_PageRank)->Arg(8)->Arg(64);

static void BM_ExtractFeatures(benchmark::State& state) {
    const auto t = trace_of(24 * static_cast<std::size_t>(state.range(0)), 12, 0.1, 7);
    for (auto _ : state) benchmark::DoNotOptimize(mobility::extract_features(t));
}
BENCHMARK(BM_ExtractFeatures)->Arg(28)->Arg(365);

static void BM_GenerateWorld(benchmark::State& state) {
    synth::WorldSpec spec;
    spec.n_users = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(synth::generate_world(spec));
}
BENCHMARK(BM_GenerateWorld)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
