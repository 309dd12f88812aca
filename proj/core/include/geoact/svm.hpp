#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "geoact/feature_vector.hpp"

namespace geoact::svm {

using Label = int;  // -1 or +1

struct LinearModel {
    std::vector<double> weights;  // dense; index = feature id
    double bias = 0.0;
    double threshold = 0.0;

    std::size_t dimension() const noexcept { return weights.size(); }

    void write(std::ostream& out) const;
    // Reads up to and including the terminating "end" line.
    static LinearModel read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static LinearModel load(const std::filesystem::path& path);

    friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

double decision(const LinearModel& m, const FeatureVector& x) noexcept;
// sign(decision - threshold) with sign(0) = +1.
Label classify(const LinearModel& m, const FeatureVector& x) noexcept;

struct TrainConfig {
    double reg_lambda = 1e-4;
    std::size_t epochs = 20;
    std::uint64_t seed = 1;
    std::size_t folds = 5;
    // Per-class loss weights proportional to inverse class frequency.
    bool balance_classes = true;

    void validate() const;
};

// Regularized average hinge loss
//   lambda/2 |w|^2 + sum_i c_i max(0, 1 - y_i (w.x_i + b)) / sum_i c_i
// where c_i are the class weights used in training.
double objective(const LinearModel& m, std::span<const FeatureVector> X, std::span<const Label> y,
                 const TrainConfig& cfg);

struct TrainTrace {
    std::vector<double> objective_per_epoch;  // evaluated at the averaged iterate
};

// Averaged stochastic subgradient descent on the objective above
// (step 1/(lambda (t + t0)), averaging after the first epoch).
LinearModel train(std::span<const FeatureVector> X, std::span<const Label> y, const TrainConfig& cfg,
                  TrainTrace* trace = nullptr);

struct Metrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;

    static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
};

double harmonic_f(double precision, double recall) noexcept;

Metrics evaluate_predictions(std::span<const Label> truth, std::span<const Label> predicted);
Metrics evaluate(const LinearModel& m, std::span<const FeatureVector> X, std::span<const Label> y);

// lambda in {1e-5, 1e-4, ..., 1e1}
std::vector<double> default_lambda_grid();

// Per-fold membership, stratified by label; deterministic in seed.
std::vector<std::size_t> stratified_folds(std::span<const Label> y, std::size_t folds, std::uint64_t seed);

struct LambdaScore {
    double reg_lambda;
    Metrics mean;  // precision/recall/f averaged over folds; counts summed
};

struct CrossValidationResult {
    TrainConfig best;
    Metrics best_mean;
    std::vector<LambdaScore> scores;
};

// Picks the lambda with the highest mean F over folds; ties go to the smaller lambda.
CrossValidationResult cross_validate(std::span<const FeatureVector> X, std::span<const Label> y,
                                     std::span<const double> lambda_grid, const TrainConfig& cfg);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Stratified train/test split holding out about (1 - train_fraction) of each class.
Split stratified_split(std::span<const Label> y, double train_fraction, std::uint64_t seed);

void check_labels(std::span<const Label> y, const char* context);

}  // namespace geoact::svm
