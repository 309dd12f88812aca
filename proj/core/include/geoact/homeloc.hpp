#pragma once

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoact/corpus.hpp"
#include "geoact/mobility.hpp"
#include "geoact/svm.hpp"

namespace geoact::home {

using mobility::LocationFeatures;
using CandidateMap = std::map<GridCell, LocationFeatures>;

inline constexpr double kNoThreshold = -std::numeric_limits<double>::infinity();

// Zero-mean / unit-variance scaling fitted on training rows.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;  // 1 where a column is constant

    static Standardizer fit(std::span<const LocationFeatures> rows);
    FeatureVector apply(const LocationFeatures& f) const;
};

struct HomeModel {
    svm::LinearModel linear;
    Standardizer scaler;

    double score(const LocationFeatures& f) const;

    void write(std::ostream& out) const;
    static HomeModel read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static HomeModel load(const std::filesystem::path& path);
};

struct LabeledLocation {
    LocationFeatures features;
    bool is_home = false;
};

struct HomeTrainConfig {
    svm::TrainConfig train;
    std::vector<double> lambda_grid = svm::default_lambda_grid();
};

struct HomeTraining {
    HomeModel model;
    svm::CrossValidationResult cv;
};

HomeTraining train_home_model(std::span<const LabeledLocation> samples, const HomeTrainConfig& cfg = {});

struct HomePrediction {
    std::string user;
    std::optional<GridCell> cell;  // empty = unknown
    GridCell candidate;            // best-scoring cell, reported even when unknown
    double score = 0.0;

    bool known() const noexcept { return cell.has_value(); }
};

// Highest-scoring cell; ties go to the higher check-in percentage, then the
// smaller cell id. Unknown when that score is below `threshold`.
HomePrediction predict_home(const std::string& user, const CandidateMap& candidates, const HomeModel& m,
                            double threshold = kNoThreshold);

// ---- baselines over hourly traces ------------------------------------------

HomePrediction baseline_most_checkin(const mobility::HourlyTrace& trace, std::size_t min_count = 3);
// Score is the margin between the two best cells (the best value itself for a
// single cell); unknown when it falls below `min_margin`.
HomePrediction baseline_last_destination(const mobility::HourlyTrace& trace, double min_margin = 0.0);
HomePrediction baseline_pagerank(const mobility::HourlyTrace& trace, double min_margin = 0.0,
                                 const mobility::PageRankOptions& opts = {});
HomePrediction baseline_reversed_pagerank(const mobility::HourlyTrace& trace, double min_margin = 0.0,
                                          const mobility::PageRankOptions& opts = {});

// ---- evaluation ------------------------------------------------------------

struct ScoredPrediction {
    double score = 0.0;
    bool correct = false;
    bool eligible = true;  // false when the method can never answer for this user
};

struct CurvePoint {
    double threshold = 0.0;
    double accuracy = 0.0;  // over covered users; 0 when none are covered
    double coverage = 0.0;
    std::size_t covered = 0;
    std::size_t correct = 0;
};
using CoverageCurve = std::vector<CurvePoint>;

// Coverage counts users with score >= threshold among `total_users`.
CoverageCurve curve_from_scores(std::span<const ScoredPrediction> scored, std::span<const double> thresholds,
                                std::size_t total_users);
// -inf, every distinct score, and +inf.
std::vector<double> all_thresholds(std::span<const ScoredPrediction> scored);
// Highest coverage among curve points whose accuracy is at least `level`.
double coverage_at_accuracy(const CoverageCurve& curve, double level);

struct LabeledUser {
    std::string user;
    GridCell home;
    mobility::HourlyTrace trace;
    CandidateMap candidates;
};

std::vector<ScoredPrediction> score_users(std::span<const LabeledUser> users, const HomeModel& m);
CoverageCurve accuracy_coverage_curve(const HomeModel& m, std::span<const LabeledUser> users,
                                      std::span<const double> thresholds);

enum class Baseline { MostCheckin, LastDestination, PageRank, ReversedPageRank };
std::string_view to_string(Baseline b);
std::vector<ScoredPrediction> score_baseline(std::span<const LabeledUser> users, Baseline b,
                                             std::size_t min_count = 3);

struct MarginBucket {
    double min_margin = 0.0;
    double max_margin = 0.0;
    double mean_margin = 0.0;
    double accuracy = 0.0;
    std::size_t users = 0;
};

// Most Check-in accuracy per equal-count bucket of top-two check-in margin.
std::vector<MarginBucket> margin_stratified_accuracy(std::span<const LabeledUser> users, std::size_t buckets = 10);

// ---- ground truth and dataset plumbing -------------------------------------

// Home cell per user from tweets marked gold.home = true (majority cell).
std::map<std::string, GridCell> ground_truth_homes(const Dataset& ds);

struct UserOptions {
    std::size_t min_tweets = 5;
    mobility::FeatureOptions features;
    std::size_t threads = 1;
};

// Active users that have a ground-truth home which also appears in their trace.
std::vector<LabeledUser> labeled_users(const Dataset& ds, const UserOptions& opts = {});
std::vector<LabeledLocation> training_samples(std::span<const LabeledUser> users);

struct SweepPoint {
    double cell_size_m = 0.0;
    double resolution_m = 0.0;  // half-diagonal of a cell
    double threshold = 0.0;
    double coverage = 0.0;
    double accuracy = 0.0;
    std::size_t users = 0;
    bool coverage_reached = false;
};

double resolution_of(double cell_size_m) noexcept;

// Threshold whose coverage lies within `tolerance` of `target`, by bisection.
struct ThresholdChoice {
    double threshold = 0.0;
    double coverage = 0.0;
    bool reached = false;
};
ThresholdChoice threshold_for_coverage(std::span<const ScoredPrediction> scored, double target,
                                       double tolerance = 0.01);

struct SweepConfig {
    std::vector<double> cell_sizes{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
    double coverage = 0.80;
    double tolerance = 0.01;
    HomeTrainConfig train;
    UserOptions users;
};

// Retrains on `train_ds` and evaluates on `eval_ds` at each cell size.
std::vector<SweepPoint> resolution_sweep(const Dataset& train_ds, const Dataset& eval_ds, const SweepConfig& cfg);

void write_curve_csv(std::ostream& out, std::string_view method, const CoverageCurve& curve, bool header);
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

}  // namespace geoact::home
