#include "geoact/homeloc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "geoact/errors.hpp"
#include "geoact/parallel.hpp"

namespace geoact::home {

namespace {

using mobility::field::kCheckinPercent;

// Argmax over per-cell scores; ties go to higher check-in percentage, then
// the smaller cell id.
template <typename ScoreOf, typename CheckinOf>
std::pair<GridCell, double> best_cell(const std::vector<GridCell>& cells, ScoreOf score_of, CheckinOf checkin_of) {
    std::optional<GridCell> best;
    double best_score = 0.0, best_checkin = 0.0;
    for (const auto& c : cells) {
        const double s = score_of(c);
        const double p = checkin_of(c);
        bool take = !best || s > best_score;
        if (!take && s == best_score) take = p > best_checkin || (p == best_checkin && id_less(c, *best));
        if (take) {
            best = c;
            best_score = s;
            best_checkin = p;
        }
    }
    return {*best, best_score};
}

// Best cell by `values` and its margin over the runner-up.
HomePrediction margin_prediction(const mobility::HourlyTrace& trace, const std::vector<GridCell>& cells,
                                 const std::vector<double>& values, double min_margin) {
    const auto checkin = mobility::checkin_features(trace);
    std::map<GridCell, double> score;
    for (std::size_t i = 0; i < cells.size(); ++i) score[cells[i]] = values[i];
    auto [cell, top] = best_cell(
        cells, [&](const GridCell& c) { return score.at(c); },
        [&](const GridCell& c) { return checkin.by_cell.at(c)[0]; });
    double second = 0.0;
    bool have_second = false;
    for (const auto& c : cells) {
        if (c == cell) continue;
        if (!have_second || score.at(c) > second) second = score.at(c);
        have_second = true;
    }
    HomePrediction p;
    p.user = trace.user;
    p.candidate = cell;
    p.score = have_second ? top - second : top;
    if (p.score >= min_margin) p.cell = cell;
    return p;
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return mobility::format_decimal(v);
}

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Standardizer Standardizer::fit(std::span<const LocationFeatures> rows) {
    Standardizer s;
    if (rows.empty()) return s;
    const std::size_t d = rows.front().values.size();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (const auto& r : rows) {
        if (r.values.size() != d) throw DataError("feature rows have mixed widths");
        for (std::size_t k = 0; k < d; ++k) s.mean[k] += r.values[k];
    }
    const auto n = static_cast<double>(rows.size());
    for (auto& m : s.mean) m /= n;
    for (const auto& r : rows)
        for (std::size_t k = 0; k < d; ++k) s.scale[k] += (r.values[k] - s.mean[k]) * (r.values[k] - s.mean[k]);
    for (auto& v : s.scale) {
        v = std::sqrt(v / n);
        if (!(v > 1e-12)) v = 1.0;
    }
    return s;
}

FeatureVector Standardizer::apply(const LocationFeatures& f) const {
    if (f.values.size() != mean.size())
        throw DataError("expected " + std::to_string(mean.size()) + " features, got " + std::to_string(f.values.size()));
    std::vector<double> z(f.values.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = (f.values[k] - mean[k]) / scale[k];
    return FeatureVector::dense(z);
}

double HomeModel::score(const LocationFeatures& f) const {
    return svm::decision(linear, scaler.apply(f));
}

void HomeModel::write(std::ostream& out) const {
    linear.write(out);
    out << "scaler\t" << scaler.mean.size() << '\n';
    for (std::size_t k = 0; k < scaler.mean.size(); ++k)
        out << k << '\t' << exact(scaler.mean[k]) << '\t' << exact(scaler.scale[k]) << '\n';
    out << "end\n";
}

HomeModel HomeModel::read(std::istream& in) {
    HomeModel m;
    m.linear = svm::LinearModel::read(in);
    std::string line;
    if (!std::getline(in, line) || line.rfind("scaler\t", 0) != 0) throw DataError("home model lacks a scaler section");
    const std::size_t d = std::stoul(line.substr(7));
    m.scaler.mean.assign(d, 0.0);
    m.scaler.scale.assign(d, 1.0);
    for (std::size_t k = 0; k < d; ++k) {
        if (!std::getline(in, line)) throw DataError("home model scaler section truncated");
        std::size_t idx = 0;
        double mean = 0.0, scale = 0.0;
        if (std::sscanf(line.c_str(), "%zu\t%lf\t%lf", &idx, &mean, &scale) != 3 || idx != k)
            throw DataError("bad scaler line: " + line);
        m.scaler.mean[k] = mean;
        m.scaler.scale[k] = scale;
    }
    if (!std::getline(in, line) || line != "end") throw DataError("home model scaler section not terminated");
    if (m.linear.dimension() > d) throw DataError("home model weights exceed scaler dimension");
    return m;
}

void HomeModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write(out);
}

HomeModel HomeModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read(in);
}

HomeTraining train_home_model(std::span<const LabeledLocation> samples, const HomeTrainConfig& cfg) {
    if (samples.empty()) throw DegenerateLabelsError("no home training samples");
    std::vector<LocationFeatures> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(s.features);
    HomeTraining out;
    out.model.scaler = Standardizer::fit(rows);

    std::vector<FeatureVector> X;
    std::vector<svm::Label> y;
    X.reserve(samples.size());
    for (const auto& s : samples) {
        X.push_back(out.model.scaler.apply(s.features));
        y.push_back(s.is_home ? 1 : -1);
    }
    svm::check_labels(y, "home model");

    svm::TrainConfig tc = cfg.train;
    if (cfg.lambda_grid.size() > 1) {
        out.cv = svm::cross_validate(X, y, cfg.lambda_grid, tc);
        tc = out.cv.best;
    } else if (cfg.lambda_grid.size() == 1) {
        tc.reg_lambda = cfg.lambda_grid.front();
        out.cv.best = tc;
    }
    out.model.linear = svm::train(X, y, tc);
    // Keep the weight vector as wide as the feature rows even when trailing
    // standardized columns never fired.
    out.model.linear.weights.resize(out.model.scaler.mean.size(), 0.0);
    return out;
}

HomePrediction predict_home(const std::string& user, const CandidateMap& candidates, const HomeModel& m,
                            double threshold) {
    if (candidates.empty()) throw EmptyTraceError("user " + user + " has no candidate cells");
    std::vector<GridCell> cells;
    std::map<GridCell, double> score;
    for (const auto& [c, f] : candidates) {
        cells.push_back(c);
        score[c] = m.score(f);
    }
    auto [cell, s] = best_cell(
        cells, [&](const GridCell& c) { return score.at(c); },
        [&](const GridCell& c) { return candidates.at(c).values[kCheckinPercent]; });
    HomePrediction p;
    p.user = user;
    p.candidate = cell;
    p.score = s;
    if (s >= threshold) p.cell = cell;
    return p;
}

HomePrediction baseline_most_checkin(const mobility::HourlyTrace& trace, std::size_t min_count) {
    const auto checkin = mobility::checkin_features(trace);
    HomePrediction p;
    p.user = trace.user;
    p.candidate = checkin.ranking.front();
    const auto count = checkin.counts.at(p.candidate);
    p.score = static_cast<double>(count);
    if (count >= min_count) p.cell = p.candidate;
    return p;
}

HomePrediction baseline_last_destination(const mobility::HourlyTrace& trace, double min_margin) {
    const auto counts = mobility::last_destination_counts(trace);
    std::vector<GridCell> cells;
    std::vector<double> values;
    for (const auto& [c, v] : counts) {
        cells.push_back(c);
        values.push_back(v);
    }
    if (cells.empty()) throw EmptyTraceError("user " + trace.user + " has no observed hours");
    return margin_prediction(trace, cells, values, min_margin);
}

HomePrediction baseline_pagerank(const mobility::HourlyTrace& trace, double min_margin,
                                 const mobility::PageRankOptions& opts) {
    const auto g = mobility::build_movement_graph(trace);
    if (g.vertices.empty()) throw EmptyTraceError("user " + trace.user + " has no observed hours");
    return margin_prediction(trace, g.vertices, mobility::weighted_pagerank(g, opts), min_margin);
}

HomePrediction baseline_reversed_pagerank(const mobility::HourlyTrace& trace, double min_margin,
                                          const mobility::PageRankOptions& opts) {
    const auto g = mobility::build_movement_graph(trace);
    if (g.vertices.empty()) throw EmptyTraceError("user " + trace.user + " has no observed hours");
    return margin_prediction(trace, g.vertices, mobility::reversed_pagerank(g, opts), min_margin);
}

CoverageCurve curve_from_scores(std::span<const ScoredPrediction> scored, std::span<const double> thresholds,
                                std::size_t total_users) {
    CoverageCurve curve;
    curve.reserve(thresholds.size());
    for (double t : thresholds) {
        CurvePoint p;
        p.threshold = t;
        for (const auto& s : scored)
            if (s.eligible && s.score >= t) {
                ++p.covered;
                if (s.correct) ++p.correct;
            }
        p.coverage = total_users ? static_cast<double>(p.covered) / static_cast<double>(total_users) : 0.0;
        p.accuracy = p.covered ? static_cast<double>(p.correct) / static_cast<double>(p.covered) : 0.0;
        curve.push_back(p);
    }
    return curve;
}

std::vector<double> all_thresholds(std::span<const ScoredPrediction> scored) {
    std::set<double> distinct;
    for (const auto& s : scored)
        if (s.eligible) distinct.insert(s.score);
    std::vector<double> t{-std::numeric_limits<double>::infinity()};
    t.insert(t.end(), distinct.begin(), distinct.end());
    t.push_back(std::numeric_limits<double>::infinity());
    return t;
}

double coverage_at_accuracy(const CoverageCurve& curve, double level) {
    double best = 0.0;
    for (const auto& p : curve)
        if (p.covered > 0 && p.accuracy >= level) best = std::max(best, p.coverage);
    return best;
}

std::vector<ScoredPrediction> score_users(std::span<const LabeledUser> users, const HomeModel& m) {
    std::vector<ScoredPrediction> out;
    out.reserve(users.size());
    for (const auto& u : users) {
        const auto p = predict_home(u.user, u.candidates, m);
        out.push_back({p.score, p.candidate == u.home, true});
    }
    return out;
}

CoverageCurve accuracy_coverage_curve(const HomeModel& m, std::span<const LabeledUser> users,
                                      std::span<const double> thresholds) {
    if (users.empty()) throw DataError("accuracy/coverage curve needs at least one labeled user");
    const auto scored = score_users(users, m);
    return curve_from_scores(scored, thresholds, users.size());
}

std::string_view to_string(Baseline b) {
    switch (b) {
        case Baseline::MostCheckin: return "most_checkin";
        case Baseline::LastDestination: return "last_destination";
        case Baseline::PageRank: return "pagerank";
        case Baseline::ReversedPageRank: return "reversed_pagerank";
    }
    return "unknown";
}

std::vector<ScoredPrediction> score_baseline(std::span<const LabeledUser> users, Baseline b, std::size_t min_count) {
    std::vector<ScoredPrediction> out;
    out.reserve(users.size());
    for (const auto& u : users) {
        HomePrediction p;
        switch (b) {
            case Baseline::MostCheckin: p = baseline_most_checkin(u.trace, min_count); break;
            case Baseline::LastDestination: p = baseline_last_destination(u.trace); break;
            case Baseline::PageRank: p = baseline_pagerank(u.trace); break;
            case Baseline::ReversedPageRank: p = baseline_reversed_pagerank(u.trace); break;
        }
        out.push_back({p.score, p.candidate == u.home, p.known()});
    }
    return out;
}

std::vector<MarginBucket> margin_stratified_accuracy(std::span<const LabeledUser> users, std::size_t buckets) {
    struct Row {
        double margin;
        bool correct;
    };
    std::vector<Row> rows;
    for (const auto& u : users) {
        const auto ci = mobility::checkin_features(u.trace);
        const double top = ci.by_cell.at(ci.ranking[0])[0];
        const double second = ci.ranking.size() > 1 ? ci.by_cell.at(ci.ranking[1])[0] : 0.0;
        rows.push_back({top - second, ci.ranking[0] == u.home});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.margin < b.margin; });
    std::vector<MarginBucket> out;
    if (rows.empty() || buckets == 0) return out;
    buckets = std::min(buckets, rows.size());
    for (std::size_t k = 0; k < buckets; ++k) {
        const std::size_t lo = k * rows.size() / buckets;
        const std::size_t hi = (k + 1) * rows.size() / buckets;
        MarginBucket b;
        b.users = hi - lo;
        b.min_margin = rows[lo].margin;
        b.max_margin = rows[hi - 1].margin;
        std::size_t correct = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            b.mean_margin += rows[i].margin;
            correct += rows[i].correct;
        }
        b.mean_margin /= static_cast<double>(b.users);
        b.accuracy = static_cast<double>(correct) / static_cast<double>(b.users);
        out.push_back(b);
    }
    return out;
}

std::map<std::string, GridCell> ground_truth_homes(const Dataset& ds) {
    std::map<std::string, GridCell> out;
    for (const auto& u : users_of(ds)) {
        std::map<GridCell, std::size_t> votes;
        for (const auto& r : u.records)
            if (r.gold && r.gold->home.value_or(false)) ++votes[assign_grid(r.lat, r.lon, ds.grid)];
        if (votes.empty()) continue;
        auto best = votes.begin();
        for (auto it = votes.begin(); it != votes.end(); ++it)
            if (it->second > best->second || (it->second == best->second && id_less(it->first, best->first))) best = it;
        out.emplace(std::string(u.user), best->first);
    }
    return out;
}

std::vector<LabeledUser> labeled_users(const Dataset& ds, const UserOptions& opts) {
    const auto truth = ground_truth_homes(ds);
    std::vector<UserSlice> slices;
    for (const auto& u : users_of(ds))
        if (u.records.size() >= opts.min_tweets && truth.contains(std::string(u.user))) slices.push_back(u);

    std::vector<std::optional<LabeledUser>> built(slices.size());
    parallel_for(slices.size(), opts.threads, [&](std::size_t i) {
        LabeledUser lu;
        lu.user = std::string(slices[i].user);
        lu.home = truth.at(lu.user);
        lu.trace = mobility::build_hourly_trace(slices[i].records, ds.start_hour, ds.end_hour, ds.grid,
                                                opts.features.seed);
        lu.candidates = mobility::extract_features(lu.trace, opts.features);
        if (lu.candidates.contains(lu.home)) built[i] = std::move(lu);
    });
    std::vector<LabeledUser> out;
    for (auto& b : built)
        if (b) out.push_back(std::move(*b));
    return out;
}

std::vector<LabeledLocation> training_samples(std::span<const LabeledUser> users) {
    std::vector<LabeledLocation> out;
    for (const auto& u : users)
        for (const auto& [cell, f] : u.candidates) out.push_back({f, cell == u.home});
    return out;
}

double resolution_of(double cell_size_m) noexcept {
    return std::sqrt(2.0) * cell_size_m / 2.0;
}

ThresholdChoice threshold_for_coverage(std::span<const ScoredPrediction> scored, double target, double tolerance) {
    ThresholdChoice best;
    if (scored.empty()) return best;
    auto coverage = [&](double t) {
        std::size_t c = 0;
        for (const auto& s : scored)
            if (s.eligible && s.score >= t) ++c;
        return static_cast<double>(c) / static_cast<double>(scored.size());
    };
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : scored)
        if (s.eligible) {
            lo = std::min(lo, s.score);
            hi = std::max(hi, s.score);
        }
    if (lo > hi) return best;
    // coverage(lo) is maximal and coverage(hi + eps) is zero; keep the
    // invariant coverage(lo) >= target > coverage(hi).
    hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
    best = {lo, coverage(lo), false};
    if (best.coverage < target - tolerance) return best;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid <= lo || mid >= hi) break;
        const double c = coverage(mid);
        if (std::abs(c - target) < std::abs(best.coverage - target)) best = {mid, c, false};
        if (c >= target)
            lo = mid;
        else
            hi = mid;
    }
    if (std::abs(coverage(lo) - target) < std::abs(best.coverage - target)) best = {lo, coverage(lo), false};
    best.reached = std::abs(best.coverage - target) <= tolerance;
    return best;
}

std::vector<SweepPoint> resolution_sweep(const Dataset& train_ds, const Dataset& eval_ds, const SweepConfig& cfg) {
    std::vector<SweepPoint> out;
    for (double size : cfg.cell_sizes) {
        Dataset tr = train_ds;
        tr.grid = train_ds.grid.with_cell_size(size);
        const auto train_users = labeled_users(tr, cfg.users);
        const auto model = train_home_model(training_samples(train_users), cfg.train).model;

        const Dataset* ev_ptr = &tr;
        Dataset ev;
        if (&eval_ds != &train_ds) {
            ev = eval_ds;
            ev.grid = eval_ds.grid.with_cell_size(size);
            ev_ptr = &ev;
        }
        const auto eval_users = ev_ptr == &tr ? train_users : labeled_users(*ev_ptr, cfg.users);
        const auto scored = score_users(eval_users, model);
        const auto choice = threshold_for_coverage(scored, cfg.coverage, cfg.tolerance);

        SweepPoint p;
        p.cell_size_m = size;
        p.resolution_m = resolution_of(size);
        p.threshold = choice.threshold;
        p.coverage = choice.coverage;
        p.coverage_reached = choice.reached;
        p.users = eval_users.size();
        const double t = choice.threshold;
        const auto curve = curve_from_scores(scored, std::span<const double>(&t, 1), scored.size());
        p.accuracy = curve.front().accuracy;
        out.push_back(p);
    }
    return out;
}

void write_curve_csv(std::ostream& out, std::string_view method, const CoverageCurve& curve, bool header) {
    if (header) out << "method,threshold,accuracy,coverage,covered,correct\n";
    for (const auto& p : curve)
        out << method << ',' << fmt(p.threshold) << ',' << fmt(p.accuracy) << ',' << fmt(p.coverage) << ','
            << p.covered << ',' << p.correct << '\n';
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
    out << "cell_size_m,resolution_m,threshold,coverage,accuracy,users,coverage_reached\n";
    for (const auto& p : points)
        out << fmt(p.cell_size_m) << ',' << fmt(p.resolution_m) << ',' << fmt(p.threshold) << ','
            << fmt(p.coverage) << ',' << fmt(p.accuracy) << ',' << p.users << ','
            << (p.coverage_reached ? "true" : "false") << '\n';
}

}  // namespace geoact::home
