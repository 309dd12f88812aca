#include "dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "geoact/analysis.hpp"
#include "geoact/cascade.hpp"
#include "geoact/corpus.hpp"
#include "geoact/errors.hpp"
#include "geoact/homeloc.hpp"
#include "geoact/mobility.hpp"
#include "geoact/parallel.hpp"
#include "geoact/synth.hpp"

namespace geoact::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string log_level = "info";
    std::string grid_origin;     // "LAT,LON"; derived from the data when empty
    std::string grid_northeast;  // optional bound
    double cell_size = 100.0;
};

LatLon parse_latlon(const std::string& s, const char* what) {
    const auto comma = s.find(',');
    double lat = 0.0, lon = 0.0;
    try {
        if (comma == std::string::npos) throw std::invalid_argument(s);
        std::size_t used = 0;
        lat = std::stod(s.substr(0, comma), &used);
        lon = std::stod(s.substr(comma + 1), &used);
    } catch (const std::exception&) {
        throw CLI::ValidationError(what, "expected LAT,LON, got '" + s + "'");
    }
    return {lat, lon};
}

GridSpec grid_from(const Globals& g, std::optional<LatLon> fallback_origin) {
    GridSpec grid;
    grid.cell_size_m = g.cell_size;
    if (!g.grid_origin.empty()) {
        const auto o = parse_latlon(g.grid_origin, "--grid-origin");
        grid.origin_lat = o.lat;
        grid.origin_lon = o.lon;
    } else if (fallback_origin) {
        grid.origin_lat = fallback_origin->lat;
        grid.origin_lon = fallback_origin->lon;
    }
    if (!g.grid_northeast.empty()) grid.northeast = parse_latlon(g.grid_northeast, "--grid-northeast");
    grid.validate();
    return grid;
}

Dataset load_dataset(const std::string& path, const Globals& g) {
    Dataset ds;
    if (g.grid_origin.empty()) {
        // Read against an open grid, then anchor it at the data's southwest corner.
        GridSpec open;
        open.origin_lat = -90.0;
        open.origin_lon = -180.0;
        open.cell_size_m = g.cell_size;
        ds = load_tweets(path, open);
        ds.grid = grid_from(g, southwest_corner(ds.records));
    } else {
        ds = load_tweets(path, grid_from(g, std::nullopt));
    }
    std::size_t shown = 0;
    for (const auto& issue : ds.malformed)
        if (shown++ < 10) spdlog::warn("{}:{}: {}", path, issue.line, issue.message);
    if (!ds.malformed.empty()) spdlog::warn("{}: {} malformed line(s) skipped", path, ds.malformed.size());
    spdlog::info("loaded {} records from {} (grid origin {:.6f},{:.6f}, {} m cells)", ds.records.size(), path,
                 ds.grid.origin_lat, ds.grid.origin_lon, ds.grid.cell_size_m);
    return ds;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::string fmt(double v) {
    return mobility::format_decimal(v);
}

svm::TrainConfig train_config(const Globals& g, std::size_t epochs, std::size_t folds) {
    svm::TrainConfig tc;
    tc.seed = g.seed;
    tc.epochs = epochs;
    tc.folds = folds;
    tc.validate();
    return tc;
}

// ---- per-command options -----------------------------------------------------

struct IngestOpts {
    std::string input;
    std::size_t min_tweets = 5;
    std::string report;
};

struct TrainActivityOpts {
    std::string input;
    std::string model_dir;
    std::string keywords;
    double keep_ratio = 0.25;
    double train_fraction = 0.8;
    std::vector<double> lambdas;
    std::size_t epochs = 20;
    std::size_t folds = 5;
    std::string upstream = "predicted";
};

struct ClassifyOpts {
    std::string input;
    std::string model_dir;
    std::string output;
    std::string counts;
};

struct FeatureOpts {
    bool extended = false;
    bool normalized_counts = false;
    std::size_t min_tweets = 5;
};

struct ExtractOpts {
    std::string input;
    std::string output;
    bool with_labels = false;
};

struct TrainHomeOpts {
    std::string input;
    std::string features;
    std::string model;
    std::vector<double> lambdas;
    std::size_t epochs = 20;
    std::size_t folds = 5;
};

struct InferHomeOpts {
    std::string input;
    std::string model;
    std::string output;
    double threshold = home::kNoThreshold;
};

struct CurveOpts {
    std::string input;
    std::string model;
    std::string output;
    std::size_t min_count = 3;
};

struct SweepOpts {
    std::string train;
    std::string eval;
    std::string output;
    std::vector<double> sizes{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
    double coverage = 0.80;
    double tolerance = 0.01;
    std::vector<double> lambdas;
    std::size_t epochs = 20;
    std::size_t folds = 5;
};

struct HeatmapOpts {
    std::string classified;
    std::size_t min_pos = 5;
    std::string geojson;
    std::string csv;
};

struct CorrelateOpts {
    std::string classified;
    std::string outlets;
    std::size_t min_pos = 5;
    bool heatmap_cells_only = false;
    bool raw_positives = false;
    std::size_t permutations = 0;
    std::string output;
};

struct DistancesOpts {
    std::string classified;
    std::string homes;
    std::vector<double> bins;
    std::string output;
};

struct SynthOpts {
    std::string spec;
    std::string out;
};

// ---- helpers shared by home commands -----------------------------------------

mobility::FeatureOptions feature_options(const Globals& g, const FeatureOpts& f) {
    mobility::FeatureOptions fo;
    fo.extended = f.extended;
    fo.normalized_counts = f.normalized_counts;
    fo.seed = g.seed;
    return fo;
}

home::UserOptions user_options(const Globals& g, const FeatureOpts& f) {
    home::UserOptions uo;
    uo.min_tweets = f.min_tweets;
    uo.features = feature_options(g, f);
    uo.threads = g.threads;
    return uo;
}

// Feature width follows the model so that inference matches training.
FeatureOpts match_model(FeatureOpts f, const home::HomeModel& m) {
    const auto d = m.scaler.mean.size();
    if (d == mobility::field::kExtendedCount) {
        f.extended = true;
    } else if (d == mobility::field::kBaseCount) {
        f.extended = false;
    } else {
        throw DataError("home model has " + std::to_string(d) + " features; expected " +
                        std::to_string(mobility::field::kBaseCount) + " or " +
                        std::to_string(mobility::field::kExtendedCount));
    }
    return f;
}

struct UserCandidates {
    std::string user;
    mobility::HourlyTrace trace;
    home::CandidateMap candidates;
};

std::vector<UserCandidates> active_candidates(const Dataset& ds, const Globals& g, const FeatureOpts& f) {
    std::vector<UserSlice> slices;
    for (const auto& u : users_of(ds))
        if (u.records.size() >= f.min_tweets) slices.push_back(u);
    const auto fo = feature_options(g, f);
    std::vector<UserCandidates> out(slices.size());
    parallel_for(slices.size(), g.threads, [&](std::size_t i) {
        out[i].user = std::string(slices[i].user);
        out[i].trace = mobility::build_hourly_trace(slices[i].records, ds.start_hour, ds.end_hour, ds.grid, fo.seed);
        out[i].candidates = mobility::extract_features(out[i].trace, fo);
    });
    return out;
}

std::map<std::string, LatLon, std::less<>> read_home_centers(const fs::path& path) {
    auto in = open_in(path);
    std::map<std::string, LatLon, std::less<>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (line.back() == ',') f.emplace_back();
        if (lineno == 1 && !f.empty() && f[0] == "user") continue;
        if (f.size() != 5) throw ParseError(lineno, "expected user,cell_id,score,lat,lon");
        if (f[1] == "UNKNOWN") continue;
        try {
            out[f[0]] = {std::stod(f[3]), std::stod(f[4])};
        } catch (const std::exception&) {
            throw ParseError(lineno, "bad home center");
        }
    }
    return out;
}

GridSpec grid_for_points(const Globals& g, std::span<const analysis::ClassifiedTweet> tweets) {
    std::optional<LatLon> sw;
    for (const auto& t : tweets) {
        if (!sw) sw = LatLon{t.lat, t.lon};
        sw->lat = std::min(sw->lat, t.lat);
        sw->lon = std::min(sw->lon, t.lon);
    }
    return grid_from(g, sw.value_or(LatLon{}));
}

std::vector<analysis::ClassifiedTweet> load_classified(const std::string& path) {
    auto in = open_in(path);
    auto tweets = analysis::read_classified(in);
    spdlog::info("loaded {} classified tweets from {}", tweets.size(), path);
    return tweets;
}

// ---- commands ------------------------------------------------------------------

void run_ingest(const Globals& g, const IngestOpts& o, std::ostream& out) {
    const auto ds = load_dataset(o.input, g);
    const auto users = users_of(ds);
    const auto active = active_users(ds, o.min_tweets);
    std::size_t labeled = 0;
    for (const auto& r : ds.records) labeled += r.gold.has_value();
    out << "records\t" << ds.records.size() << '\n'
        << "malformed\t" << ds.malformed.size() << '\n'
        << "users\t" << users.size() << '\n'
        << "active_users\t" << active.size() << '\n'
        << "labeled\t" << labeled << '\n'
        << "hours\t" << ds.hours() << '\n';
    if (!o.report.empty()) {
        auto rep = open_out(o.report);
        rep << "line,message\n";
        for (const auto& issue : ds.malformed) {
            std::string msg = issue.message;
            std::replace(msg.begin(), msg.end(), ',', ';');
            rep << issue.line << ',' << msg << '\n';
        }
    }
}

void run_train_activity(const Globals& g, const TrainActivityOpts& o, std::ostream& out) {
    const auto ds = load_dataset(o.input, g);
    std::vector<TweetRecord> labeled;
    for (const auto& r : ds.records)
        if (r.gold) labeled.push_back(r);
    spdlog::info("{} labeled tweets", labeled.size());

    const auto filter = o.keywords.empty() ? cascade::KeywordFilter::defaults() : cascade::KeywordFilter::load(o.keywords);
    cascade::CascadeConfig cfg;
    cfg.train = train_config(g, o.epochs, o.folds);
    if (!o.lambdas.empty()) cfg.lambda_grid = o.lambdas;
    cfg.keep_ratio = o.keep_ratio;
    cfg.train_fraction = o.train_fraction;
    if (o.upstream == "predicted")
        cfg.upstream = cascade::UpstreamMode::Predicted;
    else if (o.upstream == "gold")
        cfg.upstream = cascade::UpstreamMode::GoldPositive;
    else
        throw CLI::ValidationError("--upstream", "expected predicted or gold");

    const auto trained = cascade::train_cascade(labeled, filter, cfg);
    trained.model.save(o.model_dir);

    auto rep = open_out(fs::path(o.model_dir) / "report.tsv");
    const std::string header = "level\tpool\ttrain\ttest\tnegatives\tpositives\tlambda\tcv_f\ttest_precision\ttest_recall\ttest_f\n";
    rep << header;
    out << header;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& r = trained.reports[k];
        std::ostringstream row;
        row << (k + 1) << '\t' << r.pool << '\t' << r.train_size << '\t' << r.test_size << '\t' << r.negatives << '\t'
            << r.positives << '\t' << fmt(r.reg_lambda) << '\t' << fmt(r.cv.f_score) << '\t' << fmt(r.test.precision)
            << '\t' << fmt(r.test.recall) << '\t' << fmt(r.test.f_score) << '\n';
        rep << row.str();
        out << row.str();
    }
}

void run_classify(const Globals& g, const ClassifyOpts& o, std::ostream& out) {
    const auto ds = load_dataset(o.input, g);
    const auto model = cascade::CascadeModel::load(o.model_dir);
    std::vector<cascade::ActivityLabel> labels(ds.records.size());
    parallel_for(ds.records.size(), g.threads,
                 [&](std::size_t i) { labels[i] = cascade::classify_tweet(ds.records[i], model); });
    {
        auto dest = open_out(o.output);
        if (fs::path(o.output).extension() == ".csv")
            analysis::write_classified_csv(dest, ds.records, labels);
        else
            analysis::write_classified_jsonl(dest, ds.records, labels);
    }
    const auto c = cascade::count_chain(labels);
    std::ostringstream summary;
    summary << "total\t" << c.total << '\n'
            << "passed_filter\t" << c.passed_filter << '\n'
            << "drinking_mention\t" << c.drinking_mention << '\n'
            << "user_drinking\t" << c.user_drinking << '\n'
            << "user_drinking_now\t" << c.user_drinking_now << '\n';
    out << summary.str();
    if (!o.counts.empty()) open_out(o.counts) << summary.str();
}

void run_extract_features(const Globals& g, const FeatureOpts& f, const ExtractOpts& o, std::ostream& out) {
    const auto ds = load_dataset(o.input, g);
    const auto users = active_candidates(ds, g, f);
    std::map<std::string, GridCell> truth;
    if (o.with_labels) truth = home::ground_truth_homes(ds);
    std::vector<mobility::FeatureRow> rows;
    for (const auto& u : users)
        for (const auto& [cell, feats] : u.candidates) {
            mobility::FeatureRow row{u.user, cell, feats, std::nullopt};
            if (o.with_labels) {
                const auto it = truth.find(u.user);
                if (it == truth.end()) continue;
                row.is_home = it->second == cell;
            }
            rows.push_back(std::move(row));
        }
    auto csv = open_out(o.output);
    mobility::write_feature_csv(csv, rows, o.with_labels);
    out << "users\t" << users.size() << '\n' << "rows\t" << rows.size() << '\n';
}

void run_train_home(const Globals& g, const FeatureOpts& f, const TrainHomeOpts& o, std::ostream& out) {
    if (o.input.empty() == o.features.empty())
        throw CLI::ValidationError("train-home", "give exactly one of --input or --features");
    std::vector<home::LabeledLocation> samples;
    if (!o.features.empty()) {
        auto in = open_in(o.features);
        for (auto& row : mobility::read_feature_csv(in)) {
            if (!row.is_home) throw DataError(o.features + ": rows need an is_home column");
            samples.push_back({std::move(row.features), *row.is_home});
        }
    } else {
        const auto ds = load_dataset(o.input, g);
        const auto users = home::labeled_users(ds, user_options(g, f));
        spdlog::info("{} users with ground-truth homes", users.size());
        samples = home::training_samples(users);
    }
    home::HomeTrainConfig cfg;
    cfg.train = train_config(g, o.epochs, o.folds);
    if (!o.lambdas.empty()) cfg.lambda_grid = o.lambdas;
    const auto trained = home::train_home_model(samples, cfg);
    if (fs::path(o.model).has_parent_path()) fs::create_directories(fs::path(o.model).parent_path());
    trained.model.save(o.model);
    std::size_t positives = 0;
    for (const auto& s : samples) positives += s.is_home;
    out << "samples\t" << samples.size() << '\n'
        << "homes\t" << positives << '\n'
        << "lambda\t" << fmt(trained.cv.best.reg_lambda) << '\n'
        << "cv_f\t" << fmt(trained.cv.best_mean.f_score) << '\n';
}

void run_infer_home(const Globals& g, FeatureOpts f, const InferHomeOpts& o, std::ostream& out) {
    const auto model = home::HomeModel::load(o.model);
    f = match_model(f, model);
    const auto ds = load_dataset(o.input, g);
    const auto users = active_candidates(ds, g, f);
    auto csv = open_out(o.output);
    csv << "user,cell_id,score,lat,lon\n";
    std::size_t known = 0;
    char buf[96];
    for (const auto& u : users) {
        if (u.candidates.empty()) continue;
        const auto p = home::predict_home(u.user, u.candidates, model, o.threshold);
        if (!p.known()) {
            csv << u.user << ",UNKNOWN," << fmt(p.score) << ",,\n";
            continue;
        }
        const auto c = ds.grid.cell_center(*p.cell);
        std::snprintf(buf, sizeof buf, ",%.9f,%.9f", c.lat, c.lon);
        csv << u.user << ',' << p.cell->id() << ',' << fmt(p.score) << buf << '\n';
        ++known;
    }
    out << "users\t" << users.size() << '\n' << "known\t" << known << '\n';
}

void run_home_curve(const Globals& g, FeatureOpts f, const CurveOpts& o, std::ostream& out) {
    const auto model = home::HomeModel::load(o.model);
    f = match_model(f, model);
    const auto ds = load_dataset(o.input, g);
    const auto users = home::labeled_users(ds, user_options(g, f));
    if (users.empty()) throw DataError("no users with ground-truth homes in " + o.input);
    auto csv = open_out(o.output);

    const auto svm_scores = home::score_users(users, model);
    const auto svm_curve = home::curve_from_scores(svm_scores, home::all_thresholds(svm_scores), users.size());
    home::write_curve_csv(csv, "svm", svm_curve, true);
    out << "method\taccuracy_at_full_coverage\n" << "svm\t" << fmt(svm_curve.front().accuracy) << '\n';
    for (auto b : {home::Baseline::MostCheckin, home::Baseline::LastDestination, home::Baseline::PageRank,
                   home::Baseline::ReversedPageRank}) {
        const auto scores = home::score_baseline(users, b, o.min_count);
        const auto curve = home::curve_from_scores(scores, home::all_thresholds(scores), users.size());
        home::write_curve_csv(csv, home::to_string(b), curve, false);
        out << home::to_string(b) << '\t' << fmt(curve.front().accuracy) << '\n';
    }
}

void run_home_sweep(const Globals& g, const FeatureOpts& f, const SweepOpts& o, std::ostream& out) {
    const auto train = load_dataset(o.train, g);
    const bool same = o.eval.empty() || o.eval == o.train;
    Dataset eval;
    if (!same) eval = load_dataset(o.eval, g);
    home::SweepConfig cfg;
    cfg.cell_sizes = o.sizes;
    cfg.coverage = o.coverage;
    cfg.tolerance = o.tolerance;
    cfg.train.train = train_config(g, o.epochs, o.folds);
    if (!o.lambdas.empty()) cfg.train.lambda_grid = o.lambdas;
    cfg.users = user_options(g, f);
    const auto points = home::resolution_sweep(train, same ? train : eval, cfg);
    auto csv = open_out(o.output);
    home::write_sweep_csv(csv, points);
    home::write_sweep_csv(out, points);
}

void run_heatmap(const Globals& g, const HeatmapOpts& o, std::ostream& out) {
    const auto tweets = load_classified(o.classified);
    const auto grid = grid_for_points(g, tweets);
    const auto h = analysis::build_heatmap(tweets, grid, o.min_pos);
    if (!o.geojson.empty()) {
        auto js = open_out(o.geojson);
        analysis::write_heatmap_geojson(js, h);
    }
    if (!o.csv.empty()) {
        auto csv = open_out(o.csv);
        analysis::write_heatmap_csv(csv, h);
    }
    out << "cells\t" << h.cells.size() << '\n'
        << "excluded_cells\t" << h.excluded_cells << '\n'
        << "excluded_positive\t" << h.excluded_positive << '\n';
}

void run_correlate(const Globals& g, const CorrelateOpts& o, std::ostream& out) {
    const auto tweets = load_classified(o.classified);
    const auto grid = grid_for_points(g, tweets);
    const auto outlets = analysis::OutletTable::load(o.outlets);
    std::size_t dropped = 0;
    const auto counts = outlets.counts(grid, &dropped);
    if (dropped) spdlog::warn("{} outlet(s) fall outside the grid", dropped);
    analysis::CorrelationOptions co;
    co.min_pos = o.min_pos;
    co.heatmap_cells_only = o.heatmap_cells_only;
    co.raw_positives = o.raw_positives;
    const auto corr = analysis::correlate_outlets(analysis::tally_cells(tweets, grid), counts, co);
    std::ostringstream summary;
    summary << "r\t" << fmt(corr.result.r) << '\n'
            << "p_value\t" << fmt(corr.result.p_value) << '\n'
            << "n\t" << corr.result.n << '\n';
    if (o.permutations > 0)
        summary << "permutation_p\t"
                << fmt(analysis::permutation_p_value(corr.density, corr.outlets, o.permutations, g.seed)) << '\n';
    out << summary.str();
    if (!o.output.empty()) {
        auto csv = open_out(o.output);
        csv << "cell_id,density,outlets\n";
        for (std::size_t i = 0; i < corr.cells.size(); ++i)
            csv << corr.cells[i].id() << ',' << fmt(corr.density[i]) << ',' << fmt(corr.outlets[i]) << '\n';
    }
}

void run_distances(const DistancesOpts& o, std::ostream& out) {
    const auto tweets = load_classified(o.classified);
    const auto homes = read_home_centers(o.homes);
    const auto h = o.bins.empty() ? analysis::distance_histogram(tweets, homes)
                                  : analysis::distance_histogram(tweets, homes, o.bins);
    if (!o.output.empty()) {
        auto csv = open_out(o.output);
        analysis::write_histogram_csv(csv, h);
    }
    analysis::write_histogram_csv(out, h);
}

void run_synth(const Globals& g, bool seed_given, const SynthOpts& o, std::ostream& out) {
    synth::WorldSpec spec;
    if (!o.spec.empty()) spec = synth::WorldSpec::load(o.spec);
    if (seed_given) spec.seed = g.seed;
    const auto world = synth::generate_world(spec);
    synth::write_world(world, o.out);
    {
        auto s = open_out(fs::path(o.out) / "world.spec");
        spec.write(s);
    }
    const auto& m = world.manifest;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f,%.9f", m.grid.origin_lat, m.grid.origin_lon);
    out << "tweets\t" << m.tweets << '\n'
        << "users\t" << m.users.size() << '\n'
        << "outlets\t" << m.outlets << '\n'
        << "grid_origin\t" << buf << '\n';
}

spdlog::level::level_enum parse_level(const std::string& s) {
    const auto level = spdlog::level::from_str(s);
    if (level == spdlog::level::off && s != "off")
        throw CLI::ValidationError("--log-level", "unknown level '" + s + "'");
    return level;
}

// Global options plus those of the subcommand chain that ran.
std::string resolved_config(const CLI::App& app) {
    std::string prefix;
    const CLI::App* cur = &app;
    while (cur) {
        const auto subs = cur->get_subcommands();
        if (subs.empty()) break;
        cur = subs.front();
        prefix += cur->get_name() + ".";
    }
    std::istringstream all(app.config_to_str(true, false));
    std::string kept, line;
    while (std::getline(all, line)) {
        const auto key = line.substr(0, line.find('='));
        if (key.empty()) continue;
        if (key.find('.') == std::string::npos || key.rfind(prefix, 0) == 0) kept += line + '\n';
    }
    return kept;
}

void write_sidecar(const std::string& config, const fs::path& primary) {
    if (primary.empty()) return;
    fs::path side = fs::is_directory(primary) ? primary / "run.ini" : fs::path(primary.string() + ".run.ini");
    auto s = open_out(side);
    s << config;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

int dispatch(int argc, const char* const* argv) {
    return dispatch(argc, argv, std::cout, std::cerr);
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("geoact", sink);
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);

    CLI::App app{"Activity self-report detection and home location inference for geo-tagged posts", "geoact"};
    app.require_subcommand(1);
    app.allow_config_extras(false);
    app.fallthrough();
    app.option_defaults()->always_capture_default();

    Globals g;
    app.set_config("--config", "", "INI config file; command-line flags take precedence");
    auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every stochastic step");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 256));
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");
    app.add_option("--grid-origin", g.grid_origin, "Southwest grid corner LAT,LON (default: from data)");
    app.add_option("--grid-northeast", g.grid_northeast, "Northeast bound LAT,LON");
    app.add_option("--cell-size", g.cell_size, "Grid cell size in meters")->check(CLI::PositiveNumber);

    FeatureOpts feat;
    auto add_feature_flags = [&](CLI::App* sub) {
        sub->add_flag("--extended", feat.extended, "Append the six PageRank margin/rank fields");
        sub->add_flag("--normalized-counts", feat.normalized_counts, "Last-destination fields as % of day windows");
        sub->add_option("--min-tweets", feat.min_tweets, "Active-user threshold");
    };

    fs::path primary;
    std::function<void()> action;

    IngestOpts ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Load and validate a JSON-lines corpus");
    c_ingest->add_option("--input", ingest.input, "Corpus file")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--min-tweets", ingest.min_tweets, "Active-user threshold");
    c_ingest->add_option("--report", ingest.report, "CSV of malformed lines");
    c_ingest->callback([&] {
        primary = ingest.report;
        action = [&] { run_ingest(g, ingest, out); };
    });

    TrainActivityOpts ta;
    auto* c_ta = app.add_subcommand("train-activity", "Train the three-level activity cascade");
    c_ta->add_option("--labels,--input", ta.input, "Labeled corpus")->required()->check(CLI::ExistingFile);
    c_ta->add_option("--out,--model-dir", ta.model_dir, "Output model directory")->required();
    c_ta->add_option("--keywords", ta.keywords, "Keyword file (default: built-in list)")->check(CLI::ExistingFile);
    c_ta->add_option("--keep-ratio", ta.keep_ratio, "Vocabulary size as a share of training tweets")
        ->check(CLI::Range(0.0, 1000.0));
    c_ta->add_option("--train-fraction", ta.train_fraction, "Train share of each level's pool")
        ->check(CLI::Range(0.05, 0.95));
    c_ta->add_option("--lambdas", ta.lambdas, "Regularization grid")->delimiter(',');
    c_ta->add_option("--epochs", ta.epochs, "SGD epochs");
    c_ta->add_option("--folds", ta.folds, "Cross-validation folds");
    c_ta->add_option("--upstream", ta.upstream, "predicted or gold")->check(CLI::IsMember({"predicted", "gold"}));
    c_ta->callback([&] {
        primary = ta.model_dir;
        action = [&] {
            fs::create_directories(ta.model_dir);
            run_train_activity(g, ta, out);
        };
    });

    ClassifyOpts cl;
    auto* c_cl = app.add_subcommand("classify", "Label every tweet with the cascade");
    c_cl->add_option("--in,--input", cl.input, "Corpus file")->required()->check(CLI::ExistingFile);
    c_cl->add_option("--model,--model-dir", cl.model_dir, "Cascade model directory")->required()->check(CLI::ExistingDirectory);
    c_cl->add_option("--out,--output", cl.output, "Classified tweets: JSON lines, or CSV for a .csv path")->required();
    c_cl->add_option("--counts", cl.counts, "Chain counts (TSV)");
    c_cl->callback([&] {
        primary = cl.output;
        action = [&] { run_classify(g, cl, out); };
    });

    ExtractOpts ex;
    auto* c_ex = app.add_subcommand("extract-features", "Mobility features per (user, cell)");
    c_ex->add_option("--input", ex.input, "Corpus file")->required()->check(CLI::ExistingFile);
    c_ex->add_option("--output", ex.output, "Feature CSV")->required();
    c_ex->add_flag("--with-labels", ex.with_labels, "Add is_home from gold.home (labeled users only)");
    add_feature_flags(c_ex);
    c_ex->callback([&] {
        primary = ex.output;
        action = [&] { run_extract_features(g, feat, ex, out); };
    });

    TrainHomeOpts th;
    auto* c_th = app.add_subcommand("train-home", "Train the home-location SVM");
    c_th->add_option("--input", th.input, "Corpus with gold.home labels")->check(CLI::ExistingFile);
    c_th->add_option("--features", th.features, "Feature CSV with is_home")->check(CLI::ExistingFile);
    c_th->add_option("--out,--model", th.model, "Output model file")->required();
    c_th->add_option("--lambdas", th.lambdas, "Regularization grid")->delimiter(',');
    c_th->add_option("--epochs", th.epochs, "SGD epochs");
    c_th->add_option("--folds", th.folds, "Cross-validation folds");
    add_feature_flags(c_th);
    c_th->callback([&] {
        primary = th.model;
        action = [&] { run_train_home(g, feat, th, out); };
    });

    InferHomeOpts ih;
    auto* c_ih = app.add_subcommand("infer-home", "Predict home cells for active users");
    c_ih->add_option("--in,--input", ih.input, "Corpus file")->required()->check(CLI::ExistingFile);
    c_ih->add_option("--model", ih.model, "Home model")->required()->check(CLI::ExistingFile);
    c_ih->add_option("--out,--output", ih.output, "Homes CSV")->required();
    c_ih->add_option("--threshold", ih.threshold, "Report Unknown below this score");
    add_feature_flags(c_ih);
    c_ih->callback([&] {
        primary = ih.output;
        action = [&] { run_infer_home(g, feat, ih, out); };
    });

    CurveOpts cu;
    auto* c_cu = app.add_subcommand("home-curve", "Accuracy/coverage curves for the SVM and baselines");
    c_cu->add_option("--input", cu.input, "Corpus with gold.home labels")->required()->check(CLI::ExistingFile);
    c_cu->add_option("--model", cu.model, "Home model")->required()->check(CLI::ExistingFile);
    c_cu->add_option("--output", cu.output, "Curve CSV")->required();
    c_cu->add_option("--min-count", cu.min_count, "Most Check-in minimum check-ins");
    add_feature_flags(c_cu);
    c_cu->callback([&] {
        primary = cu.output;
        action = [&] { run_home_curve(g, feat, cu, out); };
    });

    SweepOpts sw;
    auto* c_sw = app.add_subcommand("home-sweep", "Accuracy across grid resolutions at fixed coverage");
    c_sw->add_option("--train", sw.train, "Training corpus")->required()->check(CLI::ExistingFile);
    c_sw->add_option("--eval", sw.eval, "Evaluation corpus (default: the training corpus)")->check(CLI::ExistingFile);
    c_sw->add_option("--output", sw.output, "Sweep CSV")->required();
    c_sw->add_option("--sizes", sw.sizes, "Cell sizes in meters")->delimiter(',');
    c_sw->add_option("--coverage", sw.coverage, "Target coverage")->check(CLI::Range(0.0, 1.0));
    c_sw->add_option("--tolerance", sw.tolerance, "Coverage tolerance")->check(CLI::Range(0.0, 1.0));
    c_sw->add_option("--lambdas", sw.lambdas, "Regularization grid")->delimiter(',');
    c_sw->add_option("--epochs", sw.epochs, "SGD epochs");
    c_sw->add_option("--folds", sw.folds, "Cross-validation folds");
    add_feature_flags(c_sw);
    c_sw->callback([&] {
        primary = sw.output;
        action = [&] { run_home_sweep(g, feat, sw, out); };
    });

    auto* c_an = app.add_subcommand("analyze", "Geospatial analyses of classified tweets");
    c_an->require_subcommand(1);

    HeatmapOpts hm;
    auto* c_hm = c_an->add_subcommand("heatmap", "Share of drinking-now tweets per cell");
    c_hm->add_option("--classified", hm.classified, "Output of classify")->required()->check(CLI::ExistingFile);
    c_hm->add_option("--min-pos", hm.min_pos, "Minimum drinking-now tweets per cell");
    c_hm->add_option("--geojson", hm.geojson, "GeoJSON output");
    c_hm->add_option("--csv", hm.csv, "CSV output");
    c_hm->callback([&] {
        primary = hm.geojson.empty() ? hm.csv : hm.geojson;
        action = [&] { run_heatmap(g, hm, out); };
    });

    CorrelateOpts co;
    auto* c_co = c_an->add_subcommand("correlate", "Correlate drinking-now density with outlet counts");
    c_co->add_option("--classified", co.classified, "Output of classify")->required()->check(CLI::ExistingFile);
    c_co->add_option("--outlets", co.outlets, "Outlet CSV lat,lon[,name]")->required()->check(CLI::ExistingFile);
    c_co->add_option("--min-pos", co.min_pos, "Threshold used with --heatmap-cells-only");
    c_co->add_flag("--heatmap-cells-only", co.heatmap_cells_only, "Only cells kept by the heatmap");
    c_co->add_flag("--raw-positives", co.raw_positives, "Correlate raw positive counts");
    c_co->add_option("--permutations", co.permutations, "Also report a permutation p-value");
    c_co->add_option("--output", co.output, "Per-cell CSV");
    c_co->callback([&] {
        primary = co.output;
        action = [&] { run_correlate(g, co, out); };
    });

    DistancesOpts di;
    auto* c_di = c_an->add_subcommand("distances", "Histogram of drinking-now distances from home");
    c_di->add_option("--classified", di.classified, "Output of classify")->required()->check(CLI::ExistingFile);
    c_di->add_option("--homes", di.homes, "Homes CSV from infer-home")->required()->check(CLI::ExistingFile);
    c_di->add_option("--bins", di.bins, "Bin edges in meters, starting at 0")->delimiter(',');
    c_di->add_option("--output", di.output, "Histogram CSV");
    c_di->callback([&] {
        primary = di.output;
        action = [&] { run_distances(di, out); };
    });

    auto* c_sy = app.add_subcommand("synth", "Synthetic worlds");
    c_sy->require_subcommand(1);
    SynthOpts sy;
    auto* c_gen = c_sy->add_subcommand("generate", "Write corpus.jsonl, outlets.csv and manifest.json");
    c_gen->add_option("--spec", sy.spec, "key = value world spec")->check(CLI::ExistingFile);
    c_gen->add_option("--out", sy.out, "Output directory")->required();
    c_gen->callback([&] {
        primary = sy.out;
        action = [&] {
            fs::create_directories(sy.out);
            run_synth(g, seed_opt->count() > 0, sy, out);
        };
    });

    try {
        app.parse(argc, argv);
        logger->set_level(parse_level(g.log_level));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::Error& e) {
        app.exit(e, out, err);
        if (argc <= 1) err << app.help();
        return kExitUsage;
    }

    try {
        const auto config = resolved_config(app);
        spdlog::info("resolved config:\n{}", config);
        if (!action) throw CLI::CallForHelp();
        action();
        write_sidecar(config, primary);
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace geoact::cli
