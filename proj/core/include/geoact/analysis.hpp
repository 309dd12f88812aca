#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "geoact/cascade.hpp"
#include "geoact/corpus.hpp"
#include "geoact/homeloc.hpp"

namespace geoact::analysis {

struct ClassifiedTweet {
    std::string user;
    double lat = 0.0;
    double lon = 0.0;
    cascade::ActivityLabel label = cascade::ActivityLabel::FilteredOut;

    bool positive() const noexcept { return label == cascade::ActivityLabel::UserDrinkingNow; }
};

// CSV with header user,ts,lat,lon,label.
void write_classified_csv(std::ostream& out, std::span<const TweetRecord> tweets,
                          std::span<const cascade::ActivityLabel> labels);
// The input records with an added "label" key.
void write_classified_jsonl(std::ostream& out, std::span<const TweetRecord> tweets,
                            std::span<const cascade::ActivityLabel> labels);
// Either format; JSON lines are recognized by a leading '{'.
std::vector<ClassifiedTweet> read_classified(std::istream& in);

struct CellCount {
    std::size_t total = 0;
    std::size_t positive = 0;
};
using CellTally = std::map<GridCell, CellCount>;

// Every cell holding at least one tweet. Tweets outside the grid are skipped.
CellTally tally_cells(std::span<const ClassifiedTweet> tweets, const GridSpec& grid);

struct HeatCell {
    std::size_t total = 0;
    std::size_t positive = 0;
    double heat = 0.0;  // positive / total
};

struct HeatmapGrid {
    GridSpec grid;
    std::size_t min_pos = 5;
    std::map<GridCell, HeatCell> cells;  // only cells with positive >= min_pos
    std::size_t excluded_cells = 0;
    std::size_t excluded_positive = 0;
};

HeatmapGrid build_heatmap(const CellTally& tally, const GridSpec& grid, std::size_t min_pos = 5);
HeatmapGrid build_heatmap(std::span<const ClassifiedTweet> tweets, const GridSpec& grid, std::size_t min_pos = 5);

void write_heatmap_geojson(std::ostream& out, const HeatmapGrid& h);
void write_heatmap_csv(std::ostream& out, const HeatmapGrid& h);

struct Outlet {
    double lat = 0.0;
    double lon = 0.0;
    std::string name;
};

struct OutletTable {
    std::vector<Outlet> outlets;

    // Header row optional; columns lat,lon[,name].
    static OutletTable read_csv(std::istream& in);
    static OutletTable load(const std::filesystem::path& path);
    void write_csv(std::ostream& out) const;

    // Outlets outside the grid are left out and counted in `dropped`.
    std::map<GridCell, std::size_t> counts(const GridSpec& grid, std::size_t* dropped = nullptr) const;
};

struct CorrelationResult {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

// Pearson r with a two-sided t-test on n - 2 degrees of freedom.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);
double t_test_p_value(double r, std::size_t n);

// Share of permutations of `y` whose |r| reaches the observed |r|.
double permutation_p_value(std::span<const double> x, std::span<const double> y, std::size_t permutations,
                           std::uint64_t seed);

// Average ranks for ties.
std::vector<double> ranks(std::span<const double> v);
double spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationOptions {
    bool heatmap_cells_only = false;  // restrict to cells with positive >= min_pos
    std::size_t min_pos = 5;
    bool raw_positives = false;       // positives per cell instead of positives / total
};

struct OutletCorrelation {
    CorrelationResult result;
    std::vector<GridCell> cells;
    std::vector<double> density;
    std::vector<double> outlets;
};

OutletCorrelation correlate_outlets(const CellTally& tally, const std::map<GridCell, std::size_t>& outlet_counts,
                                    const CorrelationOptions& opts = {});

inline constexpr double kEarthRadiusM = 6371000.0;
double haversine(const LatLon& a, const LatLon& b) noexcept;

struct Histogram {
    std::vector<double> edges;  // bin k = [edges[k], edges[k+1])
    std::vector<std::size_t> counts;

    std::size_t total() const noexcept;
    bool empty() const noexcept { return total() == 0; }
};

std::vector<double> default_distance_edges();

// Distance from each positive tweet to its author's home-cell center; tweets
// whose author has no known home are skipped.
Histogram distance_histogram(std::span<const ClassifiedTweet> tweets, std::span<const home::HomePrediction> homes,
                             const GridSpec& grid, std::vector<double> edges = default_distance_edges());

Histogram distance_histogram(std::span<const ClassifiedTweet> tweets,
                             const std::map<std::string, LatLon, std::less<>>& home_centers,
                             std::vector<double> edges = default_distance_edges());

void write_histogram_csv(std::ostream& out, const Histogram& h);

}  // namespace geoact::analysis
