#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoact/corpus.hpp"

namespace geoact::mobility {

// One cell (or nothing) per local-clock hour of the sampling period.
struct HourlyTrace {
    std::string user;
    std::int64_t start_hour = 0;  // local-clock hours since the epoch of slot 0
    std::vector<std::optional<GridCell>> slots;

    int hour_of_day(std::size_t slot) const noexcept {
        return static_cast<int>(floor_mod(start_hour + static_cast<std::int64_t>(slot), 24));
    }
    std::size_t observed() const noexcept;
};

// Deterministic stand-in for the random tie-break between cells with equal
// check-in counts in one hour.
std::uint64_t tie_break_key(std::string_view user, std::int64_t hour, const GridCell& cell,
                            std::uint64_t seed) noexcept;

HourlyTrace build_hourly_trace(std::span<const TweetRecord> records, std::int64_t start_hour,
                               std::int64_t end_hour, const GridSpec& grid, std::uint64_t seed = 0);

// Field indices (zero-based) into LocationFeatures::values.
namespace field {
inline constexpr std::size_t kCheckinPercent = 0;
inline constexpr std::size_t kMarginBelowHigher = 1;
inline constexpr std::size_t kMarginAboveLower = 2;
inline constexpr std::size_t kLateNightPercent = 3;
inline constexpr std::size_t kLastDestination = 4;
inline constexpr std::size_t kLastDestinationInactive = 5;
inline constexpr std::size_t kHourlyProfile = 6;  // 24 entries
inline constexpr std::size_t kPageRank = 30;
inline constexpr std::size_t kReversedPageRank = 31;
inline constexpr std::size_t kBaseCount = 32;
// Optional extended set.
inline constexpr std::size_t kPageRankMarginBelowHigher = 32;
inline constexpr std::size_t kPageRankMarginAboveLower = 33;
inline constexpr std::size_t kPageRankRank = 34;
inline constexpr std::size_t kReversedMarginBelowHigher = 35;
inline constexpr std::size_t kReversedMarginAboveLower = 36;
inline constexpr std::size_t kReversedRank = 37;
inline constexpr std::size_t kExtendedCount = 38;
}  // namespace field

std::string field_name(std::size_t index);

struct LocationFeatures {
    std::vector<double> values;  // kBaseCount or kExtendedCount entries
};

using CellMap = std::map<GridCell, double>;

struct CheckinFeatures {
    std::map<GridCell, std::array<double, 3>> by_cell;  // percent, margin below higher, margin above lower
    std::vector<GridCell> ranking;                      // by percent desc, then cell id
    std::map<GridCell, std::size_t> counts;             // non-Null slots per cell
};

CheckinFeatures checkin_features(const HourlyTrace& trace);
CellMap late_night_feature(const HourlyTrace& trace);
CellMap last_destination_counts(const HourlyTrace& trace);
CellMap last_destination_inactive(const HourlyTrace& trace);
std::map<GridCell, std::array<double, 24>> hourly_profile(const HourlyTrace& trace);

// Number of 03:00-02:59 day windows with at least one observation, and how
// many of those are followed by an inactive 00:00-06:59 night.
struct DayWindowCounts {
    std::size_t observed_days = 0;
    std::size_t inactive_night_days = 0;
};
DayWindowCounts day_window_counts(const HourlyTrace& trace);

inline constexpr int kLateNightEndHour = 7;    // late night is [00:00, 07:00)
inline constexpr int kDayBoundaryHour = 3;     // a day runs 03:00 to 02:59

struct Edge {
    std::size_t transitions = 0;
    std::size_t idle_hours = 0;
    double weight = 0.0;
};

struct MovementGraph {
    std::vector<GridCell> vertices;                        // sorted
    std::map<std::pair<std::size_t, std::size_t>, Edge> edges;  // (from, to) vertex indices

    std::size_t index_of(const GridCell& c) const;
    MovementGraph reversed() const;
    friend bool operator==(const MovementGraph& a, const MovementGraph& b);
};

MovementGraph build_movement_graph(const HourlyTrace& trace);

struct PageRankOptions {
    double damping = 0.85;
    double tol = 1e-9;
    std::size_t max_iter = 1000;
};

// Power iteration over weight-normalized out-edges with uniform teleport;
// dangling vertices spread their mass uniformly. Scores follow vertex order.
std::vector<double> weighted_pagerank(const MovementGraph& g, const PageRankOptions& opts = {});
std::vector<double> reversed_pagerank(const MovementGraph& g, const PageRankOptions& opts = {});

struct FeatureOptions {
    bool extended = false;           // append the six PageRank margin/rank fields
    bool normalized_counts = false;  // last-destination fields as % of day windows
    std::uint64_t seed = 0;          // hourly tie-break
    PageRankOptions pagerank;
};

std::map<GridCell, LocationFeatures> extract_features(const HourlyTrace& trace, const FeatureOptions& opts = {});
std::map<GridCell, LocationFeatures> extract_features(const Dataset& ds, const std::string& user,
                                                      const FeatureOptions& opts = {});

// One CSV row per (user, cell): user,cell_id,f1..fN[,is_home]
struct FeatureRow {
    std::string user;
    GridCell cell;
    LocationFeatures features;
    std::optional<bool> is_home;
};

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows, bool with_label);
std::vector<FeatureRow> read_feature_csv(std::istream& in);

// "%.9g" rendering used by every CSV writer in the project.
std::string format_decimal(double v);

}  // namespace geoact::mobility
