#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace geoact {

enum class Answer { Absent, No, Yes };

struct GoldLabels {
    Answer q1 = Answer::Absent;
    Answer q2 = Answer::Absent;
    Answer q3 = Answer::Absent;
    std::optional<bool> home;

    // q2 only with q1 = yes, q3 only with q2 = yes.
    bool consistent() const noexcept;
};

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

struct TweetRecord {
    std::string user;
    std::int64_t ts = 0;          // epoch seconds, UTC
    std::int32_t tz_offset_min = 0;
    double lat = 0.0;
    double lon = 0.0;
    std::string text;
    std::optional<GoldLabels> gold;

    // Whole hours since the epoch on the poster's local clock.
    std::int64_t local_hour() const noexcept;
};

// Floor division and modulus for possibly negative hour values.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept {
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}
constexpr std::int64_t floor_mod(std::int64_t a, std::int64_t b) noexcept {
    return a - floor_div(a, b) * b;
}

inline constexpr double kMetersPerDegreeLat = 110574.0;
inline constexpr double kMetersPerDegreeLonAtEquator = 111320.0;

struct GridCell {
    std::int32_t ix = 0;
    std::int32_t iy = 0;

    std::string id() const;
    static GridCell parse(std::string_view id);

    friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

// Orders cells by their canonical "ix:iy" string.
bool id_less(const GridCell& a, const GridCell& b);

struct GridSpec {
    double origin_lat = 0.0;   // southwest corner of the study area
    double origin_lon = 0.0;
    double cell_size_m = 100.0;
    std::optional<LatLon> northeast;  // unbounded to the north/east when absent

    void validate() const;
    bool contains(double lat, double lon) const noexcept;
    LatLon cell_center(const GridCell& c) const noexcept;
    // Southwest corner of the cell.
    LatLon cell_corner(const GridCell& c) const noexcept;
    GridSpec with_cell_size(double size_m) const;
};

// Local equirectangular projection about the grid origin.
GridCell assign_grid(double lat, double lon, const GridSpec& grid);

struct LineIssue {
    std::size_t line = 0;
    std::string message;
};

struct Dataset {
    std::vector<TweetRecord> records;   // sorted by (user, ts)
    GridSpec grid;
    std::int64_t start_hour = 0;        // local-clock hours, half-open
    std::int64_t end_hour = 0;
    std::vector<LineIssue> malformed;

    std::size_t hours() const noexcept {
        return static_cast<std::size_t>(end_hour - start_hour);
    }
};

struct LoadOptions {
    // Declared sampling period; derived from the records when absent.
    std::optional<std::pair<std::int64_t, std::int64_t>> period;
    double max_malformed_fraction = 0.10;
};

Dataset load_tweets(const std::filesystem::path& path, const GridSpec& grid,
                    const LoadOptions& opts = {});
Dataset parse_tweets(std::istream& in, const GridSpec& grid, const LoadOptions& opts = {});

// Parses one JSON-lines record; throws DataError describing the first problem.
TweetRecord parse_tweet_line(std::string_view line);
// Inverse of parse_tweet_line; one line without the trailing newline.
std::string format_tweet_line(const TweetRecord& t);

// Builds a Dataset from in-memory records (sorted, period derived).
Dataset make_dataset(std::vector<TweetRecord> records, const GridSpec& grid,
                     std::optional<std::pair<std::int64_t, std::int64_t>> period = {});

std::set<std::string> active_users(const Dataset& ds, std::size_t min_tweets = 5);

// Contiguous runs of one user's records.
struct UserSlice {
    std::string_view user;
    std::span<const TweetRecord> records;
};
std::vector<UserSlice> users_of(const Dataset& ds);
std::span<const TweetRecord> records_of(const Dataset& ds, std::string_view user);

// Southwest corner for a grid that covers every record.
LatLon southwest_corner(std::span<const TweetRecord> records);

}  // namespace geoact

template <>
struct std::hash<geoact::GridCell> {
    std::size_t operator()(const geoact::GridCell& c) const noexcept {
        return std::hash<std::int64_t>{}((static_cast<std::int64_t>(c.ix) << 32) ^
                                         static_cast<std::uint32_t>(c.iy));
    }
};
