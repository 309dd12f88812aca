#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "geoact/corpus.hpp"
#include "geoact/mobility.hpp"

namespace geoact::testing {

inline GridSpec test_grid(double cell = 100.0) {
    GridSpec g;
    g.origin_lat = 40.70;
    g.origin_lon = -74.02;
    g.cell_size_m = cell;
    return g;
}

// Point `east`/`north` meters from the grid origin.
inline LatLon offset(const GridSpec& g, double east, double north) {
    const double lon_scale = std::cos(g.origin_lat * 3.14159265358979323846 / 180.0) * kMetersPerDegreeLonAtEquator;
    return {g.origin_lat + north / kMetersPerDegreeLat, g.origin_lon + east / lon_scale};
}

// A tweet at local hour `hour` (hours since the epoch, local clock) in the
// center of cell (ix, iy).
inline TweetRecord tweet_at(const std::string& user, std::int64_t hour, const GridSpec& g, int ix, int iy,
                            std::string text = "hello", std::int32_t tz = 0, int minute = 30) {
    TweetRecord t;
    t.user = user;
    t.tz_offset_min = tz;
    t.ts = hour * 3600 + minute * 60 - static_cast<std::int64_t>(tz) * 60;
    const auto p = g.cell_center({ix, iy});
    t.lat = p.lat;
    t.lon = p.lon;
    t.text = std::move(text);
    return t;
}

inline mobility::HourlyTrace make_trace(std::int64_t start_hour, std::vector<std::optional<GridCell>> slots,
                                        std::string user = "u") {
    mobility::HourlyTrace t;
    t.user = std::move(user);
    t.start_hour = start_hour;
    t.slots = std::move(slots);
    return t;
}

// Random trace over `cells` distinct cells with the given fill rate.
inline mobility::HourlyTrace random_trace(std::mt19937_64& rng, std::size_t hours, int cells, double fill) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> c(0, cells - 1);
    std::uniform_int_distribution<std::int64_t> start(0, 24 * 400);
    mobility::HourlyTrace t;
    t.user = "r";
    t.start_hour = start(rng);
    t.slots.resize(hours);
    for (auto& s : t.slots)
        if (u(rng) < fill) s = GridCell{c(rng), c(rng) % 2};
    if (t.observed() == 0) t.slots[0] = GridCell{0, 0};
    return t;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("geoact-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

}  // namespace geoact::testing
