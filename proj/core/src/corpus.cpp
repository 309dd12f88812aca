#include "geoact/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "geoact/errors.hpp"

namespace geoact {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double meters_per_degree_lon(double origin_lat) {
    return std::cos(origin_lat * kDegToRad) * kMetersPerDegreeLonAtEquator;
}

Answer parse_answer(const nlohmann::json& gold, const char* key) {
    auto it = gold.find(key);
    if (it == gold.end() || it->is_null()) return Answer::Absent;
    if (!it->is_string()) throw DataError(std::string("gold.") + key + " must be \"yes\" or \"no\"");
    const auto& s = it->get_ref<const std::string&>();
    if (s == "yes") return Answer::Yes;
    if (s == "no") return Answer::No;
    throw DataError(std::string("gold.") + key + " must be \"yes\" or \"no\", got \"" + s + "\"");
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw DataError(std::string("missing field \"") + key + "\"");
    return *it;
}

double require_number(const nlohmann::json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_number()) throw DataError(std::string("field \"") + key + "\" must be a number");
    return v.get<double>();
}

std::int64_t require_integer(const nlohmann::json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_number_integer()) throw DataError(std::string("field \"") + key + "\" must be an integer");
    return v.get<std::int64_t>();
}

}  // namespace

bool GoldLabels::consistent() const noexcept {
    if (q2 != Answer::Absent && q1 != Answer::Yes) return false;
    if (q3 != Answer::Absent && q2 != Answer::Yes) return false;
    return true;
}

std::int64_t TweetRecord::local_hour() const noexcept {
    return floor_div(ts + static_cast<std::int64_t>(tz_offset_min) * 60, 3600);
}

std::string GridCell::id() const {
    return std::to_string(ix) + ":" + std::to_string(iy);
}

GridCell GridCell::parse(std::string_view id) {
    auto colon = id.find(':');
    if (colon == std::string_view::npos) throw DataError("malformed cell id \"" + std::string(id) + "\"");
    GridCell c;
    auto parse_part = [&](std::string_view part, std::int32_t& out) {
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty())
            throw DataError("malformed cell id \"" + std::string(id) + "\"");
    };
    parse_part(id.substr(0, colon), c.ix);
    parse_part(id.substr(colon + 1), c.iy);
    return c;
}

bool id_less(const GridCell& a, const GridCell& b) {
    return a.id() < b.id();
}

void GridSpec::validate() const {
    if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m))
        throw DataError("cell size must be positive");
    if (!(origin_lat >= -90.0 && origin_lat <= 90.0) || !(origin_lon >= -180.0 && origin_lon <= 180.0))
        throw DataError("grid origin out of range");
    if (northeast && (northeast->lat < origin_lat || northeast->lon < origin_lon))
        throw DataError("grid northeast corner lies southwest of the origin");
}

bool GridSpec::contains(double lat, double lon) const noexcept {
    if (!(lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0)) return false;
    if (lat < origin_lat || lon < origin_lon) return false;
    if (northeast && (lat > northeast->lat || lon > northeast->lon)) return false;
    return true;
}

LatLon GridSpec::cell_corner(const GridCell& c) const noexcept {
    return {origin_lat + c.iy * cell_size_m / kMetersPerDegreeLat,
            origin_lon + c.ix * cell_size_m / meters_per_degree_lon(origin_lat)};
}

LatLon GridSpec::cell_center(const GridCell& c) const noexcept {
    return {origin_lat + (c.iy + 0.5) * cell_size_m / kMetersPerDegreeLat,
            origin_lon + (c.ix + 0.5) * cell_size_m / meters_per_degree_lon(origin_lat)};
}

GridSpec GridSpec::with_cell_size(double size_m) const {
    GridSpec g = *this;
    g.cell_size_m = size_m;
    g.validate();
    return g;
}

GridCell assign_grid(double lat, double lon, const GridSpec& grid) {
    if (!grid.contains(lat, lon))
        throw OutOfAreaError("point (" + std::to_string(lat) + ", " + std::to_string(lon) +
                             ") lies outside the study area");
    const double east = (lon - grid.origin_lon) * meters_per_degree_lon(grid.origin_lat);
    const double north = (lat - grid.origin_lat) * kMetersPerDegreeLat;
    return {static_cast<std::int32_t>(std::floor(east / grid.cell_size_m)),
            static_cast<std::int32_t>(std::floor(north / grid.cell_size_m))};
}

TweetRecord parse_tweet_line(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("record is not a JSON object");

    TweetRecord r;
    const auto& user = require(j, "user");
    if (!user.is_string()) throw DataError("field \"user\" must be a string");
    r.user = user.get<std::string>();
    r.ts = require_integer(j, "ts");
    auto tz = require_integer(j, "tz_offset_min");
    if (tz < -24 * 60 || tz > 24 * 60) throw DataError("tz_offset_min out of range");
    r.tz_offset_min = static_cast<std::int32_t>(tz);
    r.lat = require_number(j, "lat");
    r.lon = require_number(j, "lon");
    if (!(r.lat >= -90.0 && r.lat <= 90.0)) throw DataError("lat out of range");
    if (!(r.lon >= -180.0 && r.lon <= 180.0)) throw DataError("lon out of range");
    const auto& text = require(j, "text");
    if (!text.is_string()) throw DataError("field \"text\" must be a string");
    r.text = text.get<std::string>();

    if (auto g = j.find("gold"); g != j.end() && !g->is_null()) {
        if (!g->is_object()) throw DataError("field \"gold\" must be an object");
        GoldLabels gold;
        gold.q1 = parse_answer(*g, "q1");
        gold.q2 = parse_answer(*g, "q2");
        gold.q3 = parse_answer(*g, "q3");
        if (auto h = g->find("home"); h != g->end() && !h->is_null()) {
            if (!h->is_boolean()) throw DataError("gold.home must be a boolean");
            gold.home = h->get<bool>();
        }
        if (!gold.consistent()) throw DataError("gold labels violate the q1 > q2 > q3 hierarchy");
        r.gold = gold;
    }
    return r;
}

std::string format_tweet_line(const TweetRecord& t) {
    nlohmann::ordered_json j;
    j["user"] = t.user;
    j["ts"] = t.ts;
    j["tz_offset_min"] = t.tz_offset_min;
    j["lat"] = t.lat;
    j["lon"] = t.lon;
    j["text"] = t.text;
    if (t.gold) {
        auto answer = [](Answer a) -> nlohmann::ordered_json {
            switch (a) {
                case Answer::Yes: return "yes";
                case Answer::No: return "no";
                case Answer::Absent: break;
            }
            return nullptr;
        };
        nlohmann::ordered_json g;
        for (auto [key, a] : {std::pair{"q1", t.gold->q1}, std::pair{"q2", t.gold->q2}, std::pair{"q3", t.gold->q3}})
            if (a != Answer::Absent) g[key] = answer(a);
        if (t.gold->home) g["home"] = *t.gold->home;
        j["gold"] = g;
    }
    return j.dump();
}

Dataset make_dataset(std::vector<TweetRecord> records, const GridSpec& grid,
                     std::optional<std::pair<std::int64_t, std::int64_t>> period) {
    std::stable_sort(records.begin(), records.end(), [](const TweetRecord& a, const TweetRecord& b) {
        if (a.user != b.user) return a.user < b.user;
        return a.ts < b.ts;
    });
    Dataset ds;
    ds.grid = grid;
    if (period) {
        ds.start_hour = period->first;
        ds.end_hour = period->second;
    } else if (!records.empty()) {
        auto lo = std::numeric_limits<std::int64_t>::max();
        auto hi = std::numeric_limits<std::int64_t>::min();
        for (const auto& r : records) {
            lo = std::min(lo, r.local_hour());
            hi = std::max(hi, r.local_hour());
        }
        ds.start_hour = lo;
        ds.end_hour = hi + 1;
    }
    ds.records = std::move(records);
    return ds;
}

Dataset parse_tweets(std::istream& in, const GridSpec& grid, const LoadOptions& opts) {
    grid.validate();
    std::vector<TweetRecord> records;
    std::vector<LineIssue> malformed;
    std::size_t nonblank = 0;
    std::size_t lineno = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++nonblank;
        try {
            TweetRecord r = parse_tweet_line(line);
            if (!grid.contains(r.lat, r.lon)) throw DataError("point lies outside the study area");
            if (opts.period) {
                auto h = r.local_hour();
                if (h < opts.period->first || h >= opts.period->second)
                    throw DataError("timestamp outside the declared sampling period");
            }
            records.push_back(std::move(r));
        } catch (const DataError& e) {
            malformed.push_back({lineno, e.what()});
        }
    }
    if (in.bad()) throw DataError("read error");
    if (nonblank > 0 &&
        static_cast<double>(malformed.size()) > opts.max_malformed_fraction * static_cast<double>(nonblank)) {
        throw DataError(std::to_string(malformed.size()) + " of " + std::to_string(nonblank) +
                        " lines are malformed (first: line " + std::to_string(malformed.front().line) + ": " +
                        malformed.front().message + ")");
    }
    Dataset ds = make_dataset(std::move(records), grid, opts.period);
    ds.malformed = std::move(malformed);
    return ds;
}

Dataset load_tweets(const std::filesystem::path& path, const GridSpec& grid, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return parse_tweets(in, grid, opts);
}

std::vector<UserSlice> users_of(const Dataset& ds) {
    std::vector<UserSlice> out;
    const auto& recs = ds.records;
    std::size_t i = 0;
    while (i < recs.size()) {
        std::size_t j = i;
        while (j < recs.size() && recs[j].user == recs[i].user) ++j;
        out.push_back({recs[i].user, std::span<const TweetRecord>(recs.data() + i, j - i)});
        i = j;
    }
    return out;
}

std::span<const TweetRecord> records_of(const Dataset& ds, std::string_view user) {
    auto lo = std::lower_bound(ds.records.begin(), ds.records.end(), user,
                               [](const TweetRecord& r, std::string_view u) { return r.user < u; });
    auto hi = std::upper_bound(lo, ds.records.end(), user,
                               [](std::string_view u, const TweetRecord& r) { return u < r.user; });
    return {ds.records.data() + (lo - ds.records.begin()), static_cast<std::size_t>(hi - lo)};
}

std::set<std::string> active_users(const Dataset& ds, std::size_t min_tweets) {
    std::set<std::string> out;
    for (const auto& u : users_of(ds))
        if (u.records.size() >= min_tweets) out.emplace(u.user);
    return out;
}

LatLon southwest_corner(std::span<const TweetRecord> records) {
    if (records.empty()) return {};
    LatLon sw{records.front().lat, records.front().lon};
    for (const auto& r : records) {
        sw.lat = std::min(sw.lat, r.lat);
        sw.lon = std::min(sw.lon, r.lon);
    }
    return sw;
}

}  // namespace geoact
