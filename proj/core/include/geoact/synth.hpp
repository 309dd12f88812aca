#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "geoact/corpus.hpp"

namespace geoact::synth {

// Key-value description of a synthetic world. Unset keys keep these defaults.
struct WorldSpec {
    std::uint64_t seed = 1;
    std::size_t n_users = 200;

    // Study area: square of extent_m on a side with its southwest corner here.
    double origin_lat = 40.70;
    double origin_lon = -74.02;
    double extent_m = 8000.0;

    std::int64_t start_ts = 1420088400;  // local midnight for tz_offset_min
    std::int32_t tz_offset_min = -300;
    std::size_t days = 28;

    double tweets_per_day = 1.5;  // mean per-user rate; each user draws 0.5x..1.5x
    std::size_t min_tweets = 10;  // users are topped up to this many tweets

    double night_home_prob = 0.9;  // probability of being home in any 00:00-06:59 hour
    double work_prob = 0.6;        // weekday office-hours presence at work
    double bar_affinity = 0.3;     // mean evening venue probability
    double home_drinker_fraction = 0.3;

    std::size_t n_venues = 60;
    double outlet_venue_share = 0.8;  // venues that host outlets; the planted correlation strength
    std::size_t noise_outlets = 30;   // outlets dropped uniformly over the area

    double keyword_rate = 0.3;  // share of tweets drawn from the drinking strata
    // Shares of the four keyword strata; renormalized.
    double stratum_not_drinking = 0.3;
    double stratum_other_drinking = 0.2;
    double stratum_user_past = 0.2;
    double stratum_user_now = 0.3;
    double label_fraction = 1.0;  // tweets carrying gold labels

    void validate() const;
    static WorldSpec read(std::istream& in);
    static WorldSpec load(const std::filesystem::path& path);
    void write(std::ostream& out) const;

    GridSpec grid() const;  // 100 m grid covering the area
    std::int64_t end_ts() const noexcept { return start_ts + static_cast<std::int64_t>(days) * 86400; }
};

// A: chatter without keywords. B: keyword, not about drinking. C: drinking,
// not the author. D: the author drinking, not now. E: the author drinking now.
enum class Stratum { Chatter, NotDrinking, OtherDrinking, UserPast, UserNow };
char stratum_code(Stratum s) noexcept;

struct UserTruth {
    std::string user;
    GridCell home;
    LatLon home_point;
    GridCell work;
    bool home_drinker = false;
    double bar_affinity = 0.0;
    double rate = 0.0;
    std::size_t tweets = 0;
};

struct Manifest {
    std::uint64_t seed = 0;
    GridSpec grid;
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;
    std::int32_t tz_offset_min = 0;
    std::vector<UserTruth> users;
    std::size_t tweets = 0;
    std::size_t keyword_tweets = 0;
    std::map<char, std::size_t> strata;
    std::size_t drink_now_at_home = 0;
    std::size_t drink_now_at_venue = 0;
    std::size_t night_tweets = 0;
    std::size_t night_home_tweets = 0;
    std::size_t venues = 0;
    std::size_t outlets = 0;
    double outlet_venue_share = 0.0;

    void write_json(std::ostream& out) const;
};

struct World {
    std::vector<TweetRecord> tweets;  // in generation order: user by user, by time
    std::vector<LatLon> venues;
    std::vector<LatLon> outlets;
    std::vector<Stratum> strata;      // parallel to tweets
    Manifest manifest;
};

World generate_world(const WorldSpec& spec);

// corpus.jsonl, outlets.csv and manifest.json under `dir`.
void write_world(const World& world, const std::filesystem::path& dir);

}  // namespace geoact::synth
