#include "geoact/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "geoact/errors.hpp"

namespace geoact::synth {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}
bool bernoulli(Rng& rng, double p) {
    return uniform(rng, 0.0, 1.0) < p;
}
std::size_t pick(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}
template <typename T, std::size_t N>
const T& pick(Rng& rng, const std::array<T, N>& a) {
    return a[pick(rng, N)];
}

// Meters east/north of the area's southwest corner.
struct Point {
    double east = 0.0;
    double north = 0.0;
};

double distance(const Point& a, const Point& b) {
    return std::hypot(a.east - b.east, a.north - b.north);
}

class Projection {
public:
    explicit Projection(const GridSpec& g)
        : grid_(g), lon_scale_(std::cos(g.origin_lat * 3.14159265358979323846 / 180.0) * kMetersPerDegreeLonAtEquator) {}

    LatLon to_latlon(const Point& p) const {
        return {grid_.origin_lat + p.north / kMetersPerDegreeLat, grid_.origin_lon + p.east / lon_scale_};
    }
    GridCell cell_of(const Point& p) const {
        return {static_cast<std::int32_t>(std::floor(p.east / grid_.cell_size_m)),
                static_cast<std::int32_t>(std::floor(p.north / grid_.cell_size_m))};
    }

private:
    GridSpec grid_;
    double lon_scale_;
};

// Small jitter that never leaves the 100 m cell holding `p`.
Point jitter_in_cell(Rng& rng, const Point& p, double radius) {
    const double cx = std::floor(p.east / 100.0) * 100.0;
    const double cy = std::floor(p.north / 100.0) * 100.0;
    return {std::clamp(p.east + uniform(rng, -radius, radius), cx + 2.0, cx + 98.0),
            std::clamp(p.north + uniform(rng, -radius, radius), cy + 2.0, cy + 98.0)};
}

enum class Place { Home, Work, Venue, Other };

constexpr std::array<std::string_view, 10> kDrinks{"beer", "wine", "vodka", "whiskey", "tequila",
                                                   "rum", "margarita", "cocktail", "champagne", "liquor"};
constexpr std::array<std::string_view, 8> kNames{"alex", "sam", "jordan", "taylor", "casey", "riley", "morgan", "jamie"};
constexpr std::array<std::string_view, 5> kTeams{"knicks", "mets", "yankees", "rangers", "nets"};
constexpr std::array<std::string_view, 5> kStreets{"broadway", "canal street", "5th ave", "houston", "the bridge"};
constexpr std::array<std::string_view, 4> kWeather{"sunny", "rainy", "cold", "windy"};
constexpr std::array<std::string_view, 3> kVenues{"bar", "pub", "rooftop bar"};
constexpr std::array<std::string_view, 10> kFillers{"lol", "omg", ":)", ":(", "#tbt", "#friday", "ugh", "yesss",
                                                    "http://t.co/x1y2", "so good"};

constexpr std::array<std::string_view, 10> kChatter{
    "stuck in traffic on {street} again",
    "coffee with {name} this morning",
    "watching the {team} game with {name}",
    "great {weather} day at the park",
    "new episode of my show later",
    "cannot believe this {weather} weather",
    "lunch with {name} near {street}",
    "so tired after work",
    "@{name} come see this",
    "gym then groceries, typical monday",
};
constexpr std::array<std::string_view, 8> kNotDrinking{
    "the {team} are raising the bar this season",
    "what a shot by the {team} in the last minute",
    "wasted an hour in traffic on {street}",
    "the party debate on tv was painful",
    "ate a whole chocolate bar at work",
    "got my flu shot at the clinic",
    "{name} passed the bar exam",
    "so much wasted food at the cafeteria",
};
constexpr std::array<std::string_view, 7> kOtherDrinking{
    "new study says {drink} prices are rising",
    "{name} was drunk on live tv",
    "article about {drink} sales in the city",
    "a neighbor has a huge {drink} collection",
    "ads for cheap {drink} everywhere on {street}",
    "people getting drunk downtown every weekend",
    "the {team} fans were wasted after the game",
};
constexpr std::array<std::string_view, 8> kUserPast{
    "last night i had way too much {drink}",
    "hangover from yesterday, never again",
    "cant wait to get drunk with {name} this weekend",
    "tomorrow i will drink {drink} with {name}",
    "we had {drink} at the {venue} last night",
    "next friday we are going to the {venue} for {drink}",
    "i was so drunk yesterday",
    "saving the {drink} for my birthday next week",
};
constexpr std::array<std::string_view, 8> kUserNow{
    "drinking {drink} right now at the {venue}",
    "having a {drink} here with {name} now",
    "{drink} in my hand right now",
    "cheers, {drink} time now",
    "at the {venue} now, my second {drink}",
    "i am drinking {drink} here tonight",
    "sipping {drink} now with {name}",
    "finally drinking a cold {drink} right now",
};

std::string fill(std::string_view tmpl, Rng& rng) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '{') {
            out += tmpl[i++];
            continue;
        }
        const auto close = tmpl.find('}', i);
        const auto slot = tmpl.substr(i + 1, close - i - 1);
        if (slot == "drink") out += pick(rng, kDrinks);
        else if (slot == "name") out += pick(rng, kNames);
        else if (slot == "team") out += pick(rng, kTeams);
        else if (slot == "street") out += pick(rng, kStreets);
        else if (slot == "weather") out += pick(rng, kWeather);
        else if (slot == "venue") out += pick(rng, kVenues);
        i = close + 1;
    }
    if (bernoulli(rng, 0.3)) {
        out += ' ';
        out += pick(rng, kFillers);
    }
    return out;
}

std::string text_for(Stratum s, Rng& rng) {
    switch (s) {
        case Stratum::Chatter: return fill(pick(rng, kChatter), rng);
        case Stratum::NotDrinking: return fill(pick(rng, kNotDrinking), rng);
        case Stratum::OtherDrinking: return fill(pick(rng, kOtherDrinking), rng);
        case Stratum::UserPast: return fill(pick(rng, kUserPast), rng);
        case Stratum::UserNow: return fill(pick(rng, kUserNow), rng);
    }
    return {};
}

GoldLabels gold_for(Stratum s) {
    GoldLabels g;
    g.q1 = Answer::No;
    if (s == Stratum::Chatter || s == Stratum::NotDrinking) return g;
    g.q1 = Answer::Yes;
    g.q2 = s == Stratum::OtherDrinking ? Answer::No : Answer::Yes;
    if (g.q2 == Answer::Yes) g.q3 = s == Stratum::UserNow ? Answer::Yes : Answer::No;
    return g;
}

// Relative tweet intensity by local hour: quiet nights, busy evenings.
double hour_weight(int h) {
    if (h < 7) return 0.3;
    if (h < 18) return 1.0;
    return 1.5;
}

struct Agent {
    UserTruth truth;
    Point home, work;
    std::vector<std::size_t> favorite_venues;
    std::vector<Point> haunts;
};

Place draw_place(Rng& rng, const WorldSpec& spec, const Agent& a, int h, bool weekend) {
    const double aff = a.truth.bar_affinity;
    if (h < 7) {
        if (bernoulli(rng, spec.night_home_prob)) return Place::Home;
        return bernoulli(rng, aff) ? Place::Venue : Place::Other;
    }
    if (h < 9) return bernoulli(rng, 0.6) ? Place::Home : Place::Other;
    if (h < 18) {
        if (!weekend && bernoulli(rng, spec.work_prob)) return Place::Work;
        return bernoulli(rng, weekend ? 0.4 : 0.3) ? Place::Home : Place::Other;
    }
    if (h < 22) {
        if (bernoulli(rng, aff)) return Place::Venue;
        return bernoulli(rng, 0.6) ? Place::Home : Place::Other;
    }
    // Winding down: most agents are back home before midnight.
    if (bernoulli(rng, aff / 2.0)) return Place::Venue;
    return bernoulli(rng, 0.85) ? Place::Home : Place::Other;
}

std::string user_id(std::size_t i, std::size_t n) {
    const std::size_t width = std::max<std::size_t>(4, std::to_string(n).size());
    std::string digits = std::to_string(i + 1);
    return "u" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

void check_prob(const char* key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError(std::string("world spec: ") + key + " must lie in [0, 1]");
}

}  // namespace

char stratum_code(Stratum s) noexcept {
    return static_cast<char>('A' + static_cast<int>(s));
}

void WorldSpec::validate() const {
    if (n_users == 0) throw DataError("world spec: n_users must be positive");
    if (!(extent_m >= 1000.0)) throw DataError("world spec: extent_m must be at least 1000");
    if (days == 0) throw DataError("world spec: days must be positive");
    if (!(tweets_per_day > 0.0)) throw DataError("world spec: tweets_per_day must be positive");
    if (n_venues == 0) throw DataError("world spec: n_venues must be positive");
    if (tz_offset_min < -1440 || tz_offset_min > 1440) throw DataError("world spec: tz_offset_min out of range");
    check_prob("night_home_prob", night_home_prob);
    check_prob("work_prob", work_prob);
    check_prob("bar_affinity", bar_affinity);
    check_prob("home_drinker_fraction", home_drinker_fraction);
    check_prob("outlet_venue_share", outlet_venue_share);
    check_prob("keyword_rate", keyword_rate);
    check_prob("label_fraction", label_fraction);
    for (double s : {stratum_not_drinking, stratum_other_drinking, stratum_user_past, stratum_user_now})
        if (!(s >= 0.0)) throw DataError("world spec: stratum shares must be non-negative");
    if (!(stratum_not_drinking + stratum_other_drinking + stratum_user_past + stratum_user_now > 0.0))
        throw DataError("world spec: stratum shares sum to zero");
    grid().validate();
}

GridSpec WorldSpec::grid() const {
    GridSpec g;
    g.origin_lat = origin_lat;
    g.origin_lon = origin_lon;
    g.cell_size_m = 100.0;
    const double lon_scale = std::cos(origin_lat * 3.14159265358979323846 / 180.0) * kMetersPerDegreeLonAtEquator;
    g.northeast = LatLon{origin_lat + extent_m / kMetersPerDegreeLat, origin_lon + extent_m / lon_scale};
    return g;
}

namespace {

template <typename T>
void parse_value(const std::string& key, const std::string& value, T& out) {
    std::istringstream in(value);
    in >> out;
    if (!in.fail() && !in.eof()) in >> std::ws;
    if (in.fail() || !in.eof()) throw DataError("world spec: bad value for " + key + ": '" + value + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

#define GEOACT_WORLD_FIELDS(X)                                                                          \
    X(seed) X(n_users) X(origin_lat) X(origin_lon) X(extent_m) X(start_ts) X(tz_offset_min) X(days)   \
    X(tweets_per_day) X(min_tweets) X(night_home_prob) X(work_prob) X(bar_affinity)                   \
    X(home_drinker_fraction) X(n_venues) X(outlet_venue_share) X(noise_outlets) X(keyword_rate)       \
    X(stratum_not_drinking) X(stratum_other_drinking) X(stratum_user_past) X(stratum_user_now)        \
    X(label_fraction)

WorldSpec WorldSpec::read(std::istream& in) {
    WorldSpec spec;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool known = false;
#define GEOACT_PARSE_FIELD(name)              \
    if (key == #name) {                       \
        parse_value(key, value, spec.name);   \
        known = true;                         \
    }
        GEOACT_WORLD_FIELDS(GEOACT_PARSE_FIELD)
#undef GEOACT_PARSE_FIELD
        if (!known) throw ParseError(lineno, "unknown world spec key '" + key + "'");
    }
    spec.validate();
    return spec;
}

WorldSpec WorldSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read(in);
}

void WorldSpec::write(std::ostream& out) const {
    const auto old = out.precision(17);
#define GEOACT_WRITE_FIELD(name) out << #name << " = " << name << '\n';
    GEOACT_WORLD_FIELDS(GEOACT_WRITE_FIELD)
#undef GEOACT_WRITE_FIELD
    out.precision(old);
}

#undef GEOACT_WORLD_FIELDS

World generate_world(const WorldSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const GridSpec grid = spec.grid();
    const Projection proj(grid);
    const double ext = spec.extent_m;

    World world;
    std::vector<Point> venues;
    for (std::size_t v = 0; v < spec.n_venues; ++v)
        venues.push_back({uniform(rng, 200.0, ext - 200.0), uniform(rng, 200.0, ext - 200.0)});

    std::vector<Point> outlets;
    for (const auto& v : venues) {
        if (!bernoulli(rng, spec.outlet_venue_share)) continue;
        const std::size_t k = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < k; ++i) outlets.push_back(jitter_in_cell(rng, v, 15.0));
    }
    for (std::size_t i = 0; i < spec.noise_outlets; ++i)
        outlets.push_back({uniform(rng, 1.0, ext - 1.0), uniform(rng, 1.0, ext - 1.0)});

    std::vector<Agent> agents(spec.n_users);
    for (std::size_t u = 0; u < spec.n_users; ++u) {
        Agent& a = agents[u];
        a.truth.user = user_id(u, spec.n_users);
        const auto cells = static_cast<std::size_t>(ext / 100.0);
        for (;;) {
            const double cx = 100.0 * static_cast<double>(1 + pick(rng, cells - 2));
            const double cy = 100.0 * static_cast<double>(1 + pick(rng, cells - 2));
            a.home = {cx + uniform(rng, 20.0, 80.0), cy + uniform(rng, 20.0, 80.0)};
            const bool clear = std::none_of(venues.begin(), venues.end(),
                                            [&](const Point& v) { return distance(v, a.home) < 250.0; });
            if (clear) break;
        }
        for (;;) {
            const double r = uniform(rng, 1000.0, 4000.0);
            const double th = uniform(rng, 0.0, 2.0 * 3.14159265358979323846);
            Point w{a.home.east + r * std::cos(th), a.home.north + r * std::sin(th)};
            if (w.east > 50.0 && w.east < ext - 50.0 && w.north > 50.0 && w.north < ext - 50.0) {
                a.work = w;
                break;
            }
        }
        for (int i = 0; i < 2; ++i) a.favorite_venues.push_back(pick(rng, venues.size()));
        for (int i = 0; i < 4; ++i) {
            Point p{uniform(rng, 1.0, ext - 1.0), uniform(rng, 1.0, ext - 1.0)};
            if (distance(p, a.home) < 150.0) continue;
            a.haunts.push_back(p);
        }
        a.truth.bar_affinity = std::clamp(uniform(rng, 0.0, 2.0 * spec.bar_affinity), 0.0, 1.0);
        a.truth.home_drinker = bernoulli(rng, spec.home_drinker_fraction);
        a.truth.rate = spec.tweets_per_day * uniform(rng, 0.5, 1.5);
        a.truth.home = proj.cell_of(a.home);
        a.truth.home_point = proj.to_latlon(a.home);
        a.truth.work = proj.cell_of(a.work);
    }

    const double shares[4] = {spec.stratum_not_drinking, spec.stratum_other_drinking, spec.stratum_user_past,
                              spec.stratum_user_now};
    std::discrete_distribution<int> stratum_dist(std::begin(shares), std::end(shares));
    double weight_sum = 0.0;
    for (int h = 0; h < 24; ++h) weight_sum += hour_weight(h);

    Manifest& m = world.manifest;
    const std::size_t hours = spec.days * 24;
    for (auto& a : agents) {
        std::vector<Place> places(hours);
        for (std::size_t s = 0; s < hours; ++s) {
            const int h = static_cast<int>(s % 24);
            const std::size_t day = s / 24;
            // 2015-01-01 was a Thursday; days 2 and 3 of each week are the weekend.
            const bool weekend = day % 7 == 2 || day % 7 == 3;
            places[s] = draw_place(rng, spec, a, h, weekend);
        }

        std::vector<std::size_t> tweet_hours;
        for (std::size_t s = 0; s < hours; ++s) {
            const double lambda = a.truth.rate * hour_weight(static_cast<int>(s % 24)) / weight_sum;
            const int n = std::poisson_distribution<int>(lambda)(rng);
            for (int i = 0; i < n; ++i) tweet_hours.push_back(s);
        }
        while (tweet_hours.size() < spec.min_tweets) tweet_hours.push_back(pick(rng, hours));
        std::sort(tweet_hours.begin(), tweet_hours.end());

        std::vector<std::pair<std::int64_t, std::size_t>> stamped;
        for (std::size_t s : tweet_hours)
            stamped.emplace_back(spec.start_ts + static_cast<std::int64_t>(s) * 3600 +
                                     static_cast<std::int64_t>(pick(rng, 3600)),
                                 s);
        std::sort(stamped.begin(), stamped.end());

        for (const auto& [ts, s] : stamped) {
            const Place place = places[s];
            const int h = static_cast<int>(s % 24);
            Point p;
            switch (place) {
                case Place::Home: p = jitter_in_cell(rng, a.home, 15.0); break;
                case Place::Work: p = jitter_in_cell(rng, a.work, 15.0); break;
                case Place::Venue: p = jitter_in_cell(rng, venues[a.favorite_venues[pick(rng, 2)]], 15.0); break;
                case Place::Other:
                    if (!a.haunts.empty() && bernoulli(rng, 0.7))
                        p = jitter_in_cell(rng, a.haunts[pick(rng, a.haunts.size())], 15.0);
                    else
                        p = {uniform(rng, 1.0, ext - 1.0), uniform(rng, 1.0, ext - 1.0)};
                    break;
            }

            const double kw_rate = place == Place::Venue ? std::min(1.0, 2.0 * spec.keyword_rate) : spec.keyword_rate;
            Stratum stratum = Stratum::Chatter;
            if (bernoulli(rng, kw_rate)) stratum = static_cast<Stratum>(1 + stratum_dist(rng));
            // Drinking-now posts come from venues, or from home for home drinkers.
            if (stratum == Stratum::UserNow) {
                const bool fits = place == Place::Venue || (place == Place::Home && a.truth.home_drinker);
                if (!fits) stratum = Stratum::UserPast;
            }

            TweetRecord t;
            t.user = a.truth.user;
            t.ts = ts;
            t.tz_offset_min = spec.tz_offset_min;
            const LatLon ll = proj.to_latlon(p);
            t.lat = ll.lat;
            t.lon = ll.lon;
            t.text = text_for(stratum, rng);
            if (bernoulli(rng, spec.label_fraction)) {
                GoldLabels g = gold_for(stratum);
                g.home = place == Place::Home;
                t.gold = g;
            }

            ++m.strata[stratum_code(stratum)];
            if (stratum != Stratum::Chatter) ++m.keyword_tweets;
            if (stratum == Stratum::UserNow) ++(place == Place::Home ? m.drink_now_at_home : m.drink_now_at_venue);
            if (h < 7) {
                ++m.night_tweets;
                if (place == Place::Home) ++m.night_home_tweets;
            }
            ++a.truth.tweets;
            world.tweets.push_back(std::move(t));
            world.strata.push_back(stratum);
        }
        m.users.push_back(a.truth);
    }

    for (const auto& v : venues) world.venues.push_back(proj.to_latlon(v));
    for (const auto& o : outlets) world.outlets.push_back(proj.to_latlon(o));
    m.seed = spec.seed;
    m.grid = grid;
    m.start_ts = spec.start_ts;
    m.end_ts = spec.end_ts();
    m.tz_offset_min = spec.tz_offset_min;
    m.tweets = world.tweets.size();
    m.venues = venues.size();
    m.outlets = outlets.size();
    m.outlet_venue_share = spec.outlet_venue_share;
    for (Stratum s : {Stratum::Chatter, Stratum::NotDrinking, Stratum::OtherDrinking, Stratum::UserPast,
                      Stratum::UserNow})
        m.strata.try_emplace(stratum_code(s), 0);
    return world;
}

void Manifest::write_json(std::ostream& out) const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["grid"] = {{"origin_lat", grid.origin_lat},
                 {"origin_lon", grid.origin_lon},
                 {"cell_size_m", grid.cell_size_m},
                 {"northeast_lat", grid.northeast ? grid.northeast->lat : grid.origin_lat},
                 {"northeast_lon", grid.northeast ? grid.northeast->lon : grid.origin_lon}};
    j["start_ts"] = start_ts;
    j["end_ts"] = end_ts;
    j["tz_offset_min"] = tz_offset_min;
    j["tweets"] = tweets;
    j["keyword_tweets"] = keyword_tweets;
    nlohmann::ordered_json st;
    for (const auto& [code, n] : strata) st[std::string(1, code)] = n;
    j["strata"] = st;
    j["drink_now_at_home"] = drink_now_at_home;
    j["drink_now_at_venue"] = drink_now_at_venue;
    j["night_tweets"] = night_tweets;
    j["night_home_tweets"] = night_home_tweets;
    j["venues"] = venues;
    j["outlets"] = outlets;
    j["outlet_venue_share"] = outlet_venue_share;
    auto users_json = nlohmann::ordered_json::array();
    for (const auto& u : users)
        users_json.push_back({{"user", u.user},
                              {"home_cell", u.home.id()},
                              {"home_lat", u.home_point.lat},
                              {"home_lon", u.home_point.lon},
                              {"work_cell", u.work.id()},
                              {"home_drinker", u.home_drinker},
                              {"bar_affinity", u.bar_affinity},
                              {"rate", u.rate},
                              {"tweets", u.tweets}});
    j["users"] = users_json;
    out << j.dump(1) << '\n';
}

void write_world(const World& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("corpus.jsonl");
        for (const auto& t : world.tweets) out << format_tweet_line(t) << '\n';
    }
    {
        auto out = open("outlets.csv");
        out << "lat,lon,name\n";
        char buf[96];
        for (std::size_t i = 0; i < world.outlets.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.9f,%.9f,outlet-%04zu\n", world.outlets[i].lat, world.outlets[i].lon, i + 1);
            out << buf;
        }
    }
    {
        auto out = open("manifest.json");
        world.manifest.write_json(out);
    }
}

}  // namespace geoact::synth
