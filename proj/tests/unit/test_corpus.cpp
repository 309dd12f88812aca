#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "geoact/corpus.hpp"
#include "geoact/errors.hpp"
#include "geoact/synth.hpp"
#include "test_support.hpp"

using namespace geoact;
using geoact::testing::offset;
using geoact::testing::test_grid;
using geoact::testing::tweet_at;

namespace {

const char* kLine1 = R"({"user":"a","ts":1420070400,"tz_offset_min":0,"lat":40.71,"lon":-74.0,"text":"one"})";
const char* kLine2 = R"({"user":"b","ts":1420074000,"tz_offset_min":60,"lat":40.72,"lon":-73.99,"text":"two"})";
const char* kLine3 =
    R"({"user":"a","ts":1420000000,"tz_offset_min":-300,"lat":40.73,"lon":-73.98,"text":"three","gold":{"q1":"yes","q2":"no","home":true}})";

Dataset parse(const std::string& text, const GridSpec& g = test_grid(), LoadOptions opts = {}) {
    std::istringstream in(text);
    return parse_tweets(in, g, opts);
}

}  // namespace

TEST(LoadTweets, ThreeValidLines) {
    const auto ds = parse(std::string(kLine1) + "\n" + kLine2 + "\n" + kLine3 + "\n");
    EXPECT_EQ(ds.records.size(), 3u);
    EXPECT_TRUE(ds.malformed.empty());
}

TEST(LoadTweets, MissingLonIsReportedWithLineNumber) {
    const std::string bad = R"({"user":"a","ts":1,"tz_offset_min":0,"lat":40.71,"text":"x"})";
    // One bad line out of two exceeds the 10% budget, so loosen it for this case.
    LoadOptions opts;
    opts.max_malformed_fraction = 0.5;
    const auto ds = parse(std::string(kLine1) + "\n" + bad + "\n", test_grid(), opts);
    ASSERT_EQ(ds.records.size(), 1u);
    ASSERT_EQ(ds.malformed.size(), 1u);
    EXPECT_EQ(ds.malformed[0].line, 2u);
    EXPECT_NE(ds.malformed[0].message.find("lon"), std::string::npos);
}

TEST(LoadTweets, TooManyMalformedLinesFail) {
    std::string text;
    for (int i = 0; i < 8; ++i) text += std::string(kLine1) + "\n";
    text += "not json\n{}\n";
    EXPECT_THROW(parse(text), DataError);
}

TEST(LoadTweets, TenPercentMalformedIsTolerated) {
    std::string text;
    for (int i = 0; i < 9; ++i) text += std::string(kLine1) + "\n";
    text += "not json\n";
    const auto ds = parse(text);
    EXPECT_EQ(ds.records.size(), 9u);
    EXPECT_EQ(ds.malformed.size(), 1u);
}

TEST(LoadTweets, BlankLinesAreIgnored) {
    const auto ds = parse(std::string("\n") + kLine1 + "\n\n   \n" + kLine2 + "\n");
    EXPECT_EQ(ds.records.size(), 2u);
    EXPECT_TRUE(ds.malformed.empty());
}

TEST(LoadTweets, GoldHierarchyViolationIsMalformed) {
    EXPECT_THROW(parse_tweet_line(
                     R"({"user":"a","ts":1,"tz_offset_min":0,"lat":1,"lon":1,"text":"x","gold":{"q1":"no","q2":"yes"}})"),
                 DataError);
    EXPECT_THROW(parse_tweet_line(
                     R"({"user":"a","ts":1,"tz_offset_min":0,"lat":1,"lon":1,"text":"x","gold":{"q1":"yes","q3":"yes"}})"),
                 DataError);
    EXPECT_THROW(parse_tweet_line(
                     R"({"user":"a","ts":1,"tz_offset_min":0,"lat":1,"lon":1,"text":"x","gold":{"q1":"maybe"}})"),
                 DataError);
}

TEST(LoadTweets, RangeChecks) {
    EXPECT_THROW(parse_tweet_line(R"({"user":"a","ts":1,"tz_offset_min":0,"lat":91,"lon":1,"text":"x"})"), DataError);
    EXPECT_THROW(parse_tweet_line(R"({"user":"a","ts":1,"tz_offset_min":0,"lat":1,"lon":181,"text":"x"})"), DataError);
    EXPECT_THROW(parse_tweet_line(R"({"user":"a","ts":1,"tz_offset_min":2000,"lat":1,"lon":1,"text":"x"})"), DataError);
    EXPECT_THROW(parse_tweet_line(R"({"user":"a","ts":1.5,"tz_offset_min":0,"lat":1,"lon":1,"text":"x"})"), DataError);
    EXPECT_THROW(parse_tweet_line(R"({"user":7,"ts":1,"tz_offset_min":0,"lat":1,"lon":1,"text":"x"})"), DataError);
}

TEST(LoadTweets, OutOfAreaAndOutOfPeriodAreMalformed) {
    auto g = test_grid();
    g.northeast = LatLon{40.725, -73.985};
    LoadOptions opts;
    opts.max_malformed_fraction = 1.0;
    const auto ds = parse(std::string(kLine1) + "\n" + kLine3 + "\n", g, opts);
    EXPECT_EQ(ds.records.size(), 1u);
    EXPECT_EQ(ds.malformed.size(), 1u);

    opts.period = std::make_pair<std::int64_t, std::int64_t>(394464, 394465);  // 1420070400 / 3600
    const auto in_period = parse(std::string(kLine1) + "\n" + kLine2 + "\n", test_grid(), opts);
    EXPECT_EQ(in_period.records.size(), 1u);
    EXPECT_EQ(in_period.malformed.size(), 1u);
}

TEST(LoadTweets, RecordsSortedByUserThenTime) {
    const auto ds = parse(std::string(kLine1) + "\n" + kLine2 + "\n" + kLine3 + "\n");
    ASSERT_EQ(ds.records.size(), 3u);
    EXPECT_EQ(ds.records[0].user, "a");
    EXPECT_EQ(ds.records[0].ts, 1420000000);
    EXPECT_EQ(ds.records[1].user, "a");
    EXPECT_EQ(ds.records[2].user, "b");
    for (const auto& r : ds.records) {
        EXPECT_GE(r.local_hour(), ds.start_hour);
        EXPECT_LT(r.local_hour(), ds.end_hour);
    }
}

TEST(LoadTweets, GeneratorOutputMatchesManifest) {
    synth::WorldSpec spec;
    spec.n_users = 240;
    spec.seed = 11;
    const auto world = synth::generate_world(spec);
    std::string text;
    for (const auto& t : world.tweets) text += format_tweet_line(t) + "\n";
    const auto ds = parse(text, spec.grid());
    EXPECT_EQ(ds.records.size(), world.manifest.tweets);
    EXPECT_TRUE(ds.malformed.empty());
    std::map<std::string, std::size_t> counts;
    for (const auto& u : users_of(ds)) counts[std::string(u.user)] = u.records.size();
    for (const auto& u : world.manifest.users) EXPECT_EQ(counts[u.user], u.tweets) << u.user;
}

TEST(FormatTweetLine, RoundTrips) {
    const auto t = parse_tweet_line(kLine3);
    const auto back = parse_tweet_line(format_tweet_line(t));
    EXPECT_EQ(back.user, t.user);
    EXPECT_EQ(back.ts, t.ts);
    EXPECT_EQ(back.tz_offset_min, t.tz_offset_min);
    EXPECT_EQ(back.lat, t.lat);
    EXPECT_EQ(back.lon, t.lon);
    EXPECT_EQ(back.text, t.text);
    ASSERT_TRUE(back.gold);
    EXPECT_EQ(back.gold->q1, Answer::Yes);
    EXPECT_EQ(back.gold->q2, Answer::No);
    EXPECT_EQ(back.gold->q3, Answer::Absent);
    EXPECT_EQ(back.gold->home, std::optional<bool>(true));
}

TEST(LocalHour, UsesOffsetAndFloors) {
    TweetRecord t;
    t.ts = 3600 * 10 + 59;
    t.tz_offset_min = -120;
    EXPECT_EQ(t.local_hour(), 8);
    t.ts = -1;
    t.tz_offset_min = 0;
    EXPECT_EQ(t.local_hour(), -1);
    EXPECT_EQ(floor_mod(-1, 24), 23);
    EXPECT_EQ(floor_div(-25, 24), -2);
}

TEST(AssignGrid, OriginIsFirstCell) {
    const auto g = test_grid();
    EXPECT_EQ(assign_grid(g.origin_lat, g.origin_lon, g), (GridCell{0, 0}));
}

TEST(AssignGrid, FloorRule) {
    const auto g = test_grid();
    const auto p = offset(g, 150.0, 50.0);
    EXPECT_EQ(assign_grid(p.lat, p.lon, g), (GridCell{1, 0}));
    const auto q = offset(g, 250.0, 1234.0);
    EXPECT_EQ(assign_grid(q.lat, q.lon, g.with_cell_size(500.0)), (GridCell{0, 2}));
}

TEST(AssignGrid, OutsideAreaThrows) {
    auto g = test_grid();
    EXPECT_THROW(assign_grid(g.origin_lat - 0.01, g.origin_lon, g), OutOfAreaError);
    g.northeast = LatLon{40.75, -73.95};
    EXPECT_THROW(assign_grid(40.76, -74.0, g), OutOfAreaError);
    EXPECT_NO_THROW(assign_grid(40.74, -74.0, g));
}

TEST(AssignGrid, AgreesWithNearestCenterSearch) {
    const auto g = test_grid();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2000.0);
    const double lon_scale = std::cos(g.origin_lat * 3.14159265358979323846 / 180.0) * kMetersPerDegreeLonAtEquator;
    for (int i = 0; i < 1000; ++i) {
        const auto p = offset(g, u(rng), u(rng));
        const double east = (p.lon - g.origin_lon) * lon_scale;
        const double north = (p.lat - g.origin_lat) * kMetersPerDegreeLat;
        GridCell best;
        double best_d = 1e300;
        for (int ix = 0; ix < 20; ++ix)
            for (int iy = 0; iy < 20; ++iy) {
                const double d = std::hypot(east - (ix + 0.5) * 100.0, north - (iy + 0.5) * 100.0);
                if (d < best_d) {
                    best_d = d;
                    best = {ix, iy};
                }
            }
        ASSERT_EQ(assign_grid(p.lat, p.lon, g), best) << "point " << i;
    }
}

TEST(AssignGrid, NearbyPointsLandInEqualOrAdjacentCells) {
    const auto g = test_grid();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 5000.0), eps(-0.05, 0.05);
    for (int i = 0; i < 2000; ++i) {
        const double e = u(rng), n = u(rng);
        const auto a = offset(g, e, n);
        const auto b = offset(g, e + eps(rng), n + eps(rng));
        const auto ca = assign_grid(a.lat, a.lon, g), cb = assign_grid(b.lat, b.lon, g);
        EXPECT_LE(std::abs(ca.ix - cb.ix), 1);
        EXPECT_LE(std::abs(ca.iy - cb.iy), 1);
    }
}

TEST(GridCell, IdRoundTripsAndCenterIsRecoverable) {
    const auto g = test_grid();
    for (GridCell c : {GridCell{0, 0}, GridCell{12, 3}, GridCell{7, 250}}) {
        EXPECT_EQ(GridCell::parse(c.id()), c);
        const auto ctr = g.cell_center(c);
        EXPECT_EQ(assign_grid(ctr.lat, ctr.lon, g), c);
    }
    EXPECT_EQ(GridCell::parse("-7:12"), (GridCell{-7, 12}));
    EXPECT_EQ((GridCell{3, -4}).id(), "3:-4");
    EXPECT_THROW(GridCell::parse("3"), DataError);
    EXPECT_THROW(GridCell::parse("a:b"), DataError);
    EXPECT_TRUE(id_less({10, 0}, {2, 0}));  // "10:0" < "2:0"
}

TEST(GridSpec, Validation) {
    auto g = test_grid();
    g.cell_size_m = 0.0;
    EXPECT_THROW(g.validate(), DataError);
    EXPECT_THROW(test_grid().with_cell_size(-5.0), DataError);
}

TEST(ActiveUsers, Threshold) {
    const auto g = test_grid();
    std::vector<TweetRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(tweet_at("five", 100 + i, g, 0, 0));
    for (int i = 0; i < 4; ++i) recs.push_back(tweet_at("four", 100 + i, g, 0, 0));
    const auto ds = make_dataset(recs, g);
    const auto active = active_users(ds);
    EXPECT_TRUE(active.contains("five"));
    EXPECT_FALSE(active.contains("four"));
    EXPECT_EQ(active_users(ds, 1).size(), 2u);
    EXPECT_TRUE(active_users(make_dataset({}, g)).empty());
}

TEST(ActiveUsers, CountsPartitionRecords) {
    const auto g = test_grid();
    std::mt19937_64 rng(5);
    std::vector<TweetRecord> recs;
    for (int i = 0; i < 300; ++i)
        recs.push_back(tweet_at("u" + std::to_string(rng() % 37), 1000 + static_cast<int>(rng() % 500), g, 1, 1));
    const auto ds = make_dataset(recs, g);
    std::size_t sum = 0;
    for (const auto& u : users_of(ds)) {
        sum += u.records.size();
        EXPECT_EQ(records_of(ds, u.user).size(), u.records.size());
    }
    EXPECT_EQ(sum, ds.records.size());
    EXPECT_EQ(active_users(ds, 1).size(), users_of(ds).size());
    EXPECT_TRUE(records_of(ds, "nobody").empty());
}
