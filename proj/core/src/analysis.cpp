#include "geoact/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "geoact/errors.hpp"

namespace geoact::analysis {

namespace {

using mobility::format_decimal;

bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw UndefinedCorrelationError("correlation undefined: a series has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

void write_classified_csv(std::ostream& out, std::span<const TweetRecord> tweets,
                          std::span<const cascade::ActivityLabel> labels) {
    if (tweets.size() != labels.size()) throw DataError("one label per tweet expected");
    out << "user,ts,lat,lon,label\n";
    char buf[64];
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%.9f,%.9f,", tweets[i].lat, tweets[i].lon);
        out << quote_csv(tweets[i].user) << ',' << tweets[i].ts << buf << cascade::to_string(labels[i]) << '\n';
    }
}

void write_classified_jsonl(std::ostream& out, std::span<const TweetRecord> tweets,
                            std::span<const cascade::ActivityLabel> labels) {
    if (tweets.size() != labels.size()) throw DataError("one label per tweet expected");
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        std::string line = format_tweet_line(tweets[i]);
        line.pop_back();  // closing brace
        out << line << ",\"label\":\"" << cascade::to_string(labels[i]) << "\"}\n";
    }
}

std::vector<ClassifiedTweet> read_classified(std::istream& in) {
    std::vector<ClassifiedTweet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        ClassifiedTweet t;
        if (line[first] == '{') {
            try {
                const auto j = nlohmann::json::parse(line);
                t.user = j.at("user").get<std::string>();
                t.lat = j.at("lat").get<double>();
                t.lon = j.at("lon").get<double>();
                t.label = cascade::parse_activity_label(j.at("label").get<std::string>());
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(lineno, e.what());
            } catch (const DataError& e) {
                throw ParseError(lineno, e.what());
            }
            out.push_back(std::move(t));
            continue;
        }
        const auto f = split_csv(line);
        if (lineno == 1 && !f.empty() && f[0] == "user") continue;
        if (f.size() != 5 || !parse_double(f[2], t.lat) || !parse_double(f[3], t.lon))
            throw ParseError(lineno, "expected user,ts,lat,lon,label");
        t.user = f[0];
        try {
            t.label = cascade::parse_activity_label(f[4]);
        } catch (const DataError& e) {
            throw ParseError(lineno, e.what());
        }
        out.push_back(std::move(t));
    }
    return out;
}

CellTally tally_cells(std::span<const ClassifiedTweet> tweets, const GridSpec& grid) {
    CellTally tally;
    for (const auto& t : tweets) {
        if (!grid.contains(t.lat, t.lon)) continue;
        auto& c = tally[assign_grid(t.lat, t.lon, grid)];
        ++c.total;
        if (t.positive()) ++c.positive;
    }
    return tally;
}

HeatmapGrid build_heatmap(const CellTally& tally, const GridSpec& grid, std::size_t min_pos) {
    HeatmapGrid h;
    h.grid = grid;
    h.min_pos = min_pos;
    for (const auto& [cell, c] : tally) {
        if (c.positive < min_pos) {
            if (c.positive > 0) ++h.excluded_cells;
            h.excluded_positive += c.positive;
            continue;
        }
        h.cells.emplace(cell, HeatCell{c.total, c.positive,
                                       static_cast<double>(c.positive) / static_cast<double>(c.total)});
    }
    return h;
}

HeatmapGrid build_heatmap(std::span<const ClassifiedTweet> tweets, const GridSpec& grid, std::size_t min_pos) {
    return build_heatmap(tally_cells(tweets, grid), grid, min_pos);
}

void write_heatmap_geojson(std::ostream& out, const HeatmapGrid& h) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& [cell, c] : h.cells) {
        const LatLon sw = h.grid.cell_corner(cell);
        const LatLon ne = h.grid.cell_corner({cell.ix + 1, cell.iy + 1});
        nlohmann::json ring = nlohmann::json::array({
            {sw.lon, sw.lat}, {ne.lon, sw.lat}, {ne.lon, ne.lat}, {sw.lon, ne.lat}, {sw.lon, sw.lat}});
        features.push_back({{"type", "Feature"},
                            {"id", cell.id()},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}},
                            {"properties", {{"total", c.total}, {"positive", c.positive}, {"heat", c.heat}}}});
    }
    nlohmann::json doc{{"type", "FeatureCollection"}, {"features", features}};
    out << doc.dump(1) << '\n';
}

void write_heatmap_csv(std::ostream& out, const HeatmapGrid& h) {
    out << "cell_id,center_lat,center_lon,total,positive,heat\n";
    for (const auto& [cell, c] : h.cells) {
        const LatLon ctr = h.grid.cell_center(cell);
        out << cell.id() << ',' << format_decimal(ctr.lat) << ',' << format_decimal(ctr.lon) << ',' << c.total
            << ',' << c.positive << ',' << format_decimal(c.heat) << '\n';
    }
}

OutletTable OutletTable::read_csv(std::istream& in) {
    OutletTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv(line);
        Outlet o;
        if (f.size() < 2 || !parse_double(f[0], o.lat) || !parse_double(f[1], o.lon)) {
            if (lineno == 1 && t.outlets.empty()) continue;  // header
            throw ParseError(lineno, "expected lat,lon[,name]");
        }
        if (o.lat < -90 || o.lat > 90 || o.lon < -180 || o.lon > 180) throw ParseError(lineno, "coordinates out of range");
        if (f.size() > 2) o.name = f[2];
        t.outlets.push_back(std::move(o));
    }
    return t;
}

OutletTable OutletTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_csv(in);
}

void OutletTable::write_csv(std::ostream& out) const {
    out << "lat,lon,name\n";
    for (const auto& o : outlets)
        out << format_decimal(o.lat) << ',' << format_decimal(o.lon) << ',' << quote_csv(o.name) << '\n';
}

std::map<GridCell, std::size_t> OutletTable::counts(const GridSpec& grid, std::size_t* dropped) const {
    std::map<GridCell, std::size_t> out;
    std::size_t outside = 0;
    for (const auto& o : outlets) {
        if (!grid.contains(o.lat, o.lon)) {
            ++outside;
            continue;
        }
        ++out[assign_grid(o.lat, o.lon, grid)];
    }
    if (dropped) *dropped = outside;
    return out;
}

double t_test_p_value(double r, std::size_t n) {
    if (n < 3) throw DataError("correlation needs at least 3 cells");
    if (std::abs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    const double t = r * std::sqrt(df / (1.0 - r * r));
    boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("correlation series differ in length");
    if (x.size() < 3) throw DataError("correlation needs at least 3 cells, got " + std::to_string(x.size()));
    CorrelationResult res;
    res.n = x.size();
    res.r = pearson_r(x, y);
    res.p_value = t_test_p_value(res.r, res.n);
    return res;
}

double permutation_p_value(std::span<const double> x, std::span<const double> y, std::size_t permutations,
                           std::uint64_t seed) {
    const double observed = std::abs(pearson(x, y).r);
    std::vector<double> shuffled(y.begin(), y.end());
    std::mt19937_64 rng(seed);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < permutations; ++k) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        // Relative slack so permutations equal to the observed order count.
        if (std::abs(pearson_r(x, shuffled)) >= observed - 1e-12) ++hits;
    }
    return permutations ? static_cast<double>(hits) / static_cast<double>(permutations) : 1.0;
}

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DataError("spearman series differ in length");
    if (x.size() < 2) throw DataError("spearman needs at least 2 points");
    const auto rx = ranks(x), ry = ranks(y);
    return pearson_r(rx, ry);
}

OutletCorrelation correlate_outlets(const CellTally& tally, const std::map<GridCell, std::size_t>& outlet_counts,
                                    const CorrelationOptions& opts) {
    OutletCorrelation out;
    for (const auto& [cell, c] : tally) {
        if (c.total == 0) continue;
        if (opts.heatmap_cells_only && c.positive < opts.min_pos) continue;
        out.cells.push_back(cell);
        out.density.push_back(opts.raw_positives ? static_cast<double>(c.positive)
                                                 : static_cast<double>(c.positive) / static_cast<double>(c.total));
        const auto it = outlet_counts.find(cell);
        out.outlets.push_back(it == outlet_counts.end() ? 0.0 : static_cast<double>(it->second));
    }
    out.result = pearson(out.density, out.outlets);
    return out;
}

double haversine(const LatLon& a, const LatLon& b) noexcept {
    constexpr double deg = 3.14159265358979323846 / 180.0;
    const double dlat = (b.lat - a.lat) * deg;
    const double dlon = (b.lon - a.lon) * deg;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * deg) * std::cos(b.lat * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(s)));
}

std::size_t Histogram::total() const noexcept {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<double> default_distance_edges() {
    return {0, 100, 250, 500, 1000, 2000, 5000, std::numeric_limits<double>::infinity()};
}

Histogram distance_histogram(std::span<const ClassifiedTweet> tweets,
                             const std::map<std::string, LatLon, std::less<>>& home_centers,
                             std::vector<double> edges) {
    if (edges.size() < 2 || edges.front() != 0.0) throw DataError("histogram edges must start at 0 and name a bin");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (!(edges[k] > edges[k - 1])) throw DataError("histogram edges must increase");
    if (!std::isinf(edges.back())) edges.push_back(std::numeric_limits<double>::infinity());

    Histogram h;
    h.edges = std::move(edges);
    h.counts.assign(h.edges.size() - 1, 0);
    for (const auto& t : tweets) {
        if (!t.positive()) continue;
        const auto it = home_centers.find(t.user);
        if (it == home_centers.end()) continue;
        const double d = haversine({t.lat, t.lon}, it->second);
        const auto bin = std::upper_bound(h.edges.begin(), h.edges.end(), d) - h.edges.begin() - 1;
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    return h;
}

Histogram distance_histogram(std::span<const ClassifiedTweet> tweets, std::span<const home::HomePrediction> homes,
                             const GridSpec& grid, std::vector<double> edges) {
    std::map<std::string, LatLon, std::less<>> centers;
    for (const auto& p : homes)
        if (p.known()) centers[p.user] = grid.cell_center(*p.cell);
    return distance_histogram(tweets, centers, std::move(edges));
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
    out << "lower_m,upper_m,count\n";
    for (std::size_t k = 0; k < h.counts.size(); ++k)
        out << format_decimal(h.edges[k]) << ',' << (std::isinf(h.edges[k + 1]) ? "inf" : format_decimal(h.edges[k + 1]))
            << ',' << h.counts[k] << '\n';
}

}  // namespace geoact::analysis
