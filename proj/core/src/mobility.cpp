#include "geoact/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "geoact/errors.hpp"

namespace geoact::mobility {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv(std::uint64_t& h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::vector<GridCell> visited_cells(const HourlyTrace& trace) {
    std::set<GridCell> cells;
    for (const auto& s : trace.slots)
        if (s) cells.insert(*s);
    return {cells.begin(), cells.end()};
}

CellMap zero_map(const HourlyTrace& trace) {
    CellMap m;
    for (const auto& c : visited_cells(trace)) m.emplace(c, 0.0);
    return m;
}

std::int64_t day_window(std::int64_t abs_hour) {
    return floor_div(abs_hour - kDayBoundaryHour, 24);
}

// Calendar dates (local) whose 00:00-06:59 window has an observation.
std::set<std::int64_t> active_nights(const HourlyTrace& trace) {
    std::set<std::int64_t> nights;
    for (std::size_t s = 0; s < trace.slots.size(); ++s)
        if (trace.slots[s] && trace.hour_of_day(s) < kLateNightEndHour)
            nights.insert(floor_div(trace.start_hour + static_cast<std::int64_t>(s), 24));
    return nights;
}

// Last observed cell of each day window, in window order.
std::map<std::int64_t, GridCell> last_of_each_day(const HourlyTrace& trace) {
    std::map<std::int64_t, GridCell> last;
    for (std::size_t s = 0; s < trace.slots.size(); ++s)
        if (trace.slots[s]) last[day_window(trace.start_hour + static_cast<std::int64_t>(s))] = *trace.slots[s];
    return last;
}

struct RankedMargins {
    std::map<GridCell, double> below_higher, above_lower, rank;
};

RankedMargins rank_margins(const std::vector<GridCell>& cells, const std::vector<double>& score) {
    std::vector<std::size_t> order(cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return id_less(cells[a], cells[b]);
    });
    RankedMargins r;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto i = order[k];
        r.below_higher[cells[i]] = k == 0 ? 0.0 : score[order[k - 1]] - score[i];
        r.above_lower[cells[i]] = k + 1 == order.size() ? score[i] : score[i] - score[order[k + 1]];
        r.rank[cells[i]] = static_cast<double>(k + 1);
    }
    return r;
}

}  // namespace

std::size_t HourlyTrace::observed() const noexcept {
    return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); }));
}

std::uint64_t tie_break_key(std::string_view user, std::int64_t hour, const GridCell& cell,
                            std::uint64_t seed) noexcept {
    std::uint64_t h = kFnvOffset;
    fnv(h, user);
    fnv(h, "\x1f");
    fnv(h, std::to_string(hour));
    fnv(h, "\x1f");
    fnv(h, cell.id());
    return splitmix(h ^ splitmix(seed));
}

HourlyTrace build_hourly_trace(std::span<const TweetRecord> records, std::int64_t start_hour,
                               std::int64_t end_hour, const GridSpec& grid, std::uint64_t seed) {
    if (end_hour < start_hour) throw DataError("sampling period ends before it starts");
    HourlyTrace trace;
    trace.start_hour = start_hour;
    trace.slots.assign(static_cast<std::size_t>(end_hour - start_hour), std::nullopt);
    if (records.empty()) return trace;
    trace.user = records.front().user;

    std::map<std::int64_t, std::map<GridCell, std::size_t>> per_hour;
    for (const auto& r : records) {
        if (r.user != trace.user) throw DataError("hourly trace records span several users");
        const auto h = r.local_hour();
        if (h < start_hour || h >= end_hour)
            throw DataError("record of user " + r.user + " falls outside the sampling period");
        ++per_hour[h][assign_grid(r.lat, r.lon, grid)];
    }
    for (const auto& [h, counts] : per_hour) {
        const GridCell* best = nullptr;
        std::size_t best_count = 0;
        std::uint64_t best_key = 0;
        for (const auto& [cell, n] : counts) {
            if (best && n < best_count) continue;
            const auto key = tie_break_key(trace.user, h, cell, seed);
            if (!best || n > best_count || key < best_key) {
                best = &cell;
                best_count = n;
                best_key = key;
            }
        }
        trace.slots[static_cast<std::size_t>(h - start_hour)] = *best;
    }
    return trace;
}

std::string field_name(std::size_t index) {
    using namespace field;
    if (index == kCheckinPercent) return "checkin_percent";
    if (index == kMarginBelowHigher) return "margin_below_higher_checkin";
    if (index == kMarginAboveLower) return "margin_above_lower_checkin";
    if (index == kLateNightPercent) return "late_night_percent";
    if (index == kLastDestination) return "last_destination";
    if (index == kLastDestinationInactive) return "last_destination_inactive_night";
    if (index >= kHourlyProfile && index < kHourlyProfile + 24)
        return "hour_" + std::to_string(index - kHourlyProfile) + "_percent";
    if (index == kPageRank) return "pagerank";
    if (index == kReversedPageRank) return "reversed_pagerank";
    if (index == kPageRankMarginBelowHigher) return "margin_below_higher_pagerank";
    if (index == kPageRankMarginAboveLower) return "margin_above_lower_pagerank";
    if (index == kPageRankRank) return "pagerank_rank";
    if (index == kReversedMarginBelowHigher) return "margin_below_higher_reversed_pagerank";
    if (index == kReversedMarginAboveLower) return "margin_above_lower_reversed_pagerank";
    if (index == kReversedRank) return "reversed_pagerank_rank";
    return "f" + std::to_string(index + 1);
}

CheckinFeatures checkin_features(const HourlyTrace& trace) {
    CheckinFeatures out;
    std::size_t total = 0;
    for (const auto& s : trace.slots)
        if (s) {
            ++out.counts[*s];
            ++total;
        }
    if (total == 0) throw EmptyTraceError("user " + trace.user + " has no observed hours");

    for (const auto& [cell, n] : out.counts) out.ranking.push_back(cell);
    std::sort(out.ranking.begin(), out.ranking.end(), [&](const GridCell& a, const GridCell& b) {
        const auto na = out.counts.at(a), nb = out.counts.at(b);
        if (na != nb) return na > nb;
        return id_less(a, b);
    });
    auto pct = [&](const GridCell& c) { return 100.0 * static_cast<double>(out.counts.at(c)) / static_cast<double>(total); };
    for (std::size_t k = 0; k < out.ranking.size(); ++k) {
        const auto& c = out.ranking[k];
        const double p = pct(c);
        const double below = k == 0 ? 0.0 : pct(out.ranking[k - 1]) - p;
        const double above = k + 1 == out.ranking.size() ? p : p - pct(out.ranking[k + 1]);
        out.by_cell[c] = {p, below, above};
    }
    return out;
}

CellMap late_night_feature(const HourlyTrace& trace) {
    CellMap out = zero_map(trace);
    std::map<GridCell, std::size_t> counts;
    std::size_t total = 0;
    for (std::size_t s = 0; s < trace.slots.size(); ++s)
        if (trace.slots[s] && trace.hour_of_day(s) < kLateNightEndHour) {
            ++counts[*trace.slots[s]];
            ++total;
        }
    for (const auto& [cell, n] : counts) out[cell] = 100.0 * static_cast<double>(n) / static_cast<double>(total);
    return out;
}

CellMap last_destination_counts(const HourlyTrace& trace) {
    CellMap out = zero_map(trace);
    for (const auto& [day, cell] : last_of_each_day(trace)) out[cell] += 1.0;
    return out;
}

CellMap last_destination_inactive(const HourlyTrace& trace) {
    CellMap out = zero_map(trace);
    const auto nights = active_nights(trace);
    // The night closing window D is the calendar date D + 1.
    for (const auto& [day, cell] : last_of_each_day(trace))
        if (!nights.contains(day + 1)) out[cell] += 1.0;
    return out;
}

DayWindowCounts day_window_counts(const HourlyTrace& trace) {
    DayWindowCounts c;
    const auto nights = active_nights(trace);
    for (const auto& [day, cell] : last_of_each_day(trace)) {
        ++c.observed_days;
        if (!nights.contains(day + 1)) ++c.inactive_night_days;
    }
    return c;
}

std::map<GridCell, std::array<double, 24>> hourly_profile(const HourlyTrace& trace) {
    std::map<GridCell, std::array<double, 24>> out;
    for (const auto& c : visited_cells(trace)) out[c].fill(0.0);
    std::array<std::size_t, 24> totals{};
    std::map<GridCell, std::array<std::size_t, 24>> counts;
    for (std::size_t s = 0; s < trace.slots.size(); ++s)
        if (trace.slots[s]) {
            const int h = trace.hour_of_day(s);
            ++totals[h];
            ++counts[*trace.slots[s]][h];
        }
    for (const auto& [cell, per_hour] : counts)
        for (int h = 0; h < 24; ++h)
            if (totals[h] > 0)
                out[cell][h] = 100.0 * static_cast<double>(per_hour[h]) / static_cast<double>(totals[h]);
    return out;
}

std::size_t MovementGraph::index_of(const GridCell& c) const {
    auto it = std::lower_bound(vertices.begin(), vertices.end(), c);
    if (it == vertices.end() || *it != c) throw DataError("cell " + c.id() + " is not a vertex");
    return static_cast<std::size_t>(it - vertices.begin());
}

MovementGraph MovementGraph::reversed() const {
    MovementGraph r;
    r.vertices = vertices;
    for (const auto& [key, e] : edges) r.edges.emplace(std::make_pair(key.second, key.first), e);
    return r;
}

bool operator==(const MovementGraph& a, const MovementGraph& b) {
    if (a.vertices != b.vertices || a.edges.size() != b.edges.size()) return false;
    auto ia = a.edges.begin();
    auto ib = b.edges.begin();
    for (; ia != a.edges.end(); ++ia, ++ib) {
        if (ia->first != ib->first) return false;
        const auto &x = ia->second, &y = ib->second;
        if (x.transitions != y.transitions || x.idle_hours != y.idle_hours || x.weight != y.weight) return false;
    }
    return true;
}

MovementGraph build_movement_graph(const HourlyTrace& trace) {
    MovementGraph g;
    g.vertices = visited_cells(trace);
    std::optional<std::size_t> prev;
    for (std::size_t s = 0; s < trace.slots.size(); ++s) {
        if (!trace.slots[s]) continue;
        if (prev && *trace.slots[*prev] != *trace.slots[s]) {
            auto& e = g.edges[{g.index_of(*trace.slots[*prev]), g.index_of(*trace.slots[s])}];
            ++e.transitions;
            e.idle_hours += s - *prev - 1;
        }
        prev = s;
    }
    for (auto& [key, e] : g.edges)
        e.weight = static_cast<double>(e.transitions) / static_cast<double>(std::max<std::size_t>(1, e.idle_hours));
    return g;
}

std::vector<double> weighted_pagerank(const MovementGraph& g, const PageRankOptions& opts) {
    const std::size_t n = g.vertices.size();
    if (n == 0) throw DataError("PageRank needs at least one vertex");
    std::vector<double> out_weight(n, 0.0);
    for (const auto& [key, e] : g.edges) out_weight[key.first] += e.weight;

    const double d = opts.damping;
    const double nn = static_cast<double>(n);
    std::vector<double> pr(n, 1.0 / nn), next(n);
    double residual = 0.0;
    for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
        double dangling = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (out_weight[i] == 0.0) dangling += pr[i];
        std::fill(next.begin(), next.end(), (1.0 - d) / nn + d * dangling / nn);
        for (const auto& [key, e] : g.edges) next[key.second] += d * pr[key.first] * e.weight / out_weight[key.first];
        residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) residual += std::abs(next[i] - pr[i]);
        pr.swap(next);
        if (residual < opts.tol) {
            double sum = 0.0;
            for (double v : pr) sum += v;
            for (double& v : pr) v /= sum;
            return pr;
        }
    }
    throw ConvergenceError("PageRank did not converge after " + std::to_string(opts.max_iter) +
                               " iterations (residual " + std::to_string(residual) + ")",
                           residual);
}

std::vector<double> reversed_pagerank(const MovementGraph& g, const PageRankOptions& opts) {
    return weighted_pagerank(g.reversed(), opts);
}

std::map<GridCell, LocationFeatures> extract_features(const HourlyTrace& trace, const FeatureOptions& opts) {
    const auto checkin = checkin_features(trace);
    const auto late = late_night_feature(trace);
    auto last = last_destination_counts(trace);
    auto last_inactive = last_destination_inactive(trace);
    const auto profile = hourly_profile(trace);
    const auto graph = build_movement_graph(trace);
    const auto pr = weighted_pagerank(graph, opts.pagerank);
    const auto rpr = reversed_pagerank(graph, opts.pagerank);

    if (opts.normalized_counts) {
        const auto days = day_window_counts(trace);
        for (auto& [c, v] : last) v = days.observed_days ? 100.0 * v / static_cast<double>(days.observed_days) : 0.0;
        for (auto& [c, v] : last_inactive)
            v = days.inactive_night_days ? 100.0 * v / static_cast<double>(days.inactive_night_days) : 0.0;
    }

    std::optional<RankedMargins> pr_rank, rpr_rank;
    if (opts.extended) {
        pr_rank = rank_margins(graph.vertices, pr);
        rpr_rank = rank_margins(graph.vertices, rpr);
    }

    std::map<GridCell, LocationFeatures> out;
    for (std::size_t v = 0; v < graph.vertices.size(); ++v) {
        const auto& c = graph.vertices[v];
        auto& values = out[c].values;
        values.assign(opts.extended ? field::kExtendedCount : field::kBaseCount, 0.0);
        const auto& ci = checkin.by_cell.at(c);
        values[field::kCheckinPercent] = ci[0];
        values[field::kMarginBelowHigher] = ci[1];
        values[field::kMarginAboveLower] = ci[2];
        values[field::kLateNightPercent] = late.at(c);
        values[field::kLastDestination] = last.at(c);
        values[field::kLastDestinationInactive] = last_inactive.at(c);
        const auto& prof = profile.at(c);
        std::copy(prof.begin(), prof.end(), values.begin() + field::kHourlyProfile);
        values[field::kPageRank] = pr[v];
        values[field::kReversedPageRank] = rpr[v];
        if (opts.extended) {
            values[field::kPageRankMarginBelowHigher] = pr_rank->below_higher.at(c);
            values[field::kPageRankMarginAboveLower] = pr_rank->above_lower.at(c);
            values[field::kPageRankRank] = pr_rank->rank.at(c);
            values[field::kReversedMarginBelowHigher] = rpr_rank->below_higher.at(c);
            values[field::kReversedMarginAboveLower] = rpr_rank->above_lower.at(c);
            values[field::kReversedRank] = rpr_rank->rank.at(c);
        }
    }
    return out;
}

std::map<GridCell, LocationFeatures> extract_features(const Dataset& ds, const std::string& user,
                                                      const FeatureOptions& opts) {
    const auto recs = records_of(ds, user);
    if (recs.empty()) throw EmptyTraceError("user " + user + " has no records");
    return extract_features(build_hourly_trace(recs, ds.start_hour, ds.end_hour, ds.grid, opts.seed), opts);
}

std::string format_decimal(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
    return buf;
}

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace

void write_feature_csv(std::ostream& out, std::span<const FeatureRow> rows, bool with_label) {
    const std::size_t width = rows.empty() ? field::kBaseCount : rows.front().features.values.size();
    out << "user,cell_id";
    for (std::size_t i = 0; i < width; ++i) out << ",f" << (i + 1);
    if (with_label) out << ",is_home";
    out << '\n';
    for (const auto& r : rows) {
        if (r.features.values.size() != width) throw DataError("feature rows have mixed widths");
        out << csv_quote(r.user) << ',' << r.cell.id();
        for (double v : r.features.values) out << ',' << format_decimal(v);
        if (with_label) out << ',' << (r.is_home ? (*r.is_home ? "1" : "0") : "");
        out << '\n';
    }
}

std::vector<FeatureRow> read_feature_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("feature CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = csv_split(line);
    if (header.size() < 3 || header[0] != "user" || header[1] != "cell_id")
        throw ParseError(1, "feature CSV header must start with user,cell_id");
    const bool with_label = header.back() == "is_home";
    const std::size_t width = header.size() - 2 - (with_label ? 1 : 0);
    std::vector<FeatureRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cols = csv_split(line);
        if (cols.size() != header.size()) throw ParseError(lineno, "expected " + std::to_string(header.size()) + " columns");
        FeatureRow r;
        r.user = cols[0];
        try {
            r.cell = GridCell::parse(cols[1]);
            r.features.values.reserve(width);
            for (std::size_t i = 0; i < width; ++i) r.features.values.push_back(std::stod(cols[2 + i]));
        } catch (const DataError& e) {
            throw ParseError(lineno, e.what());
        } catch (const std::exception&) {
            throw ParseError(lineno, "bad feature value");
        }
        if (with_label) {
            const auto& l = cols.back();
            if (l == "1")
                r.is_home = true;
            else if (l == "0")
                r.is_home = false;
            else if (!l.empty())
                throw ParseError(lineno, "is_home must be 1, 0 or empty");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace geoact::mobility
