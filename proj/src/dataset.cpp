#include "recloop/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "recloop/rng.hpp"

namespace recloop {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// Days since 1970-01-01 for a proleptic Gregorian date (Howard Hinnant's
// days_from_civil).
int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

bool parse_int(std::string_view s, int64_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// Absolute day number for one timestamp value. Epoch seconds map to days
// since 1970; ISO dates (YYYY-MM-DD, optional time suffix) to civil days.
int64_t parse_time_value(const std::string& raw, TimeFormat fmt, size_t row) {
    std::string s = raw;
    // strip surrounding whitespace
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();

    auto fail = [&]() -> int64_t {
        throw ValidationError("row " + std::to_string(row) +
                              ": unparseable timestamp '" + raw + "'");
    };
    if (s.empty()) fail();

    bool looks_like_date = s.size() >= 8 && s[4] == '-';
    if (fmt == TimeFormat::IsoDate || (fmt == TimeFormat::Auto && looks_like_date)) {
        int64_t y, m, d;
        if (s.size() < 10 || s[4] != '-' || s[7] != '-' ||
            !parse_int(std::string_view(s).substr(0, 4), y) ||
            !parse_int(std::string_view(s).substr(5, 2), m) ||
            !parse_int(std::string_view(s).substr(8, 2), d) ||
            m < 1 || m > 12 || d < 1 || d > 31)
            fail();
        return days_from_civil(static_cast<int>(y), static_cast<unsigned>(m),
                               static_cast<unsigned>(d));
    }

    int64_t v;
    if (!parse_int(s, v)) fail();
    if (fmt == TimeFormat::DayIndex) {
        if (v < 0) fail();
        return v;
    }
    // epoch seconds, floor division for pre-1970 robustness
    int64_t day = v / 86400;
    if (v < 0 && v % 86400 != 0) --day;
    return day;
}

struct RawEvent {
    std::string user;
    std::string item;
    int64_t abs_day;
};

// Calendar-based inputs are shifted so the earliest day becomes 0; explicit
// day indices are kept as-is so a canonical file round-trips byte for byte.
InteractionLog assemble_log(std::vector<RawEvent> raw, bool rebase) {
    if (raw.empty()) throw ValidationError("empty log after parsing");

    int64_t min_day = 0;
    if (rebase) {
        min_day = raw.front().abs_day;
        for (const auto& e : raw) min_day = std::min(min_day, e.abs_day);
    }

    // Dense indices follow lexicographic order of external ids so that the
    // canonical form round-trips to identical maps.
    std::set<std::string> users, items;
    for (const auto& e : raw) {
        users.insert(e.user);
        items.insert(e.item);
    }
    InteractionLog log;
    log.user_ids.assign(users.begin(), users.end());
    log.item_ids.assign(items.begin(), items.end());
    log.rebuild_index();

    log.events.reserve(raw.size());
    for (const auto& e : raw) {
        log.events.push_back({log.user_index(e.user), log.item_index(e.item),
                              static_cast<int32_t>(e.abs_day - min_day)});
    }
    std::sort(log.events.begin(), log.events.end(), [&](const Interaction& a, const Interaction& b) {
        if (a.day != b.day) return a.day < b.day;
        if (log.user_ids[a.user] != log.user_ids[b.user])
            return log.user_ids[a.user] < log.user_ids[b.user];
        return log.item_ids[a.item] < log.item_ids[b.item];
    });
    return log;
}

} // namespace

LoadOptions LoadOptions::preset(const std::string& name) {
    LoadOptions o;
    if (name == "canonical") {
        // defaults
    } else if (name == "lastfm") {
        // userid \t timestamp \t artist-id \t artist-name \t track-id \t track-name
        o.delimiter = '\t';
        o.has_header = false;
        o.user_position = 0;
        o.time_position = 1;
        o.item_position = 2;
        o.time_format = TimeFormat::Auto;
    } else if (name == "amazon") {
        // crowdsourced purchase export: order date + product code + respondent
        o.delimiter = ',';
        o.has_header = true;
        o.user_column = "Survey ResponseID";
        o.item_column = "ASIN/ISBN (Product Code)";
        o.time_column = "Order Date";
        o.time_format = TimeFormat::Auto;
    } else if (name == "custom") {
        o.time_format = TimeFormat::Auto;
    } else {
        throw ValidationError("unknown schema preset: " + name);
    }
    return o;
}

InteractionLog load_interactions(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);

    std::string line;
    size_t row = 0;
    int user_pos = options.user_position;
    int item_pos = options.item_position;
    int time_pos = options.time_position;

    if (options.has_header) {
        if (!std::getline(in, line))
            throw ValidationError("empty file: " + path);
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto cols = split_line(line, options.delimiter);
        auto find_col = [&](const std::string& name) -> int {
            for (size_t i = 0; i < cols.size(); ++i)
                if (cols[i] == name) return static_cast<int>(i);
            throw ValidationError("column '" + name + "' not found in header of " + path);
        };
        user_pos = find_col(options.user_column);
        item_pos = find_col(options.item_column);
        time_pos = find_col(options.time_column);
    }

    int needed = std::max({user_pos, item_pos, time_pos});
    std::vector<RawEvent> raw;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line, options.delimiter);
        if (static_cast<int>(fields.size()) <= needed)
            throw ValidationError("row " + std::to_string(row) + ": expected at least " +
                                  std::to_string(needed + 1) + " fields, got " +
                                  std::to_string(fields.size()));
        RawEvent e;
        e.user = fields[user_pos];
        e.item = fields[item_pos];
        if (e.user.empty() || e.item.empty())
            throw ValidationError("row " + std::to_string(row) + ": empty user or item field");
        e.abs_day = parse_time_value(fields[time_pos], options.time_format, row);
        raw.push_back(std::move(e));
    }
    return assemble_log(std::move(raw), options.time_format != TimeFormat::DayIndex);
}

std::string format_log(const InteractionLog& log) {
    std::vector<Interaction> sorted(log.events);
    std::sort(sorted.begin(), sorted.end(), [&](const Interaction& a, const Interaction& b) {
        if (a.day != b.day) return a.day < b.day;
        if (log.user_ids[a.user] != log.user_ids[b.user])
            return log.user_ids[a.user] < log.user_ids[b.user];
        return log.item_ids[a.item] < log.item_ids[b.item];
    });
    std::string out = "user,item,day\n";
    for (const auto& e : sorted) {
        const std::string& u = log.user_ids[e.user];
        const std::string& i = log.item_ids[e.item];
        if (u.find(',') != std::string::npos || i.find(',') != std::string::npos)
            throw ValidationError("id contains the canonical delimiter: " + u + "/" + i);
        out += u;
        out += ',';
        out += i;
        out += ',';
        out += std::to_string(e.day);
        out += '\n';
    }
    return out;
}

void write_log(const InteractionLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << format_log(log);
    if (!out) throw std::runtime_error("write failed: " + path);
}

InteractionLog filter_active_users(const InteractionLog& log, int min_active_months) {
    if (min_active_months < 1)
        throw ValidationError("min_active_months must be >= 1");
    if (log.span_days() < kDaysPerYear)
        throw ValidationError("log spans less than one year (" +
                              std::to_string(log.span_days()) + " days)");

    int n_years = (log.span_days() - 1) / kDaysPerYear + 1;

    // active months per user
    std::vector<std::set<int>> months(log.user_count());
    for (const auto& e : log.events)
        months[e.user].insert(e.day / kDaysPerMonth);

    std::vector<bool> keep(log.user_count(), false);
    for (size_t u = 0; u < log.user_count(); ++u) {
        bool ok = true;
        for (int y = 0; y < n_years && ok; ++y) {
            int count = 0;
            for (int m = y * kMonthsPerYear; m < (y + 1) * kMonthsPerYear; ++m)
                count += months[u].count(m);
            ok = count >= min_active_months;
        }
        keep[u] = ok;
    }

    std::vector<Interaction> kept;
    kept.reserve(log.events.size());
    std::vector<bool> item_used(log.item_count(), false);
    for (const auto& e : log.events) {
        if (!keep[e.user]) continue;
        kept.push_back(e);
        item_used[e.item] = true;
    }
    if (kept.empty()) throw ValidationError("all users filtered out");

    // re-densify, preserving id order
    std::vector<uint32_t> user_remap(log.user_count(), 0);
    std::vector<uint32_t> item_remap(log.item_count(), 0);
    InteractionLog out;
    for (uint32_t u = 0; u < log.user_count(); ++u) {
        if (!keep[u]) continue;
        user_remap[u] = static_cast<uint32_t>(out.user_ids.size());
        out.user_ids.push_back(log.user_ids[u]);
    }
    for (uint32_t i = 0; i < log.item_count(); ++i) {
        if (!item_used[i]) continue;
        item_remap[i] = static_cast<uint32_t>(out.item_ids.size());
        out.item_ids.push_back(log.item_ids[i]);
    }
    out.events.reserve(kept.size());
    for (const auto& e : kept)
        out.events.push_back({user_remap[e.user], item_remap[e.item], e.day});
    out.rebuild_index();
    return out;
}

TemporalSplit temporal_holdout(const InteractionLog& log) {
    const int need = 7 * kDaysPerMonth;
    if (log.span_days() < need)
        throw ValidationError("log spans " + std::to_string(log.span_days()) +
                              " days; temporal holdout needs at least " +
                              std::to_string(need));
    TemporalSplit split;
    split.train = {0, 4 * kDaysPerMonth};
    split.valid = {4 * kDaysPerMonth, 5 * kDaysPerMonth};
    split.test = {5 * kDaysPerMonth, 6 * kDaysPerMonth};
    split.sim_start_day = 6 * kDaysPerMonth;
    return split;
}

ActivityTrace build_activity_trace(const InteractionLog& log, DayRange window) {
    if (window.empty()) throw ValidationError("empty activity window");
    if (window.begin < 0 || window.end > log.span_days())
        throw ValidationError("activity window outside the log horizon");

    ActivityTrace trace;
    trace.window = window;
    trace.days.resize(window.length());
    for (int d = window.begin; d < window.end; ++d) {
        auto events = log.window({d, d + 1});
        std::map<uint32_t, uint32_t> counts;
        for (const auto& e : events) ++counts[e.user];
        auto& day = trace.days[d - window.begin];
        day.assign(counts.begin(), counts.end());
    }
    return trace;
}

int synth_user_cluster(uint32_t user, int n_clusters) {
    return static_cast<int>(user % static_cast<uint32_t>(n_clusters));
}

std::pair<int, int> synth_cluster_block(int cluster, int n_items, int n_clusters) {
    int lo = static_cast<int>(static_cast<int64_t>(cluster) * n_items / n_clusters);
    int hi = static_cast<int>(static_cast<int64_t>(cluster + 1) * n_items / n_clusters);
    return {lo, hi};
}

namespace {

int sample_poisson(double rate, Rng& rng) {
    double limit = std::exp(-rate);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.next_double();
    } while (p > limit);
    return k - 1;
}

std::string padded_id(char prefix, uint32_t index, int width) {
    std::string digits = std::to_string(index);
    std::string out(1, prefix);
    out.append(static_cast<size_t>(width) - digits.size(), '0');
    out += digits;
    return out;
}

} // namespace

InteractionLog generate_synthetic(const SynthParams& p) {
    if (p.n_users < 1 || p.n_items < 1 || p.n_days < 1 || p.n_clusters < 1)
        throw ValidationError("synthetic generator counts must be >= 1");
    if (p.popularity_exponent < 0)
        throw ValidationError("popularity_exponent must be >= 0");
    if (p.events_per_user_day <= 0)
        throw ValidationError("events_per_user_day must be > 0");

    constexpr double kAffinity = 5.0;

    std::vector<double> base(p.n_items);
    for (int i = 0; i < p.n_items; ++i)
        base[i] = std::pow(static_cast<double>(i + 1), -p.popularity_exponent);

    // per-cluster cumulative sampling tables
    std::vector<std::vector<double>> cumulative(p.n_clusters);
    for (int c = 0; c < p.n_clusters; ++c) {
        auto [lo, hi] = synth_cluster_block(c, p.n_items, p.n_clusters);
        auto& cum = cumulative[c];
        cum.resize(p.n_items);
        double acc = 0.0;
        for (int i = 0; i < p.n_items; ++i) {
            double w = base[i] * (i >= lo && i < hi ? kAffinity : 1.0);
            acc += w;
            cum[i] = acc;
        }
    }

    Rng rng(derive_seed(p.seed, 0x53594e54ULL)); // "SYNT"

    InteractionLog log;
    int user_width = static_cast<int>(std::to_string(p.n_users - 1).size());
    int item_width = static_cast<int>(std::to_string(p.n_items - 1).size());
    log.user_ids.reserve(p.n_users);
    for (int u = 0; u < p.n_users; ++u) log.user_ids.push_back(padded_id('u', u, user_width));
    log.item_ids.reserve(p.n_items);
    for (int i = 0; i < p.n_items; ++i) log.item_ids.push_back(padded_id('i', i, item_width));
    log.rebuild_index();

    for (int d = 0; d < p.n_days; ++d) {
        for (int u = 0; u < p.n_users; ++u) {
            int k = sample_poisson(p.events_per_user_day, rng);
            if (k == 0) continue;
            const auto& cum = cumulative[synth_user_cluster(u, p.n_clusters)];
            double total = cum.back();
            std::vector<uint32_t> basket;
            basket.reserve(k);
            for (int j = 0; j < k; ++j) {
                double r = rng.next_double() * total;
                auto it = std::lower_bound(cum.begin(), cum.end(), r);
                if (it == cum.end()) --it;
                basket.push_back(static_cast<uint32_t>(it - cum.begin()));
            }
            // ascending within the basket keeps the log in canonical order,
            // so it equals its own file round-trip
            std::sort(basket.begin(), basket.end());
            for (uint32_t item : basket)
                log.events.push_back({static_cast<uint32_t>(u), item,
                                      static_cast<int32_t>(d)});
        }
    }
    if (log.events.empty())
        throw ValidationError("synthetic generator produced no events; increase the rate");
    return log;
}

} // namespace recloop
