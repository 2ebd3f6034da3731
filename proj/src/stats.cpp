#include "recloop/stats.hpp"

#include <algorithm>
#include <cmath>

#include "recloop/metrics.hpp"

namespace recloop {

double estimate_tau(std::span<const Interaction> events, DayRange window,
                    const TauConfig& cfg) {
    if (window.empty()) throw ValidationError("estimate_tau on an empty window");

    // cumulative distinct count sampled at each active day
    std::vector<std::pair<int32_t, double>> points;
    std::unordered_map<uint32_t, bool> seen;
    int32_t cur_day = window.begin - 1;
    for (const auto& e : events) {
        if (!window.contains(e.day)) continue;
        if (e.day < cur_day)
            throw ValidationError("estimate_tau events are not day-sorted");
        if (e.day != cur_day) {
            cur_day = e.day;
            points.emplace_back(cur_day, 0.0);
        }
        seen.emplace(e.item, true);
        points.back().second = static_cast<double>(seen.size());
    }
    if (points.size() < 2) return cfg.fallback;

    double n = static_cast<double>(points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [d, y] : points) {
        double x = static_cast<double>(d);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    double slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    return std::clamp(slope, cfg.min, cfg.max);
}

PopulationStats::PopulationStats(size_t n_users, size_t n_items)
    : users_(n_users), item_strength_(n_items, 0), item_popularity_(n_items, 0) {}

PopulationStats PopulationStats::from_log(const InteractionLog& log, DayRange window) {
    PopulationStats st(log.user_count(), log.item_count());
    for (const auto& e : log.window(window)) {
        auto& u = st.users_[e.user];
        ++u.consumed[e.item];
        ++u.total_events;
        if (e.day != u.last_active_day) {
            ++u.active_days;
            u.last_active_day = e.day;
        }
    }
    st.item_strength_ = recloop::item_strength(log, window);
    st.item_popularity_ = recloop::item_user_popularity(log, window);
    for (uint32_t u = 0; u < st.users_.size(); ++u) st.refresh_exploration(u);
    st.day_cursor_ = window.end - 1;
    return st;
}

void PopulationStats::update_day(std::span<const Interaction> events, int32_t day) {
    if (day <= day_cursor_)
        throw ValidationError("stats update for day " + std::to_string(day) +
                              " at cursor " + std::to_string(day_cursor_));
    std::vector<uint32_t> touched;
    for (const auto& e : events) {
        if (e.day != day)
            throw ValidationError("stats update batch mixes days");
        if (e.user >= users_.size() || e.item >= item_strength_.size())
            throw ValidationError("stats update event out of range");
        auto& u = users_[e.user];
        uint32_t& count = u.consumed[e.item];
        if (count == 0) ++item_popularity_[e.item];
        ++count;
        ++u.total_events;
        ++item_strength_[e.item];
        if (u.last_active_day != day) {
            u.last_active_day = day;
            ++u.active_days;
        }
        touched.push_back(e.user);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (uint32_t u : touched) refresh_exploration(u);
    day_cursor_ = day;
}

double PopulationStats::activity_rate(uint32_t u) const {
    const auto& s = users_.at(u);
    if (s.active_days == 0) return 0.0;
    return static_cast<double>(s.total_events) / static_cast<double>(s.active_days);
}

void PopulationStats::refresh_exploration(uint32_t u) {
    auto& s = users_[u];
    if (s.consumed.empty()) {
        s.exploration = 0.0;
        return;
    }
    std::vector<uint64_t> w;
    w.reserve(s.consumed.size());
    for (const auto& [item, c] : s.consumed) w.push_back(c);
    s.exploration = gini(w);
}

} // namespace recloop
