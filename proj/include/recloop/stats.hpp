#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "recloop/types.hpp"

namespace recloop {

struct TauConfig {
    double min = 0.05;
    double max = 5.0;
    double fallback = 1.0; // used when a user has fewer than two active days
};

// OLS slope of cumulative distinct items consumed against the day index,
// one point per active day. `events` must be day-sorted and restricted to
// one user.
double estimate_tau(std::span<const Interaction> events, DayRange window,
                    const TauConfig& cfg = {});

struct UserStats {
    std::unordered_map<uint32_t, uint32_t> consumed; // item -> event count
    uint64_t total_events = 0;
    uint32_t active_days = 0;
    int32_t last_active_day = -1;
    double exploration = 0.0; // cached Gini over consumed counts, 0 until >=2 items
};

// Running per-user and per-item consumption state. Frozen at day boundaries:
// the engine finishes a day, then applies it here in one batch.
class PopulationStats {
public:
    PopulationStats() = default;
    PopulationStats(size_t n_users, size_t n_items);

    // Bulk build over a window, bypassing the incremental path.
    static PopulationStats from_log(const InteractionLog& log, DayRange window);

    // Apply one finished day. `events` must all carry the same day, not
    // before any day already applied.
    void update_day(std::span<const Interaction> events, int32_t day);

    const UserStats& user(uint32_t u) const { return users_.at(u); }
    uint64_t item_strength(uint32_t i) const { return item_strength_.at(i); }
    uint32_t item_popularity(uint32_t i) const { return item_popularity_.at(i); }
    const std::vector<uint64_t>& item_strengths() const { return item_strength_; }
    const std::vector<uint32_t>& item_popularities() const { return item_popularity_; }

    size_t user_count() const { return users_.size(); }
    size_t item_count() const { return item_strength_.size(); }
    int32_t day_cursor() const { return day_cursor_; }

    // mean events per active day; 0 before any activity
    double activity_rate(uint32_t u) const;
    double exploration(uint32_t u) const { return users_.at(u).exploration; }

private:
    void refresh_exploration(uint32_t u);

    std::vector<UserStats> users_;
    std::vector<uint64_t> item_strength_;   // total event count per item
    std::vector<uint32_t> item_popularity_; // distinct users per item
    int32_t day_cursor_ = -1;
};

} // namespace recloop
