#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace recloop {

/// Raised for bad input: malformed files, invalid configuration, violated
/// preconditions. The C API maps it to a distinct status from runtime errors.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Half-open range of day indices [begin, end).
struct DayRange {
    int begin = 0;
    int end = 0;

    bool contains(int day) const { return day >= begin && day < end; }
    int length() const { return end - begin; }
    bool empty() const { return end <= begin; }
    bool operator==(const DayRange&) const = default;
};

struct Interaction {
    uint32_t user;
    uint32_t item;
    int32_t day;

    bool operator==(const Interaction&) const = default;
};

/// Timestamped implicit-feedback events plus the dense id maps for the user
/// and item catalogs. Events are kept sorted by day; repeated (user, item,
/// day) records are legitimate and preserved.
class InteractionLog {
public:
    std::vector<Interaction> events;
    std::vector<std::string> user_ids;  // dense index -> external id
    std::vector<std::string> item_ids;

    size_t user_count() const { return user_ids.size(); }
    size_t item_count() const { return item_ids.size(); }
    size_t event_count() const { return events.size(); }

    /// Largest day index present, or -1 for an empty log.
    int horizon() const {
        return events.empty() ? -1 : events.back().day;
    }

    int span_days() const { return horizon() + 1; }

    /// Events with day in [range.begin, range.end). Relies on day ordering.
    std::span<const Interaction> window(DayRange range) const;

    /// Appends one day of simulated events (all with the same day index,
    /// not before the current horizon).
    void append_day(std::span<const Interaction> day_events);

    uint32_t user_index(const std::string& id) const;
    uint32_t item_index(const std::string& id) const;

    void rebuild_index();

private:
    std::unordered_map<std::string, uint32_t> user_lookup_;
    std::unordered_map<std::string, uint32_t> item_lookup_;
};

/// Train/validation/test day ranges plus the first simulated day.
struct TemporalSplit {
    DayRange train;
    DayRange valid;
    DayRange test;
    int sim_start_day = 0;
};

/// Day-by-day activation schedule replayed from a real log: which users are
/// active and how many items each selects.
struct ActivityTrace {
    DayRange window;
    // days[d - window.begin] = (user, basket size), ascending user index
    std::vector<std::vector<std::pair<uint32_t, uint32_t>>> days;

    uint64_t total_events() const {
        uint64_t n = 0;
        for (const auto& day : days)
            for (const auto& [u, b] : day) n += b;
        return n;
    }
};

} // namespace recloop
