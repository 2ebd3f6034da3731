#include "recloop/types.hpp"

#include <algorithm>

namespace recloop {

std::span<const Interaction> InteractionLog::window(DayRange range) const {
    auto lo = std::partition_point(events.begin(), events.end(),
                                   [&](const Interaction& e) { return e.day < range.begin; });
    auto hi = std::partition_point(lo, events.end(),
                                   [&](const Interaction& e) { return e.day < range.end; });
    return {&*lo, static_cast<size_t>(hi - lo)};
}

void InteractionLog::append_day(std::span<const Interaction> day_events) {
    if (day_events.empty()) return;
    int day = day_events.front().day;
    if (day < horizon())
        throw ValidationError("append_day: day " + std::to_string(day) +
                              " precedes horizon " + std::to_string(horizon()));
    for (const auto& e : day_events) {
        if (e.day != day)
            throw ValidationError("append_day: events span multiple days");
    }
    events.insert(events.end(), day_events.begin(), day_events.end());
}

uint32_t InteractionLog::user_index(const std::string& id) const {
    auto it = user_lookup_.find(id);
    if (it == user_lookup_.end())
        throw ValidationError("unknown user id: " + id);
    return it->second;
}

uint32_t InteractionLog::item_index(const std::string& id) const {
    auto it = item_lookup_.find(id);
    if (it == item_lookup_.end())
        throw ValidationError("unknown item id: " + id);
    return it->second;
}

void InteractionLog::rebuild_index() {
    user_lookup_.clear();
    item_lookup_.clear();
    user_lookup_.reserve(user_ids.size());
    item_lookup_.reserve(item_ids.size());
    for (uint32_t i = 0; i < user_ids.size(); ++i) user_lookup_[user_ids[i]] = i;
    for (uint32_t i = 0; i < item_ids.size(); ++i) item_lookup_[item_ids[i]] = i;
}

} // namespace recloop
