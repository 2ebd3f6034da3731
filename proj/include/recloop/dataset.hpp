#pragma once

#include <cstdint>
#include <string>

#include "recloop/types.hpp"

namespace recloop {

/// Fixed-width calendar used everywhere day indices are grouped: a month is
/// 30 consecutive day indices, a year is 12 such months.
inline constexpr int kDaysPerMonth = 30;
inline constexpr int kMonthsPerYear = 12;
inline constexpr int kDaysPerYear = kDaysPerMonth * kMonthsPerYear;

enum class TimeFormat {
    Auto,          // per value: ISO date if it contains '-', else epoch seconds
    EpochSeconds,
    IsoDate,
    DayIndex,      // already-discretized integer day
};

/// Column mapping for delimiter-separated input. With a header row columns
/// are resolved by name, otherwise by 0-based position.
struct LoadOptions {
    char delimiter = ',';
    bool has_header = true;
    std::string user_column = "user";
    std::string item_column = "item";
    std::string time_column = "day";
    int user_position = 0;
    int item_position = 1;
    int time_position = 2;
    TimeFormat time_format = TimeFormat::DayIndex;

    /// Presets: "canonical" (user,item,day), "lastfm" (tab-separated
    /// listening history, artist as item), "amazon" (purchase export,
    /// ASIN as item), "custom" (defaults above, caller adjusts).
    static LoadOptions preset(const std::string& name);
};

InteractionLog load_interactions(const std::string& path,
                                 const LoadOptions& options = LoadOptions::preset("canonical"));

/// Canonical text form: header line `user,item,day`, rows sorted by
/// (day, user id, item id). Identical logs serialize to identical bytes.
std::string format_log(const InteractionLog& log);
void write_log(const InteractionLog& log, const std::string& path);

/// Keeps users with at least `min_active_months` distinct active months in
/// every year the log spans; drops items left with no events and
/// re-densifies both id maps.
InteractionLog filter_active_users(const InteractionLog& log, int min_active_months);

/// 4/1/1-month train/valid/test split over the first 6 months; simulation
/// starts at month 7. Requires a span of at least 7 months.
TemporalSplit temporal_holdout(const InteractionLog& log);

ActivityTrace build_activity_trace(const InteractionLog& log, DayRange window);

struct SynthParams {
    int n_users = 500;
    int n_items = 2000;
    int n_days = 900; // 6-month initialization prefix + 24 monthly epochs
    double popularity_exponent = 1.0;
    int n_clusters = 5;
    double events_per_user_day = 1.0;
    uint64_t seed = 1;
};

/// Synthetic implicit-feedback log: item base popularity is a rank power
/// law with the given exponent, users belong to preference clusters with a
/// 5x within-block affinity boost, and per-(user, day) activity is Poisson.
/// Fully determined by the seed. External ids are zero-padded so dense
/// indices equal generation indices.
InteractionLog generate_synthetic(const SynthParams& params);

/// Cluster assignment used by the generator (user index modulo n_clusters).
int synth_user_cluster(uint32_t user, int n_clusters);
/// Item index block owned by a cluster: [c*n_items/k, (c+1)*n_items/k).
std::pair<int, int> synth_cluster_block(int cluster, int n_items, int n_clusters);

} // namespace recloop
