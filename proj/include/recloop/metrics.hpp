#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recloop/types.hpp"

namespace recloop {

// Gini coefficient of a nonnegative weight vector: mean absolute difference
// over all ordered pairs, divided by twice the mean. Throws ValidationError
// when the vector is empty or sums to zero.
double gini(std::span<const double> weights);
double gini(std::span<const uint64_t> weights);

// Total event count per item over a window.
std::vector<uint64_t> item_strength(const InteractionLog& log, DayRange window);

// Distinct consuming users per item over a window.
std::vector<uint32_t> item_user_popularity(const InteractionLog& log, DayRange window);

// Weights sorted descending with 1-based ranks; zero entries kept.
struct RankFrequency {
    std::vector<uint64_t> weight; // weight[r-1] = weight at rank r
};
RankFrequency rank_frequency(std::span<const uint64_t> weights);

// Mean Gini of per-user consumption count vectors, over users with at least
// one event in the window.
double mean_individual_gini(const InteractionLog& log, DayRange window);

// Gini over the full item catalog's event counts (zero-count items included).
double collective_gini(const InteractionLog& log, DayRange window);

struct JaccardOptions {
    size_t exact_max_users = 2000; // exhaustive pairs at or below this
    uint64_t sample_pairs = 1000000;
    uint64_t seed = 1;
};

// Mean pairwise Jaccard similarity of users' consumed-item sets in a window.
// Users with no events in the window are excluded; fewer than two eligible
// users is an error. Beyond `exact_max_users` users the mean is estimated
// from `sample_pairs` uniform pairs (with replacement), unless that budget
// covers every pair anyway.
double mean_jaccard(const InteractionLog& log, DayRange window,
                    const JaccardOptions& opts = {});

// Fraction of the catalog consumed at least once in the window.
double item_coverage(const InteractionLog& log, DayRange window);

struct CoEdge {
    uint32_t item_a; // item_a < item_b
    uint32_t item_b;
    uint32_t weight; // distinct users consuming both in the window
};

// Item co-consumption edges, heaviest first, ties by (item_a, item_b).
// When `focus_items` is nonempty only edges touching one of them are kept.
std::vector<CoEdge> coconsumption_edges(const InteractionLog& log, DayRange window,
                                        std::span<const uint32_t> focus_items = {});

} // namespace recloop
