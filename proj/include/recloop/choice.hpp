#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "recloop/rng.hpp"
#include "recloop/stats.hpp"
#include "recloop/types.hpp"

namespace recloop {

// Softmax with temperature, max-subtracted so large utilities cannot
// overflow. Result sums to 1 within 1e-12.
std::vector<double> softmax(std::span<const double> values, double tau);

// Inverse-CDF draw over an explicit probability vector. Consumes exactly one
// uniform from the stream.
size_t sample_index(std::span<const double> probs, Rng& rng);

// Perceived value of an item for a user: baseline activity, popularity pull
// scaled by how evenly the user spreads consumption, a rarity bonus, and
// idiosyncratic noise.
double utility(const PopulationStats& stats, uint32_t user, uint32_t item,
               double lambda, double xi);

enum class CandidateSource : uint8_t { GlobalPop, PersonalPop, Unknown };

struct CandidateSet {
    std::vector<uint32_t> items;
    std::vector<CandidateSource> tags;
    bool degenerate = false; // catalog not larger than the requested size
};

// Items with at least one event in the window, most consumed first, ties by
// ascending index. Shared by every user within an epoch.
std::vector<uint32_t> global_pop_ranking(const InteractionLog& log, DayRange window);

// 40% global popularity, 40% the user's own favourites, 20% uniform over
// items the user has never consumed. Duplicates are skipped; slots a source
// cannot fill fall to the others in that same priority order. When the
// catalog is no larger than `size` the whole catalog is returned.
CandidateSet build_candidate_set(uint32_t user, const PopulationStats& stats,
                                 std::span<const uint32_t> gpop_rank, int size,
                                 Rng& rng);

// One autonomous pick: fresh noise per candidate, softmax at the user's
// temperature, inverse-CDF draw. Consumes |candidates| normals then one
// uniform, in that order.
uint32_t sample_autonomous(uint32_t user, const CandidateSet& candidates,
                           const PopulationStats& stats, double lambda, double tau,
                           Rng& rng);

} // namespace recloop
