#include "recloop/choice.hpp"

#include <algorithm>
#include <cmath>

namespace recloop {

std::vector<double> softmax(std::span<const double> values, double tau) {
    if (values.empty()) throw ValidationError("softmax of an empty vector");
    if (!(tau > 0.0)) throw ValidationError("softmax temperature must be positive");
    double m = *std::max_element(values.begin(), values.end());
    std::vector<double> out(values.size());
    double sum = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp((values[i] - m) / tau);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

size_t sample_index(std::span<const double> probs, Rng& rng) {
    double r = rng.next_double();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (r < acc) return i;
    }
    return probs.size() - 1; // rounding spill lands on the last entry
}

double utility(const PopulationStats& stats, uint32_t user, uint32_t item,
               double lambda, double xi) {
    double s = static_cast<double>(stats.item_strength(item));
    return stats.activity_rate(user) +
           stats.exploration(user) * std::log1p(s) +
           lambda / (1.0 + s) + xi;
}

std::vector<uint32_t> global_pop_ranking(const InteractionLog& log, DayRange window) {
    std::vector<uint64_t> count(log.item_count(), 0);
    for (const auto& e : log.window(window)) ++count[e.item];
    std::vector<uint32_t> ranked;
    for (uint32_t i = 0; i < count.size(); ++i)
        if (count[i] > 0) ranked.push_back(i);
    std::stable_sort(ranked.begin(), ranked.end(), [&](uint32_t a, uint32_t b) {
        return count[a] > count[b];
    });
    return ranked;
}

CandidateSet build_candidate_set(uint32_t user, const PopulationStats& stats,
                                 std::span<const uint32_t> gpop_rank, int size,
                                 Rng& rng) {
    if (size < 5) throw ValidationError("candidate set size must be at least 5");
    const size_t catalog = stats.item_count();
    const auto& consumed = stats.user(user).consumed;

    CandidateSet set;
    if (catalog <= static_cast<size_t>(size)) {
        set.degenerate = true;
        set.items.reserve(catalog);
        set.tags.reserve(catalog);
        for (uint32_t i = 0; i < catalog; ++i) {
            set.items.push_back(i);
            set.tags.push_back(consumed.count(i) ? CandidateSource::PersonalPop
                                                 : CandidateSource::Unknown);
        }
        return set;
    }

    int g_quota = (2 * size + 4) / 5; // ceil(0.4 size)
    int i_quota = g_quota;
    int u_quota = std::max(0, size - g_quota - i_quota);

    std::vector<char> chosen(catalog, 0);
    auto take = [&](uint32_t item, CandidateSource tag) {
        chosen[item] = 1;
        set.items.push_back(item);
        set.tags.push_back(tag);
    };

    // the user's own consumption, heaviest first, ties by ascending index
    std::vector<uint32_t> ipop_rank;
    ipop_rank.reserve(consumed.size());
    for (const auto& [item, c] : consumed) ipop_rank.push_back(item);
    std::sort(ipop_rank.begin(), ipop_rank.end(), [&](uint32_t a, uint32_t b) {
        uint32_t ca = consumed.at(a), cb = consumed.at(b);
        if (ca != cb) return ca > cb;
        return a < b;
    });

    size_t g_pos = 0, i_pos = 0;
    auto walk = [&](std::span<const uint32_t> rank, size_t& pos, int want,
                    CandidateSource tag) {
        int got = 0;
        while (got < want && pos < rank.size()) {
            uint32_t item = rank[pos++];
            if (chosen[item]) continue;
            take(item, tag);
            ++got;
        }
        return got;
    };

    walk(gpop_rank, g_pos, g_quota, CandidateSource::GlobalPop);
    walk(ipop_rank, i_pos, i_quota, CandidateSource::PersonalPop);

    // never-consumed items the user could still discover
    std::vector<char> is_consumed(catalog, 0);
    for (const auto& [item, c] : consumed) is_consumed[item] = 1;
    std::vector<uint32_t> eligible;
    for (uint32_t i = 0; i < catalog; ++i)
        if (!is_consumed[i] && !chosen[i]) eligible.push_back(i);

    // partial Fisher-Yates; later pops recheck `chosen` because backfill
    // walks below may claim eligible items first
    size_t fy = 0;
    auto pop_unknown = [&](int want) {
        int got = 0;
        while (got < want && fy < eligible.size()) {
            size_t j = fy + rng.next_below(eligible.size() - fy);
            std::swap(eligible[fy], eligible[j]);
            uint32_t item = eligible[fy++];
            if (chosen[item]) continue;
            take(item, CandidateSource::Unknown);
            ++got;
        }
        return got;
    };
    pop_unknown(u_quota);

    int deficit = size - static_cast<int>(set.items.size());
    if (deficit > 0) deficit -= walk(gpop_rank, g_pos, deficit, CandidateSource::GlobalPop);
    if (deficit > 0) deficit -= walk(ipop_rank, i_pos, deficit, CandidateSource::PersonalPop);
    if (deficit > 0) deficit -= pop_unknown(deficit);
    if (deficit > 0)
        throw std::runtime_error("candidate sources exhausted below requested size");
    return set;
}

uint32_t sample_autonomous(uint32_t user, const CandidateSet& candidates,
                           const PopulationStats& stats, double lambda, double tau,
                           Rng& rng) {
    if (candidates.items.empty())
        throw ValidationError("autonomous sampling from an empty candidate set");
    std::vector<double> v(candidates.items.size());
    for (size_t i = 0; i < v.size(); ++i)
        v[i] = utility(stats, user, candidates.items[i], lambda, rng.next_normal());
    auto probs = softmax(v, tau);
    return candidates.items[sample_index(probs, rng)];
}

} // namespace recloop
