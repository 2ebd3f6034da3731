#include "recloop/metrics.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "recloop/rng.hpp"

namespace recloop {

namespace {

// Sorted-weight identity, O(d log d) against the quadratic pairwise form:
// G = (2 * sum_i i*w_(i) - (d+1) * sum_i w_(i)) / (d * sum_i w_(i)),
// with w ascending and i 1-based.
template <typename T>
double gini_impl(std::span<const T> weights) {
    if (weights.empty()) throw ValidationError("gini of an empty vector");
    std::vector<double> w(weights.begin(), weights.end());
    for (double v : w)
        if (v < 0) throw ValidationError("gini weight is negative");
    std::sort(w.begin(), w.end());
    double total = 0.0, ranked = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        total += w[i];
        ranked += static_cast<double>(i + 1) * w[i];
    }
    if (total <= 0.0) throw ValidationError("gini of an all-zero vector");
    double d = static_cast<double>(w.size());
    return (2.0 * ranked - (d + 1.0) * total) / (d * total);
}

} // namespace

double gini(std::span<const double> weights) { return gini_impl(weights); }
double gini(std::span<const uint64_t> weights) { return gini_impl(weights); }

std::vector<uint64_t> item_strength(const InteractionLog& log, DayRange window) {
    std::vector<uint64_t> s(log.item_count(), 0);
    for (const auto& e : log.window(window)) ++s[e.item];
    return s;
}

std::vector<uint32_t> item_user_popularity(const InteractionLog& log, DayRange window) {
    std::vector<std::vector<uint32_t>> users(log.item_count());
    for (const auto& e : log.window(window)) users[e.item].push_back(e.user);
    std::vector<uint32_t> p(log.item_count(), 0);
    for (size_t i = 0; i < users.size(); ++i) {
        auto& u = users[i];
        std::sort(u.begin(), u.end());
        p[i] = static_cast<uint32_t>(std::unique(u.begin(), u.end()) - u.begin());
    }
    return p;
}

RankFrequency rank_frequency(std::span<const uint64_t> weights) {
    RankFrequency rf;
    rf.weight.assign(weights.begin(), weights.end());
    std::sort(rf.weight.begin(), rf.weight.end(), std::greater<>());
    return rf;
}

namespace {

// item -> count maps per user, only for users active in the window
std::unordered_map<uint32_t, std::unordered_map<uint32_t, uint32_t>>
user_counts(const InteractionLog& log, DayRange window) {
    std::unordered_map<uint32_t, std::unordered_map<uint32_t, uint32_t>> by_user;
    for (const auto& e : log.window(window)) ++by_user[e.user][e.item];
    return by_user;
}

} // namespace

double mean_individual_gini(const InteractionLog& log, DayRange window) {
    auto by_user = user_counts(log, window);
    if (by_user.empty())
        throw ValidationError("no active users in the metric window");
    double sum = 0.0;
    for (const auto& [u, counts] : by_user) {
        std::vector<uint64_t> w;
        w.reserve(counts.size());
        for (const auto& [item, c] : counts) w.push_back(c);
        sum += gini(w);
    }
    return sum / static_cast<double>(by_user.size());
}

double collective_gini(const InteractionLog& log, DayRange window) {
    auto s = item_strength(log, window);
    return gini(std::span<const uint64_t>(s));
}

double mean_jaccard(const InteractionLog& log, DayRange window,
                    const JaccardOptions& opts) {
    // bitset rows over the catalog, one per active user
    size_t words = (log.item_count() + 63) / 64;
    std::map<uint32_t, size_t> row_of; // ordered so row index is user-sorted
    for (const auto& e : log.window(window)) row_of.emplace(e.user, 0);
    size_t n = row_of.size();
    if (n < 2)
        throw ValidationError("mean_jaccard needs at least two active users");

    std::vector<uint64_t> bits(n * words, 0);
    std::vector<uint32_t> card(n, 0);
    {
        size_t r = 0;
        for (auto& [u, row] : row_of) row = r++;
    }
    for (const auto& e : log.window(window)) {
        size_t r = row_of[e.user];
        uint64_t& word = bits[r * words + e.item / 64];
        uint64_t bit = 1ULL << (e.item % 64);
        if (!(word & bit)) {
            word |= bit;
            ++card[r];
        }
    }

    auto pair_jaccard = [&](size_t a, size_t b) {
        uint64_t inter = 0;
        const uint64_t* ra = &bits[a * words];
        const uint64_t* rb = &bits[b * words];
        for (size_t w = 0; w < words; ++w)
            inter += static_cast<uint64_t>(__builtin_popcountll(ra[w] & rb[w]));
        uint64_t uni = static_cast<uint64_t>(card[a]) + card[b] - inter;
        return static_cast<double>(inter) / static_cast<double>(uni);
    };

    uint64_t n_pairs = static_cast<uint64_t>(n) * (n - 1) / 2;
    bool exact = n <= opts.exact_max_users || opts.sample_pairs >= n_pairs;
    double sum = 0.0;
    if (exact) {
        for (size_t a = 0; a + 1 < n; ++a)
            for (size_t b = a + 1; b < n; ++b) sum += pair_jaccard(a, b);
        return sum / static_cast<double>(n_pairs);
    }
    Rng rng(derive_seed(opts.seed, 0x4a414343ULL)); // "JACC"
    for (uint64_t s = 0; s < opts.sample_pairs; ++s) {
        size_t a = rng.next_below(n);
        size_t b = rng.next_below(n - 1);
        if (b >= a) ++b;
        sum += pair_jaccard(a, b);
    }
    return sum / static_cast<double>(opts.sample_pairs);
}

double item_coverage(const InteractionLog& log, DayRange window) {
    if (log.item_count() == 0) throw ValidationError("empty catalog");
    std::vector<bool> seen(log.item_count(), false);
    for (const auto& e : log.window(window)) seen[e.item] = true;
    size_t hit = static_cast<size_t>(std::count(seen.begin(), seen.end(), true));
    return static_cast<double>(hit) / static_cast<double>(log.item_count());
}

std::vector<CoEdge> coconsumption_edges(const InteractionLog& log, DayRange window,
                                        std::span<const uint32_t> focus_items) {
    // per-user distinct item sets
    std::vector<std::vector<uint32_t>> items_of(log.user_count());
    for (const auto& e : log.window(window)) items_of[e.user].push_back(e.item);

    std::vector<bool> focus;
    if (!focus_items.empty()) {
        focus.assign(log.item_count(), false);
        for (uint32_t i : focus_items) {
            if (i >= log.item_count())
                throw ValidationError("focus item index out of range");
            focus[i] = true;
        }
    }

    std::map<std::pair<uint32_t, uint32_t>, uint32_t> weight;
    for (auto& items : items_of) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        for (size_t a = 0; a + 1 < items.size(); ++a)
            for (size_t b = a + 1; b < items.size(); ++b) {
                if (!focus.empty() && !focus[items[a]] && !focus[items[b]]) continue;
                ++weight[{items[a], items[b]}];
            }
    }

    std::vector<CoEdge> edges;
    edges.reserve(weight.size());
    for (const auto& [key, w] : weight) edges.push_back({key.first, key.second, w});
    std::stable_sort(edges.begin(), edges.end(), [](const CoEdge& x, const CoEdge& y) {
        return x.weight > y.weight;
    });
    return edges;
}

} // namespace recloop
