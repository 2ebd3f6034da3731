#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "recloop/dataset.hpp"
#include "recloop/rng.hpp"
#include "recloop/stats.hpp"

using namespace recloop;

namespace {

std::vector<Interaction> user_events(std::initializer_list<std::pair<int, uint32_t>> day_item) {
    std::vector<Interaction> ev;
    for (auto [day, item] : day_item) ev.push_back({0, item, day});
    return ev;
}

} // namespace

TEST_CASE("temperature estimate is the OLS slope of discovery over days") {
    // cumulative distinct counts (0,2), (1,2), (2,6) -> slope 2
    auto ev = user_events({{0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 3}, {2, 4}, {2, 5}, {2, 6}});
    CHECK(estimate_tau(ev, {0, 3}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("temperature estimate clamps and falls back") {
    TauConfig cfg;
    // no discovery after day 0 -> slope 0 -> clamped up to min
    auto flat = user_events({{0, 1}, {1, 1}, {2, 1}, {3, 1}});
    CHECK(estimate_tau(flat, {0, 4}, cfg) == doctest::Approx(cfg.min));

    // explosive discovery -> clamped down to max
    std::vector<Interaction> steep;
    for (int d = 0; d < 4; ++d)
        for (int k = 0; k < 20; ++k) steep.push_back({0, uint32_t(d * 20 + k), d});
    CHECK(estimate_tau(steep, {0, 4}, cfg) == doctest::Approx(cfg.max));

    // fewer than two active days -> fallback
    auto single = user_events({{2, 1}, {2, 2}});
    CHECK(estimate_tau(single, {0, 4}, cfg) == doctest::Approx(cfg.fallback));
    CHECK(estimate_tau({}, {0, 4}, cfg) == doctest::Approx(cfg.fallback));
}

TEST_CASE("temperature estimate uses day indices, not active-day ranks") {
    // same discoveries on days {0,1} vs {0,9}: the gap flattens the slope
    auto tight = user_events({{0, 1}, {1, 2}});
    auto spread = user_events({{0, 1}, {9, 2}});
    CHECK(estimate_tau(tight, {0, 10}) > estimate_tau(spread, {0, 10}));
    CHECK(estimate_tau(spread, {0, 10}) == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("temperature estimate respects the window and requires day order") {
    auto ev = user_events({{0, 1}, {1, 2}, {5, 3}, {6, 4}});
    // window cuts off the late days
    CHECK(estimate_tau(ev, {0, 2}) == doctest::Approx(1.0));

    std::vector<Interaction> unsorted = {{0, 1, 3}, {0, 2, 1}};
    CHECK_THROWS_AS(estimate_tau(unsorted, {0, 5}), ValidationError);
}

TEST_CASE("bulk statistics match an incremental replay") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        int n_users = 2 + int(rng.next_below(10));
        int n_items = 3 + int(rng.next_below(18));
        int n_days = 1 + int(rng.next_below(14));
        InteractionLog log;
        for (int u = 0; u < n_users; ++u) log.user_ids.push_back("u" + std::to_string(u));
        for (int i = 0; i < n_items; ++i) log.item_ids.push_back("i" + std::to_string(i));
        log.rebuild_index();
        for (int d = 0; d < n_days; ++d) {
            int k = int(rng.next_below(8));
            std::vector<Interaction> day;
            for (int j = 0; j < k; ++j)
                day.push_back({uint32_t(rng.next_below(n_users)),
                               uint32_t(rng.next_below(n_items)), d});
            std::sort(day.begin(), day.end(), [](auto& a, auto& b) { return a.user < b.user; });
            for (auto& e : day) log.events.push_back(e);
        }

        auto bulk = PopulationStats::from_log(log, {0, n_days});

        PopulationStats inc(n_users, n_items);
        auto it = log.events.begin();
        for (int d = 0; d < n_days; ++d) {
            auto end = std::find_if(it, log.events.end(),
                                    [d](const Interaction& e) { return e.day > d; });
            inc.update_day(std::span<const Interaction>(it, end), d);
            it = end;
        }

        REQUIRE(bulk.day_cursor() == inc.day_cursor());
        for (int i = 0; i < n_items; ++i) {
            REQUIRE(bulk.item_strength(i) == inc.item_strength(i));
            REQUIRE(bulk.item_popularity(i) == inc.item_popularity(i));
        }
        for (int u = 0; u < n_users; ++u) {
            REQUIRE(bulk.user(u).consumed == inc.user(u).consumed);
            REQUIRE(bulk.user(u).total_events == inc.user(u).total_events);
            REQUIRE(bulk.user(u).active_days == inc.user(u).active_days);
            REQUIRE(bulk.user(u).last_active_day == inc.user(u).last_active_day);
            REQUIRE(bulk.exploration(u) == inc.exploration(u));
            REQUIRE(bulk.activity_rate(u) == inc.activity_rate(u));
        }
    }
}

TEST_CASE("per-user statistics on a hand-built day") {
    PopulationStats st(2, 3);
    std::vector<Interaction> d0 = {{0, 0, 0}, {0, 1, 0}, {1, 0, 0}};
    st.update_day(d0, 0);
    std::vector<Interaction> d1 = {{0, 0, 1}};
    st.update_day(d1, 1);

    CHECK(st.user(0).total_events == 3);
    CHECK(st.user(0).active_days == 2);
    CHECK(st.activity_rate(0) == doctest::Approx(1.5));
    CHECK(st.activity_rate(1) == doctest::Approx(1.0));
    CHECK(st.item_strength(0) == 3);
    CHECK(st.item_popularity(0) == 2);
    CHECK(st.item_popularity(2) == 0);
    // user 0 consumed counts {2,1}: gini = 1/6
    CHECK(st.exploration(0) == doctest::Approx(1.0 / 6.0));
    CHECK(st.exploration(1) == doctest::Approx(0.0));
}

TEST_CASE("statistics start empty") {
    PopulationStats st(2, 2);
    CHECK(st.activity_rate(0) == 0.0);
    CHECK(st.exploration(0) == 0.0);
    CHECK(st.day_cursor() == -1);
}

TEST_CASE("day updates enforce ordering and ranges") {
    PopulationStats st(2, 2);
    std::vector<Interaction> d = {{0, 0, 3}};
    st.update_day(d, 3);
    CHECK_THROWS_AS(st.update_day(d, 3), ValidationError);  // same day twice
    CHECK_THROWS_AS(st.update_day(d, 2), ValidationError);  // going backwards
    std::vector<Interaction> mixed = {{0, 0, 4}, {0, 0, 5}};
    CHECK_THROWS_AS(st.update_day(mixed, 4), ValidationError);
    std::vector<Interaction> oob = {{7, 0, 4}};
    CHECK_THROWS_AS(st.update_day(oob, 4), ValidationError);
    // an empty batch just advances the cursor
    st.update_day({}, 4);
    CHECK(st.day_cursor() == 4);
}
