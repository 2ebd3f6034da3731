#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "doctest.h"
#include "recloop/dataset.hpp"
#include "recloop/rng.hpp"

using namespace recloop;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "recloop-dataset-tests";
    fs::create_directories(dir);
    return dir;
}

fs::path write_temp(const std::string& name, const std::string& content) {
    auto path = temp_dir() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

} // namespace

TEST_CASE("canonical day-index files load verbatim") {
    auto path = write_temp("canon.csv", "user,item,day\nu1,i1,0\nu1,i2,0\nu2,i1,3\n");
    auto log = load_interactions(path.string());
    CHECK(log.event_count() == 3);
    CHECK(log.user_count() == 2);
    CHECK(log.item_count() == 2);
    CHECK(log.span_days() == 4);
    CHECK(log.events[2].day == 3);
    CHECK(log.user_ids[log.events[2].user] == "u2");
}

TEST_CASE("day indices are not rebased but calendar dates are") {
    auto p1 = write_temp("late_start.csv", "user,item,day\nu1,i1,5\nu2,i1,9\n");
    auto log1 = load_interactions(p1.string());
    CHECK(log1.events[0].day == 5);
    CHECK(log1.events[1].day == 9);

    LoadOptions iso = LoadOptions::preset("custom");
    iso.time_format = TimeFormat::IsoDate;
    auto p2 = write_temp("dates.csv", "user,item,day\nu1,i1,2021-03-05\nu2,i1,2021-03-09\n");
    auto log2 = load_interactions(p2.string(), iso);
    CHECK(log2.events[0].day == 0);
    CHECK(log2.events[1].day == 4);
}

TEST_CASE("epoch seconds discretize into days") {
    LoadOptions opt = LoadOptions::preset("custom");
    opt.time_format = TimeFormat::EpochSeconds;
    // 86400s apart plus an in-day offset
    auto path = write_temp("epochs.csv",
                           "user,item,day\nu1,i1,1000000000\nu1,i2,1000040000\nu2,i1,1000086400\n");
    auto log = load_interactions(path.string(), opt);
    CHECK(log.events[0].day == 0);
    CHECK(log.events[1].day == 0);
    CHECK(log.events[2].day == 1);
}

TEST_CASE("auto time format resolves per value") {
    LoadOptions opt = LoadOptions::preset("custom");
    opt.time_format = TimeFormat::Auto;
    auto path = write_temp("auto.csv", "user,item,day\nu1,i1,2021-03-05\nu1,i2,2021-03-06\n");
    auto log = load_interactions(path.string(), opt);
    CHECK(log.events[1].day == 1);
}

TEST_CASE("headerless position-based loading works") {
    LoadOptions opt = LoadOptions::preset("custom");
    opt.has_header = false;
    opt.delimiter = '\t';
    opt.user_position = 0;
    opt.item_position = 2;
    opt.time_position = 1;
    opt.time_format = TimeFormat::DayIndex;
    auto path = write_temp("pos.tsv", "alice\t4\tsongA\nbob\t6\tsongB\n");
    auto log = load_interactions(path.string(), opt);
    CHECK(log.event_count() == 2);
    CHECK(log.user_ids[log.events[0].user] == "alice");
    CHECK(log.item_ids[log.events[0].item] == "songA");
    CHECK(log.events[1].day == 6);
}

TEST_CASE("listening-history preset reads tab-separated rows") {
    LoadOptions opt = LoadOptions::preset("lastfm");
    auto path = write_temp("listen.tsv",
                           "user_000001\t2009-05-04\tartist-9\tArtist Nine\n"
                           "user_000002\t2009-05-05\tartist-3\tArtist Three\n");
    auto log = load_interactions(path.string(), opt);
    CHECK(log.event_count() == 2);
    CHECK(log.item_ids[log.events[0].item] == "artist-9");
    CHECK(log.events[1].day == 1);
}

TEST_CASE("purchase-export preset resolves named columns") {
    LoadOptions opt = LoadOptions::preset("amazon");
    auto path = write_temp("orders.csv",
                           "Survey ResponseID,Order Date,ASIN/ISBN (Product Code),Title\n"
                           "R1,2018-01-01,B000123,Widget\n"
                           "R2,2018-01-31,B000456,Gadget\n");
    auto log = load_interactions(path.string(), opt);
    CHECK(log.event_count() == 2);
    CHECK(log.span_days() == 31);
    CHECK(log.item_ids[log.events[0].item] == "B000123");
}

TEST_CASE("malformed rows are rejected with their row number") {
    auto path = write_temp("bad.csv", "user,item,day\nu1,i1,0\nu2,i2\n");
    CHECK_THROWS_WITH_AS(load_interactions(path.string()),
                         doctest::Contains("row 3"), ValidationError);

    auto path2 = write_temp("badday.csv", "user,item,day\nu1,i1,notaday\n");
    CHECK_THROWS_AS(load_interactions(path2.string()), ValidationError);

    auto path3 = write_temp("negday.csv", "user,item,day\nu1,i1,-4\n");
    CHECK_THROWS_AS(load_interactions(path3.string()), ValidationError);

    auto path4 = write_temp("emptyfield.csv", "user,item,day\nu1,,0\n");
    CHECK_THROWS_WITH_AS(load_interactions(path4.string()),
                         doctest::Contains("row 2"), ValidationError);

    CHECK_THROWS_AS(load_interactions((temp_dir() / "nosuchfile.csv").string()),
                    ValidationError);
}

TEST_CASE("unknown preset and missing header column are rejected") {
    CHECK_THROWS_AS(LoadOptions::preset("nonsense"), ValidationError);
    auto path = write_temp("nohdr.csv", "a,b,c\nu1,i1,0\n");
    CHECK_THROWS_WITH_AS(load_interactions(path.string()),
                         doctest::Contains("'user'"), ValidationError);
}

TEST_CASE("write then load round-trips to identical bytes") {
    SynthParams p;
    p.n_users = 20;
    p.n_items = 40;
    p.n_days = 30;
    p.seed = 5;
    auto log = generate_synthetic(p);
    auto path = temp_dir() / "roundtrip.csv";
    write_log(log, path.string());
    auto back = load_interactions(path.string());
    CHECK(back.events == log.events);
    CHECK(back.user_ids == log.user_ids);
    CHECK(back.item_ids == log.item_ids);
    CHECK(format_log(back) == format_log(log));
}

TEST_CASE("formatting rejects ids that collide with the delimiter") {
    InteractionLog log;
    log.user_ids = {"u,1"};
    log.item_ids = {"i1"};
    log.rebuild_index();
    log.events = {{0, 0, 0}};
    CHECK_THROWS_AS(format_log(log), ValidationError);
}

TEST_CASE("activity filter keeps users active in every spanned year") {
    InteractionLog log;
    log.user_ids = {"keep", "patchy"};
    log.item_ids = {"i0", "i1"};
    log.rebuild_index();
    // two years; "keep" hits 3 distinct months per year, "patchy" only year 1
    auto add = [&](uint32_t u, uint32_t i, int day) { log.events.push_back({u, i, day}); };
    for (int m : {0, 2, 4}) add(0, 0, m * kDaysPerMonth + 3);
    for (int m : {12, 15, 18}) add(0, 1, m * kDaysPerMonth + 3);
    for (int m : {1, 3, 5}) add(1, 1, m * kDaysPerMonth + 7);
    add(1, 0, 719); // year 2 but a single month
    std::sort(log.events.begin(), log.events.end(),
              [](const Interaction& a, const Interaction& b) { return a.day < b.day; });

    auto filtered = filter_active_users(log, 3);
    CHECK(filtered.user_count() == 1);
    CHECK(filtered.user_ids[0] == "keep");
    CHECK(filtered.event_count() == 6);
    // unused items dropped and ids re-densified
    CHECK(filtered.item_count() == 2);

    auto monthly = filter_active_users(log, 1);
    CHECK(monthly.user_count() == 2);

    CHECK_THROWS_AS(filter_active_users(log, 0), ValidationError);
    CHECK_THROWS_AS(filter_active_users(log, 4), ValidationError); // keeps nobody

    InteractionLog shortlog;
    shortlog.user_ids = {"u"};
    shortlog.item_ids = {"i"};
    shortlog.rebuild_index();
    shortlog.events = {{0, 0, 10}};
    CHECK_THROWS_AS(filter_active_users(shortlog, 1), ValidationError);
}

TEST_CASE("temporal holdout cuts 4/1/1 months then simulation") {
    SynthParams p;
    p.n_users = 10;
    p.n_items = 20;
    p.n_days = 540;
    p.events_per_user_day = 0.2;
    auto log = generate_synthetic(p);
    auto split = temporal_holdout(log);
    CHECK(split.train == DayRange{0, 120});
    CHECK(split.valid == DayRange{120, 150});
    CHECK(split.test == DayRange{150, 180});
    CHECK(split.sim_start_day == 180);

    p.n_days = 200; // under the 7-month minimum
    auto shortlog = generate_synthetic(p);
    CHECK_THROWS_AS(temporal_holdout(shortlog), ValidationError);
}

TEST_CASE("activity trace replays per-day baskets in user order") {
    InteractionLog log;
    log.user_ids = {"a", "b", "c"};
    log.item_ids = {"x", "y"};
    log.rebuild_index();
    log.events = {{2, 0, 0}, {0, 0, 0}, {0, 1, 0}, {1, 0, 2}};

    auto trace = build_activity_trace(log, {0, 3});
    REQUIRE(trace.days.size() == 3);
    REQUIRE(trace.days[0].size() == 2);
    CHECK(trace.days[0][0] == std::pair<uint32_t, uint32_t>{0, 2});
    CHECK(trace.days[0][1] == std::pair<uint32_t, uint32_t>{2, 1});
    CHECK(trace.days[1].empty());
    CHECK(trace.days[2].size() == 1);
    CHECK(trace.total_events() == 4);

    CHECK_THROWS_AS(build_activity_trace(log, {2, 2}), ValidationError);
    CHECK_THROWS_AS(build_activity_trace(log, {0, 99}), ValidationError);
}

TEST_CASE("synthetic generation is deterministic and well-formed") {
    SynthParams p;
    p.n_users = 50;
    p.n_items = 120;
    p.n_days = 60;
    p.seed = 11;
    auto a = generate_synthetic(p);
    auto b = generate_synthetic(p);
    CHECK(a.events == b.events);
    CHECK(a.user_ids == b.user_ids);

    p.seed = 12;
    auto c = generate_synthetic(p);
    CHECK(a.events != c.events);

    CHECK(a.user_count() == 50);
    CHECK(a.item_count() == 120);
    for (size_t i = 1; i < a.events.size(); ++i)
        REQUIRE(a.events[i - 1].day <= a.events[i].day);
    // dense index equals generation index via zero-padded ids
    CHECK(a.user_ids[7] < a.user_ids[8]);
    CHECK(a.item_ids[99] < a.item_ids[100]);
}

TEST_CASE("synthetic event volume follows the configured rate") {
    SynthParams p;
    p.n_users = 100;
    p.n_days = 200;
    p.n_items = 300;
    p.events_per_user_day = 1.0;
    p.seed = 3;
    auto log = generate_synthetic(p);
    double lambda = 100.0 * 200.0;
    CHECK(std::abs(double(log.event_count()) - lambda) < 4 * std::sqrt(lambda));
}

TEST_CASE("cluster affinity concentrates consumption in the user's block") {
    SynthParams p;
    p.n_users = 100;
    p.n_items = 500;
    p.n_days = 200;
    p.n_clusters = 5;
    p.popularity_exponent = 0.0; // flat base so the share is exact
    p.seed = 9;
    auto log = generate_synthetic(p);
    uint64_t in_block = 0;
    for (const auto& e : log.events) {
        int c = synth_user_cluster(e.user, 5);
        auto [lo, hi] = synth_cluster_block(c, 500, 5);
        if (int(e.item) >= lo && int(e.item) < hi) ++in_block;
    }
    // block of 100 at 5x affinity vs 400 outside: expected share 5/9
    double share = double(in_block) / double(log.event_count());
    CHECK(share == doctest::Approx(5.0 / 9.0).epsilon(0.05));
}

TEST_CASE("item popularity follows the configured power law") {
    SynthParams p;
    p.n_users = 200;
    p.n_items = 1000;
    p.n_days = 200;
    p.n_clusters = 1; // no affinity distortion
    p.popularity_exponent = 1.0;
    p.seed = 4;
    auto log = generate_synthetic(p);
    std::vector<uint64_t> counts(p.n_items, 0);
    for (const auto& e : log.events) ++counts[e.item];
    std::sort(counts.begin(), counts.end(), std::greater<>());
    // OLS fit of log weight vs log rank over the head
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    int n = 50;
    for (int r = 1; r <= n; ++r) {
        double x = std::log(double(r));
        double y = std::log(double(counts[r - 1]));
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope > -1.15);
    CHECK(slope < -0.85);
}

TEST_CASE("cluster helpers partition users and items") {
    CHECK(synth_user_cluster(0, 5) == 0);
    CHECK(synth_user_cluster(7, 5) == 2);
    auto [lo0, hi0] = synth_cluster_block(0, 10, 3);
    auto [lo1, hi1] = synth_cluster_block(1, 10, 3);
    auto [lo2, hi2] = synth_cluster_block(2, 10, 3);
    CHECK(lo0 == 0);
    CHECK(hi0 == lo1);
    CHECK(hi1 == lo2);
    CHECK(hi2 == 10);
}

TEST_CASE("synthetic parameter validation") {
    SynthParams p;
    p.n_users = 0;
    CHECK_THROWS_AS(generate_synthetic(p), ValidationError);
    p = {};
    p.popularity_exponent = -0.5;
    CHECK_THROWS_AS(generate_synthetic(p), ValidationError);
    p = {};
    p.events_per_user_day = 0.0;
    CHECK_THROWS_AS(generate_synthetic(p), ValidationError);
}
