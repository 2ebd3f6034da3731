#include "doctest.h"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "recloop/dataset.hpp"
#include "recloop/engine.hpp"
#include "recloop/types.hpp"

using namespace recloop;

namespace {

struct SimFixture {
    InteractionLog data;
    TemporalSplit split;
    ActivityTrace trace;
};

/// Small world: 60-day history, then n_epochs 30-day epochs driven by the
/// synthetic log's own activity over the simulation span.
SimFixture make_fixture(int n_epochs, uint64_t seed = 9) {
    SynthParams p;
    p.n_users = 30;
    p.n_items = 50;
    p.n_days = 60 + n_epochs * 30;
    p.n_clusters = 5;
    p.events_per_user_day = 1.0;
    p.seed = seed;

    SimFixture f;
    f.data = generate_synthetic(p);
    f.split.train = {0, 45};
    f.split.valid = {45, 50};
    f.split.test = {50, 60};
    f.split.sim_start_day = 60;
    f.trace = build_activity_trace(f.data, {60, p.n_days});
    return f;
}

EngineConfig base_config(int n_epochs) {
    EngineConfig cfg;
    cfg.n_epochs = n_epochs;
    cfg.epoch_length_days = 30;
    cfg.candidate_set_size = 25; // must stay below the 50-item catalog
    return cfg;
}

std::string report_lines(const std::vector<EpochReport>& reports) {
    std::string out;
    for (const auto& r : reports) out += to_json_line(r) + "\n";
    return out;
}

} // namespace

TEST_CASE("every trace slot becomes exactly one event") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 0.5;
    auto res = run_simulation(cfg, f.data, f.split, f.trace);

    uint64_t simulated = 0;
    for (const auto& r : res.reports) simulated += r.events_this_epoch;
    CHECK(simulated == f.trace.total_events());

    // result log = untouched initialization prefix + one event per slot
    uint64_t init_events = 0;
    for (const auto& e : f.data.events)
        if (e.day < 60) ++init_events;
    CHECK(res.log.event_count() == init_events + simulated);
    CHECK(res.reports.size() == 2);
}

TEST_CASE("at eta zero the model choice is irrelevant") {
    auto f = make_fixture(2);
    std::vector<ModelKind> kinds = {ModelKind::Popularity, ModelKind::Random,
                                    ModelKind::ItemKnn, ModelKind::BprMf};
    std::string first_log, first_reports;
    for (size_t i = 0; i < kinds.size(); ++i) {
        auto cfg = base_config(2);
        cfg.eta = 0.0;
        cfg.model_kind = kinds[i];
        cfg.model_params.bpr.epochs = 2; // keep the irrelevant training cheap
        auto res = run_simulation(cfg, f.data, f.split, f.trace);
        for (const auto& r : res.reports) CHECK(r.adoption_events == 0);
        if (i == 0) {
            first_log = format_log(res.log);
            first_reports = report_lines(res.reports);
        } else {
            CHECK(format_log(res.log) == first_log);
            CHECK(report_lines(res.reports) == first_reports);
        }
    }
}

TEST_CASE("at eta one every slot is resolved by the recommender") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 1.0;
    auto res = run_simulation(cfg, f.data, f.split, f.trace);
    for (const auto& r : res.reports) {
        CHECK(r.adoption_events == r.events_this_epoch);
        CHECK(r.events_this_epoch > 0);
    }

    // picks can only come from the 20-slot lists of the (two) trained models
    std::set<uint32_t> simulated_items;
    for (const auto& e : res.log.events)
        if (e.day >= 60) simulated_items.insert(e.item);
    CHECK(simulated_items.size() <= 40);
}

TEST_CASE("intermediate eta adopts some slots but not all") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 0.5;
    auto res = run_simulation(cfg, f.data, f.split, f.trace);
    uint64_t events = 0, adopted = 0;
    for (const auto& r : res.reports) {
        events += r.events_this_epoch;
        adopted += r.adoption_events;
    }
    CHECK(adopted > 0);
    CHECK(adopted < events);
}

TEST_CASE("per-user streams make processing order irrelevant") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 0.5;
    auto forward = run_simulation(cfg, f.data, f.split, f.trace);
    SimHooks hooks;
    hooks.reverse_user_order = true;
    auto backward = run_simulation(cfg, f.data, f.split, f.trace, hooks);
    CHECK(format_log(forward.log) == format_log(backward.log));
    CHECK(report_lines(forward.reports) == report_lines(backward.reports));
}

TEST_CASE("equal seeds reproduce, different runs diverge") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 0.5;
    auto a = run_simulation(cfg, f.data, f.split, f.trace);
    auto b = run_simulation(cfg, f.data, f.split, f.trace);
    CHECK(format_log(a.log) == format_log(b.log));
    CHECK(report_lines(a.reports) == report_lines(b.reports));

    auto run1 = cfg;
    run1.run_index = 1;
    auto c = run_simulation(run1, f.data, f.split, f.trace);
    CHECK(format_log(c.log) != format_log(a.log));

    auto other_seed = cfg;
    other_seed.master_seed = 43;
    auto d = run_simulation(other_seed, f.data, f.split, f.trace);
    CHECK(format_log(d.log) != format_log(a.log));
}

TEST_CASE("retraining follows the configured cadence") {
    auto f = make_fixture(5);
    auto cfg = base_config(5);
    cfg.eta = 0.5;
    cfg.retrain_interval_epochs = 2;
    std::vector<int> trained;
    SimHooks hooks;
    hooks.on_retrain = [&](int epoch, const ScoringModel&) { trained.push_back(epoch); };
    run_simulation(cfg, f.data, f.split, f.trace, hooks);
    CHECK(trained == std::vector<int>{0, 2, 4});

    trained.clear();
    cfg.retrain_interval_epochs = 1;
    run_simulation(cfg, f.data, f.split, f.trace, hooks);
    CHECK(trained == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("training window slides once history outgrows the cap") {
    auto f = make_fixture(5);
    auto cfg = base_config(5);
    cfg.eta = 0.5;
    cfg.sliding_window_days = 90;
    std::vector<TrainWindow> windows;
    SimHooks hooks;
    hooks.on_retrain = [&](int, const ScoringModel& m) { windows.push_back(m.trained_on()); };
    run_simulation(cfg, f.data, f.split, f.trace, hooks);

    REQUIRE(windows.size() == 5);
    for (const auto& w : windows) CHECK(w.init == DayRange{0, 60});
    // epoch starts 60,90,120,150,180: the cap is exceeded only at 180
    CHECK(windows[0].recent == DayRange{60, 60});
    CHECK(windows[1].recent == DayRange{60, 90});
    CHECK(windows[3].recent == DayRange{60, 150});
    CHECK(windows[4].recent == DayRange{90, 180});
}

TEST_CASE("resuming from a checkpoint replays the exact run") {
    auto f = make_fixture(4);
    auto cfg = base_config(4);
    cfg.eta = 0.5;

    Checkpoint cp;
    bool have_cp = false;
    SimHooks record;
    record.config_digest = 111;
    record.data_digest = 222;
    record.on_checkpoint = [&](const Checkpoint& c) {
        if (c.next_epoch == 2) {
            cp = c;
            have_cp = true;
        }
    };
    auto straight = run_simulation(cfg, f.data, f.split, f.trace, record);
    REQUIRE(have_cp);
    CHECK(cp.config_digest == 111);

    SimHooks resume;
    resume.config_digest = 111;
    resume.data_digest = 222;
    resume.resume = &cp;
    auto resumed = run_simulation(cfg, f.data, f.split, f.trace, resume);
    CHECK(format_log(resumed.log) == format_log(straight.log));
    CHECK(report_lines(resumed.reports) == report_lines(straight.reports));

    // the checkpoint text form round-trips into the same continuation
    Checkpoint parsed = Checkpoint::from_json(cp.to_json());
    SimHooks resume2 = resume;
    resume2.resume = &parsed;
    auto resumed2 = run_simulation(cfg, f.data, f.split, f.trace, resume2);
    CHECK(format_log(resumed2.log) == format_log(straight.log));
}

TEST_CASE("resume refuses mismatched or tampered checkpoints") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 0.5;

    Checkpoint cp;
    SimHooks record;
    record.config_digest = 111;
    record.data_digest = 222;
    record.on_checkpoint = [&](const Checkpoint& c) {
        if (c.next_epoch == 1) cp = c;
    };
    run_simulation(cfg, f.data, f.split, f.trace, record);
    REQUIRE(cp.next_epoch == 1);

    SimHooks resume;
    resume.resume = &cp;
    resume.config_digest = 999; // different configuration fingerprint
    resume.data_digest = 222;
    CHECK_THROWS_AS(run_simulation(cfg, f.data, f.split, f.trace, resume), ValidationError);

    resume.config_digest = 111;
    resume.data_digest = 999;
    CHECK_THROWS_AS(run_simulation(cfg, f.data, f.split, f.trace, resume), ValidationError);
    resume.data_digest = 222;

    Checkpoint bad_day = cp;
    REQUIRE(!bad_day.simulated.empty());
    bad_day.simulated[0].day = 60 + 2 * 30; // beyond the resumed span
    resume.resume = &bad_day;
    CHECK_THROWS_AS(run_simulation(cfg, f.data, f.split, f.trace, resume), ValidationError);

    Checkpoint bad_users = cp;
    bad_users.user_rng_state.pop_back();
    resume.resume = &bad_users;
    CHECK_THROWS_AS(run_simulation(cfg, f.data, f.split, f.trace, resume), ValidationError);

    Checkpoint bad_epoch = cp;
    bad_epoch.next_epoch = 7; // past the configured run
    resume.resume = &bad_epoch;
    CHECK_THROWS_AS(run_simulation(cfg, f.data, f.split, f.trace, resume), ValidationError);

    CHECK_THROWS_AS(Checkpoint::from_json("not json"), ValidationError);
    CHECK_THROWS_AS(Checkpoint::from_json("{}"), ValidationError);
}

TEST_CASE("distinct baskets suppress within-day repeats") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 1.0; // reclist sampling repeats items readily

    auto count_user_day_repeats = [](const InteractionLog& log) {
        int repeats = 0;
        std::set<std::tuple<uint32_t, int32_t, uint32_t>> seen;
        for (const auto& e : log.events) {
            if (e.day < 60) continue;
            if (!seen.insert({e.user, e.day, e.item}).second) ++repeats;
        }
        return repeats;
    };

    auto loose = run_simulation(cfg, f.data, f.split, f.trace);
    CHECK(count_user_day_repeats(loose.log) > 0);

    cfg.distinct_basket = true;
    auto strict = run_simulation(cfg, f.data, f.split, f.trace);
    CHECK(count_user_day_repeats(strict.log) == 0);
}

TEST_CASE("metrics window optionally includes the initialization prefix") {
    auto f = make_fixture(2);
    auto cfg = base_config(2);
    cfg.eta = 0.5;
    auto sim_only = run_simulation(cfg, f.data, f.split, f.trace);
    cfg.include_init_in_metrics = true;
    auto with_init = run_simulation(cfg, f.data, f.split, f.trace);
    // same events either way, different measurement span
    CHECK(format_log(sim_only.log) == format_log(with_init.log));
    CHECK(report_lines(sim_only.reports) != report_lines(with_init.reports));
}

TEST_CASE("epoch reports round-trip through their line format") {
    auto f = make_fixture(1);
    auto cfg = base_config(1);
    cfg.eta = 0.3;
    auto res = run_simulation(cfg, f.data, f.split, f.trace);
    REQUIRE(res.reports.size() == 1);
    const auto& r = res.reports[0];
    EpochReport back = epoch_report_from_json(to_json_line(r));
    CHECK(back.epoch == r.epoch);
    CHECK(back.mean_individual_gini == r.mean_individual_gini);
    CHECK(back.collective_gini == r.collective_gini);
    CHECK(back.mean_jaccard == r.mean_jaccard);
    CHECK(back.item_coverage == r.item_coverage);
    CHECK(back.events_this_epoch == r.events_this_epoch);
    CHECK(back.adoption_events == r.adoption_events);
}

TEST_CASE("bad configurations and inadequate traces are rejected") {
    auto f = make_fixture(2);
    auto good = base_config(2);

    auto expect_reject = [&](EngineConfig cfg) {
        CHECK_THROWS_AS(run_simulation(cfg, f.data, f.split, f.trace), ValidationError);
    };
    auto cfg = good;
    cfg.eta = 1.5;
    expect_reject(cfg);
    cfg = good;
    cfg.eta = -0.1;
    expect_reject(cfg);
    cfg = good;
    cfg.n_epochs = 0;
    expect_reject(cfg);
    cfg = good;
    cfg.k_reclist = 0;
    expect_reject(cfg);
    cfg = good;
    cfg.candidate_set_size = 4;
    expect_reject(cfg);
    cfg = good;
    cfg.tau.min = 0.0;
    expect_reject(cfg);
    cfg = good;
    cfg.retrain_interval_epochs = 0;
    expect_reject(cfg);

    // trace stops one epoch short of the configured horizon
    auto short_trace = build_activity_trace(f.data, {60, 90});
    CHECK_THROWS_AS(run_simulation(good, f.data, f.split, short_trace), ValidationError);

    // the initialization prefix must cover at least one epoch
    auto split = f.split;
    split.sim_start_day = 20;
    auto wide_trace = build_activity_trace(f.data, {20, 120});
    CHECK_THROWS_AS(run_simulation(good, f.data, split, wide_trace), ValidationError);
}
