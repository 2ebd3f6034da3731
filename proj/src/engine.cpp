#include "recloop/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "json.hpp"

namespace recloop {

using nlohmann::json;

void EngineConfig::validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in [0,1]");
    if (k_reclist < 1) throw ValidationError("k_reclist must be >= 1");
    if (n_epochs < 1) throw ValidationError("n_epochs must be >= 1");
    if (epoch_length_days < 1) throw ValidationError("epoch_length_days must be >= 1");
    if (retrain_interval_epochs < 1) throw ValidationError("retrain interval must be >= 1");
    if (sliding_window_days < 1) throw ValidationError("sliding_window_days must be >= 1");
    if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
    if (candidate_set_size < 5) throw ValidationError("candidate_set_size must be >= 5");
    if (run_index < 0) throw ValidationError("run_index must be >= 0");
    if (!(tau.min > 0.0 && tau.max >= tau.min)) throw ValidationError("bad tau clamp range");
}

std::string to_json_line(const EpochReport& r) {
    json j;
    j["epoch"] = r.epoch;
    j["mean_individual_gini"] = r.mean_individual_gini;
    j["collective_gini"] = r.collective_gini;
    j["mean_jaccard"] = r.mean_jaccard;
    j["item_coverage"] = r.item_coverage;
    j["events_this_epoch"] = r.events_this_epoch;
    j["adoption_events"] = r.adoption_events;
    return j.dump();
}

EpochReport epoch_report_from_json(const std::string& line) {
    json j = json::parse(line);
    EpochReport r;
    r.epoch = j.at("epoch").get<int>();
    r.mean_individual_gini = j.at("mean_individual_gini").get<double>();
    r.collective_gini = j.at("collective_gini").get<double>();
    r.mean_jaccard = j.at("mean_jaccard").get<double>();
    r.item_coverage = j.at("item_coverage").get<double>();
    r.events_this_epoch = j.at("events_this_epoch").get<uint64_t>();
    r.adoption_events = j.at("adoption_events").get<uint64_t>();
    return r;
}

std::string Checkpoint::to_json() const {
    json j;
    j["format"] = "recloop-checkpoint";
    j["version"] = 1;
    j["config_digest"] = config_digest;
    j["data_digest"] = data_digest;
    j["next_epoch"] = next_epoch;
    j["last_train_epoch"] = last_train_epoch;
    j["user_rng_state"] = user_rng_state;
    json users = json::array(), items = json::array(), days = json::array();
    for (const auto& e : simulated) {
        users.push_back(e.user);
        items.push_back(e.item);
        days.push_back(e.day);
    }
    j["events"] = {{"user", std::move(users)}, {"item", std::move(items)}, {"day", std::move(days)}};
    json reps = json::array();
    for (const auto& r : reports) reps.push_back(json::parse(to_json_line(r)));
    j["reports"] = std::move(reps);
    return j.dump();
}

Checkpoint Checkpoint::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValidationError("checkpoint file is not a JSON object");
    if (j.value("format", "") != "recloop-checkpoint" || j.value("version", 0) != 1)
        throw ValidationError("not a version-1 checkpoint file");
    Checkpoint c;
    c.config_digest = j.at("config_digest").get<uint64_t>();
    c.data_digest = j.at("data_digest").get<uint64_t>();
    c.next_epoch = j.at("next_epoch").get<int>();
    c.last_train_epoch = j.at("last_train_epoch").get<int>();
    c.user_rng_state = j.at("user_rng_state").get<std::vector<uint64_t>>();
    const json& ev = j.at("events");
    const auto& users = ev.at("user");
    const auto& items = ev.at("item");
    const auto& days = ev.at("day");
    if (users.size() != items.size() || users.size() != days.size())
        throw ValidationError("checkpoint event columns disagree in length");
    c.simulated.reserve(users.size());
    for (size_t i = 0; i < users.size(); ++i)
        c.simulated.push_back({users[i].get<uint32_t>(), items[i].get<uint32_t>(),
                               days[i].get<int32_t>()});
    for (const auto& r : j.at("reports")) c.reports.push_back(epoch_report_from_json(r.dump()));
    return c;
}

namespace {

TrainWindow train_window_at(int sim_start, int epoch_start, int sliding_window_days) {
    TrainWindow w;
    w.init = {0, sim_start};
    if (epoch_start - sim_start > sliding_window_days)
        w.recent = {epoch_start - sliding_window_days, epoch_start};
    else
        w.recent = {sim_start, epoch_start}; // empty at cold start
    return w;
}

struct EngineState {
    InteractionLog d_post;
    PopulationStats stats;
    std::vector<double> tau;
    std::vector<Rng> streams;
    std::unique_ptr<ScoringModel> model;
    int last_train_epoch = 0;
    std::vector<EpochReport> reports;
    std::vector<Interaction> simulated;
};

} // namespace

SimulationResult run_simulation(const EngineConfig& cfg, const InteractionLog& data,
                                const TemporalSplit& split, const ActivityTrace& trace,
                                const SimHooks& hooks) {
    cfg.validate();
    const int sim_start = split.sim_start_day;
    const int L = cfg.epoch_length_days;
    const DayRange sim_window{sim_start, sim_start + cfg.n_epochs * L};
    if (trace.window.begin > sim_window.begin || trace.window.end < sim_window.end)
        throw ValidationError("activity trace does not cover the simulation window");
    if (sim_start < L)
        throw ValidationError("initialization prefix shorter than one epoch");

    const size_t n_users = data.user_count();

    EngineState st;
    st.d_post.user_ids = data.user_ids;
    st.d_post.item_ids = data.item_ids;
    st.d_post.rebuild_index();
    {
        auto init = data.window({0, sim_start});
        st.d_post.events.assign(init.begin(), init.end());
    }
    st.stats = PopulationStats::from_log(st.d_post, {0, sim_start});

    // exploration temperatures from the training slice of the real data
    {
        std::vector<std::vector<Interaction>> per_user(n_users);
        for (const auto& e : data.window(split.train)) per_user[e.user].push_back(e);
        st.tau.resize(n_users);
        for (uint32_t u = 0; u < n_users; ++u)
            st.tau[u] = estimate_tau(per_user[u], split.train, cfg.tau);
    }

    st.streams.reserve(n_users);
    for (uint32_t u = 0; u < n_users; ++u)
        st.streams.emplace_back(derive_seed(cfg.master_seed, 0x55534552ULL, // "USER"
                                            static_cast<uint64_t>(cfg.run_index), u));

    auto train_at = [&](int epoch) {
        TrainWindow w = train_window_at(sim_start, sim_start + epoch * L,
                                        cfg.sliding_window_days);
        uint64_t seed = derive_seed(cfg.master_seed, 0x4d4f444cULL, // "MODL"
                                    static_cast<uint64_t>(cfg.run_index),
                                    static_cast<uint64_t>(epoch));
        st.model = train_model(cfg.model_kind, st.d_post, w, cfg.model_params, seed);
        st.last_train_epoch = epoch;
        if (hooks.on_retrain) hooks.on_retrain(epoch, *st.model);
    };

    int first_epoch = 0;
    if (hooks.resume) {
        const Checkpoint& c = *hooks.resume;
        if (c.config_digest != hooks.config_digest)
            throw ValidationError("checkpoint was written for a different configuration");
        if (c.data_digest != hooks.data_digest)
            throw ValidationError("checkpoint was written for a different dataset");
        if (c.user_rng_state.size() != n_users)
            throw ValidationError("checkpoint user count mismatch");
        if (c.next_epoch < 1 || c.next_epoch > cfg.n_epochs)
            throw ValidationError("checkpoint epoch outside the configured run");
        int resume_day = sim_start + c.next_epoch * L;
        int32_t prev_day = sim_start;
        for (const auto& e : c.simulated) {
            if (e.day < prev_day || e.day >= resume_day)
                throw ValidationError("checkpoint events outside the simulated span");
            prev_day = e.day;
            st.d_post.events.push_back(e);
            st.simulated.push_back(e);
        }
        st.stats = PopulationStats::from_log(st.d_post, {0, resume_day});
        for (size_t u = 0; u < n_users; ++u) st.streams[u].set_state(c.user_rng_state[u]);
        st.reports = c.reports;
        train_at(c.last_train_epoch);
        first_epoch = c.next_epoch;
    } else {
        train_at(0);
    }

    std::vector<CandidateSet> candidates(n_users);
    std::vector<RankedList> topk_cache(n_users);
    std::vector<char> topk_ready(n_users, 0);
    int cached_train_epoch = -1;

    for (int e = first_epoch; e < cfg.n_epochs; ++e) {
        auto epoch_clock = std::chrono::steady_clock::now();
        const int epoch_start = sim_start + e * L;
        const int epoch_end = epoch_start + L;

        if (e > 0 && e - st.last_train_epoch >= cfg.retrain_interval_epochs) train_at(e);
        if (st.last_train_epoch != cached_train_epoch) {
            std::fill(topk_ready.begin(), topk_ready.end(), 0);
            cached_train_epoch = st.last_train_epoch;
        }

        auto gpop = global_pop_ranking(st.d_post, {epoch_start - L, epoch_start});
        for (uint32_t u = 0; u < n_users; ++u)
            candidates[u] = build_candidate_set(u, st.stats, gpop,
                                                cfg.candidate_set_size, st.streams[u]);

        uint64_t epoch_events = 0, adoption = 0;
        std::vector<Interaction> day_events;
        std::vector<std::vector<Interaction>> per_user_picks(n_users);
        for (int day = epoch_start; day < epoch_end; ++day) {
            const auto& active = trace.days[day - trace.window.begin];
            day_events.clear();

            auto handle_user = [&](uint32_t u, uint32_t basket) {
                auto& picks = per_user_picks[u];
                picks.clear();
                Rng& rng = st.streams[u];
                std::vector<uint32_t> in_basket;
                for (uint32_t slot = 0; slot < basket; ++slot) {
                    bool algorithmic = rng.next_double() < cfg.eta;
                    if (algorithmic) ++adoption;
                    auto draw = [&]() -> uint32_t {
                        if (algorithmic) {
                            if (!topk_ready[u]) {
                                topk_cache[u] = st.model->top_k(u, cfg.k_reclist);
                                topk_ready[u] = 1;
                            }
                            return sample_from_reclist(topk_cache[u], rng);
                        }
                        return sample_autonomous(u, candidates[u], st.stats,
                                                 cfg.lambda, st.tau[u], rng);
                    };
                    uint32_t item = draw();
                    if (cfg.distinct_basket) {
                        int tries = 0;
                        while (tries < 10 && std::find(in_basket.begin(), in_basket.end(),
                                                       item) != in_basket.end()) {
                            item = draw();
                            ++tries;
                        }
                        in_basket.push_back(item);
                    }
                    picks.push_back({u, item, day});
                }
            };

            if (hooks.reverse_user_order) {
                for (auto it = active.rbegin(); it != active.rend(); ++it)
                    handle_user(it->first, it->second);
            } else {
                for (const auto& [u, basket] : active) handle_user(u, basket);
            }
            // canonical order regardless of processing order
            for (const auto& [u, basket] : active)
                for (const auto& ev : per_user_picks[u]) day_events.push_back(ev);

            st.d_post.append_day(day_events);
            st.stats.update_day(day_events, day);
            st.simulated.insert(st.simulated.end(), day_events.begin(), day_events.end());
            epoch_events += day_events.size();
        }

        EpochReport rep;
        rep.epoch = e;
        DayRange w{cfg.include_init_in_metrics ? 0 : sim_start, epoch_end};
        rep.mean_individual_gini = mean_individual_gini(st.d_post, w);
        rep.collective_gini = collective_gini(st.d_post, w);
        JaccardOptions jac;
        jac.exact_max_users = cfg.jaccard_exact_max_users;
        jac.sample_pairs = cfg.jaccard_sample_pairs;
        jac.seed = derive_seed(cfg.master_seed, static_cast<uint64_t>(cfg.run_index),
                               static_cast<uint64_t>(e));
        rep.mean_jaccard = mean_jaccard(st.d_post, w, jac);
        rep.item_coverage = item_coverage(st.d_post, w);
        rep.events_this_epoch = epoch_events;
        rep.adoption_events = adoption;
        st.reports.push_back(rep);

        double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - epoch_clock)
                             .count();
        if (hooks.on_epoch) hooks.on_epoch(rep, wall_ms);
        if (hooks.on_checkpoint) {
            Checkpoint c;
            c.config_digest = hooks.config_digest;
            c.data_digest = hooks.data_digest;
            c.next_epoch = e + 1;
            c.last_train_epoch = st.last_train_epoch;
            c.user_rng_state.reserve(n_users);
            for (const auto& s : st.streams) c.user_rng_state.push_back(s.state());
            c.simulated = st.simulated;
            c.reports = st.reports;
            hooks.on_checkpoint(c);
        }
    }

    SimulationResult result;
    result.log = std::move(st.d_post);
    result.reports = std::move(st.reports);
    return result;
}

} // namespace recloop
