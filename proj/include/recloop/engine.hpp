#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "recloop/choice.hpp"
#include "recloop/dataset.hpp"
#include "recloop/metrics.hpp"
#include "recloop/recommenders.hpp"
#include "recloop/stats.hpp"
#include "recloop/types.hpp"

namespace recloop {

struct EngineConfig {
    double eta = 0.0;              // per-slot probability of taking the recommendation
    int k_reclist = 20;            // recommendation list length
    int n_epochs = 24;
    int epoch_length_days = kDaysPerMonth;
    int retrain_interval_epochs = 1;
    int sliding_window_days = kDaysPerYear; // recent-history cap once exceeded
    double lambda = 1.0;           // rarity bonus weight in the utility
    int candidate_set_size = 50;
    TauConfig tau;
    ModelKind model_kind = ModelKind::Popularity;
    ModelParams model_params;
    uint64_t master_seed = 42;
    int run_index = 0;
    bool distinct_basket = false;  // resample within-basket repeats (up to 10 tries)
    bool include_init_in_metrics = false;
    size_t jaccard_exact_max_users = 2000;
    uint64_t jaccard_sample_pairs = 1000000;

    void validate() const;
};

struct EpochReport {
    int epoch = 0;
    double mean_individual_gini = 0.0;
    double collective_gini = 0.0;
    double mean_jaccard = 0.0;
    double item_coverage = 0.0;
    uint64_t events_this_epoch = 0;
    uint64_t adoption_events = 0; // slots resolved by the recommendation list
};

std::string to_json_line(const EpochReport& report);
EpochReport epoch_report_from_json(const std::string& line);

// Everything needed to continue a run from an epoch boundary. Restoring
// retrains the model deterministically instead of storing its state.
struct Checkpoint {
    uint64_t config_digest = 0;
    uint64_t data_digest = 0;
    int next_epoch = 0;
    int last_train_epoch = 0;
    std::vector<uint64_t> user_rng_state;
    std::vector<Interaction> simulated; // events appended since the start of simulation
    std::vector<EpochReport> reports;

    std::string to_json() const;
    static Checkpoint from_json(const std::string& text);
};

struct SimHooks {
    // invoked after each epoch's report is appended
    std::function<void(const EpochReport&, double wall_ms)> on_epoch;
    // invoked after each epoch when checkpointing is wanted
    std::function<void(const Checkpoint&)> on_checkpoint;
    // invoked right after every (re)training with the epoch it serves
    std::function<void(int epoch, const ScoringModel& model)> on_retrain;
    const Checkpoint* resume = nullptr;
    uint64_t config_digest = 0; // stamped into checkpoints, checked on resume
    uint64_t data_digest = 0;
    // process each day's users back to front; output must not change
    bool reverse_user_order = false;
};

struct SimulationResult {
    InteractionLog log; // initialization prefix plus simulated events
    std::vector<EpochReport> reports;
};

// The full loop: freeze statistics on the initialization prefix, train the
// model, then per epoch rebuild candidate sets, walk the activity trace day
// by day with per-slot adoption draws, fold each finished day into the
// statistics, and retrain on the configured cadence. Deterministic given
// (config, data, trace).
SimulationResult run_simulation(const EngineConfig& cfg, const InteractionLog& data,
                                const TemporalSplit& split, const ActivityTrace& trace,
                                const SimHooks& hooks = {});

} // namespace recloop
