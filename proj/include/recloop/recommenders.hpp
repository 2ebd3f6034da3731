#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "recloop/rng.hpp"
#include "recloop/types.hpp"

namespace recloop {

enum class ModelKind { ItemKnn, BprMf, Popularity, Random };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

struct ItemKnnParams {
    int k_neighbors = 100;
    double shrink = 0.0;
};

struct BprParams {
    int dim = 32;
    double learning_rate = 0.001;
    double l2 = 1e-4;
    int epochs = 50; // full passes over the event list
    double init_std = 0.01;
};

struct ModelParams {
    ItemKnnParams itemknn;
    BprParams bpr;
};

struct RankedList {
    std::vector<uint32_t> items;  // no duplicates
    std::vector<double> scores;   // non-increasing, ties by ascending item
};

// Training window: the fixed initialization prefix plus, once the simulation
// has run long enough to slide, a recent span of simulated days.
struct TrainWindow {
    DayRange init{0, 0};
    DayRange recent{0, 0};
};

class ScoringModel {
public:
    virtual ~ScoringModel() = default;
    virtual ModelKind kind() const = 0;
    virtual double score(uint32_t user, uint32_t item) const = 0;

    // k highest-scoring items over the whole catalog. Consumed items stay
    // eligible; repeat recommendation is meaningful in both target domains.
    virtual RankedList top_k(uint32_t user, int k) const = 0;

    size_t user_count() const { return n_users_; }
    size_t item_count() const { return n_items_; }
    const TrainWindow& trained_on() const { return trained_on_; }

    std::string save_json() const;

protected:
    virtual void serialize_state(void* json_out) const = 0;

    size_t n_users_ = 0;
    size_t n_items_ = 0;
    TrainWindow trained_on_;

    friend std::unique_ptr<ScoringModel> train_model(ModelKind, const InteractionLog&,
                                                     TrainWindow, const ModelParams&,
                                                     uint64_t);
    friend std::unique_ptr<ScoringModel> load_model_json(const std::string&);
};

// Deterministic for a given seed. Event order inside `log` is the canonical
// day sort; both windows may refer to it.
std::unique_ptr<ScoringModel> train_model(ModelKind kind, const InteractionLog& log,
                                          TrainWindow window, const ModelParams& params,
                                          uint64_t seed);

std::unique_ptr<ScoringModel> load_model_json(const std::string& text);

// Ranks every score, keeping the k best. Ties broken toward the lower index.
RankedList rank_top_k(std::span<const double> scores, int k);

// One algorithmic pick: softmax over the list's scores at unit temperature,
// inverse-CDF draw. Consumes exactly one uniform.
uint32_t sample_from_reclist(const RankedList& ranked, Rng& rng);

struct EvalReport {
    double ndcg = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double item_coverage = 0.0;
    size_t eval_users = 0; // users with at least one test-range item
};

// Offline ranking quality against each user's distinct test-range items,
// averaged over users with a non-empty test set.
EvalReport evaluate(const ScoringModel& model, const InteractionLog& log,
                    DayRange test, int k);

} // namespace recloop
