#include "recloop/recommenders.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "recloop/choice.hpp"

namespace recloop {

using nlohmann::json;

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "itemknn") return ModelKind::ItemKnn;
    if (name == "bpr") return ModelKind::BprMf;
    if (name == "popularity") return ModelKind::Popularity;
    if (name == "random") return ModelKind::Random;
    throw ValidationError("unknown model kind: " + name);
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::ItemKnn: return "itemknn";
        case ModelKind::BprMf: return "bpr";
        case ModelKind::Popularity: return "popularity";
        case ModelKind::Random: return "random";
    }
    throw std::runtime_error("unreachable model kind");
}

RankedList rank_top_k(std::span<const double> scores, int k) {
    if (k < 1) throw ValidationError("top-k needs k >= 1");
    size_t kk = std::min<size_t>(static_cast<size_t>(k), scores.size());
    std::vector<uint32_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(),
                      [&](uint32_t a, uint32_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    RankedList out;
    out.items.assign(idx.begin(), idx.begin() + kk);
    out.scores.reserve(kk);
    for (size_t i = 0; i < kk; ++i) out.scores.push_back(scores[idx[i]]);
    return out;
}

uint32_t sample_from_reclist(const RankedList& ranked, Rng& rng) {
    if (ranked.items.empty())
        throw ValidationError("sampling from an empty recommendation list");
    auto probs = softmax(ranked.scores, 1.0);
    return ranked.items[sample_index(probs, rng)];
}

namespace {

using CountList = std::vector<std::pair<uint32_t, uint32_t>>; // (item, count), item-ascending

std::vector<Interaction> window_events(const InteractionLog& log, TrainWindow w) {
    std::vector<Interaction> out;
    auto a = log.window(w.init);
    out.insert(out.end(), a.begin(), a.end());
    if (!w.recent.empty()) {
        auto b = log.window(w.recent);
        out.insert(out.end(), b.begin(), b.end());
    }
    if (out.empty()) throw ValidationError("empty training window");
    return out;
}

std::vector<CountList> per_user_counts(std::span<const Interaction> events, size_t n_users) {
    std::vector<std::vector<uint32_t>> raw(n_users);
    for (const auto& e : events) raw[e.user].push_back(e.item);
    std::vector<CountList> lists(n_users);
    for (size_t u = 0; u < n_users; ++u) {
        auto& r = raw[u];
        std::sort(r.begin(), r.end());
        auto& out = lists[u];
        for (size_t i = 0; i < r.size();) {
            size_t j = i;
            while (j < r.size() && r[j] == r[i]) ++j;
            out.emplace_back(r[i], static_cast<uint32_t>(j - i));
            i = j;
        }
    }
    return lists;
}

double unit_double(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

json range_json(DayRange r) { return json::array({r.begin, r.end}); }
DayRange range_from(const json& j) { return {j.at(0).get<int32_t>(), j.at(1).get<int32_t>()}; }

class PopularityModel final : public ScoringModel {
public:
    PopularityModel(std::span<const Interaction> events, size_t n_users, size_t n_items) {
        n_users_ = n_users;
        n_items_ = n_items;
        counts_.assign(n_items, 0);
        for (const auto& e : events) ++counts_[e.item];
        finish();
    }
    PopularityModel(std::vector<double> counts, size_t n_users) {
        n_users_ = n_users;
        n_items_ = counts.size();
        counts_ = std::move(counts);
        finish();
    }

    ModelKind kind() const override { return ModelKind::Popularity; }
    // Log-domain so that softmax sampling over a reclist is proportional to
    // 1 + raw count instead of collapsing onto the single most popular item.
    double score(uint32_t, uint32_t item) const override { return std::log1p(counts_.at(item)); }
    RankedList top_k(uint32_t, int k) const override {
        if (k < 1) throw ValidationError("top-k needs k >= 1");
        size_t kk = std::min<size_t>(static_cast<size_t>(k), ranking_.items.size());
        RankedList out;
        out.items.assign(ranking_.items.begin(), ranking_.items.begin() + kk);
        out.scores.assign(ranking_.scores.begin(), ranking_.scores.begin() + kk);
        return out;
    }

    const std::vector<double>& counts() const { return counts_; }

protected:
    void serialize_state(void* json_out) const override {
        auto& j = *static_cast<json*>(json_out);
        j["counts"] = counts_;
    }

private:
    void finish() {
        std::vector<double> scored(counts_.size());
        for (size_t i = 0; i < counts_.size(); ++i) scored[i] = std::log1p(counts_[i]);
        ranking_ = rank_top_k(scored, static_cast<int>(n_items_));
    }

    std::vector<double> counts_;
    RankedList ranking_; // full catalog, shared by every user
};

class RandomModel final : public ScoringModel {
public:
    RandomModel(size_t n_users, size_t n_items, uint64_t seed) : seed_(seed) {
        n_users_ = n_users;
        n_items_ = n_items;
    }

    ModelKind kind() const override { return ModelKind::Random; }
    double score(uint32_t user, uint32_t item) const override {
        return unit_double(derive_seed(seed_, user, item));
    }
    RankedList top_k(uint32_t user, int k) const override {
        std::vector<double> s(n_items_);
        for (uint32_t i = 0; i < n_items_; ++i) s[i] = score(user, i);
        return rank_top_k(s, k);
    }
    uint64_t seed() const { return seed_; }

protected:
    void serialize_state(void* json_out) const override {
        auto& j = *static_cast<json*>(json_out);
        j["seed"] = seed_;
    }

private:
    uint64_t seed_;
};

class ItemKnnModel final : public ScoringModel {
public:
    using Row = std::vector<std::pair<uint32_t, double>>; // (neighbour, sim), index-ascending

    ItemKnnModel(std::span<const Interaction> events, size_t n_users, size_t n_items,
                 ItemKnnParams params)
        : params_(params) {
        n_users_ = n_users;
        n_items_ = n_items;
        if (params.k_neighbors < 1) throw ValidationError("k_neighbors must be >= 1");
        if (params.shrink < 0) throw ValidationError("shrink must be >= 0");
        user_counts_ = per_user_counts(events, n_users);
        build_similarity();
        build_transpose();
    }

    ItemKnnModel(ItemKnnParams params, std::vector<CountList> user_counts,
                 std::vector<Row> rows, size_t n_items)
        : params_(params), user_counts_(std::move(user_counts)), rows_(std::move(rows)) {
        n_users_ = user_counts_.size();
        n_items_ = n_items;
        build_transpose();
    }

    ModelKind kind() const override { return ModelKind::ItemKnn; }

    double score(uint32_t user, uint32_t item) const override {
        // merge walk in ascending item order; the same order the transpose
        // accumulation uses, so both paths sum identically
        const auto& mine = user_counts_.at(user);
        const Row& row = rows_.at(item);
        double acc = 0.0;
        size_t a = 0, b = 0;
        while (a < mine.size() && b < row.size()) {
            if (mine[a].first < row[b].first) ++a;
            else if (row[b].first < mine[a].first) ++b;
            else {
                acc += row[b].second * static_cast<double>(mine[a].second);
                ++a;
                ++b;
            }
        }
        return acc;
    }

    RankedList top_k(uint32_t user, int k) const override {
        std::vector<double> acc(n_items_, 0.0);
        for (const auto& [j, c] : user_counts_.at(user))
            for (const auto& [i, s] : transpose_[j])
                acc[i] += s * static_cast<double>(c);
        return rank_top_k(acc, k);
    }

    const std::vector<Row>& rows() const { return rows_; }
    const ItemKnnParams& params() const { return params_; }

protected:
    void serialize_state(void* json_out) const override {
        auto& j = *static_cast<json*>(json_out);
        j["k_neighbors"] = params_.k_neighbors;
        j["shrink"] = params_.shrink;
        json rows = json::array();
        for (const auto& row : rows_) {
            json r = json::array();
            for (const auto& [n, s] : row) r.push_back(json::array({n, s}));
            rows.push_back(std::move(r));
        }
        j["rows"] = std::move(rows);
        json uc = json::array();
        for (const auto& list : user_counts_) {
            json l = json::array();
            for (const auto& [i, c] : list) l.push_back(json::array({i, c}));
            uc.push_back(std::move(l));
        }
        j["user_counts"] = std::move(uc);
    }

private:
    void build_similarity() {
        std::vector<double> norm(n_items_, 0.0);
        for (const auto& list : user_counts_)
            for (const auto& [i, c] : list) norm[i] += static_cast<double>(c) * c;
        for (double& v : norm) v = std::sqrt(v);

        std::vector<std::vector<std::pair<uint32_t, uint32_t>>> inverted(n_items_);
        for (uint32_t u = 0; u < user_counts_.size(); ++u)
            for (const auto& [i, c] : user_counts_[u]) inverted[i].emplace_back(u, c);

        rows_.assign(n_items_, {});
        std::vector<double> buf(n_items_, 0.0);
        std::vector<uint32_t> touched;
        for (uint32_t a = 0; a < n_items_; ++a) {
            if (norm[a] == 0.0) continue;
            for (const auto& [u, ca] : inverted[a])
                for (const auto& [b, cb] : user_counts_[u]) {
                    if (buf[b] == 0.0) touched.push_back(b);
                    buf[b] += static_cast<double>(ca) * cb;
                }
            std::vector<std::pair<uint32_t, double>> cand;
            cand.reserve(touched.size());
            for (uint32_t b : touched) {
                if (b != a && norm[b] > 0.0) {
                    double sim = buf[b] / (norm[a] * norm[b] + params_.shrink);
                    if (sim > 0.0) cand.emplace_back(b, sim);
                }
                buf[b] = 0.0;
            }
            touched.clear();
            size_t keep = std::min<size_t>(params_.k_neighbors, cand.size());
            std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(),
                              [](const auto& x, const auto& y) {
                                  if (x.second != y.second) return x.second > y.second;
                                  return x.first < y.first;
                              });
            cand.resize(keep);
            std::sort(cand.begin(), cand.end()); // stored index-ascending
            rows_[a] = std::move(cand);
        }
    }

    void build_transpose() {
        transpose_.assign(n_items_, {});
        for (uint32_t i = 0; i < n_items_; ++i)
            for (const auto& [j, s] : rows_[i]) transpose_[j].emplace_back(i, s);
    }

    ItemKnnParams params_;
    std::vector<CountList> user_counts_;
    std::vector<Row> rows_;
    std::vector<Row> transpose_; // (scored item, sim) per consumed item
};

class BprModel final : public ScoringModel {
public:
    BprModel(std::span<const Interaction> events, size_t n_users, size_t n_items,
             BprParams params, uint64_t seed)
        : params_(params) {
        n_users_ = n_users;
        n_items_ = n_items;
        if (params.dim < 1) throw ValidationError("factor dim must be >= 1");
        if (params.epochs < 0) throw ValidationError("epochs must be >= 0");

        Rng rng(derive_seed(seed, 0x42505246ULL)); // "BPRF"
        user_factors_.resize(n_users * params.dim);
        item_factors_.resize(n_items * params.dim);
        for (double& v : user_factors_) v = rng.next_normal() * params.init_std;
        for (double& v : item_factors_) v = rng.next_normal() * params.init_std;

        std::vector<std::vector<uint32_t>> consumed(n_users);
        for (const auto& e : events) consumed[e.user].push_back(e.item);
        for (auto& c : consumed) {
            std::sort(c.begin(), c.end());
            c.erase(std::unique(c.begin(), c.end()), c.end());
        }

        const int d = params.dim;
        const double lr = params.learning_rate, l2 = params.l2;
        uint64_t steps = static_cast<uint64_t>(params.epochs) * events.size();
        std::vector<double> pu(d);
        for (uint64_t step = 0; step < steps; ++step) {
            const auto& e = events[rng.next_below(events.size())];
            uint32_t u = e.user, pos = e.item;
            const auto& cons = consumed[u];
            if (cons.size() >= n_items) continue; // nothing left to contrast against
            uint32_t neg;
            int tries = 0;
            do {
                neg = static_cast<uint32_t>(rng.next_below(n_items));
            } while (std::binary_search(cons.begin(), cons.end(), neg) && ++tries < 1000);
            if (tries >= 1000) continue;

            double* p = &user_factors_[static_cast<size_t>(u) * d];
            double* qi = &item_factors_[static_cast<size_t>(pos) * d];
            double* qj = &item_factors_[static_cast<size_t>(neg) * d];
            double x = 0.0;
            for (int f = 0; f < d; ++f) x += p[f] * (qi[f] - qj[f]);
            double g = 1.0 / (1.0 + std::exp(x));
            std::copy(p, p + d, pu.begin());
            for (int f = 0; f < d; ++f) {
                p[f] += lr * (g * (qi[f] - qj[f]) - l2 * p[f]);
                qi[f] += lr * (g * pu[f] - l2 * qi[f]);
                qj[f] += lr * (-g * pu[f] - l2 * qj[f]);
            }
        }
        for (double v : user_factors_)
            if (!std::isfinite(v)) throw std::runtime_error("non-finite user factor after training");
        for (double v : item_factors_)
            if (!std::isfinite(v)) throw std::runtime_error("non-finite item factor after training");
    }

    BprModel(BprParams params, std::vector<double> uf, std::vector<double> itf,
             size_t n_users, size_t n_items)
        : params_(params), user_factors_(std::move(uf)), item_factors_(std::move(itf)) {
        n_users_ = n_users;
        n_items_ = n_items;
    }

    ModelKind kind() const override { return ModelKind::BprMf; }

    double score(uint32_t user, uint32_t item) const override {
        const int d = params_.dim;
        const double* p = &user_factors_.at(static_cast<size_t>(user) * d);
        const double* q = &item_factors_.at(static_cast<size_t>(item) * d);
        double x = 0.0;
        for (int f = 0; f < d; ++f) x += p[f] * q[f];
        return x;
    }

    RankedList top_k(uint32_t user, int k) const override {
        std::vector<double> s(n_items_);
        for (uint32_t i = 0; i < n_items_; ++i) s[i] = score(user, i);
        return rank_top_k(s, k);
    }

    const BprParams& params() const { return params_; }

protected:
    void serialize_state(void* json_out) const override {
        auto& j = *static_cast<json*>(json_out);
        j["dim"] = params_.dim;
        j["learning_rate"] = params_.learning_rate;
        j["l2"] = params_.l2;
        j["epochs"] = params_.epochs;
        j["init_std"] = params_.init_std;
        j["user_factors"] = user_factors_;
        j["item_factors"] = item_factors_;
    }

private:
    BprParams params_;
    std::vector<double> user_factors_;
    std::vector<double> item_factors_;
};

} // namespace

std::string ScoringModel::save_json() const {
    json j;
    j["format"] = "recloop-model";
    j["version"] = 1;
    j["kind"] = to_string(kind());
    j["n_users"] = n_users_;
    j["n_items"] = n_items_;
    j["trained_on"] = {{"init", range_json(trained_on_.init)},
                       {"recent", range_json(trained_on_.recent)}};
    json state;
    serialize_state(&state);
    j["state"] = std::move(state);
    return j.dump();
}

std::unique_ptr<ScoringModel> train_model(ModelKind kind, const InteractionLog& log,
                                          TrainWindow window, const ModelParams& params,
                                          uint64_t seed) {
    auto events = window_events(log, window);
    size_t n_users = log.user_count(), n_items = log.item_count();
    std::unique_ptr<ScoringModel> model;
    switch (kind) {
        case ModelKind::Popularity:
            model = std::make_unique<PopularityModel>(std::span<const Interaction>(events),
                                                      n_users, n_items);
            break;
        case ModelKind::Random:
            model = std::make_unique<RandomModel>(n_users, n_items, seed);
            break;
        case ModelKind::ItemKnn:
            model = std::make_unique<ItemKnnModel>(std::span<const Interaction>(events),
                                                   n_users, n_items, params.itemknn);
            break;
        case ModelKind::BprMf:
            model = std::make_unique<BprModel>(std::span<const Interaction>(events),
                                               n_users, n_items, params.bpr, seed);
            break;
    }
    if (!model) throw ValidationError("unknown model kind");
    model->trained_on_ = window;
    return model;
}

std::unique_ptr<ScoringModel> load_model_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ValidationError("model file is not a JSON object");
    if (j.value("format", "") != "recloop-model" || j.value("version", 0) != 1)
        throw ValidationError("not a version-1 model file");
    size_t n_users = j.at("n_users").get<size_t>();
    size_t n_items = j.at("n_items").get<size_t>();
    ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
    const json& st = j.at("state");

    std::unique_ptr<ScoringModel> model;
    switch (kind) {
        case ModelKind::Popularity:
            model = std::make_unique<PopularityModel>(st.at("counts").get<std::vector<double>>(),
                                                      n_users);
            break;
        case ModelKind::Random:
            model = std::make_unique<RandomModel>(n_users, n_items, st.at("seed").get<uint64_t>());
            break;
        case ModelKind::ItemKnn: {
            ItemKnnParams p;
            p.k_neighbors = st.at("k_neighbors").get<int>();
            p.shrink = st.at("shrink").get<double>();
            std::vector<CountList> uc;
            for (const auto& l : st.at("user_counts")) {
                CountList list;
                for (const auto& e : l)
                    list.emplace_back(e.at(0).get<uint32_t>(), e.at(1).get<uint32_t>());
                uc.push_back(std::move(list));
            }
            std::vector<ItemKnnModel::Row> rows;
            for (const auto& r : st.at("rows")) {
                ItemKnnModel::Row row;
                for (const auto& e : r)
                    row.emplace_back(e.at(0).get<uint32_t>(), e.at(1).get<double>());
                rows.push_back(std::move(row));
            }
            model = std::make_unique<ItemKnnModel>(p, std::move(uc), std::move(rows), n_items);
            break;
        }
        case ModelKind::BprMf: {
            BprParams p;
            p.dim = st.at("dim").get<int>();
            p.learning_rate = st.at("learning_rate").get<double>();
            p.l2 = st.at("l2").get<double>();
            p.epochs = st.at("epochs").get<int>();
            p.init_std = st.at("init_std").get<double>();
            model = std::make_unique<BprModel>(p, st.at("user_factors").get<std::vector<double>>(),
                                               st.at("item_factors").get<std::vector<double>>(),
                                               n_users, n_items);
            break;
        }
    }
    const json& t = j.at("trained_on");
    model->trained_on_ = {range_from(t.at("init")), range_from(t.at("recent"))};
    return model;
}

EvalReport evaluate(const ScoringModel& model, const InteractionLog& log,
                    DayRange test, int k) {
    if (k < 1) throw ValidationError("evaluation needs k >= 1");
    if (model.item_count() != log.item_count() || model.user_count() != log.user_count())
        throw ValidationError("model and log disagree on catalog or user count");

    std::vector<std::vector<uint32_t>> test_items(log.user_count());
    for (const auto& e : log.window(test)) test_items[e.user].push_back(e.item);

    std::vector<double> discount(static_cast<size_t>(k) + 1, 0.0);
    for (int p = 1; p <= k; ++p) discount[p] = 1.0 / std::log2(static_cast<double>(p) + 1.0);

    EvalReport rep;
    std::vector<bool> covered(log.item_count(), false);
    for (uint32_t u = 0; u < log.user_count(); ++u) {
        auto& t = test_items[u];
        if (t.empty()) continue;
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());

        auto ranked = model.top_k(u, k);
        double dcg = 0.0;
        int hits = 0;
        for (size_t pos = 0; pos < ranked.items.size(); ++pos) {
            covered[ranked.items[pos]] = true;
            if (std::binary_search(t.begin(), t.end(), ranked.items[pos])) {
                ++hits;
                dcg += discount[pos + 1];
            }
        }
        double idcg = 0.0;
        for (size_t p = 1; p <= std::min<size_t>(k, t.size()); ++p) idcg += discount[p];
        rep.ndcg += dcg / idcg;
        rep.precision += static_cast<double>(hits) / k;
        rep.recall += static_cast<double>(hits) / static_cast<double>(t.size());
        ++rep.eval_users;
    }
    if (rep.eval_users == 0) throw ValidationError("no users with test-range events");
    rep.ndcg /= static_cast<double>(rep.eval_users);
    rep.precision /= static_cast<double>(rep.eval_users);
    rep.recall /= static_cast<double>(rep.eval_users);
    size_t hit = static_cast<size_t>(std::count(covered.begin(), covered.end(), true));
    rep.item_coverage = static_cast<double>(hit) / static_cast<double>(log.item_count());
    return rep;
}

} // namespace recloop
