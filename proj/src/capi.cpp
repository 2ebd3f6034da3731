#include "recloop.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "json.hpp"

#include "recloop/config.hpp"
#include "recloop/dataset.hpp"
#include "recloop/recommenders.hpp"
#include "recloop/runner.hpp"

using nlohmann::json;

struct rfl_log {
    recloop::InteractionLog log;
};

struct rfl_model {
    std::unique_ptr<recloop::ScoringModel> model;
};

namespace {

thread_local std::string t_last_error;

char* dup_cstring(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) return nullptr;
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename F>
rfl_status guarded(F&& body) {
    try {
        t_last_error.clear();
        return body();
    } catch (const recloop::ValidationError& e) {
        t_last_error = e.what();
        return RFL_ERR_INVALID;
    } catch (const json::exception& e) { // malformed JSON arguments
        t_last_error = e.what();
        return RFL_ERR_INVALID;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return RFL_ERR_RUNTIME;
    } catch (...) {
        t_last_error = "unknown error";
        return RFL_ERR_RUNTIME;
    }
}

rfl_status invalid(const char* message) {
    t_last_error = message;
    return RFL_ERR_INVALID;
}

rfl_status emit(char** out, const std::string& text) {
    *out = dup_cstring(text);
    if (!*out) {
        t_last_error = "out of memory";
        return RFL_ERR_RUNTIME;
    }
    return RFL_OK;
}

recloop::LoadOptions load_options_from_json(const char* options_json) {
    if (!options_json || !*options_json) return recloop::LoadOptions::preset("canonical");
    json opt = json::parse(options_json);
    for (const auto& [key, value] : opt.items()) {
        (void)value;
        static const char* known[] = {"preset",        "delimiter",     "has_header",
                                      "user_column",   "item_column",   "time_column",
                                      "user_position", "item_position", "time_position",
                                      "time_format"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw recloop::ValidationError("unknown load option: " + key);
    }
    std::string preset = opt.value("preset", "canonical");
    recloop::LoadOptions o = recloop::LoadOptions::preset(preset);
    if (preset == "custom") {
        std::string delim = opt.value("delimiter", ",");
        if (delim == "\\t" || delim == "tab") delim = "\t";
        if (delim.size() != 1)
            throw recloop::ValidationError("delimiter must be one character (or 'tab')");
        o.delimiter = delim[0];
        o.has_header = opt.value("has_header", o.has_header);
        o.user_column = opt.value("user_column", o.user_column);
        o.item_column = opt.value("item_column", o.item_column);
        o.time_column = opt.value("time_column", o.time_column);
        o.user_position = opt.value("user_position", o.user_position);
        o.item_position = opt.value("item_position", o.item_position);
        o.time_position = opt.value("time_position", o.time_position);
        std::string tf = opt.value("time_format", "auto");
        if (tf == "auto") o.time_format = recloop::TimeFormat::Auto;
        else if (tf == "epoch_seconds") o.time_format = recloop::TimeFormat::EpochSeconds;
        else if (tf == "iso_date") o.time_format = recloop::TimeFormat::IsoDate;
        else if (tf == "day_index") o.time_format = recloop::TimeFormat::DayIndex;
        else throw recloop::ValidationError("unknown time_format: " + tf);
    }
    return o;
}

recloop::ProgressFn wrap_progress(rfl_progress_fn fn, void* user_data) {
    if (!fn) return {};
    return [fn, user_data](const std::string& line) { fn(line.c_str(), user_data); };
}

} // namespace

extern "C" {

const char* rfl_version(void) {
#ifdef RECLOOP_VERSION
    return RECLOOP_VERSION;
#else
    return "0.0.0";
#endif
}

const char* rfl_last_error(void) { return t_last_error.c_str(); }

void rfl_string_free(char* s) { std::free(s); }

rfl_status rfl_default_config_json(char** out_json) {
    if (!out_json) return invalid("out_json is NULL");
    return guarded([&] { return emit(out_json, recloop::default_config_json()); });
}

rfl_status rfl_config_merge(const char* config_json_or_null, const char* const* overrides,
                            size_t n_overrides, char** out_json) {
    if (!out_json) return invalid("out_json is NULL");
    if (n_overrides > 0 && !overrides) return invalid("overrides is NULL");
    return guarded([&] {
        std::vector<std::pair<std::string, std::string>> kv;
        for (size_t i = 0; i < n_overrides; ++i) {
            if (!overrides[i]) throw recloop::ValidationError("override entry is NULL");
            std::string s = overrides[i];
            size_t eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw recloop::ValidationError("override must look like path=value: " + s);
            kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        std::string user = config_json_or_null ? config_json_or_null : "";
        return emit(out_json, recloop::merge_config(user, kv));
    });
}

rfl_status rfl_log_load(const char* path, const char* options_json, rfl_log** out) {
    if (!path || !out) return invalid("path or out is NULL");
    return guarded([&] {
        auto options = load_options_from_json(options_json);
        auto handle = std::make_unique<rfl_log>();
        handle->log = recloop::load_interactions(path, options);
        *out = handle.release();
        return RFL_OK;
    });
}

rfl_status rfl_log_synth(const char* params_json, rfl_log** out) {
    if (!out) return invalid("out is NULL");
    return guarded([&] {
        recloop::SynthParams sp;
        if (params_json && *params_json) {
            json p = json::parse(params_json);
            for (const auto& [key, value] : p.items()) {
                (void)value;
                static const char* known[] = {"n_users",     "n_items",
                                              "n_days",      "popularity_exponent",
                                              "n_clusters",  "events_per_user_day",
                                              "seed"};
                bool ok = false;
                for (const char* k : known) ok = ok || key == k;
                if (!ok) throw recloop::ValidationError("unknown synth param: " + key);
            }
            sp.n_users = p.value("n_users", sp.n_users);
            sp.n_items = p.value("n_items", sp.n_items);
            sp.n_days = p.value("n_days", sp.n_days);
            sp.popularity_exponent = p.value("popularity_exponent", sp.popularity_exponent);
            sp.n_clusters = p.value("n_clusters", sp.n_clusters);
            sp.events_per_user_day = p.value("events_per_user_day", sp.events_per_user_day);
            sp.seed = p.value("seed", sp.seed);
        }
        auto handle = std::make_unique<rfl_log>();
        handle->log = recloop::generate_synthetic(sp);
        *out = handle.release();
        return RFL_OK;
    });
}

rfl_status rfl_log_write(const rfl_log* log, const char* path) {
    if (!log || !path) return invalid("log or path is NULL");
    return guarded([&] {
        recloop::write_log(log->log, path);
        return RFL_OK;
    });
}

rfl_status rfl_log_filter_active(const rfl_log* log, int min_active_months, rfl_log** out) {
    if (!log || !out) return invalid("log or out is NULL");
    return guarded([&] {
        auto handle = std::make_unique<rfl_log>();
        handle->log = recloop::filter_active_users(log->log, min_active_months);
        *out = handle.release();
        return RFL_OK;
    });
}

rfl_status rfl_log_summary(const rfl_log* log, char** out_json) {
    if (!log || !out_json) return invalid("log or out_json is NULL");
    return guarded([&] {
        json j;
        j["users"] = log->log.user_count();
        j["items"] = log->log.item_count();
        j["events"] = log->log.event_count();
        j["span_days"] = log->log.span_days();
        return emit(out_json, j.dump(2));
    });
}

void rfl_log_free(rfl_log* log) { delete log; }

rfl_status rfl_metrics(const rfl_log* log, const char* options_json, char** out_json) {
    if (!log || !out_json) return invalid("log or out_json is NULL");
    return guarded([&] {
        std::string opts = options_json ? options_json : "";
        return emit(out_json, recloop::compute_metrics(log->log, opts));
    });
}

rfl_status rfl_model_train(const rfl_log* log, const char* options_json, rfl_model** out) {
    if (!log || !out) return invalid("log or out is NULL");
    return guarded([&] {
        json opt = (options_json && *options_json) ? json::parse(options_json)
                                                   : json::object();
        for (const auto& [key, value] : opt.items()) {
            (void)value;
            static const char* known[] = {"kind", "window", "seed", "itemknn", "bpr"};
            bool ok = false;
            for (const char* k : known) ok = ok || key == k;
            if (!ok) throw recloop::ValidationError("unknown train option: " + key);
        }
        recloop::ModelKind kind =
            recloop::model_kind_from_string(opt.value("kind", "popularity"));
        recloop::TrainWindow window;
        window.init = {0, log->log.span_days()};
        if (opt.contains("window")) {
            const json& w = opt.at("window");
            window.init = {w.at(0).get<int32_t>(), w.at(1).get<int32_t>()};
        }
        uint64_t seed = opt.value("seed", static_cast<uint64_t>(42));
        recloop::ModelParams params;
        if (opt.contains("itemknn")) {
            const json& k = opt.at("itemknn");
            params.itemknn.k_neighbors = k.value("k_neighbors", params.itemknn.k_neighbors);
            params.itemknn.shrink = k.value("shrink", params.itemknn.shrink);
        }
        if (opt.contains("bpr")) {
            const json& b = opt.at("bpr");
            params.bpr.dim = b.value("dim", params.bpr.dim);
            params.bpr.learning_rate = b.value("learning_rate", params.bpr.learning_rate);
            params.bpr.l2 = b.value("l2", params.bpr.l2);
            params.bpr.epochs = b.value("epochs", params.bpr.epochs);
            params.bpr.init_std = b.value("init_std", params.bpr.init_std);
        }
        auto handle = std::make_unique<rfl_model>();
        handle->model = recloop::train_model(kind, log->log, window, params, seed);
        *out = handle.release();
        return RFL_OK;
    });
}

rfl_status rfl_model_score(const rfl_model* model, uint32_t user, uint32_t item,
                           double* out_score) {
    if (!model || !out_score) return invalid("model or out_score is NULL");
    return guarded([&] {
        if (user >= model->model->user_count())
            throw recloop::ValidationError("user index out of range");
        if (item >= model->model->item_count())
            throw recloop::ValidationError("item index out of range");
        *out_score = model->model->score(user, item);
        return RFL_OK;
    });
}

rfl_status rfl_model_top_k(const rfl_model* model, uint32_t user, int k, char** out_json) {
    if (!model || !out_json) return invalid("model or out_json is NULL");
    if (k < 1) return invalid("k must be >= 1");
    return guarded([&] {
        if (user >= model->model->user_count())
            throw recloop::ValidationError("user index out of range");
        auto ranked = model->model->top_k(user, k);
        json j;
        j["items"] = ranked.items;
        j["scores"] = ranked.scores;
        return emit(out_json, j.dump());
    });
}

rfl_status rfl_model_evaluate(const rfl_model* model, const rfl_log* log, int test_begin,
                              int test_end, int k, char** out_json) {
    if (!model || !log || !out_json) return invalid("model, log, or out_json is NULL");
    return guarded([&] {
        auto rep = recloop::evaluate(*model->model, log->log, {test_begin, test_end}, k);
        json j;
        j["ndcg"] = rep.ndcg;
        j["precision"] = rep.precision;
        j["recall"] = rep.recall;
        j["item_coverage"] = rep.item_coverage;
        j["eval_users"] = rep.eval_users;
        return emit(out_json, j.dump(2));
    });
}

rfl_status rfl_model_save(const rfl_model* model, const char* path) {
    if (!model || !path) return invalid("model or path is NULL");
    return guarded([&] {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error(std::string("cannot write ") + path);
        out << model->model->save_json();
        out.flush();
        if (!out) throw std::runtime_error(std::string("write failed: ") + path);
        return RFL_OK;
    });
}

rfl_status rfl_model_load(const char* path, rfl_model** out) {
    if (!path || !out) return invalid("path or out is NULL");
    return guarded([&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw recloop::ValidationError(std::string("cannot open ") + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        auto handle = std::make_unique<rfl_model>();
        handle->model = recloop::load_model_json(buf.str());
        *out = handle.release();
        return RFL_OK;
    });
}

void rfl_model_free(rfl_model* model) { delete model; }

rfl_status rfl_cmd_simulate(const char* config_json, const char* out_dir_or_null, int resume,
                            rfl_progress_fn progress, void* user_data,
                            char** out_manifest_json) {
    if (!config_json || !out_manifest_json)
        return invalid("config_json or out_manifest_json is NULL");
    return guarded([&] {
        std::string manifest = recloop::cmd_simulate(
            config_json, out_dir_or_null ? out_dir_or_null : "", resume != 0,
            wrap_progress(progress, user_data));
        return emit(out_manifest_json, manifest);
    });
}

rfl_status rfl_cmd_sweep(const char* config_json, const char* out_root,
                         const char* sweep_id_or_null, int jobs, rfl_progress_fn progress,
                         void* user_data, char** out_manifest_json) {
    if (!config_json || !out_root || !out_manifest_json)
        return invalid("config_json, out_root, or out_manifest_json is NULL");
    return guarded([&]() -> rfl_status {
        std::string manifest = recloop::cmd_sweep(config_json, out_root,
                                                  sweep_id_or_null ? sweep_id_or_null : "",
                                                  jobs, wrap_progress(progress, user_data));
        rfl_status rc = emit(out_manifest_json, manifest);
        if (rc != RFL_OK) return rc;
        std::string status = json::parse(manifest).value("status", "ok");
        if (status == "partial") {
            t_last_error = "some sweep cells failed; see the manifest";
            return RFL_ERR_PARTIAL;
        }
        if (status == "failed") {
            t_last_error = "every sweep cell failed; see the manifest";
            return RFL_ERR_RUNTIME;
        }
        return RFL_OK;
    });
}

rfl_status rfl_cmd_export(const char* sweep_dir, const char* options_json) {
    if (!sweep_dir || !options_json) return invalid("sweep_dir or options_json is NULL");
    return guarded([&] {
        recloop::cmd_export(sweep_dir, options_json);
        return RFL_OK;
    });
}

} // extern "C"
