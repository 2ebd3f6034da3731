#include "recloop/config.hpp"

#include <charconv>

#include "json.hpp"

namespace recloop {

using nlohmann::json;

namespace {

json defaults() {
    return json{
        {"data",
         {{"source", "synth"},
          {"path", ""},
          {"preset", "canonical"},
          {"delimiter", ","},
          {"has_header", true},
          {"user_column", "user"},
          {"item_column", "item"},
          {"time_column", "day"},
          {"user_position", 0},
          {"item_position", 1},
          {"time_position", 2},
          {"time_format", "day_index"},
          {"min_active_months", 0},
          {"synth",
           {{"n_users", 500},
            {"n_items", 2000},
            {"n_days", 900},
            {"popularity_exponent", 1.0},
            {"n_clusters", 5},
            {"events_per_user_day", 1.0},
            {"seed", 1}}}}},
        {"choice",
         {{"lambda", 1.0},
          {"candidate_set_size", 50},
          {"tau_min", 0.05},
          {"tau_max", 5.0},
          {"tau_default", 1.0}}},
        {"model",
         {{"kind", "popularity"},
          {"itemknn", {{"k_neighbors", 100}, {"shrink", 0.0}}},
          {"bpr",
           {{"dim", 32},
            {"learning_rate", 0.001},
            {"l2", 0.0001},
            {"epochs", 50},
            {"init_std", 0.01}}}}},
        {"engine",
         {{"eta", 0.0},
          {"k_reclist", 20},
          {"n_epochs", 24},
          {"epoch_length_days", 30},
          {"retrain_interval_epochs", 1},
          {"sliding_window_days", 360},
          {"n_runs", 5},
          {"master_seed", 42},
          {"run_index", 0},
          {"distinct_basket", false},
          {"checkpoint", false}}},
        {"metrics",
         {{"include_init", false},
          {"jaccard_exact_max_users", 2000},
          {"jaccard_sample_pairs", 1000000}}},
        {"sweep",
         {{"eta_grid", json::array({0.0, 0.2, 0.5, 0.8, 1.0})},
          {"models", json::array({"popularity"})}}}};
}

bool type_compatible(const json& base, const json& value) {
    if (base.is_number() && value.is_number()) return true;
    if (base.is_array() && value.is_array()) return true;
    return base.type() == value.type();
}

void merge_into(json& base, const json& user, const std::string& prefix) {
    if (!user.is_object())
        throw ValidationError("config section '" + (prefix.empty() ? "<root>" : prefix) +
                              "' must be an object");
    for (const auto& [key, value] : user.items()) {
        std::string path = prefix.empty() ? key : prefix + "." + key;
        auto it = base.find(key);
        if (it == base.end()) throw ValidationError("unknown config key: " + path);
        if (it->is_object()) {
            merge_into(*it, value, path);
            continue;
        }
        if (!type_compatible(*it, value))
            throw ValidationError("config key " + path + " has the wrong type");
        *it = value;
    }
}

json* find_path(json& root, const std::string& dotted) {
    json* cur = &root;
    size_t start = 0;
    while (true) {
        size_t dot = dotted.find('.', start);
        std::string key = dotted.substr(start, dot == std::string::npos
                                                   ? std::string::npos
                                                   : dot - start);
        if (!cur->is_object()) return nullptr;
        auto it = cur->find(key);
        if (it == cur->end()) return nullptr;
        cur = &*it;
        if (dot == std::string::npos) return cur;
        start = dot + 1;
    }
}

json parse_scalar_like(const json& target, const std::string& text,
                       const std::string& path) {
    auto fail = [&]() -> json {
        throw ValidationError("cannot parse override for " + path + ": '" + text + "'");
    };
    if (target.is_string()) return text;
    if (target.is_boolean()) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        return fail();
    }
    if (target.is_number_integer() || target.is_number_unsigned()) {
        // keep integral overrides integral so digests stay stable
        try {
            size_t used = 0;
            long long v = std::stoll(text, &used);
            if (used == text.size()) return v;
        } catch (...) {
        }
        return fail();
    }
    if (target.is_number_float()) {
        try {
            size_t used = 0;
            double v = std::stod(text, &used);
            if (used == text.size()) return v;
        } catch (...) {
        }
        return fail();
    }
    return fail();
}

} // namespace

std::string default_config_json() { return defaults().dump(2); }

std::string merge_config(const std::string& user_json,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
    json merged = defaults();
    if (!user_json.empty()) {
        json user;
        try {
            user = json::parse(user_json);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("config is not valid JSON: ") + e.what());
        }
        merge_into(merged, user, "");
    }
    for (const auto& [path, text] : overrides) {
        json* target = find_path(merged, path);
        if (!target) throw ValidationError("unknown config key: " + path);
        if (target->is_object())
            throw ValidationError("config key " + path + " is a section, not a value");
        if (target->is_array()) {
            // comma-separated list, elements typed like the default array's
            json elem_like = target->empty() ? json(0.0) : (*target)[0];
            json arr = json::array();
            size_t start = 0;
            while (start <= text.size()) {
                size_t comma = text.find(',', start);
                std::string part = text.substr(
                    start, comma == std::string::npos ? std::string::npos : comma - start);
                if (!part.empty()) arr.push_back(parse_scalar_like(elem_like, part, path));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            if (arr.empty()) throw ValidationError("empty list override for " + path);
            *target = arr;
            continue;
        }
        *target = parse_scalar_like(*target, text, path);
    }
    return merged.dump(2);
}

namespace {

TimeFormat time_format_from(const std::string& s) {
    if (s == "auto") return TimeFormat::Auto;
    if (s == "epoch_seconds") return TimeFormat::EpochSeconds;
    if (s == "iso_date") return TimeFormat::IsoDate;
    if (s == "day_index") return TimeFormat::DayIndex;
    throw ValidationError("unknown time_format: " + s);
}

} // namespace

RunSpec resolve_config(const std::string& merged_json) {
    json j = json::parse(merged_json);
    RunSpec spec;

    const json& d = j.at("data");
    spec.data_source = d.at("source").get<std::string>();
    if (spec.data_source != "synth" && spec.data_source != "file")
        throw ValidationError("data.source must be 'synth' or 'file'");
    spec.data_path = d.at("path").get<std::string>();
    if (spec.data_source == "file" && spec.data_path.empty())
        throw ValidationError("data.source 'file' needs data.path");
    spec.preset = d.at("preset").get<std::string>();
    if (spec.preset == "custom") {
        LoadOptions o = LoadOptions::preset("custom");
        std::string delim = d.at("delimiter").get<std::string>();
        if (delim == "\\t" || delim == "tab") delim = "\t";
        if (delim.size() != 1)
            throw ValidationError("data.delimiter must be one character (or 'tab')");
        o.delimiter = delim[0];
        o.has_header = d.at("has_header").get<bool>();
        o.user_column = d.at("user_column").get<std::string>();
        o.item_column = d.at("item_column").get<std::string>();
        o.time_column = d.at("time_column").get<std::string>();
        o.user_position = d.at("user_position").get<int>();
        o.item_position = d.at("item_position").get<int>();
        o.time_position = d.at("time_position").get<int>();
        o.time_format = time_format_from(d.at("time_format").get<std::string>());
        spec.load = o;
    } else {
        spec.load = LoadOptions::preset(spec.preset);
    }
    spec.min_active_months = d.at("min_active_months").get<int>();
    if (spec.min_active_months < 0)
        throw ValidationError("data.min_active_months must be >= 0");

    const json& sy = d.at("synth");
    spec.synth.n_users = sy.at("n_users").get<int>();
    spec.synth.n_items = sy.at("n_items").get<int>();
    spec.synth.n_days = sy.at("n_days").get<int>();
    spec.synth.popularity_exponent = sy.at("popularity_exponent").get<double>();
    spec.synth.n_clusters = sy.at("n_clusters").get<int>();
    spec.synth.events_per_user_day = sy.at("events_per_user_day").get<double>();
    spec.synth.seed = sy.at("seed").get<uint64_t>();

    const json& c = j.at("choice");
    spec.engine.lambda = c.at("lambda").get<double>();
    spec.engine.candidate_set_size = c.at("candidate_set_size").get<int>();
    spec.engine.tau.min = c.at("tau_min").get<double>();
    spec.engine.tau.max = c.at("tau_max").get<double>();
    spec.engine.tau.fallback = c.at("tau_default").get<double>();

    const json& m = j.at("model");
    spec.engine.model_kind = model_kind_from_string(m.at("kind").get<std::string>());
    spec.engine.model_params.itemknn.k_neighbors = m.at("itemknn").at("k_neighbors").get<int>();
    spec.engine.model_params.itemknn.shrink = m.at("itemknn").at("shrink").get<double>();
    spec.engine.model_params.bpr.dim = m.at("bpr").at("dim").get<int>();
    spec.engine.model_params.bpr.learning_rate = m.at("bpr").at("learning_rate").get<double>();
    spec.engine.model_params.bpr.l2 = m.at("bpr").at("l2").get<double>();
    spec.engine.model_params.bpr.epochs = m.at("bpr").at("epochs").get<int>();
    spec.engine.model_params.bpr.init_std = m.at("bpr").at("init_std").get<double>();

    const json& e = j.at("engine");
    spec.engine.eta = e.at("eta").get<double>();
    spec.engine.k_reclist = e.at("k_reclist").get<int>();
    spec.engine.n_epochs = e.at("n_epochs").get<int>();
    spec.engine.epoch_length_days = e.at("epoch_length_days").get<int>();
    spec.engine.retrain_interval_epochs = e.at("retrain_interval_epochs").get<int>();
    spec.engine.sliding_window_days = e.at("sliding_window_days").get<int>();
    spec.n_runs = e.at("n_runs").get<int>();
    if (spec.n_runs < 1) throw ValidationError("engine.n_runs must be >= 1");
    spec.engine.master_seed = e.at("master_seed").get<uint64_t>();
    spec.engine.run_index = e.at("run_index").get<int>();
    spec.engine.distinct_basket = e.at("distinct_basket").get<bool>();
    spec.checkpoint = e.at("checkpoint").get<bool>();

    const json& mt = j.at("metrics");
    spec.engine.include_init_in_metrics = mt.at("include_init").get<bool>();
    spec.engine.jaccard_exact_max_users = mt.at("jaccard_exact_max_users").get<size_t>();
    spec.engine.jaccard_sample_pairs = mt.at("jaccard_sample_pairs").get<uint64_t>();

    const json& sw = j.at("sweep");
    spec.eta_grid = sw.at("eta_grid").get<std::vector<double>>();
    if (spec.eta_grid.empty()) throw ValidationError("sweep.eta_grid must be non-empty");
    for (double v : spec.eta_grid)
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("sweep.eta_grid values must lie in [0,1]");
    for (const auto& name : sw.at("models").get<std::vector<std::string>>())
        spec.sweep_models.push_back(model_kind_from_string(name));
    if (spec.sweep_models.empty()) throw ValidationError("sweep.models must be non-empty");

    spec.engine.validate();
    return spec;
}

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t config_digest(const std::string& merged_json) {
    json j = json::parse(merged_json);
    j.erase("sweep");
    return fnv1a64(j.dump());
}

std::string digest_hex(uint64_t digest) {
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex[digest & 0xf];
        digest >>= 4;
    }
    return out;
}

} // namespace recloop
