// Command-line front end. Talks to the engine exclusively through the
// C API in recloop.h; everything here is argument plumbing.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "recloop.h"

namespace {

struct CStr {
    char* p = nullptr;
    ~CStr() {
        if (p) rfl_string_free(p);
    }
    std::string str() const { return p ? p : ""; }
};

std::string last_error() {
    const char* e = rfl_last_error();
    return (e && *e) ? e : "unknown error";
}

int report_failure(rfl_status rc) {
    std::cerr << "error: " << last_error() << "\n";
    return static_cast<int>(rc);
}

void progress_to_stderr(const char* line, void*) { std::cerr << line << "\n"; }

bool read_text_file(const std::string& path, std::string& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream buf;
    buf << in.rdbuf();
    out = buf.str();
    return true;
}

// one --<dotted.path> option per config leaf, collected as path=value
void register_config_flags(CLI::App* cmd, const nlohmann::json& node,
                           const std::string& prefix, std::vector<std::string>* sink) {
    for (const auto& [key, value] : node.items()) {
        std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) {
            register_config_flags(cmd, value, path, sink);
            continue;
        }
        std::string desc = "config override (default " + value.dump() + ")";
        cmd->add_option_function<std::string>(
               "--" + path,
               [sink, path](const std::string& v) { sink->push_back(path + "=" + v); }, desc)
            ->type_name(value.is_array() ? "LIST" : "VALUE");
    }
}

void register_shorthands(CLI::App* cmd, std::vector<std::string>* sink) {
    static const std::pair<const char*, const char*> kMap[] = {
        {"--eta", "engine.eta"},          {"--model", "model.kind"},
        {"--epochs", "engine.n_epochs"},  {"--seed", "engine.master_seed"},
        {"--runs", "engine.n_runs"},      {"--run", "engine.run_index"},
    };
    for (const auto& [flag, path] : kMap) {
        std::string target = path;
        cmd->add_option_function<std::string>(
               flag, [sink, target](const std::string& v) { sink->push_back(target + "=" + v); },
               "shorthand for --" + target)
            ->type_name("VALUE");
    }
}

int build_merged_config(const std::string& config_path,
                        const std::vector<std::string>& overrides, std::string& out) {
    std::string text;
    if (!config_path.empty() && !read_text_file(config_path, text)) {
        std::cerr << "error: cannot read config file " << config_path << "\n";
        return 1;
    }
    std::vector<const char*> ptrs;
    ptrs.reserve(overrides.size());
    for (const auto& s : overrides) ptrs.push_back(s.c_str());
    CStr merged;
    rfl_status rc = rfl_config_merge(text.empty() ? nullptr : text.c_str(),
                                     ptrs.empty() ? nullptr : ptrs.data(), ptrs.size(),
                                     &merged.p);
    if (rc != RFL_OK) return report_failure(rc);
    out = merged.str();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"seedable feedback-loop simulations for recommender systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", rfl_version());

    CStr defaults_raw;
    if (rfl_default_config_json(&defaults_raw.p) != RFL_OK) return report_failure(RFL_ERR_RUNTIME);
    nlohmann::json defaults = nlohmann::json::parse(defaults_raw.str());

    std::vector<std::string> overrides;
    std::string config_path;
    auto add_config_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (defaults when omitted)");
        register_config_flags(cmd, defaults, "", &overrides);
        register_shorthands(cmd, &overrides);
    };

    auto* cfg_cmd = app.add_subcommand("config", "print the merged configuration");
    add_config_opts(cfg_cmd);

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic interaction log");
    std::string synth_out;
    synth_cmd->add_option("--out", synth_out, "output log path")->required();
    add_config_opts(synth_cmd);

    auto* ingest_cmd =
        app.add_subcommand("ingest", "convert a raw export to the canonical log form");
    std::string in_path, ingest_out, preset = "canonical";
    int min_active_months = 3;
    std::string delimiter = ",", user_col = "user", item_col = "item", time_col = "day";
    std::string time_fmt = "auto";
    bool no_header = false;
    int user_pos = 0, item_pos = 1, time_pos = 2;
    ingest_cmd->add_option("--in", in_path, "raw input file")->required();
    ingest_cmd->add_option("--out", ingest_out, "canonical log path")->required();
    ingest_cmd->add_option("--preset", preset, "canonical|lastfm|amazon|custom");
    ingest_cmd->add_option("--min-active-months", min_active_months,
                           "required active months per spanned year; 0 disables (default 3)");
    ingest_cmd->add_option("--delimiter", delimiter, "field delimiter (custom preset)");
    ingest_cmd->add_flag("--no-header", no_header, "input has no header row (custom preset)");
    ingest_cmd->add_option("--user-column", user_col, "user column name (custom preset)");
    ingest_cmd->add_option("--item-column", item_col, "item column name (custom preset)");
    ingest_cmd->add_option("--time-column", time_col, "time column name (custom preset)");
    ingest_cmd->add_option("--user-position", user_pos, "0-based user column (no header)");
    ingest_cmd->add_option("--item-position", item_pos, "0-based item column (no header)");
    ingest_cmd->add_option("--time-position", time_pos, "0-based time column (no header)");
    ingest_cmd->add_option("--time-format", time_fmt,
                           "auto|epoch_seconds|iso_date|day_index (custom preset)");

    auto* sim_cmd = app.add_subcommand("simulate", "run one simulation cell");
    std::string sim_out;
    bool resume = false;
    sim_cmd->add_option("--out", sim_out, "output directory (omit to skip writing files)");
    sim_cmd->add_flag("--resume", resume, "continue from --out's checkpoint");
    add_config_opts(sim_cmd);

    auto* sweep_cmd = app.add_subcommand("sweep", "run the model x eta x run grid");
    const char* env_root = std::getenv("RECLOOP_RESULTS");
    std::string sweep_out = env_root ? env_root : "";
    std::string sweep_id;
    int jobs = 1;
    sweep_cmd->add_option("--out", sweep_out, "results root (default $RECLOOP_RESULTS)");
    sweep_cmd->add_option("--id", sweep_id, "sweep directory name (default: config digest)");
    sweep_cmd->add_option("--jobs", jobs, "concurrent cells (default 1)");
    add_config_opts(sweep_cmd);

    auto* met_cmd =
        app.add_subcommand("metrics", "recompute consumption metrics over a saved log");
    std::string met_log;
    int met_begin = -1, met_end = -1;
    bool sel_ind = false, sel_coll = false, sel_jac = false, sel_cov = false;
    uint64_t jac_users = 2000, jac_pairs = 1000000, jac_seed = 1;
    met_cmd->add_option("--log", met_log, "canonical log file")->required();
    met_cmd->add_option("--begin", met_begin, "window start day (default 0)");
    met_cmd->add_option("--end", met_end, "window end day, exclusive (default span)");
    met_cmd->add_flag("--individual-gini", sel_ind, "print only mean_individual_gini");
    met_cmd->add_flag("--collective-gini", sel_coll, "print only collective_gini");
    met_cmd->add_flag("--jaccard", sel_jac, "print only mean_jaccard");
    met_cmd->add_flag("--coverage", sel_cov, "print only item_coverage");
    met_cmd->add_option("--jaccard-exact-max-users", jac_users,
                        "exact pair enumeration at or below this many users");
    met_cmd->add_option("--jaccard-sample-pairs", jac_pairs, "sampled pairs above that");
    met_cmd->add_option("--jaccard-seed", jac_seed, "pair-sampling seed");

    auto* exp_cmd = app.add_subcommand("export", "emit plot-ready CSV series from a sweep");
    std::string exp_sweep, exp_series, exp_model, exp_out;
    double exp_eta = 0.0;
    int exp_run = 0;
    exp_cmd->add_option("--sweep", exp_sweep, "sweep directory")->required();
    exp_cmd->add_option("--series", exp_series,
                        "gini-vs-eta | individual-gini-vs-eta | collective-gini-vs-eta | "
                        "jaccard-vs-eta | coverage-vs-eta | individual-gini-vs-epoch | "
                        "collective-gini-vs-epoch | jaccard-vs-epoch | coverage-vs-epoch | "
                        "item-rank-frequency | user-rank-frequency | edges")
        ->required();
    exp_cmd->add_option("--model", exp_model, "model (per-cell series)");
    auto* exp_eta_opt = exp_cmd->add_option("--eta", exp_eta, "eta (per-cell series)");
    exp_cmd->add_option("--run", exp_run, "run index (per-cell series, default 0)");
    exp_cmd->add_option("--out", exp_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (cfg_cmd->parsed()) {
        std::string merged;
        int rc = build_merged_config(config_path, overrides, merged);
        if (rc != 0) return rc;
        std::cout << merged << "\n";
        return 0;
    }

    if (synth_cmd->parsed()) {
        std::string merged;
        int rc = build_merged_config(config_path, overrides, merged);
        if (rc != 0) return rc;
        std::string params = nlohmann::json::parse(merged)["data"]["synth"].dump();
        rfl_log* log = nullptr;
        rfl_status st = rfl_log_synth(params.c_str(), &log);
        if (st != RFL_OK) return report_failure(st);
        st = rfl_log_write(log, synth_out.c_str());
        if (st != RFL_OK) {
            rfl_log_free(log);
            return report_failure(st);
        }
        CStr summary;
        st = rfl_log_summary(log, &summary.p);
        rfl_log_free(log);
        if (st != RFL_OK) return report_failure(st);
        std::cout << summary.str() << "\n";
        return 0;
    }

    if (ingest_cmd->parsed()) {
        nlohmann::json opt;
        opt["preset"] = preset;
        if (preset == "custom") {
            opt["delimiter"] = delimiter;
            opt["has_header"] = !no_header;
            opt["user_column"] = user_col;
            opt["item_column"] = item_col;
            opt["time_column"] = time_col;
            opt["user_position"] = user_pos;
            opt["item_position"] = item_pos;
            opt["time_position"] = time_pos;
            opt["time_format"] = time_fmt;
        }
        rfl_log* log = nullptr;
        rfl_status st = rfl_log_load(in_path.c_str(), opt.dump().c_str(), &log);
        if (st != RFL_OK) return report_failure(st);
        if (min_active_months > 0) {
            rfl_log* filtered = nullptr;
            st = rfl_log_filter_active(log, min_active_months, &filtered);
            rfl_log_free(log);
            if (st != RFL_OK) return report_failure(st);
            log = filtered;
        }
        st = rfl_log_write(log, ingest_out.c_str());
        if (st != RFL_OK) {
            rfl_log_free(log);
            return report_failure(st);
        }
        CStr summary;
        st = rfl_log_summary(log, &summary.p);
        rfl_log_free(log);
        if (st != RFL_OK) return report_failure(st);
        std::cout << summary.str() << "\n";
        return 0;
    }

    if (sim_cmd->parsed()) {
        std::string merged;
        int rc = build_merged_config(config_path, overrides, merged);
        if (rc != 0) return rc;
        CStr manifest;
        rfl_status st = rfl_cmd_simulate(merged.c_str(),
                                         sim_out.empty() ? nullptr : sim_out.c_str(),
                                         resume ? 1 : 0, progress_to_stderr, nullptr,
                                         &manifest.p);
        if (st != RFL_OK) return report_failure(st);
        std::cout << manifest.str() << "\n";
        return 0;
    }

    if (sweep_cmd->parsed()) {
        std::string merged;
        int rc = build_merged_config(config_path, overrides, merged);
        if (rc != 0) return rc;
        if (sweep_out.empty()) {
            std::cerr << "error: no results root; pass --out or set RECLOOP_RESULTS\n";
            return 1;
        }
        CStr manifest;
        rfl_status st = rfl_cmd_sweep(merged.c_str(), sweep_out.c_str(),
                                      sweep_id.empty() ? nullptr : sweep_id.c_str(), jobs,
                                      progress_to_stderr, nullptr, &manifest.p);
        if (manifest.p) std::cout << manifest.str() << "\n";
        if (st != RFL_OK) return report_failure(st);
        return 0;
    }

    if (met_cmd->parsed()) {
        rfl_log* log = nullptr;
        rfl_status st = rfl_log_load(met_log.c_str(), nullptr, &log);
        if (st != RFL_OK) return report_failure(st);
        nlohmann::json opt;
        opt["begin"] = met_begin;
        opt["end"] = met_end;
        opt["jaccard_exact_max_users"] = jac_users;
        opt["jaccard_sample_pairs"] = jac_pairs;
        opt["jaccard_seed"] = jac_seed;
        CStr result;
        st = rfl_metrics(log, opt.dump().c_str(), &result.p);
        rfl_log_free(log);
        if (st != RFL_OK) return report_failure(st);
        bool any = sel_ind || sel_coll || sel_jac || sel_cov;
        if (!any) {
            std::cout << result.str() << "\n";
            return 0;
        }
        nlohmann::json full = nlohmann::json::parse(result.str());
        nlohmann::json picked;
        if (sel_ind) picked["mean_individual_gini"] = full["mean_individual_gini"];
        if (sel_coll) picked["collective_gini"] = full["collective_gini"];
        if (sel_jac) picked["mean_jaccard"] = full["mean_jaccard"];
        if (sel_cov) picked["item_coverage"] = full["item_coverage"];
        std::cout << picked.dump(2) << "\n";
        return 0;
    }

    if (exp_cmd->parsed()) {
        nlohmann::json opt;
        opt["series"] = exp_series;
        opt["out"] = exp_out;
        if (!exp_model.empty()) opt["model"] = exp_model;
        if (exp_eta_opt->count() > 0) opt["eta"] = exp_eta;
        opt["run"] = exp_run;
        rfl_status st = rfl_cmd_export(exp_sweep.c_str(), opt.dump().c_str());
        if (st != RFL_OK) return report_failure(st);
        std::cerr << "wrote " << exp_out << "\n";
        return 0;
    }

    return 0;
}
