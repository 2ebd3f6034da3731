#include "recloop/runner.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "recloop/dataset.hpp"
#include "recloop/engine.hpp"
#include "recloop/metrics.hpp"

namespace recloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, p);
}

std::string eta_dir(double eta) { return "eta-" + fmt_double(eta); }

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_file(tmp, content);
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

} // namespace

InteractionLog acquire_data(const RunSpec& spec) {
    InteractionLog log = spec.data_source == "synth"
                             ? generate_synthetic(spec.synth)
                             : load_interactions(spec.data_path, spec.load);
    if (spec.min_active_months > 0) log = filter_active_users(log, spec.min_active_months);
    return log;
}

namespace {

struct Prepared {
    InteractionLog data;
    TemporalSplit split;
    ActivityTrace trace;
    uint64_t data_digest = 0;
};

Prepared prepare(const RunSpec& spec) {
    Prepared p;
    p.data = acquire_data(spec);
    p.split = temporal_holdout(p.data);
    DayRange sim{p.split.sim_start_day,
                 p.split.sim_start_day + spec.engine.n_epochs * spec.engine.epoch_length_days};
    p.trace = build_activity_trace(p.data, sim);
    p.data_digest = fnv1a64(format_log(p.data));
    return p;
}

std::string patch_cell_config(const std::string& merged, ModelKind kind, double eta, int run) {
    json j = json::parse(merged);
    j["model"]["kind"] = to_string(kind);
    j["engine"]["eta"] = eta;
    j["engine"]["run_index"] = run;
    return j.dump(2);
}

json data_summary(const InteractionLog& data) {
    return json{{"users", data.user_count()},
                {"items", data.item_count()},
                {"events", data.event_count()},
                {"span_days", data.span_days()}};
}

json cell_manifest(const RunSpec& spec, const std::string& cfg_json, const Prepared& p,
                   uint64_t cfg_digest, const std::vector<EpochReport>& reports,
                   double wall_ms) {
    int sim_end = p.split.sim_start_day + spec.engine.n_epochs * spec.engine.epoch_length_days;
    json j;
    j["format"] = "recloop-manifest";
    j["version"] = 1;
    j["kind"] = "simulate";
    j["config"] = json::parse(cfg_json);
    j["config_digest"] = digest_hex(cfg_digest);
    j["data_digest"] = digest_hex(p.data_digest);
    j["data"] = data_summary(p.data);
    j["sim"] = {{"sim_start_day", p.split.sim_start_day},
                {"sim_end_day", sim_end},
                {"metric_window",
                 json::array({spec.engine.include_init_in_metrics ? 0 : p.split.sim_start_day,
                              sim_end})},
                {"epochs_done", reports.size()}};
    j["outputs"] = {{"log", "log.csv"}, {"reports", "reports.jsonl"}};
    j["status"] = "ok";
    j["wall_ms"] = wall_ms;
    return j;
}

// run one cell; writes run-dir artifacts when dir is non-empty
std::vector<EpochReport> execute_cell(const RunSpec& spec, const std::string& cfg_json,
                                      const Prepared& p, uint64_t cfg_digest,
                                      const fs::path& dir, bool resume,
                                      const ProgressFn& progress, std::mutex* mu) {
    auto t0 = std::chrono::steady_clock::now();
    if (!dir.empty()) fs::create_directories(dir);
    if (spec.checkpoint && dir.empty())
        throw ValidationError("checkpointing needs an output directory");

    SimHooks hooks;
    hooks.config_digest = cfg_digest;
    hooks.data_digest = p.data_digest;
    Checkpoint resume_cp;
    if (resume) {
        fs::path cp = dir / "checkpoint.json";
        if (dir.empty() || !fs::exists(cp))
            throw ValidationError("resume requested but no checkpoint found");
        resume_cp = Checkpoint::from_json(read_file(cp));
        hooks.resume = &resume_cp;
    }
    if (progress) {
        hooks.on_epoch = [&](const EpochReport& r, double ms) {
            json line;
            line["event"] = "epoch";
            line["model"] = to_string(spec.engine.model_kind);
            line["eta"] = spec.engine.eta;
            line["run"] = spec.engine.run_index;
            line["epoch"] = r.epoch;
            line["events"] = r.events_this_epoch;
            line["adoption"] = r.adoption_events;
            line["wall_ms"] = ms;
            std::string text = line.dump();
            if (mu) {
                std::lock_guard<std::mutex> lock(*mu);
                progress(text);
            } else {
                progress(text);
            }
        };
    }
    if (spec.checkpoint) {
        hooks.on_checkpoint = [&](const Checkpoint& c) {
            write_file_atomic(dir / "checkpoint.json", c.to_json());
        };
    }

    auto result = run_simulation(spec.engine, p.data, p.split, p.trace, hooks);

    if (!dir.empty()) {
        write_file(dir / "log.csv", format_log(result.log));
        std::string lines;
        for (const auto& r : result.reports) {
            lines += to_json_line(r);
            lines += '\n';
        }
        write_file(dir / "reports.jsonl", lines);
        double wall = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        write_file(dir / "manifest.json",
                   cell_manifest(spec, cfg_json, p, cfg_digest, result.reports, wall).dump(2) +
                       "\n");
    }
    return std::move(result.reports);
}

} // namespace

std::string cmd_simulate(const std::string& merged_config, const std::string& out_dir,
                         bool resume, const ProgressFn& progress) {
    RunSpec spec = resolve_config(merged_config);
    Prepared p = prepare(spec);
    uint64_t cfg_digest = config_digest(merged_config);
    auto t0 = std::chrono::steady_clock::now();
    auto reports = execute_cell(spec, merged_config, p, cfg_digest,
                                out_dir.empty() ? fs::path() : fs::path(out_dir), resume,
                                progress, nullptr);
    double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    json manifest = cell_manifest(spec, merged_config, p, cfg_digest, reports, wall);
    json reps = json::array();
    for (const auto& r : reports) reps.push_back(json::parse(to_json_line(r)));
    manifest["reports"] = std::move(reps);
    if (!out_dir.empty()) manifest["out_dir"] = out_dir;
    return manifest.dump(2);
}

namespace {

struct CellPlan {
    ModelKind kind;
    double eta;
    int run;
    std::string cfg;
    uint64_t digest = 0;
    fs::path dir;
    std::vector<EpochReport> reports;
    std::string error;
};

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

} // namespace

std::string cmd_sweep(const std::string& merged_config, const std::string& out_root,
                      const std::string& sweep_id, int jobs, const ProgressFn& progress) {
    RunSpec base = resolve_config(merged_config);
    if (jobs < 1) jobs = 1;
    if (out_root.empty()) throw ValidationError("sweep needs an output root directory");

    Prepared p = prepare(base);

    std::string id = sweep_id.empty()
                         ? "sweep-" + digest_hex(config_digest(merged_config)).substr(0, 12)
                         : sweep_id;
    fs::path root = fs::path(out_root) / id;
    fs::create_directories(root);

    std::vector<CellPlan> cells;
    for (ModelKind kind : base.sweep_models)
        for (double eta : base.eta_grid)
            for (int run = 0; run < base.n_runs; ++run) {
                CellPlan c;
                c.kind = kind;
                c.eta = eta;
                c.run = run;
                c.cfg = patch_cell_config(merged_config, kind, eta, run);
                c.digest = config_digest(c.cfg);
                c.dir = root / to_string(kind) / eta_dir(eta) / ("run-" + std::to_string(run));
                cells.push_back(std::move(c));
            }

    std::mutex progress_mu;
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            auto& c = cells[i];
            try {
                RunSpec spec = resolve_config(c.cfg);
                c.reports = execute_cell(spec, c.cfg, p, c.digest, c.dir, false, progress,
                                         &progress_mu);
            } catch (const std::exception& e) {
                c.error = e.what();
            }
        }
    };
    size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), cells.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // per-run rows
    std::string cells_csv =
        "model,eta,run,epoch,mean_individual_gini,collective_gini,mean_jaccard,"
        "item_coverage,events_this_epoch,adoption_events\n";
    for (const auto& c : cells) {
        if (!c.error.empty()) continue;
        for (const auto& r : c.reports) {
            cells_csv += to_string(c.kind);
            cells_csv += ',' + fmt_double(c.eta);
            cells_csv += ',' + std::to_string(c.run);
            cells_csv += ',' + std::to_string(r.epoch);
            cells_csv += ',' + fmt_double(r.mean_individual_gini);
            cells_csv += ',' + fmt_double(r.collective_gini);
            cells_csv += ',' + fmt_double(r.mean_jaccard);
            cells_csv += ',' + fmt_double(r.item_coverage);
            cells_csv += ',' + std::to_string(r.events_this_epoch);
            cells_csv += ',' + std::to_string(r.adoption_events);
            cells_csv += '\n';
        }
    }
    write_file(root / "cells.csv", cells_csv);

    // aggregate over runs per (model, eta, epoch), in plan order
    std::string summary_csv =
        "model,eta,epoch,n_runs,mean_individual_gini_mean,mean_individual_gini_std,"
        "collective_gini_mean,collective_gini_std,mean_jaccard_mean,mean_jaccard_std,"
        "item_coverage_mean,item_coverage_std,events_mean,events_std,adoption_mean,"
        "adoption_std\n";
    for (ModelKind kind : base.sweep_models)
        for (double eta : base.eta_grid) {
            std::vector<const CellPlan*> group;
            for (const auto& c : cells)
                if (c.kind == kind && c.eta == eta && c.error.empty()) group.push_back(&c);
            if (group.empty()) continue;
            size_t n_epochs = group.front()->reports.size();
            for (size_t e = 0; e < n_epochs; ++e) {
                auto collect = [&](auto&& get) {
                    std::vector<double> xs;
                    for (const auto* c : group)
                        if (e < c->reports.size()) xs.push_back(get(c->reports[e]));
                    return xs;
                };
                auto emit = [&](const std::vector<double>& xs, std::string& row) {
                    double mean = 0.0;
                    for (double x : xs) mean += x;
                    mean /= static_cast<double>(xs.size());
                    row += ',' + fmt_double(mean);
                    row += ',' + fmt_double(sample_std(xs, mean));
                };
                std::string row = to_string(kind);
                row += ',' + fmt_double(eta);
                row += ',' + std::to_string(group.front()->reports[e].epoch);
                row += ',' + std::to_string(group.size());
                emit(collect([](const EpochReport& r) { return r.mean_individual_gini; }), row);
                emit(collect([](const EpochReport& r) { return r.collective_gini; }), row);
                emit(collect([](const EpochReport& r) { return r.mean_jaccard; }), row);
                emit(collect([](const EpochReport& r) { return r.item_coverage; }), row);
                emit(collect([](const EpochReport& r) {
                         return static_cast<double>(r.events_this_epoch);
                     }),
                     row);
                emit(collect([](const EpochReport& r) {
                         return static_cast<double>(r.adoption_events);
                     }),
                     row);
                summary_csv += row;
                summary_csv += '\n';
            }
        }
    write_file(root / "summary.csv", summary_csv);

    size_t failed = 0;
    json cell_rows = json::array();
    for (const auto& c : cells) {
        if (!c.error.empty()) ++failed;
        cell_rows.push_back({{"model", to_string(c.kind)},
                             {"eta", c.eta},
                             {"run", c.run},
                             {"status", c.error.empty() ? "ok" : "failed"},
                             {"error", c.error},
                             {"dir", fs::relative(c.dir, root).string()}});
    }

    json manifest;
    manifest["format"] = "recloop-manifest";
    manifest["version"] = 1;
    manifest["kind"] = "sweep";
    manifest["sweep_id"] = id;
    manifest["config"] = json::parse(merged_config);
    manifest["config_digest"] = digest_hex(config_digest(merged_config));
    manifest["data_digest"] = digest_hex(p.data_digest);
    manifest["data"] = data_summary(p.data);
    manifest["cells"] = std::move(cell_rows);
    manifest["outputs"] = {{"cells", "cells.csv"}, {"summary", "summary.csv"}};
    manifest["status"] =
        failed == 0 ? "ok" : (failed == cells.size() ? "failed" : "partial");
    manifest["root"] = root.string();
    write_file(root / "manifest.json", manifest.dump(2) + "\n");
    return manifest.dump(2);
}

std::string compute_metrics(const InteractionLog& log, const std::string& options_json) {
    json opt = options_json.empty() ? json::object()
                                    : json::parse(options_json, nullptr, false);
    if (opt.is_discarded() || !opt.is_object())
        throw ValidationError("metrics options must be a JSON object");
    for (const auto& [key, value] : opt.items()) {
        (void)value;
        if (key != "begin" && key != "end" && key != "jaccard_exact_max_users" &&
            key != "jaccard_sample_pairs" && key != "jaccard_seed")
            throw ValidationError("unknown metrics option: " + key);
    }
    int begin = opt.value("begin", -1);
    int end = opt.value("end", -1);
    DayRange w{begin < 0 ? 0 : begin, end < 0 ? log.span_days() : end};
    if (w.begin < 0 || w.end > log.span_days() || w.empty())
        throw ValidationError("metrics window outside the log span");

    JaccardOptions jac;
    jac.exact_max_users = opt.value("jaccard_exact_max_users", jac.exact_max_users);
    jac.sample_pairs = opt.value("jaccard_sample_pairs", jac.sample_pairs);
    jac.seed = opt.value("jaccard_seed", jac.seed);

    auto events = log.window(w);
    std::vector<char> active(log.user_count(), 0);
    for (const auto& e : events) active[e.user] = 1;
    size_t n_active = 0;
    for (char a : active) n_active += a;

    json out;
    out["window"] = json::array({w.begin, w.end});
    out["users"] = log.user_count();
    out["items"] = log.item_count();
    out["events_in_window"] = events.size();
    out["active_users"] = n_active;
    out["mean_individual_gini"] = mean_individual_gini(log, w);
    out["collective_gini"] = collective_gini(log, w);
    out["mean_jaccard"] = mean_jaccard(log, w, jac);
    out["item_coverage"] = item_coverage(log, w);
    return out.dump(2);
}

namespace {

struct CellRow {
    std::string model;
    std::string eta; // textual form, exactly as written
    int run = 0;
    int epoch = 0;
    double metric[4] = {0, 0, 0, 0}; // individual gini, collective gini, jaccard, coverage
};

int metric_column(const std::string& series) {
    if (series.rfind("individual-gini", 0) == 0 || series.rfind("gini", 0) == 0) return 0;
    if (series.rfind("collective-gini", 0) == 0) return 1;
    if (series.rfind("jaccard", 0) == 0) return 2;
    if (series.rfind("coverage", 0) == 0) return 3;
    return -1;
}

std::vector<CellRow> read_cells_csv(const fs::path& path) {
    std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty cells.csv");
    std::vector<CellRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 10) throw ValidationError("malformed cells.csv row: " + line);
        CellRow r;
        r.model = f[0];
        r.eta = f[1];
        r.run = std::stoi(f[2]);
        r.epoch = std::stoi(f[3]);
        for (int m = 0; m < 4; ++m) r.metric[m] = std::stod(f[4 + m]);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace

void cmd_export(const std::string& sweep_dir, const std::string& options_json) {
    json opt = json::parse(options_json, nullptr, false);
    if (opt.is_discarded() || !opt.is_object())
        throw ValidationError("export options must be a JSON object");
    std::string series = opt.at("series").get<std::string>();
    std::string out_path = opt.at("out").get<std::string>();
    fs::path root(sweep_dir);
    if (!fs::exists(root / "manifest.json"))
        throw ValidationError("no sweep manifest under " + sweep_dir);

    static const char* kSeries[] = {
        "gini-vs-eta",           "individual-gini-vs-eta",  "collective-gini-vs-eta",
        "jaccard-vs-eta",        "coverage-vs-eta",         "individual-gini-vs-epoch",
        "collective-gini-vs-epoch", "jaccard-vs-epoch",     "coverage-vs-epoch",
        "item-rank-frequency",   "user-rank-frequency",     "edges"};
    bool known = false;
    for (const char* s : kSeries) known = known || series == s;
    if (!known) {
        std::string names;
        for (const char* s : kSeries) names += std::string(names.empty() ? "" : ", ") + s;
        throw ValidationError("unknown series '" + series + "' (expected one of: " + names + ")");
    }

    if (series.find("-vs-") != std::string::npos) {
        bool vs_eta = series.size() > 7 && series.rfind("-vs-eta") == series.size() - 7;
        int col = metric_column(series);
        auto rows = read_cells_csv(root / "cells.csv");
        if (rows.empty()) throw ValidationError("cells.csv has no rows");

        // (model, eta) group order follows first appearance, which is the
        // sweep plan order
        std::vector<std::pair<std::string, std::string>> groups;
        auto group_index = [&](const CellRow& r) {
            for (size_t i = 0; i < groups.size(); ++i)
                if (groups[i].first == r.model && groups[i].second == r.eta) return i;
            groups.emplace_back(r.model, r.eta);
            return groups.size() - 1;
        };

        std::string csv;
        if (vs_eta) {
            // final-epoch value per run
            std::map<std::pair<size_t, int>, CellRow> last; // (group, run) -> row
            for (const auto& r : rows) {
                auto key = std::make_pair(group_index(r), r.run);
                auto it = last.find(key);
                if (it == last.end() || r.epoch > it->second.epoch) last[key] = r;
            }
            csv = "model,eta,mean,std\n";
            for (size_t g = 0; g < groups.size(); ++g) {
                std::vector<double> xs;
                for (const auto& [key, r] : last)
                    if (key.first == g) xs.push_back(r.metric[col]);
                if (xs.empty()) continue;
                double mean = 0.0;
                for (double x : xs) mean += x;
                mean /= static_cast<double>(xs.size());
                csv += groups[g].first + ',' + groups[g].second + ',' + fmt_double(mean) +
                       ',' + fmt_double(sample_std(xs, mean)) + '\n';
            }
        } else {
            std::map<std::pair<size_t, int>, std::vector<double>> per_epoch;
            for (const auto& r : rows)
                per_epoch[{group_index(r), r.epoch}].push_back(r.metric[col]);
            csv = "model,eta,epoch,mean,std\n";
            for (size_t g = 0; g < groups.size(); ++g)
                for (const auto& [key, xs] : per_epoch) {
                    if (key.first != g) continue;
                    double mean = 0.0;
                    for (double x : xs) mean += x;
                    mean /= static_cast<double>(xs.size());
                    csv += groups[g].first + ',' + groups[g].second + ',' +
                           std::to_string(key.second) + ',' + fmt_double(mean) + ',' +
                           fmt_double(sample_std(xs, mean)) + '\n';
                }
        }
        write_file(out_path, csv);
        return;
    }

    // per-cell series need the run directory
    std::string model = opt.value("model", "");
    if (model.empty()) throw ValidationError("series '" + series + "' needs a model");
    if (!opt.contains("eta")) throw ValidationError("series '" + series + "' needs an eta");
    double eta = opt.at("eta").get<double>();
    int run = opt.value("run", 0);
    fs::path dir = root / model / eta_dir(eta) / ("run-" + std::to_string(run));
    if (!fs::exists(dir / "manifest.json"))
        throw ValidationError("no run at " + dir.string());
    json manifest = json::parse(read_file(dir / "manifest.json"));
    DayRange w{manifest.at("sim").at("metric_window").at(0).get<int>(),
               manifest.at("sim").at("metric_window").at(1).get<int>()};
    InteractionLog log = load_interactions((dir / "log.csv").string());

    std::string csv;
    if (series == "item-rank-frequency") {
        auto s = item_strength(log, w);
        auto rf = rank_frequency(s);
        csv = "rank,weight\n";
        for (size_t r = 0; r < rf.weight.size(); ++r)
            csv += std::to_string(r + 1) + ',' + std::to_string(rf.weight[r]) + '\n';
    } else if (series == "user-rank-frequency") {
        std::vector<uint64_t> totals(log.user_count(), 0);
        for (const auto& e : log.window(w)) ++totals[e.user];
        auto rf = rank_frequency(totals);
        csv = "rank,weight\n";
        for (size_t r = 0; r < rf.weight.size(); ++r)
            csv += std::to_string(r + 1) + ',' + std::to_string(rf.weight[r]) + '\n';
    } else { // edges
        auto edges = coconsumption_edges(log, w);
        csv = "item_a,item_b,weight\n";
        for (const auto& e : edges)
            csv += log.item_ids[e.item_a] + ',' + log.item_ids[e.item_b] + ',' +
                   std::to_string(e.weight) + '\n';
    }
    write_file(out_path, csv);
}

} // namespace recloop
