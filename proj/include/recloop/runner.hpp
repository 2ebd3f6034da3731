#pragma once

#include <functional>
#include <string>

#include "recloop/config.hpp"
#include "recloop/types.hpp"

namespace recloop {

using ProgressFn = std::function<void(const std::string& line)>;

// Load, synthesize, and/or filter per the resolved config.
InteractionLog acquire_data(const RunSpec& spec);

// One simulation cell driven by the merged config document. When `out_dir`
// is non-empty the run directory receives log.csv, reports.jsonl and
// manifest.json (plus checkpoint.json when enabled). `resume` continues
// from out_dir's checkpoint. Returns the manifest document.
std::string cmd_simulate(const std::string& merged_config, const std::string& out_dir,
                         bool resume, const ProgressFn& progress = {});

// The full grid: sweep.models x sweep.eta_grid x engine.n_runs, writing
// <out_root>/<sweep_id>/<model>/eta-<v>/run-<r>/ per cell plus cells.csv,
// summary.csv and manifest.json at the sweep root. Cell failures are
// recorded without aborting. Returns the sweep manifest; its "status" is
// "ok", "partial" (some cells failed) or "failed" (all did).
std::string cmd_sweep(const std::string& merged_config, const std::string& out_root,
                      const std::string& sweep_id, int jobs,
                      const ProgressFn& progress = {});

// Consumption metrics of a log over a day window. `options_json` keys:
// begin, end (day indices; -1 = full span), jaccard_exact_max_users,
// jaccard_sample_pairs, jaccard_seed. Returns a JSON document.
std::string compute_metrics(const InteractionLog& log, const std::string& options_json);

// Plot-ready CSV series out of a finished sweep directory. `options_json`
// keys: series (required), model, eta, run (for per-cell series), out
// (required output path).
void cmd_export(const std::string& sweep_dir, const std::string& options_json);

} // namespace recloop
