#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "recloop/dataset.hpp"
#include "recloop/engine.hpp"

namespace recloop {

// Full default configuration, pretty-printed. Every settable key appears
// here; anything else in a user config is rejected.
std::string default_config_json();

// Layer a user config and dotted-path overrides (e.g. "engine.eta=0.5")
// over the defaults. Unknown keys and type mismatches are errors. Returns
// the merged document.
std::string merge_config(const std::string& user_json,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

// Fully resolved run parameters.
struct RunSpec {
    std::string data_source; // "synth" or "file"
    std::string data_path;
    std::string preset;      // loader schema preset
    LoadOptions load;
    int min_active_months = 0; // 0 disables activity filtering
    SynthParams synth;

    EngineConfig engine;
    int n_runs = 5;
    bool checkpoint = false; // write a resumable snapshot each epoch
    std::vector<double> eta_grid;
    std::vector<ModelKind> sweep_models;
};

RunSpec resolve_config(const std::string& merged_json);

uint64_t fnv1a64(std::string_view bytes);

// Digest of the simulation-relevant sections (sweep grid excluded), taken
// over the canonical dump of the merged document.
uint64_t config_digest(const std::string& merged_json);

std::string digest_hex(uint64_t digest);

} // namespace recloop
