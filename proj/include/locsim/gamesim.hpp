#pragma once

#include <cstdint>
#include <variant>

#include "locsim/core.hpp"

#include "json.hpp"

namespace locsim {

// Dump collection cadences (§ paced: value change every 3 dumps, optional
// extra dump before the level starts; fast: one dump each 500 ms, change
// every 6 dumps).
struct PacedCollection {
    std::uint64_t interval_ms = 2000;
    std::uint32_t change_every_n_dumps = 3;
    bool pre_level_dump = false;
};
struct FastCollection {
    std::uint64_t interval_ms = 500;
    std::uint32_t change_every_n_dumps = 6;
};

struct BackgroundMix {
    double statics = 0.60;
    double per_dump_noise = 0.20;
    double drifting_counters = 0.10;
    double zeros = 0.10;
};

struct DistractorFlags {
    bool duplicate_display = false;
    bool opposite_stride = false;
    bool same_stride = false;
    std::uint32_t stride_start = 0;
};

struct SimConfig {
    std::string game_label = "sim";
    std::uint32_t word_count = 1u << 16;
    std::uint64_t seed = 0;
    EncodingSpec encoding;
    std::uint64_t resource_start = 100;
    int resource_direction = 1;  // +1 or -1
    std::uint32_t resource_change_count = 7;
    BackgroundMix background_mix;
    DistractorFlags distractors;
    std::uint64_t frame_period_ms = 16;
    std::variant<PacedCollection, FastCollection> collection = PacedCollection{};

    void validate() const;  // throws ConfigError naming the offending field
};

nlohmann::json sim_config_to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& j);

struct SimEvent {
    enum class Kind { FrameRead, ResourceWrite, TakeDump };
    std::uint64_t timestamp_ms = 0;
    Kind kind = Kind::FrameRead;
    std::uint64_t new_value = 0;  // ResourceWrite only
};

struct EventTrace {
    std::vector<SimEvent> events;
};

// Deterministic event plan: frames every frame_period_ms, dumps per the
// collection cadence, one unit resource write after every
// change_every_n_dumps dumps (resource_change_count writes in total), each
// placed on the following frame. Paced pre_level_dump adds one dump at t=0
// outside the cadence.
EventTrace schedule(const SimConfig& config);

// Replays schedule(config) against a synthetic word array and snapshots it at
// every TakeDump. Fully determined by config.
DumpSequence simulate(const SimConfig& config);

}  // namespace locsim
