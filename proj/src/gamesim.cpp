#include "locsim/gamesim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "locsim/errors.hpp"
#include "locsim/rng.hpp"

namespace locsim {

namespace {

// rng sub-stream tags
enum : std::uint64_t {
    kStreamLayout = 1,
    kStreamStaticInit = 2,
    kStreamDriftInit = 3,
    kStreamNoise = 4,
    kStreamDriftSteps = 5,
    kStreamEncoder = 6,
};

std::uint64_t collection_interval(const SimConfig& c) {
    if (auto* p = std::get_if<PacedCollection>(&c.collection)) return p->interval_ms;
    return std::get<FastCollection>(c.collection).interval_ms;
}

std::uint32_t collection_change_every(const SimConfig& c) {
    if (auto* p = std::get_if<PacedCollection>(&c.collection)) return p->change_every_n_dumps;
    return std::get<FastCollection>(c.collection).change_every_n_dumps;
}

bool has_pre_level_dump(const SimConfig& c) {
    if (auto* p = std::get_if<PacedCollection>(&c.collection)) return p->pre_level_dump;
    return false;
}

}  // namespace

void SimConfig::validate() const {
    if (word_count == 0) throw ConfigError("word_count must be positive");
    if (word_count < 64) throw ConfigError("word_count too small for layout (need >= 64)");
    if (resource_direction != 1 && resource_direction != -1)
        throw ConfigError("resource_direction must be +1 or -1");
    if (resource_change_count == 0) throw ConfigError("resource_change_count must be positive");
    if (resource_direction < 0 && resource_start < resource_change_count)
        throw ConfigError("resource would go negative");
    const double sum = background_mix.statics + background_mix.per_dump_noise +
                       background_mix.drifting_counters + background_mix.zeros;
    const double fractions[] = {background_mix.statics, background_mix.per_dump_noise,
                                background_mix.drifting_counters, background_mix.zeros};
    for (double f : fractions) {
        if (f < 0.0 || f > 1.0) throw ConfigError("background_mix fractions must be in [0,1]");
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("background_mix fractions must sum to 1");
    if (frame_period_ms == 0) throw ConfigError("frame_period_ms must be positive");
    if (collection_interval(*this) == 0) throw ConfigError("collection.interval_ms must be positive");
    if (collection_change_every(*this) == 0)
        throw ConfigError("collection.change_every_n_dumps must be positive");
    if (frame_period_ms > collection_interval(*this))
        throw ConfigError("frame_period_ms must not exceed collection.interval_ms");

    encoding.validate();
    const std::uint64_t max_resource =
        resource_direction > 0 ? resource_start + resource_change_count : resource_start;
    if (max_resource > encoding.max_value()) {
        std::ostringstream os;
        os << "encoding cannot represent resource value " << max_resource;
        throw ConfigError(os.str());
    }
}

EventTrace schedule(const SimConfig& config) {
    config.validate();
    const std::uint64_t interval = collection_interval(config);
    const std::uint32_t change_every = collection_change_every(config);
    const std::uint64_t fp = config.frame_period_ms;
    const std::uint64_t levels = config.resource_change_count + 1;
    const std::uint64_t dumps_needed = levels * change_every;

    EventTrace trace;
    std::uint64_t value = config.resource_start;

    if (has_pre_level_dump(config)) {
        trace.events.push_back({0, SimEvent::Kind::TakeDump, 0});
    }

    std::uint64_t next_frame = fp;
    std::uint64_t next_dump = interval;
    std::uint64_t dumps_taken = 0;
    std::uint32_t writes_done = 0;
    bool pending_write = false;

    while (dumps_taken < dumps_needed) {
        if (next_frame <= next_dump) {
            if (pending_write) {
                value = config.resource_direction > 0 ? value + 1 : value - 1;
                trace.events.push_back({next_frame, SimEvent::Kind::ResourceWrite, value});
                pending_write = false;
            }
            trace.events.push_back({next_frame, SimEvent::Kind::FrameRead, 0});
            if (next_frame == next_dump) {
                trace.events.push_back({next_dump, SimEvent::Kind::TakeDump, 0});
                ++dumps_taken;
                if (dumps_taken % change_every == 0 && writes_done < config.resource_change_count) {
                    pending_write = true;
                    ++writes_done;
                }
                next_dump += interval;
            }
            next_frame += fp;
        } else {
            trace.events.push_back({next_dump, SimEvent::Kind::TakeDump, 0});
            ++dumps_taken;
            if (dumps_taken % change_every == 0 && writes_done < config.resource_change_count) {
                pending_write = true;
                ++writes_done;
            }
            next_dump += interval;
        }
    }
    return trace;
}

DumpSequence simulate(const SimConfig& config) {
    const EventTrace trace = schedule(config);
    const std::uint32_t word_count = config.word_count;

    Rng layout_rng(derive_seed(config.seed, kStreamLayout));
    Rng static_rng(derive_seed(config.seed, kStreamStaticInit));
    Rng drift_init_rng(derive_seed(config.seed, kStreamDriftInit));
    Rng noise_rng(derive_seed(config.seed, kStreamNoise));
    Rng drift_rng(derive_seed(config.seed, kStreamDriftSteps));

    // --- layout: ground truth words (non-adjacent), then distractors -------
    const std::size_t footprint = config.encoding.footprint();
    std::set<std::uint32_t> taken;
    std::vector<std::uint32_t> gt_locations;
    while (gt_locations.size() < footprint) {
        const auto idx = static_cast<std::uint32_t>(layout_rng.below(word_count));
        bool ok = true;
        for (auto existing : gt_locations) {
            const std::uint32_t lo = std::min(existing, idx);
            const std::uint32_t hi = std::max(existing, idx);
            if (hi - lo < 2) {  // RNC words must not leak structure via adjacency
                ok = false;
                break;
            }
        }
        if (ok && taken.insert(idx).second) gt_locations.push_back(idx);
    }

    std::map<std::uint32_t, DistractorRole> distractors;
    auto place_distractor = [&](DistractorRole role) {
        while (true) {
            const auto idx = static_cast<std::uint32_t>(layout_rng.below(word_count));
            if (taken.insert(idx).second) {
                distractors[idx] = role;
                return idx;
            }
        }
    };
    std::uint32_t dup_idx = 0, opp_idx = 0, same_idx = 0;
    if (config.distractors.duplicate_display)
        dup_idx = place_distractor(DistractorRole::DuplicateDisplay);
    if (config.distractors.opposite_stride)
        opp_idx = place_distractor(DistractorRole::OppositeStride);
    if (config.distractors.same_stride)
        same_idx = place_distractor(DistractorRole::SameStride);

    // --- background classes -------------------------------------------------
    std::vector<std::uint32_t> background;
    background.reserve(word_count - taken.size());
    for (std::uint32_t i = 0; i < word_count; ++i) {
        if (taken.find(i) == taken.end()) background.push_back(i);
    }
    layout_rng.shuffle(background);

    const std::size_t b = background.size();
    const double fracs[4] = {config.background_mix.statics, config.background_mix.per_dump_noise,
                             config.background_mix.drifting_counters, config.background_mix.zeros};
    std::size_t counts[4];
    std::size_t assigned = 0;
    double remainders[4];
    for (int i = 0; i < 4; ++i) {
        const double exact = fracs[i] * static_cast<double>(b);
        counts[i] = static_cast<std::size_t>(exact);
        remainders[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < b) {  // largest-remainder rounding, ties by class order
        int best = 0;
        for (int i = 1; i < 4; ++i) {
            if (remainders[i] > remainders[best]) best = i;
        }
        ++counts[best];
        remainders[best] = -1.0;
        ++assigned;
    }

    std::vector<std::uint32_t> noise_words, drift_words;
    std::vector<WordValue> memory(word_count, 0);
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) memory[background[cursor++]] = static_rng.u32();
    for (std::size_t i = 0; i < counts[1]; ++i) noise_words.push_back(background[cursor++]);
    for (std::size_t i = 0; i < counts[2]; ++i) {
        const auto idx = background[cursor++];
        drift_words.push_back(idx);
        memory[idx] = drift_init_rng.u32();
    }
    // remaining words are the zero class; memory already zero

    // --- resource, encoder, distractor state --------------------------------
    EncoderState enc_state =
        make_encoder_state(config.encoding, derive_seed(config.seed, kStreamEncoder));
    std::uint64_t value = config.resource_start;

    auto store_ground_truth = [&] {
        const auto words = encode(config.encoding, enc_state, value);
        for (std::size_t k = 0; k < words.size(); ++k) memory[gt_locations[k]] = words[k];
    };
    store_ground_truth();

    WordValue opp_counter = config.distractors.stride_start;
    WordValue same_counter = config.distractors.stride_start;
    if (config.distractors.duplicate_display) memory[dup_idx] = static_cast<WordValue>(value);
    if (config.distractors.opposite_stride) memory[opp_idx] = opp_counter;
    if (config.distractors.same_stride) memory[same_idx] = same_counter;

    const bool uor = config.encoding.kind() == "dyn_xor_uor";
    const bool uow = config.encoding.kind() == "dyn_xor_uow";

    DumpSequence seq;
    seq.game_label = config.game_label;
    seq.word_count = word_count;
    seq.rng_seed = config.seed;
    seq.ground_truth.locations = gt_locations;
    seq.ground_truth.encoding = config.encoding;
    seq.ground_truth.distractor_locations = distractors;
    seq.collection_policy.kind =
        std::holds_alternative<PacedCollection>(config.collection) ? "paced" : "fast";
    seq.collection_policy.interval_ms = collection_interval(config);
    seq.collection_policy.change_every_n_dumps = collection_change_every(config);

    std::uint32_t ordinal = 0;
    for (const SimEvent& ev : trace.events) {
        switch (ev.kind) {
            case SimEvent::Kind::FrameRead: {
                for (auto idx : drift_words) {
                    memory[idx] += static_cast<WordValue>(drift_rng.below(3));
                }
                if (config.distractors.duplicate_display)
                    memory[dup_idx] = static_cast<WordValue>(value);
                if (uor && mask_update(config.encoding, enc_state, AccessEvent::Read)) {
                    memory[gt_locations[0]] = static_cast<WordValue>(value) ^
                                              enc_state.current_mask;
                }
                break;
            }
            case SimEvent::Kind::ResourceWrite: {
                value = ev.new_value;
                if (uow) mask_update(config.encoding, enc_state, AccessEvent::Write);
                store_ground_truth();
                if (config.distractors.opposite_stride) {
                    opp_counter -= static_cast<WordValue>(config.resource_direction);
                    memory[opp_idx] = opp_counter;
                }
                if (config.distractors.same_stride) {
                    same_counter += static_cast<WordValue>(config.resource_direction);
                    memory[same_idx] = same_counter;
                }
                break;
            }
            case SimEvent::Kind::TakeDump: {
                for (auto idx : noise_words) memory[idx] = noise_rng.u32();

                // generator self-check: ground truth must decode to the
                // on-screen value under the current encoder state
                std::vector<WordValue> gt_words;
                gt_words.reserve(footprint);
                for (auto loc : gt_locations) gt_words.push_back(memory[loc]);
                if (decode(config.encoding, enc_state, gt_words) != value) {
                    throw DataError("simulate: ground-truth words do not decode to the "
                                    "on-screen value");
                }

                Dump d;
                d.ordinal = ordinal++;
                d.timestamp_ms = ev.timestamp_ms;
                d.on_screen_value = value;
                d.words = memory;
                seq.dumps.push_back(std::move(d));
                break;
            }
        }
    }
    return seq;
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
    nlohmann::json j;
    j["game_label"] = c.game_label;
    j["word_count"] = c.word_count;
    j["seed"] = c.seed;
    j["encoding"] = encoding_to_json(c.encoding);
    j["resource_start"] = c.resource_start;
    j["resource_direction"] = c.resource_direction;
    j["resource_change_count"] = c.resource_change_count;
    j["background_mix"] = {{"static", c.background_mix.statics},
                           {"per_dump_noise", c.background_mix.per_dump_noise},
                           {"drifting_counters", c.background_mix.drifting_counters},
                           {"zeros", c.background_mix.zeros}};
    nlohmann::json d;
    d["duplicate_display"] = c.distractors.duplicate_display;
    d["opposite_stride"] = c.distractors.opposite_stride;
    d["same_stride"] = c.distractors.same_stride;
    if (c.distractors.stride_start != 0) d["stride_start"] = c.distractors.stride_start;
    j["distractors"] = d;
    j["frame_period_ms"] = c.frame_period_ms;
    nlohmann::json col;
    if (auto* p = std::get_if<PacedCollection>(&c.collection)) {
        col["kind"] = "paced";
        col["interval_ms"] = p->interval_ms;
        col["change_every_n_dumps"] = p->change_every_n_dumps;
        col["pre_level_dump"] = p->pre_level_dump;
    } else {
        const auto& f = std::get<FastCollection>(c.collection);
        col["kind"] = "fast";
        col["interval_ms"] = f.interval_ms;
        col["change_every_n_dumps"] = f.change_every_n_dumps;
    }
    j["collection"] = col;
    return j;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
    SimConfig c;
    try {
        c.game_label = j.value("game_label", std::string("sim"));
        c.word_count = j.at("word_count").get<std::uint32_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.encoding = encoding_from_json(j.at("encoding"));
        c.resource_start = j.at("resource_start").get<std::uint64_t>();
        c.resource_direction = j.at("resource_direction").get<int>();
        c.resource_change_count = j.at("resource_change_count").get<std::uint32_t>();
        if (j.contains("background_mix")) {
            const auto& m = j.at("background_mix");
            c.background_mix.statics = m.at("static").get<double>();
            c.background_mix.per_dump_noise = m.at("per_dump_noise").get<double>();
            c.background_mix.drifting_counters = m.at("drifting_counters").get<double>();
            c.background_mix.zeros = m.at("zeros").get<double>();
        }
        if (j.contains("distractors")) {
            const auto& d = j.at("distractors");
            c.distractors.duplicate_display = d.value("duplicate_display", false);
            c.distractors.opposite_stride = d.value("opposite_stride", false);
            c.distractors.same_stride = d.value("same_stride", false);
            c.distractors.stride_start = d.value("stride_start", 0u);
        }
        c.frame_period_ms = j.value("frame_period_ms", std::uint64_t{16});
        const auto& col = j.at("collection");
        const std::string kind = col.at("kind").get<std::string>();
        if (kind == "paced") {
            PacedCollection p;
            p.interval_ms = col.value("interval_ms", std::uint64_t{2000});
            p.change_every_n_dumps = col.value("change_every_n_dumps", 3u);
            p.pre_level_dump = col.value("pre_level_dump", false);
            c.collection = p;
        } else if (kind == "fast") {
            FastCollection f;
            f.interval_ms = col.value("interval_ms", std::uint64_t{500});
            f.change_every_n_dumps = col.value("change_every_n_dumps", 6u);
            c.collection = f;
        } else {
            throw ConfigError("collection.kind must be \"paced\" or \"fast\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sim config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace locsim
