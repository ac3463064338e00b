#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>

#include "locsim/errors.hpp"
#include "locsim/gamesim.hpp"

using namespace locsim;

namespace {

SimConfig small_config() {
    SimConfig c;
    c.game_label = "unit";
    c.word_count = 4096;
    c.seed = 11;
    c.encoding = EncodingSpec{BaseEnc{}};
    c.resource_start = 100;
    c.resource_direction = 1;
    c.resource_change_count = 7;
    c.frame_period_ms = 16;
    c.collection = PacedCollection{2000, 3, true};
    return c;
}

bool dumps_equal(const DumpSequence& a, const DumpSequence& b) {
    if (a.dumps.size() != b.dumps.size()) return false;
    for (std::size_t i = 0; i < a.dumps.size(); ++i) {
        if (a.dumps[i].words != b.dumps[i].words) return false;
        if (a.dumps[i].timestamp_ms != b.dumps[i].timestamp_ms) return false;
        if (a.dumps[i].on_screen_value != b.dumps[i].on_screen_value) return false;
    }
    return a.ground_truth.locations == b.ground_truth.locations;
}

}  // namespace

TEST_CASE("schedule: paced run covers change_count+1 values, 3 dumps each, plus pre-level") {
    const auto trace = schedule(small_config());
    std::map<std::uint64_t, int> dumps_per_value;
    std::uint64_t value = 100;
    int dump_count = 0;
    for (const auto& ev : trace.events) {
        if (ev.kind == SimEvent::Kind::ResourceWrite) value = ev.new_value;
        if (ev.kind == SimEvent::Kind::TakeDump) {
            ++dumps_per_value[value];
            ++dump_count;
        }
    }
    CHECK(dump_count == 25);
    CHECK(dumps_per_value.size() == 8);  // 100..107
    CHECK(dumps_per_value[100] == 4);    // pre-level extra
    for (std::uint64_t v = 101; v <= 107; ++v) CHECK(dumps_per_value[v] == 3);
}

TEST_CASE("schedule: fast 500ms interval with 16ms frames has >= 31 frames between dumps") {
    auto c = small_config();
    c.collection = FastCollection{500, 6};
    c.resource_change_count = 3;
    const auto trace = schedule(c);
    int frames_since_dump = -1;
    bool saw_gap = false;
    for (const auto& ev : trace.events) {
        if (ev.kind == SimEvent::Kind::FrameRead && frames_since_dump >= 0) {
            ++frames_since_dump;
        }
        if (ev.kind == SimEvent::Kind::TakeDump) {
            if (frames_since_dump >= 0) {
                CHECK(frames_since_dump >= 31);
                saw_gap = true;
            }
            frames_since_dump = 0;
        }
    }
    CHECK(saw_gap);
}

TEST_CASE("schedule: direction -1 from 20 with 7 changes ends at 13") {
    auto c = small_config();
    c.resource_start = 20;
    c.resource_direction = -1;
    c.resource_change_count = 7;
    c.collection = PacedCollection{2000, 3, false};  // AssaultCube style: no pre-level
    const auto trace = schedule(c);
    std::uint64_t value = c.resource_start;
    std::set<std::uint64_t> seen;
    int dumps = 0;
    for (const auto& ev : trace.events) {
        if (ev.kind == SimEvent::Kind::ResourceWrite) value = ev.new_value;
        if (ev.kind == SimEvent::Kind::TakeDump) {
            seen.insert(value);
            ++dumps;
        }
    }
    CHECK(value == 13);
    CHECK(dumps == 24);
    CHECK(seen == std::set<std::uint64_t>{13, 14, 15, 16, 17, 18, 19, 20});
}

TEST_CASE("schedule: timestamps non-decreasing, writes land on frames") {
    const auto trace = schedule(small_config());
    std::uint64_t last = 0;
    for (const auto& ev : trace.events) {
        CHECK(ev.timestamp_ms >= last);
        last = ev.timestamp_ms;
        if (ev.kind == SimEvent::Kind::ResourceWrite) CHECK(ev.timestamp_ms % 16 == 0);
    }
}

TEST_CASE("simulate: base encoding stores the on-screen value at ground truth in every dump") {
    const auto seq = simulate(small_config());
    REQUIRE(seq.ground_truth.locations.size() == 1);
    const auto loc = seq.ground_truth.locations[0];
    CHECK(seq.dumps.size() == 25);
    for (const auto& d : seq.dumps) {
        CHECK(d.words[loc] == d.on_screen_value);
    }
    CHECK(validate_sequence(seq).empty());
}

TEST_CASE("simulate: same config and seed give identical sequences, other seeds differ") {
    const auto a = simulate(small_config());
    const auto b = simulate(small_config());
    CHECK(dumps_equal(a, b));
    auto c = small_config();
    c.seed = 12;
    CHECK_FALSE(dumps_equal(a, simulate(c)));
}

TEST_CASE("simulate: static background words are constant, noise words differ") {
    const auto seq = simulate(small_config());
    const auto& first = seq.dumps.front().words;
    const auto& last = seq.dumps.back().words;
    std::size_t constant = 0, changing = 0, zeros = 0;
    std::set<std::uint32_t> special(seq.ground_truth.locations.begin(),
                                    seq.ground_truth.locations.end());
    for (const auto& [idx, role] : seq.ground_truth.distractor_locations) {
        (void)role;
        special.insert(idx);
    }
    for (std::uint32_t i = 0; i < seq.word_count; ++i) {
        if (special.count(i)) continue;
        bool same = true;
        for (const auto& d : seq.dumps) same = same && d.words[i] == first[i];
        if (same && first[i] == 0) {
            ++zeros;
        } else if (same) {
            ++constant;
        } else {
            ++changing;
        }
        (void)last;
    }
    // mix 0.6/0.2/0.1/0.1 over 4095 background words; drifting counters may
    // stand still only with negligible probability
    CHECK(constant > 2300);
    CHECK(constant < 2600);
    CHECK(zeros > 300);
    CHECK(changing > 1100);
}

TEST_CASE("simulate: dyn_xor UoR with N=1 re-masks between any two dumps") {
    auto c = small_config();
    c.encoding = encoding_from_json(
        nlohmann::json::parse(R"({"kind":"dyn_xor_uor","N":1,"initial_mask":"0x1"})"));
    c.collection = PacedCollection{2000, 3, false};
    c.resource_change_count = 2;
    const auto seq = simulate(c);
    const auto loc = seq.ground_truth.locations[0];
    for (std::size_t i = 1; i < seq.dumps.size(); ++i) {
        // value constant or not, the stored word must differ across frames
        CHECK(seq.dumps[i].words[loc] != seq.dumps[i - 1].words[loc]);
    }
}

TEST_CASE("simulate: dyn_xor UoW re-encodes on writes with the current mask") {
    auto c = small_config();
    c.encoding = encoding_from_json(
        nlohmann::json::parse(R"({"kind":"dyn_xor_uow","N":2,"initial_mask":"0xAB"})"));
    const auto seq = simulate(c);
    CHECK(validate_sequence(seq).empty());
    // ground-truth consistency is asserted inside simulate; just re-check
    // dumps where the value was constant: word must be constant between
    // writes (mask only changes on writes)
    const auto loc = seq.ground_truth.locations[0];
    for (std::size_t i = 1; i < seq.dumps.size(); ++i) {
        if (seq.dumps[i].on_screen_value == seq.dumps[i - 1].on_screen_value) {
            CHECK(seq.dumps[i].words[loc] == seq.dumps[i - 1].words[loc]);
        }
    }
}

TEST_CASE("simulate: distractor trajectories follow their stride contracts") {
    auto c = small_config();
    c.distractors.duplicate_display = true;
    c.distractors.opposite_stride = true;
    c.distractors.same_stride = true;
    c.distractors.stride_start = 500;
    const auto seq = simulate(c);
    std::uint32_t dup = 0, opp = 0, same = 0;
    for (const auto& [idx, role] : seq.ground_truth.distractor_locations) {
        if (role == DistractorRole::DuplicateDisplay) dup = idx;
        if (role == DistractorRole::OppositeStride) opp = idx;
        if (role == DistractorRole::SameStride) same = idx;
    }
    for (const auto& d : seq.dumps) {
        const auto delta = d.on_screen_value - 100;  // changes since start
        CHECK(d.words[dup] == d.on_screen_value);
        CHECK(d.words[opp] == 500 - delta);
        CHECK(d.words[same] == 500 + delta);
    }
}

TEST_CASE("simulate: rnc ground truth occupies non-adjacent words in moduli order") {
    auto c = small_config();
    c.encoding = EncodingSpec{RncEnc{{89, 97, 93}}};
    const auto seq = simulate(c);
    REQUIRE(seq.ground_truth.locations.size() == 3);
    const auto& locs = seq.ground_truth.locations;
    for (std::size_t i = 0; i < locs.size(); ++i) {
        for (std::size_t j = i + 1; j < locs.size(); ++j) {
            const auto lo = std::min(locs[i], locs[j]);
            const auto hi = std::max(locs[i], locs[j]);
            CHECK(hi - lo >= 2);
        }
    }
    for (const auto& d : seq.dumps) {
        CHECK(d.words[locs[0]] == d.on_screen_value % 89);
        CHECK(d.words[locs[1]] == d.on_screen_value % 97);
        CHECK(d.words[locs[2]] == d.on_screen_value % 93);
    }
}

TEST_CASE("config validation: errors name the offending field") {
    auto c = small_config();
    c.background_mix.statics = 0.9;  // sum != 1
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("background_mix") != std::string::npos);
    }
    auto d = small_config();
    d.resource_direction = -1;
    d.resource_start = 3;
    d.resource_change_count = 7;
    CHECK_THROWS_AS(d.validate(), ConfigError);
    auto e = small_config();
    e.encoding = EncodingSpec{RncEnc{{2, 3}}};  // product 6 < 107
    CHECK_THROWS_AS(e.validate(), ConfigError);
}

TEST_CASE("sim config json round-trip") {
    auto c = small_config();
    c.distractors.duplicate_display = true;
    const auto j = sim_config_to_json(c);
    const auto again = sim_config_from_json(j);
    CHECK(sim_config_to_json(again) == j);
    // unknown collection kind
    auto bad = j;
    bad["collection"]["kind"] = "slow";
    CHECK_THROWS_AS(sim_config_from_json(bad), ConfigError);
}
