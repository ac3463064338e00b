#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "locsim/encodings.hpp"

namespace locsim {

// One timestamped snapshot of the flat word array, annotated with the
// resource amount the player saw at that instant.
struct Dump {
    std::uint32_t ordinal = 0;
    std::uint64_t timestamp_ms = 0;  // simulated in-game clock
    std::uint64_t on_screen_value = 0;
    std::vector<WordValue> words;
};

enum class DistractorRole { DuplicateDisplay, OppositeStride, SameStride };

std::string distractor_role_name(DistractorRole role);
DistractorRole distractor_role_from_name(const std::string& name);

struct GroundTruth {
    // Word indices holding the encoded resource; RNC uses one per modulus,
    // in moduli order. Everything else uses exactly one.
    std::vector<std::uint32_t> locations;
    EncodingSpec encoding;
    std::map<std::uint32_t, DistractorRole> distractor_locations;
};

struct CollectionDescriptor {
    std::string kind = "custom";  // "paced" | "fast" | "custom"
    std::uint64_t interval_ms = 0;
    std::uint32_t change_every_n_dumps = 0;
};

struct DumpSequence {
    std::string game_label;
    std::uint32_t word_count = 0;
    std::vector<Dump> dumps;
    GroundTruth ground_truth;
    CollectionDescriptor collection_policy;
    std::uint64_t rng_seed = 0;
};

// An attacker's scan subsequence: strictly increasing dump ordinals into a
// shared, immutable DumpSequence.
struct SelectedSequence {
    std::shared_ptr<const DumpSequence> source;
    std::vector<std::uint32_t> indices;
};

// Returns one human-readable violation per broken invariant; empty means the
// sequence is well-formed. Violations are data, not errors.
std::vector<std::string> validate_sequence(const DumpSequence& seq);

}  // namespace locsim
