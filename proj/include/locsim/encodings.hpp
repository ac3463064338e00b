#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "locsim/rng.hpp"

#include "json.hpp"

namespace locsim {

using WordValue = std::uint32_t;

// The eight encodings that can protect the resource word(s) in memory.
// Static variants keep their secrets for the whole run; the dynamic XOR
// variants re-draw the mask at read or write events.
struct BaseEnc {};
struct OffsetEnc {
    std::int64_t offset = 0;  // O, applied mod 2^32; may be negative
};
struct XorEnc {
    WordValue mask = 0;  // M
};
struct AddXorEnc {  // stores (A + O) ^ M
    std::int64_t offset = 0;
    WordValue mask = 0;
};
struct XorAddEnc {  // stores (A ^ M) + O
    WordValue mask = 0;
    std::int64_t offset = 0;
};
struct RncEnc {
    std::vector<std::uint32_t> moduli;  // pairwise coprime
};
struct DynXorEnc {
    enum class Policy { UpdateOnWrite, UpdateOnRead };
    Policy policy = Policy::UpdateOnWrite;
    std::uint32_t mean_events_per_update = 1;  // N: expect one update per N events
    WordValue initial_mask = 0;
    bool deterministic_period = false;  // update on exactly every Nth event
};

struct EncodingSpec {
    std::variant<BaseEnc, OffsetEnc, XorEnc, AddXorEnc, XorAddEnc, RncEnc, DynXorEnc> variant;

    bool is_dynamic() const { return std::holds_alternative<DynXorEnc>(variant); }
    bool is_rnc() const { return std::holds_alternative<RncEnc>(variant); }
    std::size_t footprint() const {
        if (auto* r = std::get_if<RncEnc>(&variant)) return r->moduli.size();
        return 1;
    }
    // Canonical manifest kind: base, offset, xor, add_xor, xor_add, rnc,
    // dyn_xor_uow, dyn_xor_uor.
    std::string kind() const;

    // Largest value encodable; 2^32-1 for single-word variants, product of
    // moduli minus one for RNC (capped to uint64 max on overflow).
    std::uint64_t max_value() const;

    // Throws ConfigError on bad parameters (non-coprime moduli, N < 1, ...).
    void validate() const;
};

// Mutable per-run state. Static variants never touch it apart from the
// footprint; dynamic variants own the current mask and a seeded generator.
struct EncoderState {
    WordValue current_mask = 0;
    Rng rng{0};
    std::uint64_t event_counter = 0;
    std::size_t footprint = 1;
};

enum class AccessEvent { Read, Write };

EncoderState make_encoder_state(const EncodingSpec& spec, std::uint64_t seed);

// Encodes A into `footprint` words. Static variants leave state untouched.
// Throws DataError when A is outside the encodable domain (RNC).
std::vector<WordValue> encode(const EncodingSpec& spec, const EncoderState& state,
                              std::uint64_t value);

// Inverse of encode under the same state. RNC reconstructs via Garner/CRT and
// throws DataError when a residue is >= its modulus.
std::uint64_t decode(const EncodingSpec& spec, const EncoderState& state,
                     const std::vector<WordValue>& words);

// Advances the dynamic-mask state machine for one access event. Returns true
// when the mask changed. UoW ignores reads, UoR ignores writes. Throws
// ConfigError when called with a static spec.
bool mask_update(const EncodingSpec& spec, EncoderState& state, AccessEvent event);

// Manifest schema: {"kind": ..., "O": int, "M": "0x...", "moduli": [...],
// "N": int, "initial_mask": "0x...", "deterministic_period": bool}.
nlohmann::json encoding_to_json(const EncodingSpec& spec);
EncodingSpec encoding_from_json(const nlohmann::json& j);

}  // namespace locsim
