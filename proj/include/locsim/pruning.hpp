#pragma once

#include <bit>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "locsim/core.hpp"
#include "locsim/errors.hpp"

#include "json.hpp"

namespace locsim {

// The nine location-pruning logics. Targeted ones mirror an encoding; the
// last three only exploit change behaviour.
enum class PruningLogic {
    Base,
    Offset,
    Xor,
    AddXor,
    XorAdd,
    Rnc,
    IncDec,
    ChangeNoChange,
    Change,
};

std::string logic_name(PruningLogic logic);
PruningLogic logic_from_name(const std::string& name);

// AddXor/XorAdd assume unit stride between consecutive scan values and are
// therefore only valid on Incremental-conforming selections.
inline bool requires_incremental(PruningLogic logic) {
    return logic == PruningLogic::AddXor || logic == PruningLogic::XorAdd;
}

// Base and Rnc check every dump in isolation; the others compare pairs and
// contribute no check on the first scanned dump.
inline bool is_per_dump(PruningLogic logic) {
    return logic == PruningLogic::Base || logic == PruningLogic::Rnc;
}

// Position of the least significant zero bit. All-ones has none in 32 bits.
inline int zeta(WordValue x) {
    if (x == 0xffffffffu) throw DataError("zeta: undefined for all-ones input");
    return std::countr_zero(~x);
}

// chi(p) = p ^ (p + 1) = 2^(zeta(p)+1) - 1, the carry-chain pattern the
// add_xor logic matches against.
inline WordValue chi(WordValue p) {
    if (p == 0xffffffffu) throw DataError("chi: undefined for all-ones input");
    return p ^ (p + 1);
}

// ---- per-location check kernels ---------------------------------------
// All kernels take on-screen values A as 64-bit and memory words as 32-bit;
// `bits` narrows the word width for exhaustive miniature oracles.

inline bool base_check(std::uint64_t a, WordValue x) {
    return a <= 0xffffffffull && x == static_cast<WordValue>(a);
}

inline bool offset_check(std::uint64_t ref_a, WordValue ref_x, std::uint64_t a, WordValue x) {
    return static_cast<WordValue>(x - ref_x) ==
           static_cast<WordValue>(static_cast<std::uint64_t>(a) - ref_a);
}

inline bool xor_check(std::uint64_t ref_a, WordValue ref_x, std::uint64_t a, WordValue x) {
    return (x ^ ref_x) == (static_cast<WordValue>(a) ^ static_cast<WordValue>(ref_a));
}

inline bool add_xor_check(WordValue prev_x, WordValue cur_x, int bits = 32) {
    const WordValue wmask = bits >= 32 ? 0xffffffffu : ((1u << bits) - 1);
    const WordValue v = (prev_x ^ cur_x) & wmask;
    return v != 0 && ((v & ((v + 1) & wmask)) == 0);
}

// Running state of the xor_add mask-bit inference.
struct XorAddState {
    WordValue known_mask = 0;   // which bits of M have been pinned
    WordValue known_value = 0;  // their values; zero outside known_mask
};

// One xor_add step: checks d = X' - X is odd, nonzero and within the carry
// span of the lower scan value, then merges the implied low bits of M into
// the hypothesis. `infer=false` keeps only the three scalar checks.
bool xor_add_check(std::uint64_t prev_a, std::uint64_t cur_a, WordValue prev_x, WordValue cur_x,
                   XorAddState& state, int bits = 32, bool infer = true);

// Per-dump RNC check; g is the running GCD of the A - X differences
// (gcd(0,0) == 0, gcd(0,a) == a). Conforms while g != 1.
inline bool rnc_check(std::uint64_t a, WordValue x, std::uint64_t& g) {
    if (a < x) return false;
    g = std::gcd(g, a - x);
    return g != 1;
}

inline bool inc_dec_check(std::uint64_t prev_a, std::uint64_t cur_a, WordValue prev_x,
                          WordValue cur_x) {
    const int sa = (cur_a == prev_a) ? 0 : (cur_a > prev_a ? 1 : -1);
    const int sx = (cur_x == prev_x)
                       ? 0
                       : (static_cast<std::int32_t>(cur_x - prev_x) > 0 ? 1 : -1);
    return sa == sx;
}

inline bool change_no_change_check(std::uint64_t prev_a, std::uint64_t cur_a, WordValue prev_x,
                                   WordValue cur_x) {
    return (cur_x != prev_x) == (cur_a != prev_a);
}

inline bool change_check(std::uint64_t prev_a, std::uint64_t cur_a, WordValue prev_x,
                         WordValue cur_x) {
    return cur_a == prev_a || cur_x != prev_x;
}

// ---- single-location step (reference semantics for tests/bindings) -----

struct LocationState {
    bool has_anchor = false;  // Offset/Xor logics anchor at the first dump
    std::uint64_t anchor_a = 0;
    WordValue anchor_x = 0;
    std::uint64_t rnc_gcd = 0;
    XorAddState xor_add;
};

struct StepResult {
    bool conform = false;
    LocationState state;
};

StepResult step(PruningLogic logic, LocationState state, std::uint64_t prev_a, WordValue prev_x,
                std::uint64_t cur_a, WordValue cur_x, bool xor_add_inference = true);

// ---- attack drivers ----------------------------------------------------

struct AttackOptions {
    bool xor_add_inference = true;
    bool record_final_candidates = false;
};

struct GreedyStep {
    std::uint32_t n = 0;          // scans used
    std::uint64_t remaining = 0;  // candidate locations still alive
    bool recall = false;          // all ground-truth locations still alive
};

struct GreedyTrace {
    std::vector<GreedyStep> steps;
    std::vector<std::uint32_t> final_candidates;  // only when requested
};

// Statistical success criteria (§recall of a ranking attack).
struct ThresholdCriterion {
    double tau = 1.0;
};
struct TopKCriterion {
    std::uint64_t k = 100;
};
struct ScoreDropCriterion {
    double delta = 0.5;
};

struct SuccessCriterion {
    std::variant<ThresholdCriterion, TopKCriterion, ScoreDropCriterion> variant;
    std::string kind() const;
};

nlohmann::json criterion_to_json(const SuccessCriterion& c);
SuccessCriterion criterion_from_json(const nlohmann::json& j);

struct StatStep {
    std::uint32_t n = 0;
    std::uint64_t rank = 0;              // 1-based, (score desc, index asc)
    std::uint64_t strictly_better = 0;   // locations with strictly higher score
    std::uint64_t perfect_score_count = 0;  // locations with every check conforming
    std::vector<bool> recall;            // one flag per requested criterion
};

struct StatTrace {
    std::vector<StatStep> steps;
    std::vector<std::uint32_t> final_perfect_candidates;  // only when requested
};

// Greedy mode: discards non-conforming locations irrevocably after each scan.
// Ground truth is only consulted to compute recall.
GreedyTrace greedy_attack(const SelectedSequence& sel, PruningLogic logic,
                          const AttackOptions& options = {});

// Statistical mode: never discards; ranks all locations by the fraction of
// conforming checks and evaluates each success criterion per scan.
StatTrace statistical_attack(const SelectedSequence& sel, PruningLogic logic,
                             const std::vector<SuccessCriterion>& criteria,
                             const AttackOptions& options = {});

}  // namespace locsim
