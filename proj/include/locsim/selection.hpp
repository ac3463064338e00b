#pragma once

#include <cstdint>
#include <memory>
#include <variant>

#include "locsim/core.hpp"

#include "json.hpp"

namespace locsim {

// Attacker scan-sequence selection policies. Binned forbids repeated
// on-screen values; Incremental additionally requires unit stride in a single
// direction; Rapid bounds the in-game time between consecutive scans.
struct BinnedPolicy {};
struct IncrementalPolicy {
    bool allow_mixed = false;  // off: single monotone direction per sequence
};
struct FullyRandomPolicy {};
struct RapidPolicy {
    std::uint64_t t_max_ms = 0;
};

struct SelectionPolicy {
    std::variant<BinnedPolicy, IncrementalPolicy, FullyRandomPolicy, RapidPolicy> variant;

    std::string kind() const;
    void validate() const;
};

nlohmann::json policy_to_json(const SelectionPolicy& policy);
SelectionPolicy policy_from_json(const nlohmann::json& j);

// True iff the strictly increasing ordinal list satisfies the policy on seq.
bool conforms(const SelectionPolicy& policy, const DumpSequence& seq,
              const std::vector<std::uint32_t>& indices);

// Number of conforming length-n subsequences, saturating at `cap_hint` when
// given (0 means count exactly, saturating only at 2^120).
unsigned __int128 count_conforming(const DumpSequence& seq, const SelectionPolicy& policy,
                                   std::uint32_t n);

// All conforming length-n subsequences when their number is <= cap, otherwise
// cap distinct ones sampled uniformly without replacement. Output is in
// lexicographic index order; fully determined by (seq, policy, n, cap, seed).
std::vector<SelectedSequence> enumerate_subsequences(
    const std::shared_ptr<const DumpSequence>& seq, const SelectionPolicy& policy,
    std::uint32_t n, std::uint64_t cap, std::uint64_t seed);

}  // namespace locsim
