#include "locsim/core.hpp"

#include <sstream>

#include "locsim/errors.hpp"

namespace locsim {

std::string distractor_role_name(DistractorRole role) {
    switch (role) {
        case DistractorRole::DuplicateDisplay: return "duplicate-display";
        case DistractorRole::OppositeStride: return "opposite-stride";
        case DistractorRole::SameStride: return "same-stride";
    }
    return "unknown";
}

DistractorRole distractor_role_from_name(const std::string& name) {
    if (name == "duplicate-display") return DistractorRole::DuplicateDisplay;
    if (name == "opposite-stride") return DistractorRole::OppositeStride;
    if (name == "same-stride") return DistractorRole::SameStride;
    throw DataError("unknown distractor role \"" + name + "\"");
}

std::vector<std::string> validate_sequence(const DumpSequence& seq) {
    std::vector<std::string> violations;
    auto add = [&violations](const std::string& v) { violations.push_back(v); };

    if (seq.word_count == 0) add("word_count must be positive");

    for (std::size_t i = 0; i < seq.dumps.size(); ++i) {
        const Dump& d = seq.dumps[i];
        if (d.ordinal != i) {
            std::ostringstream os;
            os << "ordinal not consecutive at " << d.ordinal;
            add(os.str());
        }
        if (i > 0 && d.timestamp_ms <= seq.dumps[i - 1].timestamp_ms) {
            std::ostringstream os;
            os << "timestamp not increasing at dump " << i;
            add(os.str());
        }
        if (d.words.size() != seq.word_count) {
            std::ostringstream os;
            os << "dump " << i << " has " << d.words.size() << " words, expected "
               << seq.word_count;
            add(os.str());
        }
    }

    if (seq.ground_truth.locations.empty()) add("ground truth locations must be non-empty");
    for (auto loc : seq.ground_truth.locations) {
        if (loc >= seq.word_count) add("location out of range");
    }
    for (const auto& [idx, role] : seq.ground_truth.distractor_locations) {
        (void)role;
        if (idx >= seq.word_count) add("distractor location out of range");
        for (auto loc : seq.ground_truth.locations) {
            if (idx == loc) {
                std::ostringstream os;
                os << "distractor overlaps ground truth at " << idx;
                add(os.str());
            }
        }
    }
    return violations;
}

}  // namespace locsim
