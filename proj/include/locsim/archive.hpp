#pragma once

#include <filesystem>

#include "locsim/core.hpp"

namespace locsim {

// Archive layout: <dir>/manifest.json + <dir>/dumps/NNNNNN.bin, one binary
// file per dump holding exactly word_count little-endian 32-bit words.
// Round-trip is the identity on DumpSequence, bit-for-bit on words.

inline constexpr int kArchiveFormatVersion = 1;

// Validates the sequence first and throws DataError naming the first failing
// invariant; I/O failures also surface as DataError.
void write_archive(const DumpSequence& seq, const std::filesystem::path& dir);

// Throws DataError on unknown format_version, truncated dump files (named),
// manifest/dump count mismatches or missing ground truth.
DumpSequence read_archive(const std::filesystem::path& dir);

}  // namespace locsim
