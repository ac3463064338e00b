#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "locsim/archive.hpp"
#include "locsim/errors.hpp"
#include "locsim/rng.hpp"

using namespace locsim;
namespace fs = std::filesystem;

namespace {

DumpSequence small_sequence() {
    DumpSequence seq;
    seq.game_label = "unit";
    seq.word_count = 4;
    seq.rng_seed = 7;
    seq.collection_policy = {"custom", 100, 1};
    seq.ground_truth.encoding = EncodingSpec{BaseEnc{}};
    seq.ground_truth.locations = {2};
    seq.ground_truth.distractor_locations[0] = DistractorRole::DuplicateDisplay;
    for (std::uint32_t i = 0; i < 2; ++i) {
        Dump d;
        d.ordinal = i;
        d.timestamp_ms = 100 * (i + 1);
        d.on_screen_value = 10 + i;
        d.words = {10 + i, 0xdeadbeefu, 10 + i, 0};
        seq.dumps.push_back(d);
    }
    return seq;
}

DumpSequence random_sequence(Rng& rng) {
    DumpSequence seq;
    seq.game_label = "fuzz";
    seq.word_count = 8 + static_cast<std::uint32_t>(rng.below(56));
    seq.rng_seed = rng.u64();
    seq.collection_policy = {"custom", 50, 1};
    seq.ground_truth.encoding = EncodingSpec{XorEnc{rng.u32()}};
    seq.ground_truth.locations = {static_cast<std::uint32_t>(rng.below(seq.word_count))};
    const std::uint32_t dump_count = 1 + static_cast<std::uint32_t>(rng.below(6));
    for (std::uint32_t i = 0; i < dump_count; ++i) {
        Dump d;
        d.ordinal = i;
        d.timestamp_ms = (i + 1) * 50;
        d.on_screen_value = rng.below(1000);
        d.words.resize(seq.word_count);
        for (auto& w : d.words) w = rng.u32();
        seq.dumps.push_back(d);
    }
    return seq;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("locsim_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

bool sequences_equal(const DumpSequence& a, const DumpSequence& b) {
    if (a.game_label != b.game_label || a.word_count != b.word_count ||
        a.rng_seed != b.rng_seed || a.dumps.size() != b.dumps.size())
        return false;
    if (a.collection_policy.kind != b.collection_policy.kind ||
        a.collection_policy.interval_ms != b.collection_policy.interval_ms ||
        a.collection_policy.change_every_n_dumps != b.collection_policy.change_every_n_dumps)
        return false;
    if (a.ground_truth.locations != b.ground_truth.locations) return false;
    if (a.ground_truth.distractor_locations != b.ground_truth.distractor_locations) return false;
    if (encoding_to_json(a.ground_truth.encoding) != encoding_to_json(b.ground_truth.encoding))
        return false;
    for (std::size_t i = 0; i < a.dumps.size(); ++i) {
        const auto& da = a.dumps[i];
        const auto& db = b.dumps[i];
        if (da.ordinal != db.ordinal || da.timestamp_ms != db.timestamp_ms ||
            da.on_screen_value != db.on_screen_value || da.words != db.words)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("validate_sequence: well-formed sequence yields no violations") {
    CHECK(validate_sequence(small_sequence()).empty());
}

TEST_CASE("validate_sequence: duplicate ordinal is reported with its value") {
    auto seq = small_sequence();
    seq.dumps[1].ordinal = 3;
    const auto v = validate_sequence(seq);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "ordinal not consecutive at 3");
}

TEST_CASE("validate_sequence: ground-truth index == word_count is out of range") {
    auto seq = small_sequence();
    seq.ground_truth.locations = {seq.word_count};
    const auto v = validate_sequence(seq);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "location out of range");
}

TEST_CASE("validate_sequence: non-increasing timestamps are reported") {
    auto seq = small_sequence();
    seq.dumps[1].timestamp_ms = seq.dumps[0].timestamp_ms;
    const auto v = validate_sequence(seq);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("timestamp") != std::string::npos);
}

TEST_CASE("write_archive: 2-dump word_count=4 archive has 16-byte dump files") {
    TempDir tmp;
    write_archive(small_sequence(), tmp.path);
    CHECK(fs::file_size(tmp.path / "dumps" / "000000.bin") == 16);
    CHECK(fs::file_size(tmp.path / "dumps" / "000001.bin") == 16);

    // little-endian layout: word index = byte offset / 4
    std::ifstream in(tmp.path / "dumps" / "000000.bin", std::ios::binary);
    unsigned char bytes[16];
    in.read(reinterpret_cast<char*>(bytes), 16);
    CHECK(bytes[0] == 10);
    CHECK(bytes[4] == 0xef);  // 0xdeadbeef LSB first
    CHECK(bytes[5] == 0xbe);
    CHECK(bytes[6] == 0xad);
    CHECK(bytes[7] == 0xde);
}

TEST_CASE("archive round-trip is the identity") {
    TempDir tmp;
    const auto seq = small_sequence();
    write_archive(seq, tmp.path);
    CHECK(sequences_equal(seq, read_archive(tmp.path)));
}

TEST_CASE("write_archive rejects invalid sequences before writing") {
    TempDir tmp;
    auto seq = small_sequence();
    seq.dumps[1].timestamp_ms = seq.dumps[0].timestamp_ms;  // not increasing
    CHECK_THROWS_AS(write_archive(seq, tmp.path / "a"), DataError);
    CHECK_FALSE(fs::exists(tmp.path / "a" / "manifest.json"));
}

TEST_CASE("read_archive: truncated dump file error names the file") {
    TempDir tmp;
    write_archive(small_sequence(), tmp.path);
    fs::resize_file(tmp.path / "dumps" / "000001.bin", 15);
    try {
        read_archive(tmp.path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("000001.bin") != std::string::npos);
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("read_archive: missing ground truth") {
    TempDir tmp;
    write_archive(small_sequence(), tmp.path);
    nlohmann::json manifest;
    {
        std::ifstream in(tmp.path / "manifest.json");
        in >> manifest;
    }
    manifest.erase("ground_truth");
    std::ofstream(tmp.path / "manifest.json") << manifest.dump(2);
    try {
        read_archive(tmp.path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()) == "ground truth required");
    }
}

TEST_CASE("read_archive: unknown format_version") {
    TempDir tmp;
    write_archive(small_sequence(), tmp.path);
    nlohmann::json manifest;
    {
        std::ifstream in(tmp.path / "manifest.json");
        in >> manifest;
    }
    manifest["format_version"] = 99;
    std::ofstream(tmp.path / "manifest.json") << manifest.dump(2);
    CHECK_THROWS_WITH_AS(read_archive(tmp.path), "unknown format_version 99", DataError);
}

TEST_CASE("read_archive: manifest/dump count mismatch") {
    TempDir tmp;
    write_archive(small_sequence(), tmp.path);
    std::ofstream(tmp.path / "dumps" / "000099.bin", std::ios::binary) << "xxxx";
    CHECK_THROWS_AS(read_archive(tmp.path), DataError);
}

TEST_CASE("fuzz: random archives round-trip and keep indices in range") {
    Rng rng(2024);
    for (int iter = 0; iter < 25; ++iter) {
        TempDir tmp;
        const auto seq = random_sequence(rng);
        REQUIRE(validate_sequence(seq).empty());
        for (auto loc : seq.ground_truth.locations) CHECK(loc < seq.word_count);
        write_archive(seq, tmp.path);
        CHECK(sequences_equal(seq, read_archive(tmp.path)));
    }
}
