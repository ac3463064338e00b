#include "locsim/archive.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "locsim/errors.hpp"

#include "json.hpp"

namespace locsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string dump_file_name(std::uint32_t ordinal) {
    std::ostringstream os;
    os << std::setw(6) << std::setfill('0') << ordinal << ".bin";
    return os.str();
}

void write_words_le(std::ostream& out, const std::vector<WordValue>& words) {
    std::vector<unsigned char> buf(words.size() * 4);
    for (std::size_t i = 0; i < words.size(); ++i) {
        const WordValue w = words[i];
        buf[4 * i + 0] = static_cast<unsigned char>(w & 0xff);
        buf[4 * i + 1] = static_cast<unsigned char>((w >> 8) & 0xff);
        buf[4 * i + 2] = static_cast<unsigned char>((w >> 16) & 0xff);
        buf[4 * i + 3] = static_cast<unsigned char>((w >> 24) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
}

std::vector<WordValue> read_words_le(const fs::path& file, std::uint32_t word_count) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open dump file " + file.string());
    std::vector<unsigned char> buf(static_cast<std::size_t>(word_count) * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        std::ostringstream os;
        os << "truncated dump file " << file.string() << ": got " << in.gcount()
           << " bytes, expected " << buf.size();
        throw DataError(os.str());
    }
    // a longer file than word_count*4 is also a size mismatch
    char extra;
    if (in.read(&extra, 1)) {
        throw DataError("dump file " + file.string() + " larger than word_count * 4 bytes");
    }
    std::vector<WordValue> words(word_count);
    for (std::size_t i = 0; i < words.size(); ++i) {
        words[i] = static_cast<WordValue>(buf[4 * i]) |
                   (static_cast<WordValue>(buf[4 * i + 1]) << 8) |
                   (static_cast<WordValue>(buf[4 * i + 2]) << 16) |
                   (static_cast<WordValue>(buf[4 * i + 3]) << 24);
    }
    return words;
}

}  // namespace

void write_archive(const DumpSequence& seq, const fs::path& dir) {
    const auto violations = validate_sequence(seq);
    if (!violations.empty())
        throw DataError("refusing to write invalid sequence: " + violations.front());

    std::error_code ec;
    fs::create_directories(dir / "dumps", ec);
    if (ec) throw DataError("cannot create archive directory " + dir.string());

    json manifest;
    manifest["format_version"] = kArchiveFormatVersion;
    manifest["game_label"] = seq.game_label;
    manifest["word_count"] = seq.word_count;
    manifest["rng_seed"] = seq.rng_seed;
    manifest["collection_policy"] = {{"kind", seq.collection_policy.kind},
                                     {"interval_ms", seq.collection_policy.interval_ms},
                                     {"change_every_n_dumps",
                                      seq.collection_policy.change_every_n_dumps}};
    manifest["encoding"] = encoding_to_json(seq.ground_truth.encoding);

    json gt;
    gt["locations"] = seq.ground_truth.locations;
    json distractors = json::array();
    for (const auto& [idx, role] : seq.ground_truth.distractor_locations) {
        distractors.push_back({{"index", idx}, {"role", distractor_role_name(role)}});
    }
    gt["distractors"] = distractors;
    manifest["ground_truth"] = gt;

    json dumps = json::array();
    for (const Dump& d : seq.dumps) {
        const std::string file = dump_file_name(d.ordinal);
        dumps.push_back({{"file", "dumps/" + file},
                         {"ordinal", d.ordinal},
                         {"timestamp_ms", d.timestamp_ms},
                         {"on_screen_value", d.on_screen_value}});
        std::ofstream out(dir / "dumps" / file, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write dump file " + (dir / "dumps" / file).string());
        write_words_le(out, d.words);
        if (!out) throw DataError("write failure on " + (dir / "dumps" / file).string());
    }
    manifest["dumps"] = dumps;

    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw DataError("cannot write manifest in " + dir.string());
    out << manifest.dump(2) << "\n";
}

DumpSequence read_archive(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("no manifest.json in " + dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest in " + dir.string() + ": " + e.what());
    }

    const int version = manifest.value("format_version", -1);
    if (version != kArchiveFormatVersion) {
        std::ostringstream os;
        os << "unknown format_version " << version;
        throw DataError(os.str());
    }
    if (!manifest.contains("ground_truth")) throw DataError("ground truth required");

    DumpSequence seq;
    try {
        seq.game_label = manifest.at("game_label").get<std::string>();
        seq.word_count = manifest.at("word_count").get<std::uint32_t>();
        seq.rng_seed = manifest.at("rng_seed").get<std::uint64_t>();
        const auto& cp = manifest.at("collection_policy");
        seq.collection_policy.kind = cp.at("kind").get<std::string>();
        seq.collection_policy.interval_ms = cp.at("interval_ms").get<std::uint64_t>();
        seq.collection_policy.change_every_n_dumps =
            cp.at("change_every_n_dumps").get<std::uint32_t>();
        seq.ground_truth.encoding = encoding_from_json(manifest.at("encoding"));
        const auto& gt = manifest.at("ground_truth");
        seq.ground_truth.locations = gt.at("locations").get<std::vector<std::uint32_t>>();
        for (const auto& d : gt.at("distractors")) {
            seq.ground_truth.distractor_locations[d.at("index").get<std::uint32_t>()] =
                distractor_role_from_name(d.at("role").get<std::string>());
        }

        const auto& dumps = manifest.at("dumps");
        seq.dumps.reserve(dumps.size());
        for (const auto& dj : dumps) {
            Dump d;
            d.ordinal = dj.at("ordinal").get<std::uint32_t>();
            d.timestamp_ms = dj.at("timestamp_ms").get<std::uint64_t>();
            d.on_screen_value = dj.at("on_screen_value").get<std::uint64_t>();
            d.words = read_words_le(dir / dj.at("file").get<std::string>(), seq.word_count);
            seq.dumps.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest schema violation: ") + e.what());
    }

    std::error_code ec;
    std::size_t on_disk = 0;
    for (const auto& entry : fs::directory_iterator(dir / "dumps", ec)) {
        if (entry.path().extension() == ".bin") ++on_disk;
    }
    if (!ec && on_disk != seq.dumps.size()) {
        std::ostringstream os;
        os << "manifest lists " << seq.dumps.size() << " dumps but " << on_disk
           << " dump files exist";
        throw DataError(os.str());
    }

    const auto violations = validate_sequence(seq);
    if (!violations.empty()) throw DataError("invalid archive: " + violations.front());
    return seq;
}

}  // namespace locsim
