#include "locsim/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "locsim/archive.hpp"
#include "locsim/errors.hpp"
#include "locsim/rng.hpp"

namespace locsim {

using nlohmann::json;

void AttackSpec::validate() const {
    if (mode != "greedy" && mode != "statistical")
        throw ConfigError("attack mode must be \"greedy\" or \"statistical\"");
    if (n_min < 1 || n_max < n_min) throw ConfigError("attack length range invalid");
    if (cap < 1) throw ConfigError("attack cap must be >= 1");
    policy.validate();
    if (requires_incremental(logic) &&
        !std::holds_alternative<IncrementalPolicy>(policy.variant)) {
        throw ConfigError(logic_name(logic) + " logic requires incremental selection");
    }
}

std::string ArchiveSource::label() const {
    if (config.has_value()) return config->game_label;
    return std::filesystem::path(path).filename().string();
}

void CampaignConfig::validate() const {
    if (archives.empty()) throw ConfigError("campaign: no archives configured");
    if (attacks.empty()) throw ConfigError("campaign: no attacks configured");
    if (parallelism < 1) throw ConfigError("campaign: parallelism must be >= 1");
    for (const auto& a : attacks) a.validate();
    for (const auto& src : archives) {
        if (src.path.empty() && !src.config.has_value())
            throw ConfigError("campaign: archive entry needs \"path\" or \"config\"");
        if (src.config.has_value()) src.config->validate();
    }
}

nlohmann::json campaign_config_to_json(const CampaignConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["parallelism"] = c.parallelism;
    json archives = json::array();
    for (const auto& src : c.archives) {
        json a;
        if (!src.path.empty()) a["path"] = src.path;
        if (src.config.has_value()) a["config"] = sim_config_to_json(*src.config);
        archives.push_back(a);
    }
    j["archives"] = archives;
    json attacks = json::array();
    for (const auto& atk : c.attacks) {
        json a;
        a["logic"] = logic_name(atk.logic);
        a["mode"] = atk.mode;
        a["policy"] = policy_to_json(atk.policy);
        a["lengths"] = {atk.n_min, atk.n_max};
        a["cap"] = atk.cap;
        if (!atk.criteria.empty()) {
            json cs = json::array();
            for (const auto& cr : atk.criteria) cs.push_back(criterion_to_json(cr));
            a["criteria"] = cs;
        }
        attacks.push_back(a);
    }
    j["attacks"] = attacks;
    return j;
}

CampaignConfig campaign_config_from_json(const nlohmann::json& j) {
    CampaignConfig c;
    try {
        c.seed = j.value("seed", std::uint64_t{0});
        c.parallelism = j.value("parallelism", 1u);
        for (const auto& a : j.at("archives")) {
            ArchiveSource src;
            if (a.contains("path")) src.path = a.at("path").get<std::string>();
            if (a.contains("config")) src.config = sim_config_from_json(a.at("config"));
            c.archives.push_back(std::move(src));
        }
        for (const auto& a : j.at("attacks")) {
            AttackSpec atk;
            atk.logic = logic_from_name(a.at("logic").get<std::string>());
            atk.mode = a.at("mode").get<std::string>();
            atk.policy = policy_from_json(a.at("policy"));
            const auto lengths = a.at("lengths").get<std::vector<std::uint32_t>>();
            if (lengths.size() != 2) throw ConfigError("attack lengths must be [min, max]");
            atk.n_min = lengths[0];
            atk.n_max = lengths[1];
            atk.cap = a.value("cap", std::uint64_t{1000});
            if (a.contains("criteria")) {
                for (const auto& cr : a.at("criteria"))
                    atk.criteria.push_back(criterion_from_json(cr));
            }
            c.attacks.push_back(std::move(atk));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("campaign config: ") + e.what());
    }
    c.validate();
    return c;
}

std::uint64_t cell_seed(std::uint64_t campaign_seed, const std::string& archive_label,
                        const AttackSpec& attack, std::uint32_t n) {
    std::ostringstream os;
    os << archive_label << '|' << logic_name(attack.logic) << '|' << attack.mode << '|'
       << policy_to_json(attack.policy).dump() << '|' << n;
    return derive_seed(campaign_seed, hash_label(os.str()));
}

unsigned effective_parallelism(unsigned configured) {
    if (const char* env = std::getenv("LOCSIM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return configured;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned use = std::min<std::size_t>(threads, count);
    pool.reserve(use);
    for (unsigned t = 0; t < use; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace {

json greedy_steps_json(const GreedyTrace& t) {
    json steps = json::array();
    for (const auto& s : t.steps) steps.push_back({s.n, s.remaining, s.recall});
    return steps;
}

json stat_steps_json(const StatTrace& t) {
    json steps = json::array();
    for (const auto& s : t.steps) {
        json flags = json::array();
        for (bool b : s.recall) flags.push_back(b);
        steps.push_back({s.n, s.rank, s.strictly_better, s.perfect_score_count, flags});
    }
    return steps;
}

}  // namespace

void write_traces_jsonl(const std::filesystem::path& file,
                        const std::vector<TraceRecord>& records) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DataError("cannot write trace file " + file.string());
    for (const auto& r : records) {
        json j;
        j["game_label"] = r.game_label;
        j["encoding"] = r.encoding;
        j["logic"] = r.logic;
        j["mode"] = r.mode;
        j["policy"] = r.policy;
        j["indices"] = r.indices;
        if (r.mode == "greedy") {
            j["steps"] = greedy_steps_json(r.greedy);
        } else {
            json cs = json::array();
            for (const auto& cr : r.criteria) cs.push_back(criterion_to_json(cr));
            j["criteria"] = cs;
            j["steps"] = stat_steps_json(r.stat);
        }
        out << j.dump() << "\n";
    }
}

std::vector<TraceRecord> read_traces_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot read trace file " + file.string());
    std::vector<TraceRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            TraceRecord r;
            r.game_label = j.at("game_label").get<std::string>();
            r.encoding = j.at("encoding").get<std::string>();
            r.logic = j.at("logic").get<std::string>();
            r.mode = j.at("mode").get<std::string>();
            r.policy = j.at("policy").get<std::string>();
            r.indices = j.at("indices").get<std::vector<std::uint32_t>>();
            if (r.mode == "greedy") {
                for (const auto& s : j.at("steps")) {
                    r.greedy.steps.push_back(GreedyStep{s.at(0).get<std::uint32_t>(),
                                                        s.at(1).get<std::uint64_t>(),
                                                        s.at(2).get<bool>()});
                }
            } else {
                for (const auto& cr : j.at("criteria"))
                    r.criteria.push_back(criterion_from_json(cr));
                for (const auto& s : j.at("steps")) {
                    StatStep st;
                    st.n = s.at(0).get<std::uint32_t>();
                    st.rank = s.at(1).get<std::uint64_t>();
                    st.strictly_better = s.at(2).get<std::uint64_t>();
                    for (const auto& f : s.at(3)) st.recall.push_back(f.get<bool>());
                    r.stat.steps.push_back(std::move(st));
                }
            }
            records.push_back(std::move(r));
        } catch (const json::exception& e) {
            std::ostringstream os;
            os << "trace file " << file.string() << " line " << line_no << ": " << e.what();
            throw DataError(os.str());
        }
    }
    return records;
}

AttackRunResult run_attack_cell(const std::shared_ptr<const DumpSequence>& seq,
                                const AttackSpec& attack, std::uint32_t n, std::uint64_t seed,
                                unsigned threads) {
    attack.validate();
    const auto selections = enumerate_subsequences(seq, attack.policy, n, attack.cap, seed);

    AttackRunResult result;
    if (selections.empty()) return result;

    std::vector<SuccessCriterion> criteria = attack.criteria;
    if (attack.mode == "statistical" && criteria.empty()) {
        criteria.push_back(SuccessCriterion{TopKCriterion{100}});
    }

    std::vector<GreedyTrace> greedy_traces(selections.size());
    std::vector<StatTrace> stat_traces(selections.size());
    const bool greedy = attack.mode == "greedy";
    parallel_for(selections.size(), threads, [&](std::size_t i) {
        if (greedy) {
            greedy_traces[i] = greedy_attack(selections[i], attack.logic);
        } else {
            stat_traces[i] = statistical_attack(selections[i], attack.logic, criteria);
        }
    });

    const std::string policy_kind = attack.policy.kind();
    result.records.reserve(selections.size());
    for (std::size_t i = 0; i < selections.size(); ++i) {
        TraceRecord r;
        r.game_label = seq->game_label;
        r.encoding = seq->ground_truth.encoding.kind();
        r.logic = logic_name(attack.logic);
        r.mode = attack.mode;
        r.policy = policy_kind;
        r.indices = selections[i].indices;
        if (greedy) {
            r.greedy = std::move(greedy_traces[i]);
        } else {
            r.criteria = criteria;
            r.stat = std::move(stat_traces[i]);
        }
        result.records.push_back(std::move(r));
    }

    // The batch's terminal row: aggregate over all length-n selections and
    // keep the row at n (prefix rows belong to other batches).
    AggregateKeys keys{seq->game_label, seq->ground_truth.encoding.kind(),
                       logic_name(attack.logic), attack.mode};
    if (greedy) {
        std::vector<GreedyTrace> traces;
        traces.reserve(result.records.size());
        for (const auto& r : result.records) traces.push_back(r.greedy);
        const auto full = aggregate_greedy(traces, keys);
        for (const auto& row : full.rows) {
            if (row.n == n) result.report.rows.push_back(row);
        }
    } else {
        std::vector<StatTrace> traces;
        traces.reserve(result.records.size());
        for (const auto& r : result.records) traces.push_back(r.stat);
        for (std::size_t ci = 0; ci < criteria.size(); ++ci) {
            const auto full = aggregate_statistical(traces, keys, criteria[ci], ci);
            for (const auto& row : full.rows) {
                if (row.n == n) result.report.rows.push_back(row);
            }
        }
    }
    return result;
}

AggregateReport aggregate_trace_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .jsonl trace files in " + dir.string());

    // group records by batch identity: keys + policy + selection length
    struct Batch {
        AggregateKeys keys;
        std::vector<SuccessCriterion> criteria;
        std::uint32_t n = 0;
        std::vector<GreedyTrace> greedy;
        std::vector<StatTrace> stat;
        bool is_greedy = true;
    };
    std::map<std::string, Batch> batches;
    for (const auto& f : files) {
        for (auto& r : read_traces_jsonl(f)) {
            std::ostringstream key;
            key << r.game_label << '|' << r.encoding << '|' << r.logic << '|' << r.mode << '|'
                << r.policy << '|' << r.indices.size();
            auto& b = batches[key.str()];
            b.keys = AggregateKeys{r.game_label, r.encoding, r.logic, r.mode};
            b.n = static_cast<std::uint32_t>(r.indices.size());
            b.is_greedy = r.mode == "greedy";
            if (b.is_greedy) {
                b.greedy.push_back(std::move(r.greedy));
            } else {
                b.criteria = r.criteria;
                b.stat.push_back(std::move(r.stat));
            }
        }
    }

    AggregateReport report;
    for (auto& [key, b] : batches) {
        (void)key;
        if (b.is_greedy) {
            const auto full = aggregate_greedy(b.greedy, b.keys);
            for (const auto& row : full.rows) {
                if (row.n == b.n) report.rows.push_back(row);
            }
        } else {
            for (std::size_t ci = 0; ci < b.criteria.size(); ++ci) {
                const auto full = aggregate_statistical(b.stat, b.keys, b.criteria[ci], ci);
                for (const auto& row : full.rows) {
                    if (row.n == b.n) report.rows.push_back(row);
                }
            }
        }
    }
    return report;
}

CampaignOutcome run_campaign(const CampaignConfig& config,
                             const std::filesystem::path& out_dir) {
    config.validate();
    const unsigned threads = effective_parallelism(config.parallelism);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create campaign output directory " + out_dir.string());

    std::vector<std::shared_ptr<const DumpSequence>> sequences;
    std::vector<std::string> labels;
    for (const auto& src : config.archives) {
        std::shared_ptr<const DumpSequence> seq;
        if (!src.path.empty()) {
            seq = std::make_shared<const DumpSequence>(read_archive(src.path));
        } else {
            seq = std::make_shared<const DumpSequence>(simulate(*src.config));
        }
        labels.push_back(seq->game_label);
        sequences.push_back(std::move(seq));
    }

    CampaignOutcome outcome;
    std::ofstream timing(out_dir / "timings.jsonl", std::ios::trunc);

    for (std::size_t ai = 0; ai < sequences.size(); ++ai) {
        const auto& seq = sequences[ai];
        for (const auto& attack : config.attacks) {
            AggregateReport cell_report;
            for (std::uint32_t n = attack.n_min; n <= attack.n_max; ++n) {
                const auto seed = cell_seed(config.seed, labels[ai], attack, n);
                const auto start = std::chrono::steady_clock::now();
                auto result = run_attack_cell(seq, attack, n, seed, threads);
                const double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                        .count();
                if (timing) {
                    json t{{"archive", labels[ai]},
                           {"logic", logic_name(attack.logic)},
                           {"mode", attack.mode},
                           {"n", n},
                           {"simulations", result.records.size()},
                           {"seconds", secs}};
                    timing << t.dump() << "\n";
                }
                if (result.records.empty()) {
                    std::ostringstream os;
                    os << "cell (" << labels[ai] << ", " << logic_name(attack.logic) << ", "
                       << attack.mode << ", n=" << n << ") produced no conforming sequences";
                    outcome.warnings.push_back(os.str());
                    outcome.every_cell_produced = false;
                    continue;
                }
                for (auto& row : result.report.rows) cell_report.rows.push_back(row);
            }
            if (cell_report.rows.empty()) continue;
            const std::string base = labels[ai] + "__" + logic_name(attack.logic) + "__" +
                                     attack.mode;
            emit_report(cell_report,
                        {ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg}, out_dir,
                        base);
            for (auto& row : cell_report.rows) outcome.report.rows.push_back(std::move(row));
        }
    }

    if (!outcome.report.rows.empty()) {
        emit_report(outcome.report, {ReportFormat::Csv}, out_dir, "campaign");
    }
    return outcome;
}

}  // namespace locsim
