#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "locsim/archive.hpp"
#include "locsim/campaign.hpp"
#include "locsim/errors.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using namespace locsim;
using nlohmann::json;

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

// --policy accepts either a file path or an inline JSON object.
json load_policy_arg(const std::string& arg) {
    if (!arg.empty() && arg.front() == '{') {
        try {
            return json::parse(arg);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("malformed inline policy: ") + e.what());
        }
    }
    return load_json_file(arg);
}

std::pair<std::uint32_t, std::uint32_t> parse_range(const std::string& arg) {
    const auto pos = arg.find("..");
    try {
        if (pos == std::string::npos) {
            const auto n = static_cast<std::uint32_t>(std::stoul(arg));
            return {n, n};
        }
        const auto a = static_cast<std::uint32_t>(std::stoul(arg.substr(0, pos)));
        const auto b = static_cast<std::uint32_t>(std::stoul(arg.substr(pos + 2)));
        if (a < 1 || b < a) throw ConfigError("--n range must satisfy 1 <= a <= b");
        return {a, b};
    } catch (const std::logic_error&) {
        throw ConfigError("--n expects a number or a range like 2..8");
    }
}

int cmd_generate(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed) {
    json j = load_json_file(config_path);
    if (seed.has_value()) j["seed"] = *seed;
    const SimConfig config = sim_config_from_json(j);
    const DumpSequence seq = simulate(config);
    write_archive(seq, out);
    std::cout << "archive written to " << out << "\n"
              << "  word_count: " << seq.word_count << "\n"
              << "  dumps: " << seq.dumps.size() << "\n"
              << "  encoding: " << seq.ground_truth.encoding.kind() << "\n"
              << "  ground-truth locations:";
    for (auto loc : seq.ground_truth.locations) std::cout << " " << loc;
    std::cout << "\n  distractors: " << seq.ground_truth.distractor_locations.size() << "\n";
    return 0;
}

int cmd_attack(const std::string& archive, const std::string& logic_id, const std::string& mode,
               const std::string& policy_arg, const std::string& range_arg, std::uint64_t cap,
               std::uint64_t seed, const std::string& out) {
    auto seq = std::make_shared<const DumpSequence>(read_archive(archive));

    AttackSpec attack;
    attack.logic = logic_from_name(logic_id);
    attack.mode = mode;
    attack.policy = policy_from_json(load_policy_arg(policy_arg));
    std::tie(attack.n_min, attack.n_max) = parse_range(range_arg);
    attack.cap = cap;
    attack.validate();

    std::filesystem::create_directories(out);
    std::size_t total = 0;
    const unsigned threads = effective_parallelism(1);
    for (std::uint32_t n = attack.n_min; n <= attack.n_max; ++n) {
        const auto run_seed = derive_seed(seed, n);
        auto result = run_attack_cell(seq, attack, n, run_seed, threads);
        if (result.records.empty()) {
            std::cerr << "warning: no conforming subsequences of length " << n << "\n";
            continue;
        }
        std::ostringstream name;
        name << logic_id << "_" << mode << "_n" << n << ".jsonl";
        write_traces_jsonl(std::filesystem::path(out) / name.str(), result.records);
        total += result.records.size();
        std::cout << "n=" << n << ": " << result.records.size() << " traces\n";
    }
    if (total == 0) {
        std::cerr << "error: no traces produced for any requested length\n";
        return 3;
    }
    return 0;
}

int cmd_campaign(const std::string& config_path, const std::string& out) {
    const CampaignConfig config = campaign_config_from_json(load_json_file(config_path));
    const CampaignOutcome outcome = run_campaign(config, out);
    for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "campaign rows: " << outcome.report.rows.size() << " -> " << out << "\n";
    return outcome.every_cell_produced ? 0 : 3;
}

int cmd_report(const std::string& traces, const std::string& formats_arg,
               const std::string& out) {
    std::set<ReportFormat> formats;
    std::stringstream ss(formats_arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "csv") {
            formats.insert(ReportFormat::Csv);
        } else if (item == "json") {
            formats.insert(ReportFormat::Json);
        } else if (item == "svg") {
            formats.insert(ReportFormat::Svg);
        } else {
            throw ConfigError("unknown report format \"" + item + "\"");
        }
    }
    if (formats.empty()) throw ConfigError("--formats must name at least one of csv,json,svg");
    const AggregateReport report = aggregate_trace_dir(traces);
    emit_report(report, formats, out);
    std::cout << "report with " << report.rows.size() << " rows -> " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"locsim: resource-localisation attack simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed_override;
    auto* generate = app.add_subcommand("generate", "simulate a game run and write an archive");
    generate->add_option("--config", config_path, "SimConfig JSON file")->required();
    generate->add_option("--out", out_dir, "output archive directory")->required();
    generate->add_option("--seed", seed_override, "override the config seed");

    std::string archive, logic_id, mode = "greedy", policy_arg, range_arg = "1..1";
    std::uint64_t cap = 1000, attack_seed = 0;
    auto* attack = app.add_subcommand("attack", "run one pruning attack over an archive");
    attack->add_option("--archive", archive, "archive directory")->required();
    attack->add_option("--logic", logic_id, "pruning logic id")->required();
    attack->add_option("--mode", mode, "greedy|statistical")
        ->check(CLI::IsMember({"greedy", "statistical"}));
    attack->add_option("--policy", policy_arg, "selection policy JSON file or inline object")
        ->required();
    attack->add_option("--n", range_arg, "selection length or range a..b")->required();
    attack->add_option("--cap", cap, "max selections per length");
    attack->add_option("--seed", attack_seed, "sampling seed");
    attack->add_option("--out", out_dir, "trace output directory")->required();

    auto* campaign = app.add_subcommand("campaign", "run a full campaign matrix");
    campaign->add_option("--config", config_path, "CampaignConfig JSON file")->required();
    campaign->add_option("--out", out_dir, "report output directory")->required();

    std::string traces_dir, formats = "csv,json,svg";
    auto* report = app.add_subcommand("report", "aggregate trace files into reports");
    report->add_option("--traces", traces_dir, "directory of .jsonl trace files")->required();
    report->add_option("--formats", formats, "comma list of csv,json,svg");
    report->add_option("--out", out_dir, "report output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(config_path, out_dir, seed_override);
        if (attack->parsed())
            return cmd_attack(archive, logic_id, mode, policy_arg, range_arg, cap, attack_seed,
                              out_dir);
        if (campaign->parsed()) return cmd_campaign(config_path, out_dir);
        if (report->parsed()) return cmd_report(traces_dir, formats, out_dir);
    } catch (const locsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const locsim::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
