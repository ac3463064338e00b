#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "locsim/aggregate.hpp"
#include "locsim/gamesim.hpp"
#include "locsim/selection.hpp"

namespace locsim {

// One attack column of the campaign matrix: a pruning logic applied in one
// mode under one selection policy, over a range of scan counts.
struct AttackSpec {
    PruningLogic logic = PruningLogic::Base;
    std::string mode = "greedy";  // "greedy" | "statistical"
    SelectionPolicy policy;
    std::uint32_t n_min = 1;
    std::uint32_t n_max = 1;
    std::uint64_t cap = 1000;
    std::vector<SuccessCriterion> criteria;  // statistical; defaults to top_k=100

    void validate() const;
};

struct ArchiveSource {
    std::string path;                 // load from disk when non-empty
    std::optional<SimConfig> config;  // otherwise simulate
    std::string label() const;
};

struct CampaignConfig {
    std::vector<ArchiveSource> archives;
    std::vector<AttackSpec> attacks;
    std::uint64_t seed = 0;
    std::uint32_t parallelism = 1;

    void validate() const;
};

nlohmann::json campaign_config_to_json(const CampaignConfig& config);
CampaignConfig campaign_config_from_json(const nlohmann::json& j);

// Deterministic per-cell seed: a function of the campaign seed and the cell
// coordinates only, so reordering the matrix cannot change any cell.
std::uint64_t cell_seed(std::uint64_t campaign_seed, const std::string& archive_label,
                        const AttackSpec& attack, std::uint32_t n);

// Runs `fn(i)` for i in [0, count) on up to `threads` workers. Results must
// be written to independent slots; iteration order is unspecified.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

// LOCSIM_THREADS overrides the configured parallelism when set.
unsigned effective_parallelism(unsigned configured);

// Traces persisted as JSON-lines, one record per selected subsequence.
struct TraceRecord {
    std::string game_label;
    std::string encoding;
    std::string logic;
    std::string mode;
    std::string policy;
    std::vector<std::uint32_t> indices;
    std::vector<SuccessCriterion> criteria;  // statistical only
    GreedyTrace greedy;                      // one of the two is meaningful
    StatTrace stat;
};

void write_traces_jsonl(const std::filesystem::path& file,
                        const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_traces_jsonl(const std::filesystem::path& file);

// Aggregates a mixed directory of trace files into per-batch terminal rows
// (each selection length contributes the row at its own n).
AggregateReport aggregate_trace_dir(const std::filesystem::path& dir);

struct AttackRunResult {
    std::vector<TraceRecord> records;
    AggregateReport report;  // terminal row(s) for this batch
};

// Runs one (archive, attack, n) cell: enumerates/samples selections, attacks
// each (parallel across selections) and aggregates the batch.
AttackRunResult run_attack_cell(const std::shared_ptr<const DumpSequence>& seq,
                                const AttackSpec& attack, std::uint32_t n, std::uint64_t seed,
                                unsigned threads);

struct CampaignOutcome {
    AggregateReport report;  // all rows, deterministic
    std::vector<std::string> warnings;
    bool every_cell_produced = true;
};

// Full matrix run; writes per archive x attack reports (csv/json/svg) plus a
// combined campaign.csv into out_dir, and wall-clock timings into a separate
// timings.jsonl that deterministic comparisons must ignore.
CampaignOutcome run_campaign(const CampaignConfig& config,
                             const std::filesystem::path& out_dir);

}  // namespace locsim
