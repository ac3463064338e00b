#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <fstream>

#include "locsim/archive.hpp"
#include "locsim/campaign.hpp"
#include "locsim/errors.hpp"

using namespace locsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("locsim_camp_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

SimConfig tiny_sim(const char* label, std::uint64_t seed) {
    SimConfig c;
    c.game_label = label;
    c.word_count = 2048;
    c.seed = seed;
    c.encoding = EncodingSpec{BaseEnc{}};
    c.resource_start = 100;
    c.resource_direction = 1;
    c.resource_change_count = 7;
    c.frame_period_ms = 16;
    c.collection = PacedCollection{2000, 3, true};
    return c;
}

AttackSpec base_attack() {
    AttackSpec a;
    a.logic = PruningLogic::Base;
    a.mode = "greedy";
    a.policy = SelectionPolicy{BinnedPolicy{}};
    a.n_min = 1;
    a.n_max = 2;
    a.cap = 1000;
    return a;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("run_attack_cell: base greedy over binned n=1..2 covers dumps then pairs") {
    auto seq = std::make_shared<const DumpSequence>(simulate(tiny_sim("cell", 5)));
    const auto attack = base_attack();
    const auto r1 = run_attack_cell(seq, attack, 1, 42, 1);
    CHECK(r1.records.size() == seq->dumps.size());  // 25 singleton selections
    const auto r2 = run_attack_cell(seq, attack, 2, 42, 1);
    CHECK(r2.records.size() == 273);  // binned pairs on the 25-dump paced archive
    REQUIRE(r2.report.rows.size() == 1);
    CHECK(r2.report.rows[0].n == 2);
    CHECK(r2.report.rows[0].samples == 273);
    CHECK(r2.report.rows[0].mean_success_rate == 1.0);
}

TEST_CASE("run_attack_cell: incompatible logic and policy are rejected") {
    auto seq = std::make_shared<const DumpSequence>(simulate(tiny_sim("cell2", 5)));
    AttackSpec bad;
    bad.logic = PruningLogic::AddXor;
    bad.mode = "greedy";
    bad.policy = SelectionPolicy{FullyRandomPolicy{}};
    bad.n_min = bad.n_max = 2;
    try {
        run_attack_cell(seq, bad, 2, 1, 1);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("requires incremental selection") !=
              std::string::npos);
    }
}

TEST_CASE("run_attack_cell: statistical traces carry one recall flag per criterion") {
    auto seq = std::make_shared<const DumpSequence>(simulate(tiny_sim("cell3", 6)));
    AttackSpec a;
    a.logic = PruningLogic::Xor;
    a.mode = "statistical";
    a.policy = SelectionPolicy{BinnedPolicy{}};
    a.n_min = a.n_max = 3;
    a.cap = 20;
    a.criteria = {SuccessCriterion{ThresholdCriterion{1.0}}, SuccessCriterion{TopKCriterion{100}},
                  SuccessCriterion{ScoreDropCriterion{0.5}}};
    const auto r = run_attack_cell(seq, a, 3, 9, 1);
    REQUIRE(!r.records.empty());
    for (const auto& rec : r.records) {
        for (const auto& st : rec.stat.steps) CHECK(st.recall.size() == 3);
    }
    CHECK(r.report.rows.size() == 3);  // one row per criterion at n=3
}

TEST_CASE("trace jsonl round-trips") {
    TempDir tmp;
    auto seq = std::make_shared<const DumpSequence>(simulate(tiny_sim("jsonl", 7)));
    const auto r = run_attack_cell(seq, base_attack(), 2, 3, 1);
    const auto file = tmp.path / "t.jsonl";
    write_traces_jsonl(file, r.records);
    const auto back = read_traces_jsonl(file);
    REQUIRE(back.size() == r.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].indices == r.records[i].indices);
        REQUIRE(back[i].greedy.steps.size() == r.records[i].greedy.steps.size());
        for (std::size_t k = 0; k < back[i].greedy.steps.size(); ++k) {
            CHECK(back[i].greedy.steps[k].remaining == r.records[i].greedy.steps[k].remaining);
            CHECK(back[i].greedy.steps[k].recall == r.records[i].greedy.steps[k].recall);
        }
    }
    const auto report = aggregate_trace_dir(tmp.path);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].n == 2);
    CHECK(report.rows[0].samples == 273);
}

TEST_CASE("campaign: runs the matrix, emits reports, deterministic across parallelism") {
    TempDir out1, out2;
    CampaignConfig config;
    config.seed = 99;
    config.parallelism = 1;
    config.archives.push_back(ArchiveSource{"", tiny_sim("camp", 21)});
    auto a = base_attack();
    a.n_min = 1;
    a.n_max = 4;
    config.attacks.push_back(a);
    AttackSpec x;
    x.logic = PruningLogic::Xor;
    x.mode = "statistical";
    x.policy = SelectionPolicy{BinnedPolicy{}};
    x.n_min = 2;
    x.n_max = 4;
    x.cap = 50;
    config.attacks.push_back(x);

    const auto o1 = run_campaign(config, out1.path);
    CHECK(o1.every_cell_produced);
    CHECK(fs::exists(out1.path / "campaign.csv"));
    CHECK(fs::exists(out1.path / "camp__base__greedy.csv"));
    CHECK(fs::exists(out1.path / "camp__xor__statistical.csv"));
    CHECK(fs::exists(out1.path / "timings.jsonl"));

    config.parallelism = 8;
    const auto o2 = run_campaign(config, out2.path);
    CHECK(slurp(out1.path / "campaign.csv") == slurp(out2.path / "campaign.csv"));
    CHECK(slurp(out1.path / "camp__base__greedy.csv") ==
          slurp(out2.path / "camp__base__greedy.csv"));
    CHECK(slurp(out1.path / "camp__xor__statistical.json") ==
          slurp(out2.path / "camp__xor__statistical.json"));
}

TEST_CASE("campaign: rerun with the same seed is byte-identical, other seeds differ") {
    TempDir out1, out2, out3;
    CampaignConfig config;
    config.seed = 1234;
    config.archives.push_back(ArchiveSource{"", tiny_sim("redo", 33)});
    auto a = base_attack();
    a.n_min = 2;
    a.n_max = 3;
    config.attacks.push_back(a);
    run_campaign(config, out1.path);
    run_campaign(config, out2.path);
    CHECK(slurp(out1.path / "campaign.csv") == slurp(out2.path / "campaign.csv"));
    // sampled cells react to the campaign seed
    config.seed = 4321;
    auto x = base_attack();
    x.policy = SelectionPolicy{FullyRandomPolicy{}};
    x.n_min = x.n_max = 5;
    x.cap = 10;
    config.attacks = {x};
    run_campaign(config, out3.path);
    CHECK(slurp(out1.path / "campaign.csv") != slurp(out3.path / "campaign.csv"));
}

TEST_CASE("cell seeds depend only on the cell coordinates") {
    const auto a = base_attack();
    auto b = base_attack();
    b.logic = PruningLogic::Xor;
    CHECK(cell_seed(1, "arch", a, 3) == cell_seed(1, "arch", a, 3));
    CHECK(cell_seed(1, "arch", a, 3) != cell_seed(1, "arch", a, 4));
    CHECK(cell_seed(1, "arch", a, 3) != cell_seed(1, "arch", b, 3));
    CHECK(cell_seed(1, "arch", a, 3) != cell_seed(2, "arch", a, 3));
    CHECK(cell_seed(1, "arch", a, 3) != cell_seed(1, "other", a, 3));
}

TEST_CASE("campaign config json round-trip and validation") {
    CampaignConfig config;
    config.seed = 7;
    config.parallelism = 4;
    config.archives.push_back(ArchiveSource{"", tiny_sim("io", 1)});
    config.archives.push_back(ArchiveSource{"/some/dir", std::nullopt});
    auto a = base_attack();
    a.criteria = {SuccessCriterion{TopKCriterion{100}}};
    config.attacks.push_back(a);
    const auto j = campaign_config_to_json(config);
    const auto again = campaign_config_from_json(j);
    CHECK(campaign_config_to_json(again) == j);

    auto bad = j;
    bad["attacks"][0]["logic"] = "add_xor";  // binned policy + add_xor
    CHECK_THROWS_AS(campaign_config_from_json(bad), ConfigError);
}

TEST_CASE("parallel_for covers every index exactly once and propagates errors") {
    std::vector<std::atomic<int>> hits(500);
    parallel_for(500, 4, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 5) throw DataError("boom");
                                 }),
                    DataError);
}
