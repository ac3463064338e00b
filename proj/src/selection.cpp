#include "locsim/selection.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "locsim/errors.hpp"
#include "locsim/rng.hpp"

namespace locsim {

namespace {

using u128 = unsigned __int128;

// Counts saturate here; anything this large is only ever compared against a
// cap, never enumerated.
constexpr u128 kSaturated = u128(1) << 120;

u128 sat_add(u128 a, u128 b) {
    u128 s = a + b;
    return s >= kSaturated ? kSaturated : s;
}

u128 sat_mul(u128 a, u128 b) {
    if (a != 0 && b > kSaturated / a) return kSaturated;
    return a * b;
}

std::int64_t value_delta(const DumpSequence& seq, std::uint32_t from, std::uint32_t to) {
    return static_cast<std::int64_t>(seq.dumps[to].on_screen_value) -
           static_cast<std::int64_t>(seq.dumps[from].on_screen_value);
}

// ---- conformance -----------------------------------------------------------

bool binned_ok(const DumpSequence& seq, const std::vector<std::uint32_t>& idx) {
    std::set<std::uint64_t> seen;
    for (auto i : idx) {
        if (!seen.insert(seq.dumps[i].on_screen_value).second) return false;
    }
    return true;
}

bool incremental_ok(const DumpSequence& seq, const std::vector<std::uint32_t>& idx,
                    bool allow_mixed) {
    if (idx.size() < 2) return true;
    if (allow_mixed) {
        for (std::size_t k = 1; k < idx.size(); ++k) {
            const auto d = value_delta(seq, idx[k - 1], idx[k]);
            if (d != 1 && d != -1) return false;
        }
        return true;
    }
    const std::int64_t dir = value_delta(seq, idx[0], idx[1]);
    if (dir != 1 && dir != -1) return false;
    for (std::size_t k = 1; k < idx.size(); ++k) {
        if (value_delta(seq, idx[k - 1], idx[k]) != dir) return false;
    }
    return true;
}

bool rapid_ok(const DumpSequence& seq, const std::vector<std::uint32_t>& idx,
              std::uint64_t t_max_ms) {
    for (std::size_t k = 1; k < idx.size(); ++k) {
        if (seq.dumps[idx[k]].timestamp_ms - seq.dumps[idx[k - 1]].timestamp_ms > t_max_ms)
            return false;
    }
    return true;
}

// ---- counting --------------------------------------------------------------

std::vector<std::uint64_t> value_group_sizes(const DumpSequence& seq) {
    std::map<std::uint64_t, std::uint64_t> groups;
    for (const auto& d : seq.dumps) ++groups[d.on_screen_value];
    std::vector<std::uint64_t> sizes;
    sizes.reserve(groups.size());
    for (const auto& [value, count] : groups) {
        (void)value;
        sizes.push_back(count);
    }
    return sizes;
}

// Elementary symmetric polynomial DP: table[v][k] = number of ways to pick one
// dump each from k distinct values among the first v groups.
std::vector<std::vector<u128>> binned_table(const std::vector<std::uint64_t>& sizes,
                                            std::uint32_t n) {
    std::vector<std::vector<u128>> table(sizes.size() + 1, std::vector<u128>(n + 1, 0));
    for (auto& row : table) row[0] = 1;
    for (std::size_t v = 1; v <= sizes.size(); ++v) {
        for (std::uint32_t k = 1; k <= n; ++k) {
            table[v][k] = sat_add(table[v - 1][k],
                                  sat_mul(table[v - 1][k - 1], sizes[v - 1]));
        }
    }
    return table;
}

// Index DP over "run ends at dump i with length k", where predecessors are
// given by a predicate. Serves both Incremental (value adjacency) and Rapid
// (timestamp gap) counting and sampling.
template <typename PredecessorOk>
std::vector<std::vector<u128>> run_table(std::size_t dump_count, std::uint32_t n,
                                         PredecessorOk&& ok) {
    std::vector<std::vector<u128>> f(dump_count, std::vector<u128>(n + 1, 0));
    for (std::size_t i = 0; i < dump_count; ++i) {
        f[i][1] = 1;
        for (std::uint32_t k = 2; k <= n; ++k) {
            u128 total = 0;
            for (std::size_t j = 0; j < i; ++j) {
                if (f[j][k - 1] != 0 && ok(j, i)) total = sat_add(total, f[j][k - 1]);
            }
            f[i][k] = total;
        }
    }
    return f;
}

u128 binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    u128 result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        result = sat_mul(result, n - k + i);
        if (result == kSaturated) return kSaturated;
        result /= i;
    }
    return result;
}

// ---- exhaustive enumeration (lexicographic DFS with prefix feasibility) ----

struct PrefixChecker {
    const DumpSequence& seq;
    const SelectionPolicy& policy;

    bool extend_ok(const std::vector<std::uint32_t>& prefix, std::uint32_t next) const {
        struct Visitor {
            const DumpSequence& seq;
            const std::vector<std::uint32_t>& prefix;
            std::uint32_t next;

            bool operator()(const BinnedPolicy&) const {
                for (auto i : prefix) {
                    if (seq.dumps[i].on_screen_value == seq.dumps[next].on_screen_value)
                        return false;
                }
                return true;
            }
            bool operator()(const IncrementalPolicy& p) const {
                if (prefix.empty()) return true;
                const std::int64_t d =
                    static_cast<std::int64_t>(seq.dumps[next].on_screen_value) -
                    static_cast<std::int64_t>(seq.dumps[prefix.back()].on_screen_value);
                if (p.allow_mixed) return d == 1 || d == -1;
                if (prefix.size() == 1) return d == 1 || d == -1;
                const std::int64_t dir =
                    static_cast<std::int64_t>(seq.dumps[prefix[1]].on_screen_value) -
                    static_cast<std::int64_t>(seq.dumps[prefix[0]].on_screen_value);
                return d == dir;
            }
            bool operator()(const FullyRandomPolicy&) const { return true; }
            bool operator()(const RapidPolicy& p) const {
                if (prefix.empty()) return true;
                return seq.dumps[next].timestamp_ms - seq.dumps[prefix.back()].timestamp_ms <=
                       p.t_max_ms;
            }
        };
        return std::visit(Visitor{seq, prefix, next}, policy.variant);
    }
};

void enumerate_dfs(const PrefixChecker& check, std::uint32_t dump_count, std::uint32_t n,
                   std::vector<std::uint32_t>& prefix,
                   std::vector<std::vector<std::uint32_t>>& out) {
    if (prefix.size() == n) {
        out.push_back(prefix);
        return;
    }
    const std::uint32_t start = prefix.empty() ? 0 : prefix.back() + 1;
    const std::uint32_t remaining = n - static_cast<std::uint32_t>(prefix.size());
    for (std::uint32_t i = start; i + remaining <= dump_count; ++i) {
        if (!check.extend_ok(prefix, i)) continue;
        prefix.push_back(i);
        enumerate_dfs(check, dump_count, n, prefix, out);
        prefix.pop_back();
    }
}

// ---- uniform samplers ------------------------------------------------------

u128 rand_u128_below(Rng& rng, u128 bound) {
    if (bound <= u128(~std::uint64_t{0})) {
        return rng.below(static_cast<std::uint64_t>(bound));
    }
    // rejection over a power-of-two envelope
    int bits = 0;
    for (u128 b = bound; b != 0; b >>= 1) ++bits;
    while (true) {
        u128 v = (u128(rng.u64()) << 64) | rng.u64();
        v &= (u128(1) << bits) - 1;
        if (v < bound) return v;
    }
}

std::vector<std::uint32_t> sample_binned(const DumpSequence& seq,
                                         const std::vector<std::vector<u128>>& table,
                                         std::uint32_t n, Rng& rng) {
    // regroup dumps by value in ascending value order (matches table build)
    std::map<std::uint64_t, std::vector<std::uint32_t>> groups;
    for (const auto& d : seq.dumps) groups[d.on_screen_value].push_back(d.ordinal);
    std::vector<const std::vector<std::uint32_t>*> ordered;
    ordered.reserve(groups.size());
    for (const auto& [value, members] : groups) {
        (void)value;
        ordered.push_back(&members);
    }

    std::vector<std::uint32_t> picked;
    std::uint32_t k = n;
    for (std::size_t v = ordered.size(); v >= 1 && k > 0; --v) {
        const u128 with = sat_mul(table[v - 1][k - 1], ordered[v - 1]->size());
        const u128 total = table[v][k];
        if (rand_u128_below(rng, total) < with) {
            const auto& members = *ordered[v - 1];
            picked.push_back(members[rng.below(members.size())]);
            --k;
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

template <typename PredecessorOk>
std::vector<std::uint32_t> sample_run(const std::vector<std::vector<u128>>& f, std::uint32_t n,
                                      Rng& rng, PredecessorOk&& ok) {
    u128 total = 0;
    for (const auto& row : f) total = sat_add(total, row[n]);

    std::vector<std::uint32_t> rev;
    u128 pick = rand_u128_below(rng, total);
    std::size_t cur = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (pick < f[i][n]) {
            cur = i;
            break;
        }
        pick -= f[i][n];
    }
    rev.push_back(static_cast<std::uint32_t>(cur));
    for (std::uint32_t k = n; k >= 2; --k) {
        u128 acc = 0;
        for (std::size_t j = 0; j < cur; ++j) {
            if (f[j][k - 1] == 0 || !ok(j, cur)) continue;
            acc = sat_add(acc, f[j][k - 1]);
        }
        u128 r = rand_u128_below(rng, acc);
        for (std::size_t j = 0; j < cur; ++j) {
            if (f[j][k - 1] == 0 || !ok(j, cur)) continue;
            if (r < f[j][k - 1]) {
                cur = j;
                break;
            }
            r -= f[j][k - 1];
        }
        rev.push_back(static_cast<std::uint32_t>(cur));
    }
    std::reverse(rev.begin(), rev.end());
    return rev;
}

std::vector<std::uint32_t> sample_subset(std::uint32_t dump_count, std::uint32_t n, Rng& rng) {
    // Floyd's algorithm: uniform n-subset of [0, dump_count)
    std::set<std::uint32_t> chosen;
    for (std::uint32_t j = dump_count - n; j < dump_count; ++j) {
        const auto t = static_cast<std::uint32_t>(rng.below(j + 1));
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

}  // namespace

std::string SelectionPolicy::kind() const {
    struct Visitor {
        std::string operator()(const BinnedPolicy&) const { return "binned"; }
        std::string operator()(const IncrementalPolicy&) const { return "incremental"; }
        std::string operator()(const FullyRandomPolicy&) const { return "fully_random"; }
        std::string operator()(const RapidPolicy&) const { return "rapid"; }
    };
    return std::visit(Visitor{}, variant);
}

void SelectionPolicy::validate() const {
    if (auto* r = std::get_if<RapidPolicy>(&variant)) {
        if (r->t_max_ms == 0) throw ConfigError("rapid: t_max_ms must be positive");
    }
}

nlohmann::json policy_to_json(const SelectionPolicy& policy) {
    nlohmann::json j;
    j["kind"] = policy.kind();
    if (auto* r = std::get_if<RapidPolicy>(&policy.variant)) j["t_max_ms"] = r->t_max_ms;
    if (auto* i = std::get_if<IncrementalPolicy>(&policy.variant)) {
        if (i->allow_mixed) j["allow_mixed"] = true;
    }
    return j;
}

SelectionPolicy policy_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("selection policy: expected object with \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    SelectionPolicy p;
    if (kind == "binned") {
        p.variant = BinnedPolicy{};
    } else if (kind == "incremental") {
        p.variant = IncrementalPolicy{j.value("allow_mixed", false)};
    } else if (kind == "fully_random") {
        p.variant = FullyRandomPolicy{};
    } else if (kind == "rapid") {
        if (!j.contains("t_max_ms")) throw ConfigError("rapid policy requires t_max_ms");
        p.variant = RapidPolicy{j.at("t_max_ms").get<std::uint64_t>()};
    } else {
        throw ConfigError("selection policy: unknown kind \"" + kind + "\"");
    }
    p.validate();
    return p;
}

bool conforms(const SelectionPolicy& policy, const DumpSequence& seq,
              const std::vector<std::uint32_t>& indices) {
    struct Visitor {
        const DumpSequence& seq;
        const std::vector<std::uint32_t>& idx;

        bool operator()(const BinnedPolicy&) const { return binned_ok(seq, idx); }
        bool operator()(const IncrementalPolicy& p) const {
            return (p.allow_mixed || binned_ok(seq, idx)) &&
                   incremental_ok(seq, idx, p.allow_mixed);
        }
        bool operator()(const FullyRandomPolicy&) const { return true; }
        bool operator()(const RapidPolicy& p) const { return rapid_ok(seq, idx, p.t_max_ms); }
    };
    return std::visit(Visitor{seq, indices}, policy.variant);
}

unsigned __int128 count_conforming(const DumpSequence& seq, const SelectionPolicy& policy,
                                   std::uint32_t n) {
    const std::size_t dump_count = seq.dumps.size();
    if (n == 0 || n > dump_count) return 0;
    if (n == 1) return dump_count;

    struct Visitor {
        const DumpSequence& seq;
        std::uint32_t n;

        u128 operator()(const BinnedPolicy&) const {
            const auto sizes = value_group_sizes(seq);
            if (n > sizes.size()) return 0;
            return binned_table(sizes, n).back()[n];
        }
        u128 operator()(const IncrementalPolicy& p) const {
            u128 total = 0;
            for (const std::int64_t dir : {std::int64_t{1}, std::int64_t{-1}}) {
                auto ok = [&](std::size_t j, std::size_t i) {
                    return value_delta(seq, static_cast<std::uint32_t>(j),
                                       static_cast<std::uint32_t>(i)) == dir;
                };
                if (p.allow_mixed) break;
                const auto f = run_table(seq.dumps.size(), n, ok);
                for (const auto& row : f) total = sat_add(total, row[n]);
            }
            if (p.allow_mixed) {
                auto ok = [&](std::size_t j, std::size_t i) {
                    const auto d = value_delta(seq, static_cast<std::uint32_t>(j),
                                               static_cast<std::uint32_t>(i));
                    return d == 1 || d == -1;
                };
                const auto f = run_table(seq.dumps.size(), n, ok);
                for (const auto& row : f) total = sat_add(total, row[n]);
            }
            return total;
        }
        u128 operator()(const FullyRandomPolicy&) const { return binomial(seq.dumps.size(), n); }
        u128 operator()(const RapidPolicy& p) const {
            auto ok = [&](std::size_t j, std::size_t i) {
                return seq.dumps[i].timestamp_ms - seq.dumps[j].timestamp_ms <= p.t_max_ms;
            };
            const auto f = run_table(seq.dumps.size(), n, ok);
            u128 total = 0;
            for (const auto& row : f) total = sat_add(total, row[n]);
            return total;
        }
    };
    return std::visit(Visitor{seq, n}, policy.variant);
}

std::vector<SelectedSequence> enumerate_subsequences(
    const std::shared_ptr<const DumpSequence>& seq, const SelectionPolicy& policy,
    std::uint32_t n, std::uint64_t cap, std::uint64_t seed) {
    if (n < 1) throw ConfigError("enumerate_subsequences: n must be >= 1");
    if (cap < 1) throw ConfigError("enumerate_subsequences: cap must be >= 1");
    policy.validate();

    const u128 total = count_conforming(*seq, policy, n);
    std::vector<std::vector<std::uint32_t>> chosen;

    if (total == 0) return {};

    // Exhaustive enumeration is also the fallback when the conforming count
    // barely exceeds the cap (sampling would mostly hit duplicates).
    if (total <= u128(cap) || total <= u128(cap) + u128(cap) / 2 + 64) {
        PrefixChecker check{*seq, policy};
        std::vector<std::uint32_t> prefix;
        enumerate_dfs(check, static_cast<std::uint32_t>(seq->dumps.size()), n, prefix, chosen);
        if (chosen.size() > cap) {
            // uniform cap-subset of the materialized list
            Rng rng(derive_seed(seed, 0x5e1ecull));
            for (std::uint64_t i = 0; i < cap; ++i) {
                const auto j = i + rng.below(chosen.size() - i);
                std::swap(chosen[i], chosen[j]);
            }
            chosen.resize(cap);
            std::sort(chosen.begin(), chosen.end());
        }
    } else {
        Rng rng(derive_seed(seed, 0x5e1ecull));

        // Build the policy's DP tables once, then draw uniform conforming
        // sequences until cap distinct ones accumulated.
        auto ok_up = [&](std::size_t j, std::size_t i) {
            return value_delta(*seq, static_cast<std::uint32_t>(j),
                               static_cast<std::uint32_t>(i)) == 1;
        };
        auto ok_down = [&](std::size_t j, std::size_t i) {
            return value_delta(*seq, static_cast<std::uint32_t>(j),
                               static_cast<std::uint32_t>(i)) == -1;
        };
        auto ok_any = [&](std::size_t j, std::size_t i) {
            const auto d = value_delta(*seq, static_cast<std::uint32_t>(j),
                                       static_cast<std::uint32_t>(i));
            return d == 1 || d == -1;
        };
        auto* rp = std::get_if<RapidPolicy>(&policy.variant);
        auto ok_rapid = [&](std::size_t j, std::size_t i) {
            return seq->dumps[i].timestamp_ms - seq->dumps[j].timestamp_ms <= rp->t_max_ms;
        };

        std::vector<std::vector<u128>> binned_dp, run_up, run_down, run_any, run_rapid;
        u128 count_up = 0, count_down = 0;
        auto* ip = std::get_if<IncrementalPolicy>(&policy.variant);
        if (std::holds_alternative<BinnedPolicy>(policy.variant)) {
            binned_dp = binned_table(value_group_sizes(*seq), n);
        } else if (ip != nullptr && ip->allow_mixed) {
            run_any = run_table(seq->dumps.size(), n, ok_any);
        } else if (ip != nullptr) {
            run_up = run_table(seq->dumps.size(), n, ok_up);
            run_down = run_table(seq->dumps.size(), n, ok_down);
            for (const auto& row : run_up) count_up = sat_add(count_up, row[n]);
            for (const auto& row : run_down) count_down = sat_add(count_down, row[n]);
        } else if (rp != nullptr) {
            run_rapid = run_table(seq->dumps.size(), n, ok_rapid);
        }

        std::set<std::vector<std::uint32_t>> seen;
        const std::uint64_t max_draws = 64 * cap + 4096;
        std::uint64_t draws = 0;
        while (seen.size() < cap && draws < max_draws) {
            ++draws;
            std::vector<std::uint32_t> sample;
            if (n == 1) {
                sample = {static_cast<std::uint32_t>(rng.below(seq->dumps.size()))};
            } else if (!binned_dp.empty()) {
                sample = sample_binned(*seq, binned_dp, n, rng);
            } else if (!run_any.empty()) {
                sample = sample_run(run_any, n, rng, ok_any);
            } else if (!run_up.empty()) {
                if (rand_u128_below(rng, sat_add(count_up, count_down)) < count_up) {
                    sample = sample_run(run_up, n, rng, ok_up);
                } else {
                    sample = sample_run(run_down, n, rng, ok_down);
                }
            } else if (std::holds_alternative<FullyRandomPolicy>(policy.variant)) {
                sample = sample_subset(static_cast<std::uint32_t>(seq->dumps.size()), n, rng);
            } else {
                sample = sample_run(run_rapid, n, rng, ok_rapid);
            }
            seen.insert(std::move(sample));
        }
        chosen.assign(seen.begin(), seen.end());
    }

    std::vector<SelectedSequence> result;
    result.reserve(chosen.size());
    for (auto& idx : chosen) result.push_back(SelectedSequence{seq, std::move(idx)});
    return result;
}

}  // namespace locsim
