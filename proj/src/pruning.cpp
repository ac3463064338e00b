#include "locsim/pruning.hpp"

#include <algorithm>

namespace locsim {

std::string logic_name(PruningLogic logic) {
    switch (logic) {
        case PruningLogic::Base: return "base";
        case PruningLogic::Offset: return "offset";
        case PruningLogic::Xor: return "xor";
        case PruningLogic::AddXor: return "add_xor";
        case PruningLogic::XorAdd: return "xor_add";
        case PruningLogic::Rnc: return "rnc";
        case PruningLogic::IncDec: return "inc_dec";
        case PruningLogic::ChangeNoChange: return "change_no_change";
        case PruningLogic::Change: return "change";
    }
    return "unknown";
}

PruningLogic logic_from_name(const std::string& name) {
    if (name == "base") return PruningLogic::Base;
    if (name == "offset") return PruningLogic::Offset;
    if (name == "xor") return PruningLogic::Xor;
    if (name == "add_xor") return PruningLogic::AddXor;
    if (name == "xor_add") return PruningLogic::XorAdd;
    if (name == "rnc") return PruningLogic::Rnc;
    if (name == "inc_dec") return PruningLogic::IncDec;
    if (name == "change_no_change") return PruningLogic::ChangeNoChange;
    if (name == "change") return PruningLogic::Change;
    throw ConfigError("unknown pruning logic \"" + name + "\"");
}

bool xor_add_check(std::uint64_t prev_a, std::uint64_t cur_a, WordValue prev_x, WordValue cur_x,
                   XorAddState& state, int bits, bool infer) {
    const WordValue wmask = bits >= 32 ? 0xffffffffu : ((1u << bits) - 1);

    // Orient the pair as an increment lower -> lower+1; descending steps use
    // the same relation with the roles of the two dumps swapped.
    std::uint64_t lower;
    WordValue d;
    if (cur_a == prev_a + 1) {
        lower = prev_a;
        d = (cur_x - prev_x) & wmask;
    } else if (prev_a == cur_a + 1) {
        lower = cur_a;
        d = (prev_x - cur_x) & wmask;
    } else {
        throw ConfigError("xor_add logic requires incremental selection");
    }
    if (d == 0 || (d & 1) == 0) return false;

    const WordValue low = static_cast<WordValue>(lower) & wmask;
    if (low == wmask) return false;  // increment would wrap, no carry chain
    const int z = std::countr_zero(~low);

    // d as two's complement within `bits` is confined to the carry span:
    // |d| <= 2^(z+1) - 1.
    if (z + 1 < bits) {
        const WordValue span = 1u << (z + 1);
        const WordValue neg_min = (wmask - span + 2) & wmask;
        if (d > span - 1 && d < neg_min) return false;
    }
    if (!infer) return true;

    // bits 0..z of M are ((d - 1) / 2) mod 2^(z+1); when the span covers the
    // whole word only bits-1 low bits are determined.
    const WordValue half = ((d - 1) & wmask) >> 1;
    const WordValue infer_mask = (z + 1 < bits) ? ((1u << (z + 1)) - 1) : (wmask >> 1);
    const WordValue inferred = half & infer_mask;
    if (((state.known_value ^ inferred) & state.known_mask & infer_mask) != 0) return false;
    state.known_value |= inferred & infer_mask;
    state.known_mask |= infer_mask;
    return true;
}

StepResult step(PruningLogic logic, LocationState state, std::uint64_t prev_a, WordValue prev_x,
                std::uint64_t cur_a, WordValue cur_x, bool xor_add_inference) {
    bool conform = false;
    switch (logic) {
        case PruningLogic::Base:
            conform = base_check(cur_a, cur_x);
            break;
        case PruningLogic::Offset:
        case PruningLogic::Xor: {
            if (!state.has_anchor) {
                state.has_anchor = true;
                state.anchor_a = prev_a;
                state.anchor_x = prev_x;
            }
            conform = (logic == PruningLogic::Offset)
                          ? offset_check(state.anchor_a, state.anchor_x, cur_a, cur_x)
                          : xor_check(state.anchor_a, state.anchor_x, cur_a, cur_x);
            break;
        }
        case PruningLogic::AddXor: {
            if (cur_a != prev_a + 1 && prev_a != cur_a + 1)
                throw ConfigError("add_xor logic requires incremental selection");
            conform = add_xor_check(prev_x, cur_x);
            break;
        }
        case PruningLogic::XorAdd:
            conform = xor_add_check(prev_a, cur_a, prev_x, cur_x, state.xor_add, 32,
                                    xor_add_inference);
            break;
        case PruningLogic::Rnc:
            conform = rnc_check(cur_a, cur_x, state.rnc_gcd);
            break;
        case PruningLogic::IncDec:
            conform = inc_dec_check(prev_a, cur_a, prev_x, cur_x);
            break;
        case PruningLogic::ChangeNoChange:
            conform = change_no_change_check(prev_a, cur_a, prev_x, cur_x);
            break;
        case PruningLogic::Change:
            conform = change_check(prev_a, cur_a, prev_x, cur_x);
            break;
    }
    return StepResult{conform, state};
}

namespace {

void require_valid_selection(const SelectedSequence& sel, PruningLogic logic) {
    if (sel.source == nullptr) throw ConfigError("attack: selection has no source sequence");
    if (sel.indices.empty()) throw ConfigError("attack: empty selection");
    const auto& dumps = sel.source->dumps;
    for (std::size_t k = 0; k < sel.indices.size(); ++k) {
        if (sel.indices[k] >= dumps.size())
            throw ConfigError("attack: selection index out of range");
        if (k > 0 && sel.indices[k] <= sel.indices[k - 1])
            throw ConfigError("attack: selection indices must be strictly increasing");
    }
    if (requires_incremental(logic)) {
        for (std::size_t k = 1; k < sel.indices.size(); ++k) {
            const std::uint64_t a = dumps[sel.indices[k - 1]].on_screen_value;
            const std::uint64_t b = dumps[sel.indices[k]].on_screen_value;
            if (b != a + 1 && a != b + 1)
                throw ConfigError(logic_name(logic) + " logic requires incremental selection");
        }
    }
}

// Keeps only conforming entries of the alive list, updating the mask.
template <typename Conform>
void filter_alive(std::vector<std::uint32_t>& alive, std::vector<std::uint8_t>& alive_mask,
                  Conform&& conform) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < alive.size(); ++i) {
        const std::uint32_t loc = alive[i];
        if (conform(loc)) {
            alive[out++] = loc;
        } else {
            alive_mask[loc] = 0;
        }
    }
    alive.resize(out);
}

}  // namespace

GreedyTrace greedy_attack(const SelectedSequence& sel, PruningLogic logic,
                          const AttackOptions& options) {
    require_valid_selection(sel, logic);
    const DumpSequence& seq = *sel.source;
    const std::uint32_t word_count = seq.word_count;

    std::vector<std::uint32_t> alive(word_count);
    for (std::uint32_t i = 0; i < word_count; ++i) alive[i] = i;
    std::vector<std::uint8_t> alive_mask(word_count, 1);

    std::vector<std::uint64_t> rnc_gcd;
    if (logic == PruningLogic::Rnc) rnc_gcd.assign(word_count, 0);
    std::vector<XorAddState> xa_state;
    if (logic == PruningLogic::XorAdd) xa_state.assign(word_count, XorAddState{});

    const Dump* anchor = nullptr;
    const Dump* prev = nullptr;

    GreedyTrace trace;
    trace.steps.reserve(sel.indices.size());

    for (std::size_t k = 0; k < sel.indices.size(); ++k) {
        const Dump& cur = seq.dumps[sel.indices[k]];
        const std::uint64_t cur_a = cur.on_screen_value;
        const WordValue* cur_w = cur.words.data();

        switch (logic) {
            case PruningLogic::Base:
                filter_alive(alive, alive_mask,
                             [&](std::uint32_t loc) { return base_check(cur_a, cur_w[loc]); });
                break;
            case PruningLogic::Rnc:
                filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                    return rnc_check(cur_a, cur_w[loc], rnc_gcd[loc]);
                });
                break;
            case PruningLogic::Offset: {
                if (anchor == nullptr) {
                    anchor = &cur;
                    break;
                }
                const std::uint64_t ref_a = anchor->on_screen_value;
                const WordValue* ref_w = anchor->words.data();
                filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                    return offset_check(ref_a, ref_w[loc], cur_a, cur_w[loc]);
                });
                break;
            }
            case PruningLogic::Xor: {
                if (anchor == nullptr) {
                    anchor = &cur;
                    break;
                }
                const std::uint64_t ref_a = anchor->on_screen_value;
                const WordValue* ref_w = anchor->words.data();
                filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                    return xor_check(ref_a, ref_w[loc], cur_a, cur_w[loc]);
                });
                break;
            }
            case PruningLogic::AddXor: {
                if (prev == nullptr) break;
                const WordValue* prev_w = prev->words.data();
                filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                    return add_xor_check(prev_w[loc], cur_w[loc]);
                });
                break;
            }
            case PruningLogic::XorAdd: {
                if (prev == nullptr) break;
                const std::uint64_t prev_a = prev->on_screen_value;
                const WordValue* prev_w = prev->words.data();
                filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                    return xor_add_check(prev_a, cur_a, prev_w[loc], cur_w[loc], xa_state[loc],
                                         32, options.xor_add_inference);
                });
                break;
            }
            case PruningLogic::IncDec: {
                if (prev == nullptr) break;
                const std::uint64_t prev_a = prev->on_screen_value;
                const WordValue* prev_w = prev->words.data();
                filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                    return inc_dec_check(prev_a, cur_a, prev_w[loc], cur_w[loc]);
                });
                break;
            }
            case PruningLogic::ChangeNoChange: {
                if (prev == nullptr) break;
                const std::uint64_t prev_a = prev->on_screen_value;
                const WordValue* prev_w = prev->words.data();
                filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                    return change_no_change_check(prev_a, cur_a, prev_w[loc], cur_w[loc]);
                });
                break;
            }
            case PruningLogic::Change: {
                if (prev == nullptr) break;
                const std::uint64_t prev_a = prev->on_screen_value;
                if (cur_a != prev_a) {
                    const WordValue* prev_w = prev->words.data();
                    filter_alive(alive, alive_mask, [&](std::uint32_t loc) {
                        return cur_w[loc] != prev_w[loc];
                    });
                }
                break;
            }
        }
        prev = &cur;

        bool recall = true;
        for (auto loc : seq.ground_truth.locations) {
            if (!alive_mask[loc]) {
                recall = false;
                break;
            }
        }
        trace.steps.push_back(GreedyStep{static_cast<std::uint32_t>(k + 1), alive.size(),
                                         recall});
    }

    if (options.record_final_candidates) trace.final_candidates = alive;
    return trace;
}

std::string SuccessCriterion::kind() const {
    struct Visitor {
        std::string operator()(const ThresholdCriterion&) const { return "threshold"; }
        std::string operator()(const TopKCriterion&) const { return "top_k"; }
        std::string operator()(const ScoreDropCriterion&) const { return "score_drop"; }
    };
    return std::visit(Visitor{}, variant);
}

nlohmann::json criterion_to_json(const SuccessCriterion& c) {
    nlohmann::json j;
    j["criterion"] = c.kind();
    struct Visitor {
        nlohmann::json& j;
        void operator()(const ThresholdCriterion& t) const { j["value"] = t.tau; }
        void operator()(const TopKCriterion& t) const { j["value"] = t.k; }
        void operator()(const ScoreDropCriterion& t) const { j["value"] = t.delta; }
    };
    std::visit(Visitor{j}, c.variant);
    return j;
}

SuccessCriterion criterion_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("criterion"))
        throw ConfigError("success criterion: expected object with \"criterion\"");
    const std::string kind = j.at("criterion").get<std::string>();
    SuccessCriterion c;
    if (kind == "threshold") {
        c.variant = ThresholdCriterion{j.at("value").get<double>()};
    } else if (kind == "top_k") {
        c.variant = TopKCriterion{j.at("value").get<std::uint64_t>()};
    } else if (kind == "score_drop") {
        c.variant = ScoreDropCriterion{j.at("value").get<double>()};
    } else {
        throw ConfigError("unknown success criterion \"" + kind + "\"");
    }
    return c;
}

StatTrace statistical_attack(const SelectedSequence& sel, PruningLogic logic,
                             const std::vector<SuccessCriterion>& criteria,
                             const AttackOptions& options) {
    require_valid_selection(sel, logic);
    const DumpSequence& seq = *sel.source;
    const std::uint32_t word_count = seq.word_count;
    const auto& gt_locations = seq.ground_truth.locations;

    std::vector<std::uint32_t> conform_count(word_count, 0);
    std::vector<std::uint64_t> rnc_gcd;
    if (logic == PruningLogic::Rnc) rnc_gcd.assign(word_count, 0);
    std::vector<XorAddState> xa_state;
    if (logic == PruningLogic::XorAdd) xa_state.assign(word_count, XorAddState{});

    const Dump* prev = nullptr;
    std::uint32_t total_checks = 0;

    StatTrace trace;
    trace.steps.reserve(sel.indices.size());

    for (std::size_t k = 0; k < sel.indices.size(); ++k) {
        const Dump& cur = seq.dumps[sel.indices[k]];
        const std::uint64_t cur_a = cur.on_screen_value;
        const WordValue* cur_w = cur.words.data();

        const bool has_check = is_per_dump(logic) || prev != nullptr;
        if (has_check) {
            ++total_checks;
            const std::uint64_t prev_a = prev ? prev->on_screen_value : 0;
            const WordValue* prev_w = prev ? prev->words.data() : nullptr;

            // Statistical mode scores consecutive pairs for the offset/xor
            // logics (equal to the anchor formulation on the perfect-score
            // set, and robust to dynamic masks).
            switch (logic) {
                case PruningLogic::Base:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] += base_check(cur_a, cur_w[loc]);
                    break;
                case PruningLogic::Rnc:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] += rnc_check(cur_a, cur_w[loc], rnc_gcd[loc]);
                    break;
                case PruningLogic::Offset:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] +=
                            offset_check(prev_a, prev_w[loc], cur_a, cur_w[loc]);
                    break;
                case PruningLogic::Xor:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] += xor_check(prev_a, prev_w[loc], cur_a, cur_w[loc]);
                    break;
                case PruningLogic::AddXor:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] += add_xor_check(prev_w[loc], cur_w[loc]);
                    break;
                case PruningLogic::XorAdd:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] +=
                            xor_add_check(prev_a, cur_a, prev_w[loc], cur_w[loc], xa_state[loc],
                                          32, options.xor_add_inference);
                    break;
                case PruningLogic::IncDec:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] +=
                            inc_dec_check(prev_a, cur_a, prev_w[loc], cur_w[loc]);
                    break;
                case PruningLogic::ChangeNoChange:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] +=
                            change_no_change_check(prev_a, cur_a, prev_w[loc], cur_w[loc]);
                    break;
                case PruningLogic::Change:
                    for (std::uint32_t loc = 0; loc < word_count; ++loc)
                        conform_count[loc] += change_check(prev_a, cur_a, prev_w[loc], cur_w[loc]);
                    break;
            }
        }
        prev = &cur;

        // Best ground-truth location under (score desc, index asc).
        std::uint32_t best_count = 0;
        std::uint32_t best_loc = gt_locations.front();
        for (auto loc : gt_locations) {
            if (conform_count[loc] > best_count ||
                (conform_count[loc] == best_count && loc < best_loc)) {
                best_count = conform_count[loc];
                best_loc = loc;
            }
        }

        std::uint64_t strictly = 0;
        std::uint64_t ties_before = 0;
        std::vector<std::uint32_t> hist(total_checks + 1, 0);
        for (std::uint32_t loc = 0; loc < word_count; ++loc) {
            const std::uint32_t c = conform_count[loc];
            ++hist[c];
            if (c > best_count) {
                ++strictly;
            } else if (c == best_count && loc < best_loc) {
                ++ties_before;
            }
        }
        const std::uint64_t rank = 1 + strictly + ties_before;

        StatStep st;
        st.n = static_cast<std::uint32_t>(k + 1);
        st.rank = rank;
        st.strictly_better = strictly;
        st.perfect_score_count = hist[total_checks];
        st.recall.reserve(criteria.size());
        for (const auto& crit : criteria) {
            bool ok = false;
            if (auto* t = std::get_if<ThresholdCriterion>(&crit.variant)) {
                const double score =
                    total_checks == 0 ? 0.0
                                      : static_cast<double>(best_count) / total_checks;
                ok = score >= t->tau;
            } else if (auto* top = std::get_if<TopKCriterion>(&crit.variant)) {
                ok = rank <= top->k;
            } else {
                auto* sd = std::get_if<ScoreDropCriterion>(&crit.variant);
                // Inspect locations above the first score gap > delta;
                // without a gap everything gets inspected.
                std::uint64_t inspected = word_count;
                if (total_checks > 0) {
                    std::uint64_t cum = 0;
                    bool have_prev = false;
                    std::uint32_t prev_count = 0;
                    for (std::int64_t c = total_checks; c >= 0; --c) {
                        if (hist[static_cast<std::size_t>(c)] == 0) continue;
                        if (have_prev) {
                            const double gap =
                                static_cast<double>(prev_count - c) / total_checks;
                            if (gap > sd->delta) {
                                inspected = cum;
                                break;
                            }
                        }
                        cum += hist[static_cast<std::size_t>(c)];
                        prev_count = static_cast<std::uint32_t>(c);
                        have_prev = true;
                    }
                }
                ok = rank <= inspected;
            }
            st.recall.push_back(ok);
        }
        trace.steps.push_back(std::move(st));
    }
    if (options.record_final_candidates) {
        for (std::uint32_t loc = 0; loc < word_count; ++loc) {
            if (conform_count[loc] == total_checks)
                trace.final_perfect_candidates.push_back(loc);
        }
    }
    return trace;
}

}  // namespace locsim
