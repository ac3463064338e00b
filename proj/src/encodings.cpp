#include "locsim/encodings.hpp"

#include <numeric>
#include <sstream>

#include "locsim/errors.hpp"

namespace locsim {

namespace {

constexpr std::uint64_t kWordMask = 0xffffffffULL;

WordValue wrap32(std::uint64_t v) { return static_cast<WordValue>(v & kWordMask); }

// Offset is signed; adding its two's-complement image gives wrapping add/sub.
WordValue add_offset(WordValue v, std::int64_t offset) {
    return wrap32(static_cast<std::uint64_t>(v) + static_cast<std::uint64_t>(offset));
}

WordValue sub_offset(WordValue v, std::int64_t offset) {
    return wrap32(static_cast<std::uint64_t>(v) - static_cast<std::uint64_t>(offset));
}

std::uint64_t mul_inverse(std::uint64_t a, std::uint64_t m) {
    // extended Euclid; gcd(a, m) == 1 is guaranteed by spec validation
    std::int64_t t = 0, new_t = 1;
    std::int64_t r = static_cast<std::int64_t>(m), new_r = static_cast<std::int64_t>(a % m);
    while (new_r != 0) {
        std::int64_t q = r / new_r;
        t -= q * new_t;
        std::swap(t, new_t);
        r -= q * new_r;
        std::swap(r, new_r);
    }
    if (t < 0) t += static_cast<std::int64_t>(m);
    return static_cast<std::uint64_t>(t);
}

WordValue draw_fresh_mask(Rng& rng, WordValue current) {
    WordValue next;
    do {
        next = rng.u32();
    } while (next == current);
    return next;
}

}  // namespace

std::string EncodingSpec::kind() const {
    struct Visitor {
        std::string operator()(const BaseEnc&) const { return "base"; }
        std::string operator()(const OffsetEnc&) const { return "offset"; }
        std::string operator()(const XorEnc&) const { return "xor"; }
        std::string operator()(const AddXorEnc&) const { return "add_xor"; }
        std::string operator()(const XorAddEnc&) const { return "xor_add"; }
        std::string operator()(const RncEnc&) const { return "rnc"; }
        std::string operator()(const DynXorEnc& d) const {
            return d.policy == DynXorEnc::Policy::UpdateOnWrite ? "dyn_xor_uow" : "dyn_xor_uor";
        }
    };
    return std::visit(Visitor{}, variant);
}

std::uint64_t EncodingSpec::max_value() const {
    if (auto* r = std::get_if<RncEnc>(&variant)) {
        unsigned __int128 product = 1;
        for (auto m : r->moduli) {
            product *= m;
            if (product > (unsigned __int128)~std::uint64_t{0}) return ~std::uint64_t{0};
        }
        return static_cast<std::uint64_t>(product - 1);
    }
    return kWordMask;
}

void EncodingSpec::validate() const {
    if (auto* r = std::get_if<RncEnc>(&variant)) {
        if (r->moduli.empty()) throw ConfigError("rnc: moduli must be non-empty");
        for (std::size_t i = 0; i < r->moduli.size(); ++i) {
            if (r->moduli[i] == 0) throw ConfigError("rnc: modulus must be positive");
            for (std::size_t j = i + 1; j < r->moduli.size(); ++j) {
                if (std::gcd(r->moduli[i], r->moduli[j]) != 1) {
                    std::ostringstream os;
                    os << "rnc: moduli " << r->moduli[i] << " and " << r->moduli[j]
                       << " are not coprime";
                    throw ConfigError(os.str());
                }
            }
        }
    }
    if (auto* d = std::get_if<DynXorEnc>(&variant)) {
        if (d->mean_events_per_update < 1) throw ConfigError("dyn_xor: N must be >= 1");
    }
}

EncoderState make_encoder_state(const EncodingSpec& spec, std::uint64_t seed) {
    EncoderState st;
    st.footprint = spec.footprint();
    if (auto* d = std::get_if<DynXorEnc>(&spec.variant)) {
        st.current_mask = d->initial_mask;
        st.rng = Rng(seed);
    }
    return st;
}

std::vector<WordValue> encode(const EncodingSpec& spec, const EncoderState& state,
                              std::uint64_t value) {
    struct Visitor {
        std::uint64_t a;
        const EncoderState& st;

        std::vector<WordValue> operator()(const BaseEnc&) const { return {wrap32(a)}; }
        std::vector<WordValue> operator()(const OffsetEnc& e) const {
            return {add_offset(wrap32(a), e.offset)};
        }
        std::vector<WordValue> operator()(const XorEnc& e) const { return {wrap32(a) ^ e.mask}; }
        std::vector<WordValue> operator()(const AddXorEnc& e) const {
            return {add_offset(wrap32(a), e.offset) ^ e.mask};
        }
        std::vector<WordValue> operator()(const XorAddEnc& e) const {
            return {add_offset(wrap32(a) ^ e.mask, e.offset)};
        }
        std::vector<WordValue> operator()(const RncEnc& e) const {
            unsigned __int128 product = 1;
            for (auto m : e.moduli) product *= m;
            if ((unsigned __int128)a >= product) {
                std::ostringstream os;
                os << "rnc: value " << a << " not representable by moduli product";
                throw DataError(os.str());
            }
            std::vector<WordValue> words;
            words.reserve(e.moduli.size());
            for (auto m : e.moduli) words.push_back(static_cast<WordValue>(a % m));
            return words;
        }
        std::vector<WordValue> operator()(const DynXorEnc&) const {
            return {wrap32(a) ^ st.current_mask};
        }
    };
    return std::visit(Visitor{value, state}, spec.variant);
}

std::uint64_t decode(const EncodingSpec& spec, const EncoderState& state,
                     const std::vector<WordValue>& words) {
    if (words.size() != spec.footprint())
        throw DataError("decode: word count does not match encoding footprint");

    struct Visitor {
        const std::vector<WordValue>& w;
        const EncoderState& st;

        std::uint64_t operator()(const BaseEnc&) const { return w[0]; }
        std::uint64_t operator()(const OffsetEnc& e) const { return sub_offset(w[0], e.offset); }
        std::uint64_t operator()(const XorEnc& e) const { return w[0] ^ e.mask; }
        std::uint64_t operator()(const AddXorEnc& e) const {
            return sub_offset(w[0] ^ e.mask, e.offset);
        }
        std::uint64_t operator()(const XorAddEnc& e) const {
            return sub_offset(w[0], e.offset) ^ e.mask;
        }
        std::uint64_t operator()(const RncEnc& e) const {
            // Garner's algorithm, one modulus at a time.
            std::uint64_t x = 0;
            std::uint64_t m_acc = 1;
            for (std::size_t k = 0; k < e.moduli.size(); ++k) {
                const std::uint64_t mk = e.moduli[k];
                if (w[k] >= mk) {
                    std::ostringstream os;
                    os << "rnc: residue " << w[k] << " out of range for modulus " << mk;
                    throw DataError(os.str());
                }
                if (k == 0) {
                    x = w[0];
                    m_acc = mk;
                    continue;
                }
                const std::uint64_t inv = mul_inverse(m_acc % mk, mk);
                std::uint64_t delta = (w[k] + mk - static_cast<std::uint32_t>(x % mk)) % mk;
                std::uint64_t t = static_cast<std::uint64_t>(
                    (unsigned __int128)delta * inv % mk);
                x += static_cast<std::uint64_t>((unsigned __int128)t * m_acc);
                m_acc = static_cast<std::uint64_t>((unsigned __int128)m_acc * mk);
            }
            return x;
        }
        std::uint64_t operator()(const DynXorEnc&) const { return w[0] ^ st.current_mask; }
    };
    return std::visit(Visitor{words, state}, spec.variant);
}

bool mask_update(const EncodingSpec& spec, EncoderState& state, AccessEvent event) {
    auto* d = std::get_if<DynXorEnc>(&spec.variant);
    if (d == nullptr) throw ConfigError("mask_update: encoding is not dynamic");

    const bool matching = (d->policy == DynXorEnc::Policy::UpdateOnWrite)
                              ? (event == AccessEvent::Write)
                              : (event == AccessEvent::Read);
    if (!matching) return false;

    bool update;
    if (d->deterministic_period) {
        update = (++state.event_counter % d->mean_events_per_update) == 0;
    } else {
        update = state.rng.one_in(d->mean_events_per_update);
    }
    if (update) state.current_mask = draw_fresh_mask(state.rng, state.current_mask);
    return update;
}

namespace {

std::string hex_string(WordValue v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

WordValue parse_hex_word(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("encoding: missing key ") + key);
    const auto& v = j.at(key);
    if (v.is_number_unsigned() || v.is_number_integer())
        return static_cast<WordValue>(v.get<std::uint64_t>() & kWordMask);
    const std::string s = v.get<std::string>();
    return static_cast<WordValue>(std::stoull(s, nullptr, 16) & kWordMask);
}

std::int64_t require_int(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("encoding: missing key ") + key);
    return j.at(key).get<std::int64_t>();
}

}  // namespace

nlohmann::json encoding_to_json(const EncodingSpec& spec) {
    nlohmann::json j;
    j["kind"] = spec.kind();
    struct Visitor {
        nlohmann::json& j;
        void operator()(const BaseEnc&) const {}
        void operator()(const OffsetEnc& e) const { j["O"] = e.offset; }
        void operator()(const XorEnc& e) const { j["M"] = hex_string(e.mask); }
        void operator()(const AddXorEnc& e) const {
            j["O"] = e.offset;
            j["M"] = hex_string(e.mask);
        }
        void operator()(const XorAddEnc& e) const {
            j["M"] = hex_string(e.mask);
            j["O"] = e.offset;
        }
        void operator()(const RncEnc& e) const { j["moduli"] = e.moduli; }
        void operator()(const DynXorEnc& e) const {
            j["N"] = e.mean_events_per_update;
            j["initial_mask"] = hex_string(e.initial_mask);
            if (e.deterministic_period) j["deterministic_period"] = true;
        }
    };
    std::visit(Visitor{j}, spec.variant);
    return j;
}

EncodingSpec encoding_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("encoding: expected object with \"kind\"");
    const std::string kind = j.at("kind").get<std::string>();
    EncodingSpec spec;
    if (kind == "base") {
        spec.variant = BaseEnc{};
    } else if (kind == "offset") {
        spec.variant = OffsetEnc{require_int(j, "O")};
    } else if (kind == "xor") {
        spec.variant = XorEnc{parse_hex_word(j, "M")};
    } else if (kind == "add_xor") {
        spec.variant = AddXorEnc{require_int(j, "O"), parse_hex_word(j, "M")};
    } else if (kind == "xor_add") {
        spec.variant = XorAddEnc{parse_hex_word(j, "M"), require_int(j, "O")};
    } else if (kind == "rnc") {
        if (!j.contains("moduli")) throw ConfigError("encoding: rnc requires \"moduli\"");
        spec.variant = RncEnc{j.at("moduli").get<std::vector<std::uint32_t>>()};
    } else if (kind == "dyn_xor_uow" || kind == "dyn_xor_uor") {
        DynXorEnc d;
        d.policy = (kind == "dyn_xor_uow") ? DynXorEnc::Policy::UpdateOnWrite
                                           : DynXorEnc::Policy::UpdateOnRead;
        d.mean_events_per_update = static_cast<std::uint32_t>(require_int(j, "N"));
        d.initial_mask = parse_hex_word(j, "initial_mask");
        d.deterministic_period = j.value("deterministic_period", false);
        spec.variant = d;
    } else {
        throw ConfigError("encoding: unknown kind \"" + kind + "\"");
    }
    spec.validate();
    return spec;
}

}  // namespace locsim
