#include "keylab/kdf.hpp"

#include "keylab/errors.hpp"
#include "keylab/sha256.hpp"

namespace keylab {

std::string kdf_algorithm_name(KdfAlgorithm alg) {
    switch (alg) {
        case KdfAlgorithm::ReferenceKeyedHash: return "REFERENCE_KEYED_HASH";
        case KdfAlgorithm::ToyMix: return "TOY_MIX";
    }
    return "?";
}

KdfAlgorithm kdf_algorithm_from_name(const std::string& name) {
    if (name == "REFERENCE_KEYED_HASH") return KdfAlgorithm::ReferenceKeyedHash;
    if (name == "TOY_MIX") return KdfAlgorithm::ToyMix;
    throw ConfigError("unknown KDF algorithm: " + name);
}

Bytes KdfContext::serialize() const {
    Bytes out;
    append_u32be(out, static_cast<uint32_t>(nonce.size()));
    out.insert(out.end(), nonce.begin(), nonce.end());
    append_u32be(out, static_cast<uint32_t>(bound_identities.size()));
    for (const auto& id : bound_identities) {
        append_u32be(out, static_cast<uint32_t>(id.size()));
        out.insert(out.end(), id.begin(), id.end());
    }
    append_u32be(out, static_cast<uint32_t>(label.size()));
    out.insert(out.end(), label.begin(), label.end());
    return out;
}

namespace {

constexpr uint64_t kInit = 0x9E3779B97F4A7C15ULL;
constexpr uint64_t kPrime = 0x00000100000001B3ULL;
constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
constexpr uint64_t kMix1 = 0xBF58476D1CE4E5B9ULL;
constexpr uint64_t kMix2 = 0x94D049BB133111EBULL;

inline uint64_t rotl64(uint64_t x, int r) { return (x << r) | (x >> (64 - r)); }

inline uint64_t absorb(uint64_t s, const uint8_t* data, size_t len) {
    for (size_t i = 0; i < len; ++i) s = rotl64((s ^ data[i]) * kPrime, 17);
    return s;
}

inline uint64_t absorb_len(uint64_t s, uint64_t n) {
    uint8_t be[8];
    for (int i = 0; i < 8; ++i) be[i] = static_cast<uint8_t>(n >> (56 - 8 * i));
    return absorb(s, be, 8);
}

}  // namespace

Bytes toy_mix(const Bytes& key, const Bytes& data, size_t out_len) {
    uint64_t s = kInit;
    s = absorb_len(s, key.size());
    s = absorb(s, key.data(), key.size());
    s = absorb_len(s, data.size());
    s = absorb(s, data.data(), data.size());

    Bytes out;
    out.reserve(out_len);
    for (size_t i = 0; i < out_len; ++i) {
        s += kGamma;
        uint64_t t = s;
        t ^= t >> 30;
        t *= kMix1;
        t ^= t >> 27;
        t *= kMix2;
        t ^= t >> 31;
        out.push_back(static_cast<uint8_t>(t & 0xff));
    }
    return out;
}

KeyBytes kdf_derive(const KeyBytes& long_term, const KdfContext& ctx, const KdfSpec& spec) {
    if (long_term.empty()) throw ConfigError("kdf_derive: empty long-term key");
    if (spec.output_length == 0) throw ConfigError("kdf_derive: zero output length");

    Bytes info = ctx.serialize();
    if (spec.algorithm == KdfAlgorithm::ToyMix) return toy_mix(long_term, info, spec.output_length);

    Bytes out;
    out.reserve(spec.output_length);
    uint32_t block = 0;
    while (out.size() < spec.output_length) {
        Bytes msg = info;
        append_u32be(msg, block++);
        Bytes t = hmac_sha256(long_term, msg);
        size_t take = std::min(t.size(), spec.output_length - out.size());
        out.insert(out.end(), t.begin(), t.begin() + static_cast<long>(take));
    }
    return out;
}

}  // namespace keylab
