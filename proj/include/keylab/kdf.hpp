#pragma once

#include <string>
#include <vector>

#include "keylab/bytes.hpp"

namespace keylab {

enum class KdfAlgorithm {
    ReferenceKeyedHash,  // HMAC-SHA256, counter-expanded, truncated to output_length
    ToyMix,              // non-cryptographic mixer for exhaustive/desk-scale tests (docs/toy_mix.md)
};

std::string kdf_algorithm_name(KdfAlgorithm alg);
KdfAlgorithm kdf_algorithm_from_name(const std::string& name);  // throws ConfigError

struct KdfSpec {
    KdfAlgorithm algorithm = KdfAlgorithm::ReferenceKeyedHash;
    size_t output_length = 16;
};

// Second input of the derivation function: public one-time data. Serialization
// is length-prefixed everywhere so distinct contexts never serialize equal.
struct KdfContext {
    Nonce nonce;
    std::vector<std::string> bound_identities;  // empty for baseline schemes
    std::string label;

    Bytes serialize() const;
};

// Fully specified toy mixer; definition and golden vectors in docs/toy_mix.md.
Bytes toy_mix(const Bytes& key, const Bytes& data, size_t out_len);

// One-time key derivation: deterministic, output length == spec.output_length.
// Throws ConfigError on an empty long-term key or zero output length.
KeyBytes kdf_derive(const KeyBytes& long_term, const KdfContext& ctx, const KdfSpec& spec);

}  // namespace keylab
