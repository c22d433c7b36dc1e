#pragma once

#include <cstddef>
#include <cstdint>

#include "keylab/bytes.hpp"

namespace keylab {

// Portable SHA-256 (FIPS 180-4). Small streaming interface so HMAC can reuse
// a running state for the inner/outer hashes.
class Sha256 {
public:
    static constexpr size_t kDigestSize = 32;
    static constexpr size_t kBlockSize = 64;

    Sha256() { reset(); }

    void reset();
    void update(const uint8_t* data, size_t len);
    void update(const Bytes& data) { update(data.data(), data.size()); }
    Bytes finish();

    static Bytes digest(const Bytes& data);

private:
    void process_block(const uint8_t* block);

    uint32_t state_[8];
    uint8_t buffer_[kBlockSize];
    size_t buffer_len_ = 0;
    uint64_t total_bytes_ = 0;
};

Bytes hmac_sha256(const Bytes& key, const Bytes& message);

}  // namespace keylab
