#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace keylab {

using Bytes = std::vector<uint8_t>;

// All keys, masks and masked payloads are fixed-length byte strings of the
// session's key length; nonces default to the same length.
using KeyBytes = Bytes;
using Nonce = Bytes;

std::string to_hex(const Bytes& data);
Bytes from_hex(const std::string& hex);  // throws std::invalid_argument

// Constant-time in the content; a length mismatch returns false immediately
// (lengths are public in every scheme here).
bool ct_equal(const Bytes& a, const Bytes& b);

// Bitwise XOR of two equal-length strings. Throws std::invalid_argument on a
// length mismatch: masking is only defined for equal lengths.
Bytes xor_combine(const Bytes& a, const Bytes& b);

bool is_all_zero(const Bytes& a);

void append_u32be(Bytes& out, uint32_t v);
void append_u64be(Bytes& out, uint64_t v);
Bytes concat(const Bytes& a, const Bytes& b);

}  // namespace keylab
