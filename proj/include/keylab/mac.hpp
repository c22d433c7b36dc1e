#pragma once

#include "keylab/bytes.hpp"

namespace keylab {

using Tag = Bytes;

inline constexpr size_t kMacTagLength = 32;

// Message authentication for the fixed variants (A4F). HMAC-SHA256, full tag.
Tag mac_tag(const KeyBytes& key, const Bytes& message);

// Verification failure is a boolean, never an error. Constant-time compare.
bool mac_verify(const KeyBytes& key, const Bytes& message, const Tag& tag);

}  // namespace keylab
