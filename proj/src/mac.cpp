#include "keylab/mac.hpp"

#include "keylab/sha256.hpp"

namespace keylab {

Tag mac_tag(const KeyBytes& key, const Bytes& message) { return hmac_sha256(key, message); }

bool mac_verify(const KeyBytes& key, const Bytes& message, const Tag& tag) {
    return ct_equal(mac_tag(key, message), tag);
}

}  // namespace keylab
