#include "keylab/rng.hpp"

#include <stdexcept>

#include "keylab/sha256.hpp"

namespace keylab {

namespace {
Bytes seed_key(uint64_t seed) {
    Bytes material;
    append_u64be(material, seed);
    const char* tag = "keylab.rng.v1";
    material.insert(material.end(), tag, tag + 13);
    return Sha256::digest(material);
}
}  // namespace

SeededRng::SeededRng(uint64_t seed) : key_(seed_key(seed)) {}

SeededRng::SeededRng(Bytes key) : key_(std::move(key)) {}

Bytes SeededRng::expand(const Bytes& prefix, size_t len) const {
    Bytes out;
    out.reserve(len);
    uint32_t block = 0;
    while (out.size() < len) {
        Bytes msg = prefix;
        append_u32be(msg, block++);
        Bytes t = hmac_sha256(key_, msg);
        size_t take = std::min(t.size(), len - out.size());
        out.insert(out.end(), t.begin(), t.begin() + static_cast<long>(take));
    }
    return out;
}

Bytes SeededRng::draw(size_t len) {
    Bytes prefix = {'c', 't', 'r', ':'};
    append_u64be(prefix, counter_++);
    return expand(prefix, len);
}

Bytes SeededRng::draw_labeled(const std::string& label, size_t len) {
    Bytes prefix = {'l', 'b', 'l', ':'};
    prefix.insert(prefix.end(), label.begin(), label.end());
    return expand(prefix, len);
}

uint64_t SeededRng::draw_u64() {
    Bytes b = draw(8);
    uint64_t v = 0;
    for (uint8_t byte : b) v = (v << 8) | byte;
    return v;
}

uint64_t SeededRng::draw_residue(uint64_t n) {
    if (n == 0) throw std::invalid_argument("draw_residue: zero modulus");
    // Reject draws from the final partial bucket so every residue is equally likely.
    uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
    for (;;) {
        uint64_t v = draw_u64();
        if (v <= limit) return v % n;
    }
}

SeededRng SeededRng::fork(const std::string& label) const {
    Bytes msg = {'f', 'o', 'r', 'k', ':'};
    msg.insert(msg.end(), label.begin(), label.end());
    return SeededRng(hmac_sha256(key_, msg));
}

bool NonceLedger::record(const std::string& party, const Bytes& nonce) {
    return used_[party].insert(nonce).second;
}

bool NonceLedger::contains(const std::string& party, const Bytes& nonce) const {
    auto it = used_.find(party);
    return it != used_.end() && it->second.count(nonce) > 0;
}

size_t NonceLedger::count(const std::string& party) const {
    auto it = used_.find(party);
    return it == used_.end() ? 0 : it->second.size();
}

}  // namespace keylab
