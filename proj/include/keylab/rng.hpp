#pragma once

#include <map>
#include <set>
#include <string>

#include "keylab/bytes.hpp"

namespace keylab {

// Deterministic byte source. One stream per scenario; every draw is either
// sequential (draw) or domain-separated by a label (draw_labeled), so a
// scenario replayed from the same seed reproduces every value bit-exactly and
// labeled draws do not depend on call order.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed);

    Bytes draw(size_t len);
    Bytes draw_labeled(const std::string& label, size_t len);
    uint64_t draw_u64();
    // Uniform residue in [0, n), rejection-sampled. n must be nonzero.
    uint64_t draw_residue(uint64_t n);

    // Independent substream, e.g. the adversary's private coins.
    SeededRng fork(const std::string& label) const;

private:
    explicit SeededRng(Bytes key);
    Bytes expand(const Bytes& prefix, size_t len) const;

    Bytes key_;
    uint64_t counter_ = 0;
};

// Record of every nonce a party has used. Honest parties refuse to take part
// in a second session under a nonce they already consumed.
class NonceLedger {
public:
    // Returns false (and does not record) if the party already used the nonce.
    bool record(const std::string& party, const Bytes& nonce);
    bool contains(const std::string& party, const Bytes& nonce) const;
    size_t count(const std::string& party) const;

private:
    std::map<std::string, std::set<Bytes>> used_;
};

}  // namespace keylab
