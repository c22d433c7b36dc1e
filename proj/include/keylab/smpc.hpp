#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "keylab/netsim.hpp"

namespace keylab {
namespace smpc {

enum class GroupMode {
    AdditiveModN,       // residues in [0, n), addition mod n
    MultiplicativeModP, // residues in [1, p), multiplication mod prime p
    IntegerLeaky,       // plain integers; kept only to exhibit the leakage
};

std::string group_mode_name(GroupMode m);
GroupMode group_mode_from_name(const std::string& name);  // throws ConfigError

struct GroupSpec {
    GroupMode mode = GroupMode::AdditiveModN;
    uint64_t modulus = 0;  // unused in IntegerLeaky except as the key range bound

    void validate() const;  // throws ConfigError (non-prime multiplicative modulus etc.)
    bool element_ok(int64_t v) const;
};

// Desk-scale primality test; the multiplicative mode needs every value invertible.
bool is_prime_trial_division(uint64_t n);

int64_t g_add(const GroupSpec& spec, int64_t a, int64_t b);
int64_t g_sub(const GroupSpec& spec, int64_t a, int64_t b);
int64_t g_mul(const GroupSpec& spec, int64_t a, int64_t b);  // multiplicative mode
int64_t g_inv(const GroupSpec& spec, int64_t a);             // multiplicative mode
int64_t g_reduce(const GroupSpec& spec, int64_t v);          // canonical [0, n)

// Signed key assignment per party; every pairwise key must appear exactly
// twice with canceling signs for the masked sum to telescope.
struct MaskingPlan {
    // party -> list of (key name, +1/-1)
    std::map<std::string, std::vector<std::pair<std::string, int>>> assignments;

    bool telescopes() const;
    static MaskingPlan three_party_sum();  // A:(+AB,+AC) B:(-AB,+BC) C:(-AC,-BC)
};

// Refuses any second use of a pairwise key value.
class KeyUsageLedger {
public:
    void use(const std::string& name, int64_t value);  // throws KeyReuseError
private:
    std::set<std::string> used_;
};

struct Instance {
    GroupSpec spec;
    std::map<std::string, int64_t> inputs;  // "A","B","C" -> d values
    std::map<std::string, int64_t> keys;    // "AB","AC","BC"[,"AD","BD","CD"]

    // {"mode":"ADDITIVE_MOD_N","n":13,"inputs":[3,5,2],"keys":{"AB":7,"AC":11,"BC":4}}
    static Instance from_json_text(const std::string& text);
    nlohmann::ordered_json to_json() const;
};

struct Scheme1Result {
    std::map<std::string, int64_t> deltas;  // broadcast values per party
    int64_t sum = 0;                        // what every listener recovers
};
Scheme1Result scheme1_run(const Instance& inst, KeyUsageLedger& ledger);

struct Scheme2Result {
    int64_t delta_a = 0, delta_b = 0;  // broadcast
    int64_t private_delta_c = 0;       // withheld
    int64_t c_sum = 0;                 // only C can compute this
};
Scheme2Result scheme2_run(const Instance& inst, KeyUsageLedger& ledger);

// Every aggregate a transcript observer holding only (delta_a, delta_b) cannot
// rule out; exhaustive over admissible completions, desk-scale moduli only.
std::set<int64_t> scheme2_observer_candidates(const GroupSpec& spec, int64_t delta_a, int64_t delta_b);

struct Scheme3Result {
    std::map<std::string, int64_t> delta_stars;  // broadcast values
    int64_t d_sum = 0;                           // recovered by the fourth party
};
Scheme3Result scheme3_run(const Instance& inst, KeyUsageLedger& ledger);

struct MultiplicativeResult {
    std::map<std::string, int64_t> deltas;
    int64_t product = 0;
};
MultiplicativeResult multiplicative_run(const Instance& inst, KeyUsageLedger& ledger);

// What an eavesdropper extracts from one integer-mode broadcast: with keys in
// [0, n-1], delta > 2(n-1) proves the input is at least delta - 2(n-1).
int64_t leakage_bound(int64_t delta, uint64_t n);

// Last-broadcaster attack: the input value that forces the recovered sum to
// equal `target` given the already-observed deltas and the controller's keys.
int64_t atk_output_control(const GroupSpec& spec, int64_t target,
                           const std::vector<int64_t>& observed_deltas,
                           const std::vector<std::pair<int64_t, int>>& controller_keys);

struct TamperOutcome {
    int64_t honest_sum = 0;
    int64_t observed_sum = 0;  // what recipients of the tampered broadcast recover
    int64_t delta = 0;
    bool any_party_detected = false;  // no integrity protection: always false
    Transcript transcript;
    nlohmann::ordered_json evidence;
};

// Scheme 1 over the message fabric with a MODIFY adversary shifting one
// broadcast by delta; all recipients recover sum + delta without noticing.
TamperOutcome atk_broadcast_tamper(const Instance& inst, int64_t delta, uint64_t seed);

}  // namespace smpc
}  // namespace keylab
