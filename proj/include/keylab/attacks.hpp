#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "keylab/bytes.hpp"
#include "keylab/netsim.hpp"
#include "keylab/protocols.hpp"

namespace keylab {

enum class AttackId { A1IdConf, A1Mitm, A2Tamper, A3IdConf, A4Mask, A4Nonce };

std::vector<AttackId> all_attacks();
std::string attack_name(AttackId id);
std::optional<AttackId> attack_from_name(const std::string& name);

Scheme attack_baseline_target(AttackId id);
// The fixed variant the attack is replayed against, where one exists.
std::optional<Scheme> attack_fixed_target(AttackId id);
// Long-term pairs the adversary legitimately owns in this attack's staging.
std::vector<std::string> attack_adversary_pairs(AttackId id);

struct AttackVerdict {
    bool success = false;
    nlohmann::ordered_json evidence;
};

struct AttackOutcome {
    AttackVerdict verdict;
    Transcript transcript;
    std::map<PartyId, PartyState> parties;
    // Everything the adversary extracted or chose, for the no-omniscience checks.
    std::map<std::string, std::string> adversary_knowledge;  // name -> hex
};

struct AttackOptions {
    std::optional<Bytes> forced_mask;  // zero-mask boundary case
    size_t key_bytes = 16;
    KdfSpec kdf;
};

// Deterministic for a given (id, target, seed). The target must be the
// attack's baseline scheme or its fixed variant; anything else is a
// ConfigError.
AttackOutcome run_attack(AttackId id, Scheme target, uint64_t seed, const AttackOptions& opts = {});

// Report block per the CLI contract:
// {"attack":"ATK_A4_NONCE","target":"A4","seeds":100,"successes":100,"evidence_sample":{...}}
// When first_transcript is given it receives the seed-0 transcript.
nlohmann::ordered_json attack_report_block(AttackId id, Scheme target, uint64_t seeds,
                                           const AttackOptions& opts = {},
                                           Transcript* first_transcript = nullptr);

}  // namespace keylab
