#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "keylab/bytes.hpp"
#include "keylab/kdf.hpp"
#include "keylab/netsim.hpp"
#include "keylab/rng.hpp"

namespace keylab {

enum class Scheme { A1, A1F, A2, A3_3, A3_Tree, A4, A4F, B1, B2V1, B2V2 };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);  // throws ConfigError

// A1F binds the session's identities into the KDF context; A4F additionally
// authenticates the two masked messages.
bool scheme_binds_identities(Scheme s);
bool scheme_macs_messages(Scheme s);

enum class Role { Initiator, Responder, Center, GroupMember, TreeRoot };
enum class Status { Running, Accepted, Rejected, Starved };
enum class RejectCause {
    None,
    MissingKey,
    LengthMismatch,
    ConsistencyMismatch,
    AuthFailure,
    NonceReuse,
    BadSetup,
};

std::string status_name(Status s);
std::string reject_cause_name(RejectCause c);

// A protocol role's accumulated beliefs at the end of a run.
struct PartyState {
    PartyId id;
    Role role = Role::Responder;
    std::set<PartyId> believed_peers;
    Nonce nonce;
    std::map<PartyId, KeyBytes> long_term_keys;
    std::map<PartyId, KeyBytes> one_time_keys;
    std::optional<KeyBytes> accepted_key;
    Status status = Status::Running;
    RejectCause cause = RejectCause::None;
};

struct SchemeConfig {
    Scheme scheme = Scheme::A1;
    std::vector<PartyId> parties;  // participants; role positions are scheme-defined
    PartyId center;                // A1/A1F/A2/B2V1 only
    size_t key_bytes = 16;
    KdfSpec kdf;

    // Test hook: pin the center's chosen session key instead of drawing it.
    std::optional<KeyBytes> forced_session_key;

    void validate() const;  // throws ConfigError
    bool has_center() const { return !center.empty(); }
    std::vector<PartyId> all_ids() const;

    static SchemeConfig defaults_for(Scheme s, size_t n = 0);
    // Scenario file: {"scheme":"A1","parties":["A","B"],"center":"C","seed":42,
    //                 "key_bytes":16,"kdf":"TOY_MIX"}
    static SchemeConfig from_json_text(const std::string& text, std::optional<uint64_t>& seed_out);
};

// Plaintext session agreement carried by SETUP messages. The adversary may
// rewrite any field; that is the lever for the identity-confusion and
// nonce-manipulation attacks.
struct SetupInfo {
    int session = 0;
    std::vector<PartyId> participants;
    std::vector<PartyId> initiators;  // A3/A4/tree families
    PartyId center;                   // A1 family
    Nonce nonce;

    Bytes encode() const;
    static std::optional<SetupInfo> decode(const Bytes& payload);
    // All session principals, sorted; the identity list bound by fixed variants.
    std::vector<PartyId> principal_ids() const;
};

std::string pair_key(const PartyId& a, const PartyId& b);  // canonical "min|max"
KeyBytes draw_long_term_key(SeededRng& rng, const PartyId& a, const PartyId& b, size_t len);

// Draws one long-term key per scheme-required pair and records it (hex) in the
// transcript meta.
std::map<std::string, KeyBytes> provision_long_term_keys(const SchemeConfig& cfg, SeededRng& rng,
                                                         Transcript& transcript);

// One protocol session wired onto a fabric. Attack scenarios may register a
// subset of parties and skip start() entirely, injecting the announcement
// themselves.
class Session {
public:
    Session(Fabric& fabric, SeededRng& rng, NonceLedger& ledger, const SchemeConfig& cfg,
            int session_index, const std::map<std::string, KeyBytes>& long_term_keys);
    ~Session();

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    void register_parties();
    void register_parties(const std::vector<PartyId>& subset);
    void start();  // announcer kicks the session off

    // Terminal states; any still-running machine is reported STARVED.
    std::map<PartyId, PartyState> finalize() const;

private:
    struct Impl;
    Impl* impl_;
};

struct ScenarioResult {
    std::map<PartyId, PartyState> parties;
    Transcript transcript;
};

// Honest one-shot run: provision, announce, drain the fabric, finalize.
ScenarioResult run_scenario(const SchemeConfig& cfg, uint64_t seed,
                            AdversaryStrategy* adversary = nullptr);

}  // namespace keylab
