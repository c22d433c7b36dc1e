#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "keylab/bytes.hpp"

namespace keylab {

using PartyId = std::string;

enum class MsgKind { Setup, Protocol, Broadcast };

std::string msg_kind_name(MsgKind kind);
MsgKind msg_kind_from_name(const std::string& name);  // throws ConfigError

struct Envelope {
    uint64_t seq = 0;
    PartyId true_sender;
    PartyId claimed_sender;  // == true_sender for honest traffic
    PartyId receiver;
    MsgKind kind = MsgKind::Protocol;
    Bytes payload;
    bool injected = false;
};

// One decision per in-flight envelope.
struct AdversaryAction {
    enum class Kind { Deliver, Drop, Modify, Redirect };

    Kind kind = Kind::Deliver;
    Bytes new_payload;
    PartyId new_receiver;

    static AdversaryAction deliver() { return {}; }
    static AdversaryAction drop() { return {Kind::Drop, {}, {}}; }
    static AdversaryAction modify(Bytes payload) { return {Kind::Modify, std::move(payload), {}}; }
    static AdversaryAction redirect(PartyId receiver) { return {Kind::Redirect, {}, std::move(receiver)}; }
};

// The adversary sees the full envelope (an eavesdrop copy) and must decide
// what the channel does with it. Injection happens through Fabric::inject.
class AdversaryStrategy {
public:
    virtual ~AdversaryStrategy() = default;
    virtual AdversaryAction on_envelope(const Envelope& env) {
        (void)env;
        return AdversaryAction::deliver();
    }
};

struct TranscriptEvent {
    Envelope env;
    std::string action;     // DELIVER | DROP | MODIFY | REDIRECT | INJECT
    Bytes final_payload;    // payload as resolved (post-MODIFY); sent payload when dropped
    PartyId final_receiver; // differs from env.receiver only for REDIRECT
    bool delivered = false;
};

// Complete record of one scenario: every envelope with the action it received,
// plus the key material needed to recompute every masked payload offline.
struct Transcript {
    std::string scheme;
    uint64_t seed = 0;
    size_t key_bytes = 16;
    std::string kdf = "REFERENCE_KEYED_HASH";
    std::string attack;  // empty for honest runs

    std::vector<TranscriptEvent> events;

    std::map<std::string, std::string> long_term_keys;   // "A|C" -> hex
    std::map<std::string, std::string> session_values;   // "session_key:0" -> hex
    std::map<std::string, std::string> announcements;    // session -> hex of announced SETUP payload
    std::map<std::string, std::string> adversary_values; // masks, forged keys, extractions
    nlohmann::ordered_json evidence;                     // attack evidence claims
    std::vector<std::string> warnings;

    std::string to_jsonl() const;
    static Transcript from_jsonl(const std::string& text);  // throws ConfigError
};

// Deterministic FIFO message fabric. Single logical channel, no latency model;
// the adversary acts on every envelope before delivery resolves.
class Fabric {
public:
    static constexpr size_t kEventLimit = 10000;  // livelock guard

    void register_party(const PartyId& id, std::function<void(const Envelope&)> handler);
    bool is_registered(const PartyId& id) const;

    void set_adversary(AdversaryStrategy* strategy, PartyId adversary_id = "E");

    // Honest send: claimed sender is the true sender. Throws ConfigError for
    // an unknown receiver.
    void send(const PartyId& from, const PartyId& to, MsgKind kind, Bytes payload);
    // One envelope per registered party other than the sender.
    void broadcast(const PartyId& from, Bytes payload);
    // Adversary injection; the claimed sender is whatever the adversary says.
    void inject(const PartyId& claimed_from, const PartyId& to, MsgKind kind, Bytes payload);

    // Drains the queue; party handlers may send more. Callable repeatedly for
    // staged scenarios. Throws ScenarioError past the event limit.
    void run_until_quiescent();

    Transcript& transcript() { return transcript_; }
    const Transcript& transcript() const { return transcript_; }

    size_t sent_count() const { return sent_; }
    size_t injected_count() const { return injected_; }
    size_t delivered_count() const { return delivered_; }
    size_t dropped_count() const { return dropped_; }

private:
    void enqueue(Envelope env);

    std::deque<Envelope> queue_;
    std::map<PartyId, std::function<void(const Envelope&)>> parties_;
    AdversaryStrategy* adversary_ = nullptr;
    PartyId adversary_id_ = "E";
    Transcript transcript_;
    uint64_t next_seq_ = 1;
    size_t processed_ = 0;
    size_t sent_ = 0, injected_ = 0, delivered_ = 0, dropped_ = 0;
};

}  // namespace keylab
