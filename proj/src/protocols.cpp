#include "keylab/protocols.hpp"

#include <algorithm>
#include <memory>

#include <json.hpp>

#include "keylab/errors.hpp"
#include "keylab/mac.hpp"

namespace keylab {

using nlohmann::ordered_json;

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::A1: return "A1";
        case Scheme::A1F: return "A1F";
        case Scheme::A2: return "A2";
        case Scheme::A3_3: return "A3_3";
        case Scheme::A3_Tree: return "A3_TREE";
        case Scheme::A4: return "A4";
        case Scheme::A4F: return "A4F";
        case Scheme::B1: return "B1";
        case Scheme::B2V1: return "B2V1";
        case Scheme::B2V2: return "B2V2";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    static const std::map<std::string, Scheme> table = {
        {"A1", Scheme::A1},       {"A1F", Scheme::A1F},   {"A2", Scheme::A2},
        {"A3_3", Scheme::A3_3},   {"A3_TREE", Scheme::A3_Tree}, {"A4", Scheme::A4},
        {"A4F", Scheme::A4F},     {"B1", Scheme::B1},     {"B2V1", Scheme::B2V1},
        {"B2V2", Scheme::B2V2},
    };
    auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown scheme: " + name);
    return it->second;
}

bool scheme_binds_identities(Scheme s) { return s == Scheme::A1F || s == Scheme::A4F; }
bool scheme_macs_messages(Scheme s) { return s == Scheme::A4F; }

std::string status_name(Status s) {
    switch (s) {
        case Status::Running: return "RUNNING";
        case Status::Accepted: return "ACCEPTED";
        case Status::Rejected: return "REJECTED";
        case Status::Starved: return "STARVED";
    }
    return "?";
}

std::string reject_cause_name(RejectCause c) {
    switch (c) {
        case RejectCause::None: return "NONE";
        case RejectCause::MissingKey: return "MISSING_KEY";
        case RejectCause::LengthMismatch: return "LENGTH_MISMATCH";
        case RejectCause::ConsistencyMismatch: return "CONSISTENCY_MISMATCH";
        case RejectCause::AuthFailure: return "AUTH_FAILURE";
        case RejectCause::NonceReuse: return "NONCE_REUSE";
        case RejectCause::BadSetup: return "BAD_SETUP";
    }
    return "?";
}

void SchemeConfig::validate() const {
    if (key_bytes == 0) throw ConfigError("key_bytes must be positive");
    if (parties.empty()) throw ConfigError("no parties configured");
    std::set<PartyId> seen;
    for (const auto& p : parties) {
        if (p.empty()) throw ConfigError("empty party id");
        if (!seen.insert(p).second) throw ConfigError("duplicate party id: " + p);
    }
    if (has_center() && seen.count(center)) throw ConfigError("center listed among parties");

    switch (scheme) {
        case Scheme::A1:
        case Scheme::A1F:
            if (!has_center() || parties.size() != 2)
                throw ConfigError(scheme_name(scheme) + " needs exactly two parties and a center");
            break;
        case Scheme::A2:
            if (!has_center() || parties.size() != 1)
                throw ConfigError("A2 needs exactly one party and a center");
            break;
        case Scheme::A3_3:
        case Scheme::B1:
        case Scheme::A4:
        case Scheme::A4F:
            if (has_center() || parties.size() != 3)
                throw ConfigError(scheme_name(scheme) + " needs exactly three parties, no center");
            break;
        case Scheme::A3_Tree:
        case Scheme::B2V2:
            if (has_center() || parties.size() < 3)
                throw ConfigError(scheme_name(scheme) + " needs n >= 3 parties, no center");
            break;
        case Scheme::B2V1:
            if (!has_center() || parties.size() < 2)
                throw ConfigError("B2V1 needs a distributor (center) and at least two members");
            break;
    }
}

std::vector<PartyId> SchemeConfig::all_ids() const {
    std::vector<PartyId> ids = parties;
    if (has_center()) ids.push_back(center);
    return ids;
}

SchemeConfig SchemeConfig::defaults_for(Scheme s, size_t n) {
    SchemeConfig cfg;
    cfg.scheme = s;
    auto letters = [](size_t count) {
        std::vector<PartyId> out;
        for (size_t i = 0; i < count; ++i) out.push_back(std::string(1, static_cast<char>('A' + i)));
        return out;
    };
    switch (s) {
        case Scheme::A1:
        case Scheme::A1F:
            cfg.parties = {"A", "B"};
            cfg.center = "C";
            break;
        case Scheme::A2:
            cfg.parties = {"A"};
            cfg.center = "S";
            break;
        case Scheme::A3_3:
        case Scheme::B1:
        case Scheme::A4:
        case Scheme::A4F:
            cfg.parties = {"A", "B", "C"};
            break;
        case Scheme::A3_Tree:
        case Scheme::B2V2:
            if (n == 0) n = 7;
            if (n > 26) throw ConfigError("default party naming supports up to 26 parties");
            cfg.parties = letters(n);
            break;
        case Scheme::B2V1:
            if (n == 0) n = 4;
            if (n < 3 || n > 26) throw ConfigError("B2V1 default needs 3 <= n <= 26");
            cfg.parties = letters(n - 1);
            cfg.center = "S";
            break;
    }
    cfg.validate();
    return cfg;
}

SchemeConfig SchemeConfig::from_json_text(const std::string& text, std::optional<uint64_t>& seed_out) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario parse error: ") + e.what());
    }
    SchemeConfig cfg;
    try {
        cfg.scheme = scheme_from_name(j.at("scheme").get<std::string>());
        cfg.parties = j.at("parties").get<std::vector<PartyId>>();
        if (j.contains("center")) cfg.center = j["center"].get<std::string>();
        if (j.contains("key_bytes")) cfg.key_bytes = j["key_bytes"].get<size_t>();
        if (j.contains("kdf")) cfg.kdf.algorithm = kdf_algorithm_from_name(j["kdf"].get<std::string>());
        seed_out.reset();
        if (j.contains("seed")) seed_out = j["seed"].get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario field error: ") + e.what());
    }
    cfg.kdf.output_length = cfg.key_bytes;
    cfg.validate();
    return cfg;
}

Bytes SetupInfo::encode() const {
    ordered_json j;
    j["session"] = session;
    j["participants"] = participants;
    j["initiators"] = initiators;
    j["center"] = center;
    j["nonce"] = to_hex(nonce);
    std::string s = j.dump();
    return Bytes(s.begin(), s.end());
}

std::optional<SetupInfo> SetupInfo::decode(const Bytes& payload) {
    try {
        auto j = ordered_json::parse(std::string(payload.begin(), payload.end()));
        SetupInfo info;
        info.session = j.at("session").get<int>();
        info.participants = j.at("participants").get<std::vector<PartyId>>();
        info.initiators = j.at("initiators").get<std::vector<PartyId>>();
        info.center = j.at("center").get<std::string>();
        info.nonce = from_hex(j.at("nonce").get<std::string>());
        return info;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::vector<PartyId> SetupInfo::principal_ids() const {
    std::set<PartyId> ids(participants.begin(), participants.end());
    if (!center.empty()) ids.insert(center);
    return std::vector<PartyId>(ids.begin(), ids.end());
}

std::string pair_key(const PartyId& a, const PartyId& b) {
    return a < b ? a + "|" + b : b + "|" + a;
}

KeyBytes draw_long_term_key(SeededRng& rng, const PartyId& a, const PartyId& b, size_t len) {
    return rng.draw_labeled("ltk:" + pair_key(a, b), len);
}

std::map<std::string, KeyBytes> provision_long_term_keys(const SchemeConfig& cfg, SeededRng& rng,
                                                         Transcript& transcript) {
    std::vector<std::pair<PartyId, PartyId>> pairs;
    switch (cfg.scheme) {
        case Scheme::A1:
        case Scheme::A1F:
        case Scheme::A2:
        case Scheme::B2V1:
            for (const auto& p : cfg.parties) pairs.emplace_back(p, cfg.center);
            break;
        case Scheme::A3_3:
        case Scheme::B1:
        case Scheme::A4:
        case Scheme::A4F:
            for (size_t i = 0; i < cfg.parties.size(); ++i)
                for (size_t j = i + 1; j < cfg.parties.size(); ++j)
                    pairs.emplace_back(cfg.parties[i], cfg.parties[j]);
            break;
        case Scheme::A3_Tree:
        case Scheme::B2V2:
            for (size_t j = 1; j < cfg.parties.size(); ++j)
                pairs.emplace_back(cfg.parties[0], cfg.parties[j]);
            break;
    }

    std::map<std::string, KeyBytes> out;
    for (const auto& [a, b] : pairs) {
        KeyBytes key = draw_long_term_key(rng, a, b, cfg.key_bytes);
        out[pair_key(a, b)] = key;
        transcript.long_term_keys[pair_key(a, b)] = to_hex(key);
    }
    return out;
}

namespace {

struct Services {
    Fabric& fabric;
    SeededRng& rng;
    NonceLedger& ledger;
    SchemeConfig cfg;
    int session;

    std::string label(const std::string& what) const { return what + ":" + std::to_string(session); }
    KdfContext otk_context(const SetupInfo& view) const {
        KdfContext ctx;
        ctx.nonce = view.nonce;
        if (scheme_binds_identities(cfg.scheme)) ctx.bound_identities = view.principal_ids();
        ctx.label = "otk";
        return ctx;
    }
    KdfContext group_context(const SetupInfo& view) const {
        KdfContext ctx;
        ctx.nonce = view.nonce;
        if (scheme_binds_identities(cfg.scheme)) ctx.bound_identities = view.principal_ids();
        ctx.label = "group";
        return ctx;
    }
    Bytes a4f_mac_message(const Bytes& cval, const SetupInfo& view) const {
        KdfContext ctx;
        ctx.nonce = view.nonce;
        ctx.bound_identities = view.principal_ids();
        ctx.label = "a4f-mac";
        return concat(cval, ctx.serialize());
    }
    void record_announcement(const SetupInfo& info) const {
        fabric.transcript().announcements[std::to_string(session)] = to_hex(info.encode());
    }
};

class Machine {
public:
    Machine(Services* sv, PartyId id, std::map<PartyId, KeyBytes> ltks) : sv_(sv) {
        state_.id = std::move(id);
        state_.long_term_keys = std::move(ltks);
    }
    virtual ~Machine() = default;

    virtual void start() {}
    virtual void on_deliver(const Envelope& env) = 0;

    const PartyState& state() const { return state_; }
    PartyState& state() { return state_; }

protected:
    void accept(KeyBytes key) {
        state_.accepted_key = std::move(key);
        state_.status = Status::Accepted;
    }
    void reject(RejectCause cause) {
        state_.accepted_key.reset();
        state_.status = Status::Rejected;
        state_.cause = cause;
    }
    bool running() const { return state_.status == Status::Running; }
    const KeyBytes* ltk(const PartyId& other) const {
        auto it = state_.long_term_keys.find(other);
        return it == state_.long_term_keys.end() ? nullptr : &it->second;
    }
    // Record nonce use; honest parties refuse to reuse a value.
    bool take_nonce(const Nonce& nonce) {
        if (!sv_->ledger.record(state_.id, nonce)) {
            reject(RejectCause::NonceReuse);
            return false;
        }
        state_.nonce = nonce;
        return true;
    }

    Services* sv_;
    PartyState state_;
};

// --- A1 family -------------------------------------------------------------
// The center picks the session key and distributes it to each participant
// masked with that participant's derived one-time key. Covers A1, A1F, A2 and
// the star-shaped B2V1 group distribution.

class CenterMachine : public Machine {
public:
    using Machine::Machine;

    void start() override {
        const auto& cfg = sv_->cfg;
        state_.role = Role::Center;
        for (const auto& p : cfg.parties) {
            if (!ltk(p)) {
                reject(RejectCause::MissingKey);
                return;
            }
        }

        Nonce nonce = sv_->rng.draw_labeled(sv_->label("nonce"), cfg.key_bytes);
        if (!take_nonce(nonce)) return;
        state_.believed_peers.insert(cfg.parties.begin(), cfg.parties.end());

        SetupInfo info;
        info.session = sv_->session;
        info.participants = cfg.parties;
        info.center = state_.id;
        info.nonce = nonce;
        sv_->record_announcement(info);

        KeyBytes session_key = cfg.forced_session_key
                                   ? *cfg.forced_session_key
                                   : sv_->rng.draw_labeled(sv_->label("session_key"), cfg.key_bytes);
        sv_->fabric.transcript().session_values[sv_->label("session_key")] = to_hex(session_key);

        bool interleave = cfg.scheme == Scheme::B2V1;  // one sub-session per member
        if (!interleave)
            for (const auto& p : cfg.parties) sv_->fabric.send(state_.id, p, MsgKind::Setup, info.encode());

        for (const auto& p : cfg.parties) {
            if (interleave) sv_->fabric.send(state_.id, p, MsgKind::Setup, info.encode());
            KeyBytes otk = kdf_derive(*ltk(p), sv_->otk_context(info), cfg.kdf);
            state_.one_time_keys[p] = otk;
            Bytes masked = xor_combine(session_key, otk);
            if (is_all_zero(masked))
                sv_->fabric.transcript().warnings.push_back(
                    "degenerate all-zero masked value, session " + std::to_string(sv_->session) +
                    ", receiver " + p);
            sv_->fabric.send(state_.id, p, MsgKind::Protocol, std::move(masked));
        }
        accept(std::move(session_key));
    }

    void on_deliver(const Envelope&) override {}
};

class ParticipantMachine : public Machine {
public:
    using Machine::Machine;

    void on_deliver(const Envelope& env) override {
        if (!running()) return;
        if (env.kind == MsgKind::Setup) {
            handle_setup(env);
        } else {
            handle_masked(env);
        }
    }

private:
    void handle_setup(const Envelope& env) {
        auto info = SetupInfo::decode(env.payload);
        if (!info) {
            reject(RejectCause::BadSetup);
            return;
        }
        if (!take_nonce(info->nonce)) return;
        state_.role = Role::Responder;
        if (sv_->cfg.scheme == Scheme::B2V1) state_.role = Role::GroupMember;
        for (const auto& p : info->participants)
            if (p != state_.id) state_.believed_peers.insert(p);
        center_ = info->center;
        const KeyBytes* lt = ltk(center_);
        if (!lt) {
            reject(RejectCause::MissingKey);
            return;
        }
        otk_ = kdf_derive(*lt, sv_->otk_context(*info), sv_->cfg.kdf);
        state_.one_time_keys[center_] = *otk_;
    }

    void handle_masked(const Envelope& env) {
        if (!otk_ || env.claimed_sender != center_) return;
        if (env.payload.size() != sv_->cfg.key_bytes) {
            reject(RejectCause::LengthMismatch);
            return;
        }
        accept(xor_combine(env.payload, *otk_));
    }

    PartyId center_;
    std::optional<KeyBytes> otk_;
};

// --- A3 three-party --------------------------------------------------------
// The initiator publishes the XOR of its two one-time keys; everyone then
// holds both keys and derives the group key from their concatenation. The
// broadcast XOR itself is public, so it can never serve as the group key.

class A3InitiatorMachine : public Machine {
public:
    using Machine::Machine;

    void start() override {
        const auto& cfg = sv_->cfg;
        state_.role = Role::Initiator;
        std::vector<PartyId> members;
        for (const auto& p : cfg.parties)
            if (p != state_.id) members.push_back(p);

        for (const auto& m : members) {
            if (!ltk(m)) {
                reject(RejectCause::MissingKey);
                return;
            }
        }

        Nonce nonce = sv_->rng.draw_labeled(sv_->label("nonce"), cfg.key_bytes);
        if (!take_nonce(nonce)) return;
        state_.believed_peers.insert(members.begin(), members.end());

        SetupInfo info;
        info.session = sv_->session;
        info.participants = cfg.parties;
        info.initiators = {state_.id};
        info.nonce = nonce;
        sv_->record_announcement(info);
        for (const auto& m : members) sv_->fabric.send(state_.id, m, MsgKind::Setup, info.encode());

        KeyBytes first = kdf_derive(*ltk(members[0]), sv_->otk_context(info), cfg.kdf);
        KeyBytes second = kdf_derive(*ltk(members[1]), sv_->otk_context(info), cfg.kdf);
        state_.one_time_keys[members[0]] = first;
        state_.one_time_keys[members[1]] = second;

        sv_->fabric.broadcast(state_.id, xor_combine(first, second));
        accept(kdf_derive(concat(first, second), sv_->group_context(info), cfg.kdf));
    }

    void on_deliver(const Envelope&) override {}
};

class A3MemberMachine : public Machine {
public:
    using Machine::Machine;

    void on_deliver(const Envelope& env) override {
        if (!running()) return;
        if (env.kind == MsgKind::Setup) {
            handle_setup(env);
        } else {
            handle_mask(env);
        }
    }

private:
    void handle_setup(const Envelope& env) {
        auto info = SetupInfo::decode(env.payload);
        if (!info || info->initiators.empty()) {
            reject(RejectCause::BadSetup);
            return;
        }
        if (!take_nonce(info->nonce)) return;
        state_.role = Role::GroupMember;
        initiator_ = info->initiators[0];
        for (const auto& p : info->participants)
            if (p != state_.id) state_.believed_peers.insert(p);

        members_.clear();
        for (const auto& p : info->participants)
            if (p != initiator_) members_.push_back(p);
        auto self = std::find(members_.begin(), members_.end(), state_.id);
        if (members_.size() != 2 || self == members_.end()) {
            reject(RejectCause::BadSetup);
            return;
        }
        slot_ = static_cast<size_t>(self - members_.begin());

        const KeyBytes* lt = ltk(initiator_);
        if (!lt) {
            reject(RejectCause::MissingKey);
            return;
        }
        view_ = *info;
        otk_ = kdf_derive(*lt, sv_->otk_context(*info), sv_->cfg.kdf);
        state_.one_time_keys[initiator_] = *otk_;
    }

    void handle_mask(const Envelope& env) {
        if (!otk_ || env.claimed_sender != initiator_) return;
        if (env.payload.size() != sv_->cfg.key_bytes) {
            reject(RejectCause::LengthMismatch);
            return;
        }
        KeyBytes other = xor_combine(env.payload, *otk_);
        KeyBytes first = slot_ == 0 ? *otk_ : other;
        KeyBytes second = slot_ == 0 ? other : *otk_;
        accept(kdf_derive(concat(first, second), sv_->group_context(view_), sv_->cfg.kdf));
    }

    PartyId initiator_;
    std::vector<PartyId> members_;
    size_t slot_ = 0;
    SetupInfo view_;
    std::optional<KeyBytes> otk_;
};

// --- A3 n-party tree -------------------------------------------------------
// Complete binary tree in party-list order, root = initiator. The root runs
// the three-party combine with its two children, then re-masks the group key
// to every deeper node with that node's one-time key (docs/tree_schedule.md).

class TreeRootMachine : public Machine {
public:
    using Machine::Machine;

    void start() override {
        const auto& cfg = sv_->cfg;
        state_.role = Role::TreeRoot;
        for (size_t j = 1; j < cfg.parties.size(); ++j) {
            if (!ltk(cfg.parties[j])) {
                reject(RejectCause::MissingKey);
                return;
            }
        }

        Nonce nonce = sv_->rng.draw_labeled(sv_->label("nonce"), cfg.key_bytes);
        if (!take_nonce(nonce)) return;

        SetupInfo info;
        info.session = sv_->session;
        info.participants = cfg.parties;
        info.initiators = {state_.id};
        info.nonce = nonce;
        sv_->record_announcement(info);

        std::vector<KeyBytes> otk(cfg.parties.size());
        for (size_t j = 1; j < cfg.parties.size(); ++j) {
            state_.believed_peers.insert(cfg.parties[j]);
            sv_->fabric.send(state_.id, cfg.parties[j], MsgKind::Setup, info.encode());
            otk[j] = kdf_derive(*ltk(cfg.parties[j]), sv_->otk_context(info), cfg.kdf);
            state_.one_time_keys[cfg.parties[j]] = otk[j];
        }

        // Stage 0: the root's own three-party combine with its children.
        Bytes combine = xor_combine(otk[1], otk[2]);
        sv_->fabric.send(state_.id, cfg.parties[1], MsgKind::Protocol, combine);
        sv_->fabric.send(state_.id, cfg.parties[2], MsgKind::Protocol, combine);
        KeyBytes group = kdf_derive(concat(otk[1], otk[2]), sv_->group_context(info), cfg.kdf);

        // Deeper stages: re-mask the settled group key to each new node.
        for (size_t j = 3; j < cfg.parties.size(); ++j)
            sv_->fabric.send(state_.id, cfg.parties[j], MsgKind::Protocol, xor_combine(group, otk[j]));

        accept(std::move(group));
    }

    void on_deliver(const Envelope&) override {}
};

class TreeNodeMachine : public Machine {
public:
    using Machine::Machine;

    void on_deliver(const Envelope& env) override {
        if (!running()) return;
        if (env.kind == MsgKind::Setup) {
            handle_setup(env);
        } else {
            handle_mask(env);
        }
    }

private:
    void handle_setup(const Envelope& env) {
        auto info = SetupInfo::decode(env.payload);
        if (!info || info->initiators.empty()) {
            reject(RejectCause::BadSetup);
            return;
        }
        if (!take_nonce(info->nonce)) return;
        state_.role = Role::GroupMember;
        root_ = info->initiators[0];
        auto self = std::find(info->participants.begin(), info->participants.end(), state_.id);
        if (self == info->participants.end() || self == info->participants.begin()) {
            reject(RejectCause::BadSetup);
            return;
        }
        index_ = static_cast<size_t>(self - info->participants.begin());
        for (const auto& p : info->participants)
            if (p != state_.id) state_.believed_peers.insert(p);

        const KeyBytes* lt = ltk(root_);
        if (!lt) {
            reject(RejectCause::MissingKey);
            return;
        }
        view_ = *info;
        otk_ = kdf_derive(*lt, sv_->otk_context(*info), sv_->cfg.kdf);
        state_.one_time_keys[root_] = *otk_;
    }

    void handle_mask(const Envelope& env) {
        if (!otk_ || env.claimed_sender != root_) return;
        if (env.payload.size() != sv_->cfg.key_bytes) {
            reject(RejectCause::LengthMismatch);
            return;
        }
        if (index_ <= 2) {
            // Child of the root: the payload is the combine, recover the sibling key.
            KeyBytes sibling = xor_combine(env.payload, *otk_);
            KeyBytes first = index_ == 1 ? *otk_ : sibling;
            KeyBytes second = index_ == 1 ? sibling : *otk_;
            accept(kdf_derive(concat(first, second), sv_->group_context(view_), sv_->cfg.kdf));
        } else {
            accept(xor_combine(env.payload, *otk_));
        }
    }

    PartyId root_;
    size_t index_ = 0;
    SetupInfo view_;
    std::optional<KeyBytes> otk_;
};

// --- A4 --------------------------------------------------------------------
// Two initiators send masked copies of the initiator-pair key to the third
// party, which unmasks both and accepts only when the two versions agree.

class A4InitiatorMachine : public Machine {
public:
    using Machine::Machine;

    void start() override {
        const auto& cfg = sv_->cfg;
        Nonce nonce = sv_->rng.draw_labeled(sv_->label("nonce"), cfg.key_bytes);

        SetupInfo info;
        info.session = sv_->session;
        info.participants = cfg.parties;
        info.initiators = {cfg.parties[0], cfg.parties[1]};
        info.nonce = nonce;
        sv_->record_announcement(info);

        if (!take_nonce(nonce)) return;
        for (const auto& p : cfg.parties)
            if (p != state_.id) sv_->fabric.send(state_.id, p, MsgKind::Setup, info.encode());
        act(info);
    }

    void on_deliver(const Envelope& env) override {
        if (!running() || env.kind != MsgKind::Setup) return;
        auto info = SetupInfo::decode(env.payload);
        if (!info || info->initiators.size() != 2) {
            reject(RejectCause::BadSetup);
            return;
        }
        if (std::find(info->initiators.begin(), info->initiators.end(), state_.id) ==
            info->initiators.end()) {
            reject(RejectCause::BadSetup);
            return;
        }
        if (!take_nonce(info->nonce)) return;
        act(*info);
    }

private:
    void act(const SetupInfo& info) {
        state_.role = Role::Initiator;
        PartyId peer = info.initiators[0] == state_.id ? info.initiators[1] : info.initiators[0];
        PartyId third;
        for (const auto& p : info.participants)
            if (p != info.initiators[0] && p != info.initiators[1]) third = p;
        if (third.empty()) {
            reject(RejectCause::BadSetup);
            return;
        }
        for (const auto& p : info.participants)
            if (p != state_.id) state_.believed_peers.insert(p);

        if (!ltk(peer) || !ltk(third)) {
            reject(RejectCause::MissingKey);
            return;
        }
        KeyBytes pair_version = kdf_derive(*ltk(peer), sv_->otk_context(info), sv_->cfg.kdf);
        KeyBytes third_version = kdf_derive(*ltk(third), sv_->otk_context(info), sv_->cfg.kdf);
        state_.one_time_keys[peer] = pair_version;
        state_.one_time_keys[third] = third_version;

        Bytes cval = xor_combine(pair_version, third_version);
        Bytes payload = cval;
        if (scheme_macs_messages(sv_->cfg.scheme)) {
            Tag tag = mac_tag(third_version, sv_->a4f_mac_message(cval, info));
            payload = concat(cval, tag);
        }
        sv_->fabric.send(state_.id, third, MsgKind::Protocol, std::move(payload));
        accept(std::move(pair_version));
    }
};

class A4ThirdMachine : public Machine {
public:
    using Machine::Machine;

    void on_deliver(const Envelope& env) override {
        if (!running()) return;
        if (env.kind == MsgKind::Setup) {
            handle_setup(env);
        } else {
            handle_masked(env);
        }
    }

private:
    void handle_setup(const Envelope& env) {
        auto info = SetupInfo::decode(env.payload);
        if (!info || info->initiators.size() != 2) {
            reject(RejectCause::BadSetup);
            return;
        }
        if (!take_nonce(info->nonce)) return;
        state_.role = Role::Responder;
        for (const auto& p : info->participants)
            if (p != state_.id) state_.believed_peers.insert(p);
        view_ = *info;
        for (const auto& init : info->initiators) {
            const KeyBytes* lt = ltk(init);
            if (!lt) {
                reject(RejectCause::MissingKey);
                return;
            }
            versions_[init] = kdf_derive(*lt, sv_->otk_context(*info), sv_->cfg.kdf);
            state_.one_time_keys[init] = versions_[init];
        }
        ready_ = true;
    }

    void handle_masked(const Envelope& env) {
        if (!ready_ || versions_.count(env.claimed_sender) == 0) return;
        received_[env.claimed_sender] = env.payload;
        if (received_.size() == 2) resolve();
    }

    void resolve() {
        const auto& cfg = sv_->cfg;
        const bool with_mac = scheme_macs_messages(cfg.scheme);
        const size_t expected = cfg.key_bytes + (with_mac ? kMacTagLength : 0);

        std::map<PartyId, KeyBytes> unmasked;
        for (const auto& [sender, payload] : received_) {
            if (payload.size() != expected) {
                reject(RejectCause::LengthMismatch);
                return;
            }
            Bytes cval(payload.begin(), payload.begin() + static_cast<long>(cfg.key_bytes));
            if (with_mac) {
                Tag tag(payload.begin() + static_cast<long>(cfg.key_bytes), payload.end());
                if (!mac_verify(versions_[sender], sv_->a4f_mac_message(cval, view_), tag)) {
                    reject(RejectCause::AuthFailure);
                    return;
                }
            }
            unmasked[sender] = xor_combine(cval, versions_[sender]);
        }

        KeyBytes k1 = unmasked[view_.initiators[0]];
        KeyBytes k2 = unmasked[view_.initiators[1]];
        if (!ct_equal(k1, k2)) {
            reject(RejectCause::ConsistencyMismatch);
            return;
        }
        accept(std::move(k1));
    }

    SetupInfo view_;
    std::map<PartyId, KeyBytes> versions_;
    std::map<PartyId, Bytes> received_;
    bool ready_ = false;
};

}  // namespace

struct Session::Impl {
    Services services;
    std::vector<std::unique_ptr<Machine>> machines;
    PartyId announcer;
    std::vector<PartyId> registered;

    Machine* find(const PartyId& id) {
        for (auto& m : machines)
            if (m->state().id == id) return m.get();
        return nullptr;
    }
};

Session::Session(Fabric& fabric, SeededRng& rng, NonceLedger& ledger, const SchemeConfig& cfg,
                 int session_index, const std::map<std::string, KeyBytes>& long_term_keys)
    : impl_(new Impl{Services{fabric, rng, ledger, cfg, session_index}, {}, {}, {}}) {
    cfg.validate();

    auto keys_for = [&](const PartyId& id) {
        std::map<PartyId, KeyBytes> mine;
        for (const auto& [pair, key] : long_term_keys) {
            auto sep = pair.find('|');
            PartyId a = pair.substr(0, sep), b = pair.substr(sep + 1);
            if (a == id) mine[b] = key;
            if (b == id) mine[a] = key;
        }
        return mine;
    };

    auto make = [&](const PartyId& id) -> std::unique_ptr<Machine> {
        Services* sv = &impl_->services;
        switch (cfg.scheme) {
            case Scheme::A1:
            case Scheme::A1F:
            case Scheme::A2:
            case Scheme::B2V1:
                if (id == cfg.center) return std::make_unique<CenterMachine>(sv, id, keys_for(id));
                return std::make_unique<ParticipantMachine>(sv, id, keys_for(id));
            case Scheme::A3_3:
            case Scheme::B1:
                if (id == cfg.parties[0]) return std::make_unique<A3InitiatorMachine>(sv, id, keys_for(id));
                return std::make_unique<A3MemberMachine>(sv, id, keys_for(id));
            case Scheme::A3_Tree:
            case Scheme::B2V2:
                if (id == cfg.parties[0]) return std::make_unique<TreeRootMachine>(sv, id, keys_for(id));
                return std::make_unique<TreeNodeMachine>(sv, id, keys_for(id));
            case Scheme::A4:
            case Scheme::A4F:
                if (id == cfg.parties[0] || id == cfg.parties[1])
                    return std::make_unique<A4InitiatorMachine>(sv, id, keys_for(id));
                return std::make_unique<A4ThirdMachine>(sv, id, keys_for(id));
        }
        throw ConfigError("unhandled scheme");
    };

    for (const auto& id : cfg.all_ids()) impl_->machines.push_back(make(id));

    switch (cfg.scheme) {
        case Scheme::A1:
        case Scheme::A1F:
        case Scheme::A2:
        case Scheme::B2V1: impl_->announcer = cfg.center; break;
        default: impl_->announcer = cfg.parties[0]; break;
    }
}

Session::~Session() { delete impl_; }

void Session::register_parties() { register_parties(impl_->services.cfg.all_ids()); }

void Session::register_parties(const std::vector<PartyId>& subset) {
    for (const auto& id : subset) {
        Machine* m = impl_->find(id);
        if (m == nullptr) throw ConfigError("register_parties: unknown party " + id);
        impl_->services.fabric.register_party(id, [m](const Envelope& env) { m->on_deliver(env); });
        impl_->registered.push_back(id);
    }
}

void Session::start() {
    Machine* m = impl_->find(impl_->announcer);
    if (m == nullptr) throw ConfigError("announcer not configured");
    m->start();
}

std::map<PartyId, PartyState> Session::finalize() const {
    std::map<PartyId, PartyState> out;
    for (const auto& m : impl_->machines) {
        bool registered = std::find(impl_->registered.begin(), impl_->registered.end(),
                                    m->state().id) != impl_->registered.end();
        if (!registered) continue;
        PartyState st = m->state();
        if (st.status == Status::Running) st.status = Status::Starved;
        out[st.id] = std::move(st);
    }
    return out;
}

ScenarioResult run_scenario(const SchemeConfig& cfg, uint64_t seed, AdversaryStrategy* adversary) {
    cfg.validate();
    Fabric fabric;
    fabric.transcript().scheme = scheme_name(cfg.scheme);
    fabric.transcript().seed = seed;
    fabric.transcript().key_bytes = cfg.key_bytes;
    fabric.transcript().kdf = kdf_algorithm_name(cfg.kdf.algorithm);
    if (adversary != nullptr) fabric.set_adversary(adversary);

    SeededRng rng(seed);
    NonceLedger ledger;
    auto ltks = provision_long_term_keys(cfg, rng, fabric.transcript());

    Session session(fabric, rng, ledger, cfg, 0, ltks);
    session.register_parties();
    session.start();
    fabric.run_until_quiescent();

    return ScenarioResult{session.finalize(), std::move(fabric.transcript())};
}

}  // namespace keylab
