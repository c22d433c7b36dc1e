#include "keylab/attacks.hpp"

#include <algorithm>

#include "keylab/errors.hpp"
#include "keylab/mac.hpp"
#include "keylab/rng.hpp"

namespace keylab {

using nlohmann::ordered_json;

std::vector<AttackId> all_attacks() {
    return {AttackId::A1IdConf, AttackId::A1Mitm,  AttackId::A2Tamper,
            AttackId::A3IdConf, AttackId::A4Mask, AttackId::A4Nonce};
}

std::string attack_name(AttackId id) {
    switch (id) {
        case AttackId::A1IdConf: return "ATK_A1_IDCONF";
        case AttackId::A1Mitm: return "ATK_A1_MITM";
        case AttackId::A2Tamper: return "ATK_A2_TAMPER";
        case AttackId::A3IdConf: return "ATK_A3_IDCONF";
        case AttackId::A4Mask: return "ATK_A4_MASK";
        case AttackId::A4Nonce: return "ATK_A4_NONCE";
    }
    return "?";
}

std::optional<AttackId> attack_from_name(const std::string& name) {
    for (AttackId id : all_attacks())
        if (attack_name(id) == name) return id;
    return std::nullopt;
}

Scheme attack_baseline_target(AttackId id) {
    switch (id) {
        case AttackId::A1IdConf:
        case AttackId::A1Mitm: return Scheme::A1;
        case AttackId::A2Tamper: return Scheme::A2;
        case AttackId::A3IdConf: return Scheme::A3_3;
        case AttackId::A4Mask:
        case AttackId::A4Nonce: return Scheme::A4;
    }
    throw ConfigError("bad attack id");
}

std::optional<Scheme> attack_fixed_target(AttackId id) {
    switch (id) {
        case AttackId::A1IdConf:
        case AttackId::A1Mitm: return Scheme::A1F;
        case AttackId::A4Mask:
        case AttackId::A4Nonce: return Scheme::A4F;
        case AttackId::A2Tamper:
        case AttackId::A3IdConf: return std::nullopt;
    }
    throw ConfigError("bad attack id");
}

std::vector<std::string> attack_adversary_pairs(AttackId id) {
    switch (id) {
        case AttackId::A1Mitm: return {pair_key("E", "C")};
        case AttackId::A4Nonce: return {pair_key("A", "E"), pair_key("B", "E")};
        default: return {};
    }
}

namespace {

// What the adversary legitimately has: its own long-term keys, its own coins,
// and whatever it extracted from observed traffic. Strategies and verdicts see
// only this plus envelopes and terminal states; never honest machine internals.
struct AdversaryContext {
    PartyId id = "E";
    std::map<std::string, KeyBytes> own_long_term_keys;  // pair key -> value
    SeededRng rng;
    std::map<std::string, Bytes> knowledge;

    explicit AdversaryContext(SeededRng coins) : rng(std::move(coins)) {}

    const KeyBytes& own_key(const PartyId& a, const PartyId& b) const {
        return own_long_term_keys.at(pair_key(a, b));
    }
};

void check_target(AttackId id, Scheme target) {
    if (target == attack_baseline_target(id)) return;
    auto fixed = attack_fixed_target(id);
    if (fixed && target == *fixed) return;
    throw ConfigError(attack_name(id) + " does not apply to scheme " + scheme_name(target));
}

Bytes nonzero_mask(const AttackOptions& opts, AdversaryContext& ctx) {
    if (opts.forced_mask) return *opts.forced_mask;
    Bytes m = ctx.rng.draw_labeled("mask", opts.key_bytes);
    while (is_all_zero(m)) m = ctx.rng.draw(opts.key_bytes);
    return m;
}

SchemeConfig attack_config(Scheme scheme, std::vector<PartyId> parties, PartyId center,
                           const AttackOptions& opts) {
    SchemeConfig cfg;
    cfg.scheme = scheme;
    cfg.parties = std::move(parties);
    cfg.center = std::move(center);
    cfg.key_bytes = opts.key_bytes;
    cfg.kdf = opts.kdf;
    cfg.kdf.output_length = opts.key_bytes;
    cfg.validate();
    return cfg;
}

struct Runner {
    Fabric fabric;
    SeededRng rng;
    NonceLedger ledger;
    AdversaryContext ctx;

    Runner(AttackId id, Scheme target, uint64_t seed, const AttackOptions& opts)
        : rng(seed), ctx(SeededRng(seed).fork("adversary")) {
        auto& t = fabric.transcript();
        t.scheme = scheme_name(target);
        t.seed = seed;
        t.key_bytes = opts.key_bytes;
        t.kdf = kdf_algorithm_name(opts.kdf.algorithm);
        t.attack = attack_name(id);
    }

    void finish(AttackOutcome& out) {
        out.transcript = fabric.transcript();
        out.transcript.evidence = out.verdict.evidence;
        for (const auto& [name, value] : ctx.knowledge)
            out.adversary_knowledge[name] = to_hex(value);
    }
};

std::vector<std::string> sorted_peers(const std::set<PartyId>& peers) {
    return std::vector<std::string>(peers.begin(), peers.end());
}

std::string opt_key_hex(const PartyState& st) {
    return st.accepted_key ? to_hex(*st.accepted_key) : std::string();
}

// Rewrites the participant list in the SETUP message addressed to one victim.
class SetupRewriteStrategy : public AdversaryStrategy {
public:
    SetupRewriteStrategy(PartyId victim, std::vector<PartyId> forged)
        : victim_(std::move(victim)), forged_(std::move(forged)) {}

    AdversaryAction on_envelope(const Envelope& env) override {
        if (env.kind == MsgKind::Setup && env.receiver == victim_) {
            auto info = SetupInfo::decode(env.payload);
            if (info) {
                info->participants = forged_;
                return AdversaryAction::modify(info->encode());
            }
        }
        return AdversaryAction::deliver();
    }

private:
    PartyId victim_;
    std::vector<PartyId> forged_;
};

// XOR-masks the first key_bytes of protocol payloads addressed to a victim.
class MaskStrategy : public AdversaryStrategy {
public:
    MaskStrategy(PartyId victim, Bytes mask) : victim_(std::move(victim)), mask_(std::move(mask)) {}

    AdversaryAction on_envelope(const Envelope& env) override {
        if (env.kind != MsgKind::Protocol || env.receiver != victim_) return AdversaryAction::deliver();
        if (env.payload.size() < mask_.size()) return AdversaryAction::deliver();
        Bytes forged = env.payload;
        for (size_t i = 0; i < mask_.size(); ++i) forged[i] ^= mask_[i];
        return AdversaryAction::modify(std::move(forged));
    }

private:
    PartyId victim_;
    Bytes mask_;
};

// =============================== ATK_A1_IDCONF ==============================
// E rewrites A's SETUP so A believes the session is with B; the center and D
// run honestly for the session (A, D). The phase-2 message to A is untouched.

AttackOutcome atk_a1_idconf(Scheme target, uint64_t seed, const AttackOptions& opts) {
    Runner r(AttackId::A1IdConf, target, seed, opts);
    SchemeConfig cfg = attack_config(target, {"A", "D"}, "C", opts);

    auto ltks = provision_long_term_keys(cfg, r.rng, r.fabric.transcript());
    SetupRewriteStrategy strategy("A", {"A", "B"});
    r.fabric.set_adversary(&strategy, r.ctx.id);

    Session session(r.fabric, r.rng, r.ledger, cfg, 0, ltks);
    session.register_parties();
    session.start();
    r.fabric.run_until_quiescent();

    AttackOutcome out;
    out.parties = session.finalize();
    const auto& a = out.parties.at("A");
    const auto& d = out.parties.at("D");
    const auto& c = out.parties.at("C");

    bool keys_equal = a.accepted_key && d.accepted_key && ct_equal(*a.accepted_key, *d.accepted_key);
    bool beliefs = a.believed_peers == std::set<PartyId>{"B"} && d.believed_peers == std::set<PartyId>{"A"};
    out.verdict.success = a.status == Status::Accepted && d.status == Status::Accepted &&
                          keys_equal && beliefs;

    out.verdict.evidence = ordered_json{
        {"success", out.verdict.success},
        {"victim", "A"},
        {"victim_believes", sorted_peers(a.believed_peers)},
        {"actual_key_holder", "D"},
        {"holder_believes", sorted_peers(d.believed_peers)},
        {"center_session", sorted_peers(c.believed_peers)},
        {"victim_accepted_hex", opt_key_hex(a)},
        {"holder_accepted_hex", opt_key_hex(d)},
        {"keys_equal", keys_equal},
    };
    r.finish(out);
    return out;
}

// ================================ ATK_A1_MITM ===============================
// E plays the legitimate party in two mirrored identity-confusion runs, one
// against A and one against B, then ferries a test message between them.

class MitmStrategy : public AdversaryStrategy {
public:
    MitmStrategy(AdversaryContext* ctx, const SchemeConfig& cfg) : ctx_(ctx), cfg_(cfg) {}

    AdversaryAction on_envelope(const Envelope& env) override {
        if (env.kind == MsgKind::Setup) {
            auto info = SetupInfo::decode(env.payload);
            if (!info) return AdversaryAction::deliver();
            if (env.receiver == ctx_->id) {
                // E's own copy of the agreement: derive its one-time key.
                views_[info->session] = *info;
                KdfContext kctx;
                kctx.nonce = info->nonce;
                if (scheme_binds_identities(cfg_.scheme)) kctx.bound_identities = info->principal_ids();
                kctx.label = "otk";
                otks_[info->session] = kdf_derive(ctx_->own_key(ctx_->id, info->center), kctx, cfg_.kdf);
                return AdversaryAction::deliver();
            }
            // Victim copy: swap E out for the fictional-or-framed peer.
            PartyId victim = info->session == 0 ? "A" : "B";
            PartyId framed = info->session == 0 ? "B" : "A";
            if (env.receiver == victim) {
                for (auto& p : info->participants)
                    if (p == ctx_->id) p = framed;
                return AdversaryAction::modify(info->encode());
            }
            return AdversaryAction::deliver();
        }
        if (env.kind == MsgKind::Protocol && env.receiver == ctx_->id) {
            // Masked session key addressed to E: unmask with E's own one-time key.
            int session = latest_session_;
            auto it = otks_.find(session);
            if (it != otks_.end() && env.payload.size() == it->second.size()) {
                ctx_->knowledge["extracted_key:" + std::to_string(session)] =
                    xor_combine(env.payload, it->second);
            }
        }
        return AdversaryAction::deliver();
    }

    void set_session(int s) { latest_session_ = s; }

private:
    AdversaryContext* ctx_;
    SchemeConfig cfg_;
    std::map<int, SetupInfo> views_;
    std::map<int, KeyBytes> otks_;
    int latest_session_ = 0;
};

AttackOutcome atk_a1_mitm(Scheme target, uint64_t seed, const AttackOptions& opts) {
    Runner r(AttackId::A1Mitm, target, seed, opts);
    SchemeConfig cfg0 = attack_config(target, {"A", "E"}, "C", opts);
    SchemeConfig cfg1 = attack_config(target, {"B", "E"}, "C", opts);

    std::map<std::string, KeyBytes> ltks;
    auto& transcript = r.fabric.transcript();
    for (auto pair : {std::pair<PartyId, PartyId>{"A", "C"}, {"B", "C"}, {"E", "C"}}) {
        KeyBytes key = draw_long_term_key(r.rng, pair.first, pair.second, opts.key_bytes);
        ltks[pair_key(pair.first, pair.second)] = key;
        transcript.long_term_keys[pair_key(pair.first, pair.second)] = to_hex(key);
    }
    r.ctx.own_long_term_keys[pair_key("E", "C")] = ltks[pair_key("E", "C")];

    MitmStrategy strategy(&r.ctx, cfg0);
    r.fabric.set_adversary(&strategy, r.ctx.id);

    Session s0(r.fabric, r.rng, r.ledger, cfg0, 0, ltks);
    strategy.set_session(0);
    s0.register_parties();
    s0.start();
    r.fabric.run_until_quiescent();

    Session s1(r.fabric, r.rng, r.ledger, cfg1, 1, ltks);
    strategy.set_session(1);
    s1.register_parties();
    s1.start();
    r.fabric.run_until_quiescent();

    AttackOutcome out;
    out.parties = s0.finalize();
    for (auto& [id, st] : s1.finalize()) out.parties[id] = st;

    const auto& a = out.parties.at("A");
    const auto& b = out.parties.at("B");
    bool have_keys = r.ctx.knowledge.count("extracted_key:0") && r.ctx.knowledge.count("extracted_key:1");
    bool match_a = false, match_b = false, relay_ok = false;
    if (have_keys && a.accepted_key && b.accepted_key) {
        const Bytes& key0 = r.ctx.knowledge.at("extracted_key:0");
        const Bytes& key1 = r.ctx.knowledge.at("extracted_key:1");
        match_a = ct_equal(key0, *a.accepted_key);
        match_b = ct_equal(key1, *b.accepted_key);
        // A encrypts "for B" under its accepted key; E re-encrypts for B.
        Bytes msg = r.ctx.rng.draw_labeled("mitm-test-msg", opts.key_bytes);
        Bytes wire_a = xor_combine(msg, *a.accepted_key);
        Bytes seen = xor_combine(wire_a, key0);
        Bytes wire_b = xor_combine(seen, key1);
        Bytes at_b = xor_combine(wire_b, *b.accepted_key);
        relay_ok = ct_equal(at_b, msg);
    }
    bool beliefs = a.believed_peers == std::set<PartyId>{"B"} && b.believed_peers == std::set<PartyId>{"A"};
    out.verdict.success = a.status == Status::Accepted && b.status == Status::Accepted &&
                          have_keys && match_a && match_b && beliefs && relay_ok;

    out.verdict.evidence = ordered_json{
        {"success", out.verdict.success},
        {"a_believes", sorted_peers(a.believed_peers)},
        {"b_believes", sorted_peers(b.believed_peers)},
        {"extracted_matches_a", match_a},
        {"extracted_matches_b", match_b},
        {"relay_round_trip", relay_ok},
        {"a_accepted_hex", opt_key_hex(a)},
        {"b_accepted_hex", opt_key_hex(b)},
    };
    if (have_keys) {
        transcript.adversary_values["extracted_key:0"] = to_hex(r.ctx.knowledge.at("extracted_key:0"));
        transcript.adversary_values["extracted_key:1"] = to_hex(r.ctx.knowledge.at("extracted_key:1"));
    }
    r.finish(out);
    return out;
}

// =============================== ATK_A2_TAMPER ==============================
// The masked session key C_S is not authenticated: shifting it by M makes A
// accept K xor M, a key the server never issued.

AttackOutcome atk_a2_tamper(Scheme target, uint64_t seed, const AttackOptions& opts) {
    Runner r(AttackId::A2Tamper, target, seed, opts);
    SchemeConfig cfg = attack_config(target, {"A"}, "S", opts);

    auto ltks = provision_long_term_keys(cfg, r.rng, r.fabric.transcript());
    Bytes mask = nonzero_mask(opts, r.ctx);
    r.ctx.knowledge["mask"] = mask;
    r.fabric.transcript().adversary_values["mask"] = to_hex(mask);

    MaskStrategy strategy("A", mask);
    r.fabric.set_adversary(&strategy, r.ctx.id);

    Session session(r.fabric, r.rng, r.ledger, cfg, 0, ltks);
    session.register_parties();
    session.start();
    r.fabric.run_until_quiescent();

    AttackOutcome out;
    out.parties = session.finalize();
    const auto& a = out.parties.at("A");
    const auto& s = out.parties.at("S");

    bool shifted = a.accepted_key && s.accepted_key &&
                   ct_equal(*a.accepted_key, xor_combine(*s.accepted_key, mask));
    out.verdict.success = a.status == Status::Accepted && shifted && !is_all_zero(mask);
    out.verdict.evidence = ordered_json{
        {"success", out.verdict.success},
        {"issued_hex", opt_key_hex(s)},
        {"accepted_hex", opt_key_hex(a)},
        {"mask_hex", to_hex(mask)},
        {"accepted_equals_issued_xor_mask", shifted},
    };
    r.finish(out);
    return out;
}

// =============================== ATK_A3_IDCONF ==============================
// Same lever as the A1 attack, aimed at the three-party scheme: A accepts the
// group key while wrong about who is in the group.

AttackOutcome atk_a3_idconf(Scheme target, uint64_t seed, const AttackOptions& opts) {
    Runner r(AttackId::A3IdConf, target, seed, opts);
    SchemeConfig cfg = attack_config(target, {"D", "A", "C"}, "", opts);

    auto ltks = provision_long_term_keys(cfg, r.rng, r.fabric.transcript());
    SetupRewriteStrategy strategy("A", {"D", "A", "B"});
    r.fabric.set_adversary(&strategy, r.ctx.id);

    Session session(r.fabric, r.rng, r.ledger, cfg, 0, ltks);
    session.register_parties();
    session.start();
    r.fabric.run_until_quiescent();

    AttackOutcome out;
    out.parties = session.finalize();
    const auto& a = out.parties.at("A");
    const auto& c = out.parties.at("C");
    const auto& d = out.parties.at("D");

    bool all_accept = a.status == Status::Accepted && c.status == Status::Accepted &&
                      d.status == Status::Accepted;
    bool keys_equal = all_accept && ct_equal(*a.accepted_key, *c.accepted_key) &&
                      ct_equal(*a.accepted_key, *d.accepted_key);
    bool confused = a.believed_peers == std::set<PartyId>{"B", "D"} &&
                    c.believed_peers == std::set<PartyId>{"A", "D"};
    out.verdict.success = all_accept && keys_equal && confused;
    out.verdict.evidence = ordered_json{
        {"success", out.verdict.success},
        {"victim", "A"},
        {"victim_believes", sorted_peers(a.believed_peers)},
        {"actual_group", std::vector<std::string>{"A", "C", "D"}},
        {"group_keys_equal", keys_equal},
        {"victim_accepted_hex", opt_key_hex(a)},
    };
    r.finish(out);
    return out;
}

// ================================ ATK_A4_MASK ===============================
// Both masked messages to C are shifted by the same block M; the consistency
// check passes and C accepts K_AB xor M.

AttackOutcome atk_a4_mask(Scheme target, uint64_t seed, const AttackOptions& opts) {
    Runner r(AttackId::A4Mask, target, seed, opts);
    SchemeConfig cfg = attack_config(target, {"A", "B", "C"}, "", opts);

    auto ltks = provision_long_term_keys(cfg, r.rng, r.fabric.transcript());
    Bytes mask = opts.forced_mask ? *opts.forced_mask : nonzero_mask(opts, r.ctx);
    r.ctx.knowledge["mask"] = mask;
    r.fabric.transcript().adversary_values["mask"] = to_hex(mask);

    MaskStrategy strategy("C", mask);
    r.fabric.set_adversary(&strategy, r.ctx.id);

    Session session(r.fabric, r.rng, r.ledger, cfg, 0, ltks);
    session.register_parties();
    session.start();
    r.fabric.run_until_quiescent();

    AttackOutcome out;
    out.parties = session.finalize();
    const auto& a = out.parties.at("A");
    const auto& b = out.parties.at("B");
    const auto& c = out.parties.at("C");

    bool initiators_agree = a.accepted_key && b.accepted_key && ct_equal(*a.accepted_key, *b.accepted_key);
    bool shifted = c.accepted_key && a.accepted_key &&
                   ct_equal(*c.accepted_key, xor_combine(*a.accepted_key, mask));
    out.verdict.success = c.status == Status::Accepted && initiators_agree && shifted &&
                          !is_all_zero(mask);
    out.verdict.evidence = ordered_json{
        {"success", out.verdict.success},
        {"honest_group_key_hex", opt_key_hex(a)},
        {"c_accepted_hex", opt_key_hex(c)},
        {"c_status", status_name(c.status)},
        {"c_cause", reject_cause_name(c.cause)},
        {"mask_hex", to_hex(mask)},
        {"c_key_is_shifted", shifted},
    };
    r.finish(out);
    return out;
}

// =============================== ATK_A4_NONCE ===============================
// Three choreographed sessions under one nonce: two interceptions hand E the
// one-time keys K_AC and K_BC, then E feeds C a key of its own choosing while
// impersonating A and B. No honest party ever reuses a nonce.

class InterceptToStrategy : public AdversaryStrategy {
public:
    explicit InterceptToStrategy(PartyId victim) : victim_(std::move(victim)) {}

    AdversaryAction on_envelope(const Envelope& env) override {
        if (env.receiver == victim_) {
            if (env.kind == MsgKind::Protocol) captured_.push_back(env.payload);
            return AdversaryAction::drop();
        }
        return AdversaryAction::deliver();
    }

    const std::vector<Bytes>& captured() const { return captured_; }

private:
    PartyId victim_;
    std::vector<Bytes> captured_;
};

AttackOutcome atk_a4_nonce(Scheme target, uint64_t seed, const AttackOptions& opts) {
    Runner r(AttackId::A4Nonce, target, seed, opts);
    const bool with_mac = scheme_macs_messages(target);
    auto& transcript = r.fabric.transcript();

    std::map<std::string, KeyBytes> ltks;
    for (auto pair : {std::pair<PartyId, PartyId>{"A", "C"}, {"B", "C"}, {"A", "E"}, {"B", "E"}}) {
        KeyBytes key = draw_long_term_key(r.rng, pair.first, pair.second, opts.key_bytes);
        ltks[pair_key(pair.first, pair.second)] = key;
        transcript.long_term_keys[pair_key(pair.first, pair.second)] = to_hex(key);
    }
    r.ctx.own_long_term_keys[pair_key("A", "E")] = ltks[pair_key("A", "E")];
    r.ctx.own_long_term_keys[pair_key("B", "E")] = ltks[pair_key("B", "E")];

    Nonce nonce = r.ctx.rng.draw_labeled("nonce", opts.key_bytes);
    KeyBytes kstar = r.ctx.rng.draw_labeled("kstar", opts.key_bytes);
    r.ctx.knowledge["kstar"] = kstar;
    transcript.adversary_values["kstar"] = to_hex(kstar);

    InterceptToStrategy strategy("C");
    r.fabric.set_adversary(&strategy, r.ctx.id);

    auto derive_own = [&](const PartyId& peer, const SetupInfo& view) {
        KdfContext kctx;
        kctx.nonce = view.nonce;
        if (scheme_binds_identities(target)) kctx.bound_identities = view.principal_ids();
        kctx.label = "otk";
        return kdf_derive(r.ctx.own_key(peer, r.ctx.id), kctx, KdfSpec{opts.kdf.algorithm, opts.key_bytes});
    };
    auto strip = [&](const Bytes& payload) {
        return Bytes(payload.begin(), payload.begin() + static_cast<long>(opts.key_bytes));
    };

    // Stage 1: A runs "with E and C"; E withholds C_A from C and unmasks it.
    SchemeConfig cfg0 = attack_config(target, {"A", "E", "C"}, "", opts);
    SetupInfo view0{0, {"A", "E", "C"}, {"A", "E"}, "", nonce};
    Session s0(r.fabric, r.rng, r.ledger, cfg0, 0, ltks);
    s0.register_parties({"A", "C"});
    r.fabric.inject("E", "A", MsgKind::Setup, view0.encode());
    r.fabric.run_until_quiescent();
    auto states0 = s0.finalize();

    if (strategy.captured().size() != 1) throw ScenarioError("stage 1 interception failed");
    KeyBytes k_ac = xor_combine(strip(strategy.captured()[0]), derive_own("A", view0));
    r.ctx.knowledge["k_ac"] = k_ac;
    transcript.adversary_values["extracted_k_ac"] = to_hex(k_ac);

    // Stage 2: the mirror image against B yields K_BC.
    SchemeConfig cfg1 = attack_config(target, {"B", "E", "C"}, "", opts);
    SetupInfo view1{1, {"B", "E", "C"}, {"B", "E"}, "", nonce};
    Session s1(r.fabric, r.rng, r.ledger, cfg1, 1, ltks);
    s1.register_parties({"B", "C"});
    r.fabric.inject("E", "B", MsgKind::Setup, view1.encode());
    r.fabric.run_until_quiescent();
    auto states1 = s1.finalize();

    if (strategy.captured().size() != 2) throw ScenarioError("stage 2 interception failed");
    KeyBytes k_bc = xor_combine(strip(strategy.captured()[1]), derive_own("B", view1));
    r.ctx.knowledge["k_bc"] = k_bc;
    transcript.adversary_values["extracted_k_bc"] = to_hex(k_bc);

    // Stage 3: C runs "with A and B"; E impersonates both initiators.
    size_t stage3_start = transcript.events.size();
    SchemeConfig cfg2 = attack_config(target, {"A", "B", "C"}, "", opts);
    SetupInfo view2{2, {"A", "B", "C"}, {"A", "B"}, "", nonce};
    Session s2(r.fabric, r.rng, r.ledger, cfg2, 2, ltks);
    s2.register_parties({"C"});
    r.fabric.inject("A", "C", MsgKind::Setup, view2.encode());

    auto forge = [&](const KeyBytes& learnt) {
        Bytes cval = xor_combine(learnt, kstar);
        if (!with_mac) return cval;
        KdfContext mctx;
        mctx.nonce = view2.nonce;
        mctx.bound_identities = view2.principal_ids();
        mctx.label = "a4f-mac";
        // Best E can do: key the tag with the stage-1/2 extraction.
        return concat(cval, mac_tag(learnt, concat(cval, mctx.serialize())));
    };
    r.fabric.inject("A", "C", MsgKind::Protocol, forge(k_ac));
    r.fabric.inject("B", "C", MsgKind::Protocol, forge(k_bc));
    r.fabric.run_until_quiescent();
    auto states2 = s2.finalize();

    AttackOutcome out;
    out.parties["A"] = states0.at("A");
    out.parties["B"] = states1.at("B");
    out.parties["C"] = states2.at("C");
    const auto& a = out.parties.at("A");
    const auto& b = out.parties.at("B");
    const auto& c = out.parties.at("C");

    bool c_took_kstar = c.status == Status::Accepted && c.accepted_key && ct_equal(*c.accepted_key, kstar);
    bool stage3_all_forged = true;
    for (size_t i = stage3_start; i < transcript.events.size(); ++i)
        if (transcript.events[i].env.true_sender != r.ctx.id) stage3_all_forged = false;
    bool nonce_discipline = a.cause != RejectCause::NonceReuse && b.cause != RejectCause::NonceReuse &&
                            c.cause != RejectCause::NonceReuse && r.ledger.count("A") == 1 &&
                            r.ledger.count("B") == 1 && r.ledger.count("C") == 1;

    out.verdict.success = c_took_kstar && stage3_all_forged && nonce_discipline;
    out.verdict.evidence = ordered_json{
        {"success", out.verdict.success},
        {"kstar_hex", to_hex(kstar)},
        {"c_status", status_name(c.status)},
        {"c_cause", reject_cause_name(c.cause)},
        {"c_accepted_hex", opt_key_hex(c)},
        {"c_accepted_kstar", c_took_kstar},
        {"extracted_k_ac_hex", to_hex(k_ac)},
        {"extracted_k_bc_hex", to_hex(k_bc)},
        {"absent_parties_sent_nothing_in_stage3", stage3_all_forged},
        {"honest_nonce_ledgers_clean", nonce_discipline},
    };
    r.finish(out);
    return out;
}

}  // namespace

AttackOutcome run_attack(AttackId id, Scheme target, uint64_t seed, const AttackOptions& opts) {
    check_target(id, target);
    switch (id) {
        case AttackId::A1IdConf: return atk_a1_idconf(target, seed, opts);
        case AttackId::A1Mitm: return atk_a1_mitm(target, seed, opts);
        case AttackId::A2Tamper: return atk_a2_tamper(target, seed, opts);
        case AttackId::A3IdConf: return atk_a3_idconf(target, seed, opts);
        case AttackId::A4Mask: return atk_a4_mask(target, seed, opts);
        case AttackId::A4Nonce: return atk_a4_nonce(target, seed, opts);
    }
    throw ConfigError("bad attack id");
}

ordered_json attack_report_block(AttackId id, Scheme target, uint64_t seeds, const AttackOptions& opts,
                                 Transcript* first_transcript) {
    uint64_t successes = 0;
    ordered_json sample;
    std::vector<uint64_t> failing;
    for (uint64_t seed = 0; seed < seeds; ++seed) {
        AttackOutcome out = run_attack(id, target, seed, opts);
        if (out.verdict.success) ++successes;
        else if (failing.size() < 5) failing.push_back(seed);
        if (seed == 0) {
            sample = out.verdict.evidence;
            if (first_transcript != nullptr) *first_transcript = out.transcript;
        }
    }
    ordered_json block{
        {"attack", attack_name(id)},
        {"target", scheme_name(target)},
        {"seeds", seeds},
        {"successes", successes},
        {"evidence_sample", sample},
    };
    if (!failing.empty()) block["failing_seeds"] = failing;
    return block;
}

}  // namespace keylab
