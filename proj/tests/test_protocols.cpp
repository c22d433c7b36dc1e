#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "keylab/attacks.hpp"
#include "keylab/audit.hpp"
#include "keylab/errors.hpp"
#include "keylab/protocols.hpp"

using namespace keylab;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SchemeConfig toy_config(Scheme s, size_t n = 0) {
    SchemeConfig cfg = SchemeConfig::defaults_for(s, n);
    cfg.kdf.algorithm = KdfAlgorithm::ToyMix;
    return cfg;
}

size_t count_kind(const Transcript& t, MsgKind kind) {
    size_t n = 0;
    for (const auto& ev : t.events)
        if (ev.env.kind == kind && ev.delivered) ++n;
    return n;
}

void check_all_agree(const ScenarioResult& result) {
    REQUIRE(!result.parties.empty());
    const PartyState& first = result.parties.begin()->second;
    REQUIRE(first.accepted_key.has_value());
    for (const auto& [id, st] : result.parties) {
        INFO("party ", id);
        CHECK(st.status == Status::Accepted);
        REQUIRE(st.accepted_key.has_value());
        CHECK(ct_equal(*st.accepted_key, *first.accepted_key));
    }
}

}  // namespace

TEST_CASE("A1 honest run: both participants accept the center's key") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A1), 42);
    check_all_agree(result);
    CHECK(result.parties.at("A").believed_peers == std::set<PartyId>{"B"});
    CHECK(result.parties.at("B").believed_peers == std::set<PartyId>{"A"});
    CHECK(result.parties.at("C").believed_peers == std::set<PartyId>{"A", "B"});
    CHECK(count_kind(result.transcript, MsgKind::Setup) == 2);
    CHECK(count_kind(result.transcript, MsgKind::Protocol) == 2);
    CHECK(result.transcript.events.size() == 4);
}

TEST_CASE("A1 masked payload equals session key xor one-time key") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A1), 8);
    const PartyState& a = result.parties.at("A");
    const PartyState& c = result.parties.at("C");
    const Bytes& k_ac = a.one_time_keys.at("C");
    CHECK(c.one_time_keys.at("A") == k_ac);
    // find the protocol payload delivered to A
    for (const auto& ev : result.transcript.events)
        if (ev.env.kind == MsgKind::Protocol && ev.final_receiver == "A")
            CHECK(ev.final_payload == xor_combine(*c.accepted_key, k_ac));
}

TEST_CASE("A1 with an all-zero chosen key distributes all-zero") {
    SchemeConfig cfg = SchemeConfig::defaults_for(Scheme::A1);
    cfg.forced_session_key = Bytes(16, 0x00);
    ScenarioResult result = run_scenario(cfg, 3);
    CHECK(result.parties.at("A").accepted_key == Bytes(16, 0x00));
    CHECK(result.parties.at("B").accepted_key == Bytes(16, 0x00));
}

TEST_CASE("A1 TOY_MIX golden transcript is frozen") {
    ScenarioResult result = run_scenario(toy_config(Scheme::A1), 7);
    std::string expected = read_file(std::string(KEYLAB_SOURCE_DIR) + "/tests/golden/a1_toymix_seed7.jsonl");
    CHECK(result.transcript.to_jsonl() == expected);
}

TEST_CASE("A1F honest run accepts exactly like A1") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A1F), 42);
    check_all_agree(result);
}

TEST_CASE("A1F: a forged participant view changes the derived key chain") {
    // Replay the identity-confusion strategy against the fixed variant and
    // recompute both XOR chains by hand with the toy mixer.
    AttackOptions opts;
    opts.kdf.algorithm = KdfAlgorithm::ToyMix;
    AttackOutcome out = run_attack(AttackId::A1IdConf, Scheme::A1F, 5, opts);
    CHECK_FALSE(out.verdict.success);

    KdfSpec spec{KdfAlgorithm::ToyMix, 16};
    Bytes l_ac = from_hex(out.transcript.long_term_keys.at("A|C"));
    Bytes session_key = from_hex(out.transcript.session_values.at("session_key:0"));

    // nonce from the announced setup
    auto announced = SetupInfo::decode(from_hex(out.transcript.announcements.at("0")));
    REQUIRE(announced.has_value());

    KdfContext center_view{announced->nonce, {"A", "C", "D"}, "otk"};
    KdfContext victim_view{announced->nonce, {"A", "B", "C"}, "otk"};
    Bytes k_ac_center = kdf_derive(l_ac, center_view, spec);
    Bytes k_ac_victim = kdf_derive(l_ac, victim_view, spec);

    Bytes expected_at_a = xor_combine(xor_combine(session_key, k_ac_center), k_ac_victim);
    CHECK(out.parties.at("A").accepted_key == expected_at_a);
    CHECK(expected_at_a != session_key);
    CHECK(out.parties.at("D").accepted_key == session_key);
}

TEST_CASE("identity binding is canonical: permuted lists serialize sorted") {
    SetupInfo one{0, {"A", "B"}, {}, "C", Bytes(4, 1)};
    SetupInfo two{0, {"B", "A"}, {}, "C", Bytes(4, 1)};
    CHECK(one.principal_ids() == std::vector<PartyId>{"A", "B", "C"});
    CHECK(one.principal_ids() == two.principal_ids());
}

TEST_CASE("A2 honest run hands A the server's key") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A2), 9);
    check_all_agree(result);
    CHECK(result.transcript.warnings.empty());
}

TEST_CASE("A2 degenerate choice K == K_AS yields an all-zero wire value and a warning") {
    const uint64_t seed = 4;
    SchemeConfig cfg = SchemeConfig::defaults_for(Scheme::A2);
    // Recompute what the one-time key will be, then force the session key to it.
    SeededRng probe(seed);
    Bytes ltk = draw_long_term_key(probe, "A", "S", cfg.key_bytes);
    Bytes nonce = probe.draw_labeled("nonce:0", cfg.key_bytes);
    KdfContext ctx{nonce, {}, "otk"};
    cfg.forced_session_key = kdf_derive(ltk, ctx, cfg.kdf);

    ScenarioResult result = run_scenario(cfg, seed);
    CHECK(result.parties.at("A").status == Status::Accepted);
    CHECK(result.parties.at("A").accepted_key == cfg.forced_session_key);
    bool zero_payload_seen = false;
    for (const auto& ev : result.transcript.events)
        if (ev.env.kind == MsgKind::Protocol && is_all_zero(ev.final_payload)) zero_payload_seen = true;
    CHECK(zero_payload_seen);
    CHECK(!result.transcript.warnings.empty());
}

TEST_CASE("A3 three-party: equal group keys and recoverable pair keys") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A3_3), 10);
    check_all_agree(result);
    const PartyState& a = result.parties.at("A");
    const PartyState& b = result.parties.at("B");
    // B's view of K_AC comes from the broadcast by involution
    Bytes broadcast;
    for (const auto& ev : result.transcript.events)
        if (ev.env.kind == MsgKind::Broadcast) broadcast = ev.final_payload;
    REQUIRE(!broadcast.empty());
    CHECK(xor_combine(broadcast, b.one_time_keys.at("A")) == a.one_time_keys.at("C"));
    CHECK(broadcast == xor_combine(a.one_time_keys.at("B"), a.one_time_keys.at("C")));
}

TEST_CASE("A3 group key never equals either pair key or the public broadcast") {
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A3_3), seed);
        const PartyState& a = result.parties.at("A");
        const Bytes& group = *a.accepted_key;
        const Bytes& k_ab = a.one_time_keys.at("B");
        const Bytes& k_ac = a.one_time_keys.at("C");
        if (group == k_ab || group == k_ac || group == xor_combine(k_ab, k_ac))
            FAIL("group key collided with public or pair material at seed ", seed);
    }
}

TEST_CASE("tree with n=3 degenerates to the three-party scheme") {
    ScenarioResult tree = run_scenario(SchemeConfig::defaults_for(Scheme::A3_Tree, 3), 21);
    ScenarioResult flat = run_scenario(SchemeConfig::defaults_for(Scheme::A3_3), 21);
    for (const auto& [id, st] : flat.parties) {
        CHECK(tree.parties.at(id).status == st.status);
        CHECK(tree.parties.at(id).accepted_key == st.accepted_key);
    }
}

TEST_CASE("tree with n=7: all keys equal, message count matches the schedule") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A3_Tree, 7), 33);
    CHECK(result.parties.size() == 7);
    check_all_agree(result);
    // schedule: n-1 setups, 2 combine copies to the root's children, n-3 re-masks
    CHECK(count_kind(result.transcript, MsgKind::Setup) == 6);
    CHECK(count_kind(result.transcript, MsgKind::Protocol) == 6);
}

TEST_CASE("tree with n=4 (unbalanced): every mask recomputable from the transcript") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A3_Tree, 4), 12);
    check_all_agree(result);

    const Transcript& t = result.transcript;
    auto view = SetupInfo::decode(from_hex(t.announcements.at("0")));
    REQUIRE(view.has_value());
    KdfSpec spec{kdf_algorithm_from_name(t.kdf), t.key_bytes};
    KdfContext otk_ctx{view->nonce, {}, "otk"};
    KdfContext group_ctx{view->nonce, {}, "group"};
    auto otk = [&](const std::string& other) {
        return kdf_derive(from_hex(t.long_term_keys.at(pair_key("A", other))), otk_ctx, spec);
    };
    Bytes combine = xor_combine(otk("B"), otk("C"));
    Bytes group = kdf_derive(concat(otk("B"), otk("C")), group_ctx, spec);
    for (const auto& ev : t.events) {
        if (ev.env.kind != MsgKind::Protocol) continue;
        if (ev.final_receiver == "B" || ev.final_receiver == "C") {
            CHECK(ev.final_payload == combine);
        } else {
            CHECK(ev.final_payload == xor_combine(group, otk("D")));
        }
    }
    CHECK(result.parties.at("D").accepted_key == group);
}

TEST_CASE("tree needs at least three parties") {
    SchemeConfig cfg;
    cfg.scheme = Scheme::A3_Tree;
    cfg.parties = {"A", "B"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("A4 honest run: all three accept the initiator-pair key") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A4), 6);
    check_all_agree(result);
    const PartyState& a = result.parties.at("A");
    CHECK(*result.parties.at("C").accepted_key == a.one_time_keys.at("B"));
}

TEST_CASE("A4 rejects a single-sided corruption but accepts a dual equal mask") {
    AttackOptions opts;

    // one-sided: masking either single message breaks the consistency check
    class OneSided : public AdversaryStrategy {
    public:
        explicit OneSided(PartyId sender) : sender_(std::move(sender)) {}
        AdversaryAction on_envelope(const Envelope& env) override {
            if (env.kind == MsgKind::Protocol && env.receiver == "C" &&
                env.claimed_sender == sender_) {
                Bytes forged = env.payload;
                forged[0] ^= 0x5a;
                return AdversaryAction::modify(std::move(forged));
            }
            return AdversaryAction::deliver();
        }

    private:
        PartyId sender_;
    };
    for (const PartyId& victim_message : {PartyId("A"), PartyId("B")}) {
        OneSided one_sided(victim_message);
        ScenarioResult corrupted =
            run_scenario(SchemeConfig::defaults_for(Scheme::A4), 6, &one_sided);
        CHECK(corrupted.parties.at("C").status == Status::Rejected);
        CHECK(corrupted.parties.at("C").cause == RejectCause::ConsistencyMismatch);
        CHECK(corrupted.parties.at("A").status == Status::Accepted);  // initiators never learn
    }

    // dual equal mask: part of the attack catalog, C accepts the shifted key
    AttackOutcome dual = run_attack(AttackId::A4Mask, Scheme::A4, 6, opts);
    CHECK(dual.verdict.success);
    const PartyState& c = dual.parties.at("C");
    const PartyState& a = dual.parties.at("A");
    Bytes mask = from_hex(dual.transcript.adversary_values.at("mask"));
    CHECK(*c.accepted_key == xor_combine(*a.accepted_key, mask));
}

TEST_CASE("A4F honest run accepts with valid tags") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A4F), 6);
    check_all_agree(result);
    // wire payloads carry a tag after the masked value
    for (const auto& ev : result.transcript.events)
        if (ev.env.kind == MsgKind::Protocol) CHECK(ev.final_payload.size() == 16 + 32);
}

TEST_CASE("B1 transcript equals the A3 three-party transcript modulo the scheme tag") {
    std::string b1 = run_scenario(SchemeConfig::defaults_for(Scheme::B1), 14).transcript.to_jsonl();
    std::string a3 = run_scenario(SchemeConfig::defaults_for(Scheme::A3_3), 14).transcript.to_jsonl();
    size_t tag = b1.find("\"B1\"");
    REQUIRE(tag != std::string::npos);
    b1.replace(tag, 4, "\"A3_3\"");
    CHECK(b1 == a3);
}

TEST_CASE("B2V1 with n=4 runs three star sub-sessions distributing one key") {
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::B2V1, 4), 15);
    check_all_agree(result);
    CHECK(count_kind(result.transcript, MsgKind::Setup) == 3);
    CHECK(count_kind(result.transcript, MsgKind::Protocol) == 3);

    // recompute every mask from the transcript alone
    const Transcript& t = result.transcript;
    auto view = SetupInfo::decode(from_hex(t.announcements.at("0")));
    REQUIRE(view.has_value());
    Bytes group = from_hex(t.session_values.at("session_key:0"));
    KdfSpec spec{kdf_algorithm_from_name(t.kdf), t.key_bytes};
    KdfContext ctx{view->nonce, {}, "otk"};
    for (const auto& ev : t.events) {
        if (ev.env.kind != MsgKind::Protocol) continue;
        Bytes otk = kdf_derive(from_hex(t.long_term_keys.at(pair_key(ev.final_receiver, "S"))), ctx, spec);
        CHECK(ev.final_payload == xor_combine(group, otk));
        CHECK(*result.parties.at(ev.final_receiver).accepted_key == group);
    }
}

TEST_CASE("B2V2 matches the tree scheme seed for seed") {
    ScenarioResult b2 = run_scenario(SchemeConfig::defaults_for(Scheme::B2V2, 7), 44);
    ScenarioResult tree = run_scenario(SchemeConfig::defaults_for(Scheme::A3_Tree, 7), 44);
    for (const auto& [id, st] : tree.parties) {
        CHECK(b2.parties.at(id).status == st.status);
        CHECK(b2.parties.at(id).accepted_key == st.accepted_key);
    }
}

TEST_CASE("honest-run agreement holds across schemes and seeds") {
    std::vector<SchemeConfig> configs;
    for (Scheme s : {Scheme::A1, Scheme::A1F, Scheme::A2, Scheme::A3_3, Scheme::A4, Scheme::A4F,
                     Scheme::B1})
        configs.push_back(SchemeConfig::defaults_for(s));
    for (size_t n = 3; n <= 8; ++n) configs.push_back(SchemeConfig::defaults_for(Scheme::A3_Tree, n));
    configs.push_back(SchemeConfig::defaults_for(Scheme::B2V1, 4));
    configs.push_back(SchemeConfig::defaults_for(Scheme::B2V2, 7));

    for (const auto& cfg : configs)
        for (uint64_t seed = 0; seed < 50; ++seed) {
            ScenarioResult result = run_scenario(cfg, seed);
            const PartyState& first = result.parties.begin()->second;
            for (const auto& [id, st] : result.parties) {
                if (st.status != Status::Accepted || !st.accepted_key ||
                    !ct_equal(*st.accepted_key, *first.accepted_key))
                    FAIL("disagreement in ", scheme_name(cfg.scheme), " seed ", seed, " party ", id);
            }
        }
}

TEST_CASE("one-time keys are fresh across distinct nonces (bit-exact, toy mixer)") {
    KeyBytes ltk = from_hex("101112131415161718191a1b1c1d1e1f");
    KdfSpec spec{KdfAlgorithm::ToyMix, 16};
    Bytes n1(16, 0x01), n2(16, 0x02);
    CHECK(kdf_derive(ltk, {n1, {}, "otk"}, spec) != kdf_derive(ltk, {n2, {}, "otk"}, spec));
}

TEST_CASE("masked-value publicity: the auditor recomputes every honest payload") {
    for (Scheme s : {Scheme::A1, Scheme::A1F, Scheme::A2, Scheme::A3_3, Scheme::A3_Tree,
                     Scheme::A4, Scheme::A4F, Scheme::B1, Scheme::B2V1, Scheme::B2V2}) {
        ScenarioResult result = run_scenario(SchemeConfig::defaults_for(s), 23);
        AuditResult audit = audit_transcript(result.transcript);
        INFO(scheme_name(s), ": ", audit.message);
        CHECK(audit.ok);
    }
}

TEST_CASE("a missing long-term key rejects with MISSING_KEY") {
    SchemeConfig cfg = SchemeConfig::defaults_for(Scheme::A1);
    Fabric fabric;
    fabric.transcript().scheme = "A1";
    SeededRng rng(1);
    NonceLedger ledger;
    auto ltks = provision_long_term_keys(cfg, rng, fabric.transcript());
    ltks.erase(pair_key("B", "C"));  // the center cannot derive B's one-time key
    Session session(fabric, rng, ledger, cfg, 0, ltks);
    session.register_parties();
    session.start();
    fabric.run_until_quiescent();
    auto states = session.finalize();
    CHECK(states.at("C").status == Status::Rejected);
    CHECK(states.at("C").cause == RejectCause::MissingKey);
}

TEST_CASE("a wrong-length masked value rejects with LENGTH_MISMATCH") {
    class Truncate : public AdversaryStrategy {
    public:
        AdversaryAction on_envelope(const Envelope& env) override {
            if (env.kind == MsgKind::Protocol)
                return AdversaryAction::modify(Bytes(env.payload.begin(), env.payload.begin() + 3));
            return AdversaryAction::deliver();
        }
    } truncate;
    ScenarioResult result = run_scenario(SchemeConfig::defaults_for(Scheme::A2), 2, &truncate);
    CHECK(result.parties.at("A").status == Status::Rejected);
    CHECK(result.parties.at("A").cause == RejectCause::LengthMismatch);
}

TEST_CASE("an honest party refuses to reuse a nonce") {
    SchemeConfig cfg = SchemeConfig::defaults_for(Scheme::A1);
    Fabric fabric;
    SeededRng rng(5);
    NonceLedger ledger;
    auto ltks = provision_long_term_keys(cfg, rng, fabric.transcript());
    Session session(fabric, rng, ledger, cfg, 0, ltks);
    session.register_parties();
    SetupInfo info{0, {"A", "B"}, {}, "C", rng.draw_labeled("nonce:x", 16)};
    fabric.inject("C", "A", MsgKind::Setup, info.encode());
    info.session = 1;  // a second session asking A to reuse the same nonce
    fabric.inject("C", "A", MsgKind::Setup, info.encode());
    fabric.run_until_quiescent();
    auto states = session.finalize();
    CHECK(states.at("A").status == Status::Rejected);
    CHECK(states.at("A").cause == RejectCause::NonceReuse);
}

TEST_CASE("scheme config arity validation") {
    SchemeConfig cfg;
    cfg.scheme = Scheme::A1;
    cfg.parties = {"A", "B", "X"};
    cfg.center = "C";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.parties = {"A", "A"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.parties = {"A", "C"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);  // center listed among parties
    cfg.parties = {"A", "B"};
    CHECK_NOTHROW(cfg.validate());
    CHECK_THROWS_AS(SchemeConfig::defaults_for(Scheme::A3_Tree, 27), ConfigError);
}

TEST_CASE("scenario files load and validate") {
    std::optional<uint64_t> seed;
    SchemeConfig cfg = SchemeConfig::from_json_text(
        R"({"scheme":"A1","parties":["A","B"],"center":"C","seed":42,"key_bytes":16,"kdf":"TOY_MIX"})",
        seed);
    CHECK(cfg.scheme == Scheme::A1);
    CHECK(seed == 42);
    CHECK(cfg.kdf.algorithm == KdfAlgorithm::ToyMix);
    ScenarioResult result = run_scenario(cfg, *seed);
    CHECK(result.parties.at("A").status == Status::Accepted);

    CHECK_THROWS_AS(SchemeConfig::from_json_text("{not json", seed), ConfigError);
    CHECK_THROWS_AS(SchemeConfig::from_json_text(R"({"scheme":"NOPE","parties":["A"]})", seed),
                    ConfigError);
    CHECK_THROWS_AS(SchemeConfig::from_json_text(R"({"scheme":"A1","parties":["A"]})", seed),
                    ConfigError);
}
