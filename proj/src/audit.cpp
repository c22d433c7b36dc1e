#include "keylab/audit.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "keylab/errors.hpp"
#include "keylab/kdf.hpp"
#include "keylab/mac.hpp"
#include "keylab/protocols.hpp"

namespace keylab {

namespace {

struct Auditor {
    const Transcript& t;
    Scheme scheme;
    KdfSpec kdf;
    bool binds;
    bool macs;
    std::map<std::string, KeyBytes> ltks;  // pair -> key
    std::vector<SetupInfo> views;
    std::vector<Bytes> pool;       // candidate values payloads are XORed from
    std::vector<Bytes> adv_pool;   // adversary-chosen values (mask variants)

    explicit Auditor(const Transcript& transcript) : t(transcript) {
        scheme = scheme_from_name(t.scheme);
        kdf.algorithm = kdf_algorithm_from_name(t.kdf);
        kdf.output_length = t.key_bytes;
        binds = scheme_binds_identities(scheme);
        macs = scheme_macs_messages(scheme);
        for (const auto& [pair, hex] : t.long_term_keys) ltks[pair] = from_hex(hex);
    }

    const KeyBytes* ltk(const PartyId& a, const PartyId& b) const {
        auto it = ltks.find(pair_key(a, b));
        return it == ltks.end() ? nullptr : &it->second;
    }

    KdfContext context(const SetupInfo& view, const std::string& label) const {
        KdfContext ctx;
        ctx.nonce = view.nonce;
        if (binds) ctx.bound_identities = view.principal_ids();
        ctx.label = label;
        return ctx;
    }

    void add_pool(const Bytes& value) {
        if (std::find(pool.begin(), pool.end(), value) == pool.end()) pool.push_back(value);
    }

    void collect_views_and_pool() {
        std::set<Bytes> seen;
        for (const auto& ev : t.events) {
            if (ev.env.kind != MsgKind::Setup) continue;
            if (!seen.insert(ev.final_payload).second) continue;
            auto info = SetupInfo::decode(ev.final_payload);
            if (info) views.push_back(*info);
        }

        for (const auto& view : views) {
            // Every one-time key any principal could have derived under this view.
            for (const auto& [pair, key] : ltks) {
                (void)pair;
                add_pool(kdf_derive(key, context(view, "otk"), kdf));
            }
            // Group keys for the combine-based schemes are derivable too.
            bool grouped = scheme == Scheme::A3_3 || scheme == Scheme::B1 ||
                           scheme == Scheme::A3_Tree || scheme == Scheme::B2V2;
            if (grouped && !view.initiators.empty() && view.participants.size() >= 3) {
                const PartyId& init = view.initiators[0];
                std::vector<PartyId> members;
                for (const auto& p : view.participants)
                    if (p != init) members.push_back(p);
                const KeyBytes* l0 = ltk(init, members[0]);
                const KeyBytes* l1 = ltk(init, members[1]);
                if (l0 && l1) {
                    KeyBytes otk0 = kdf_derive(*l0, context(view, "otk"), kdf);
                    KeyBytes otk1 = kdf_derive(*l1, context(view, "otk"), kdf);
                    add_pool(kdf_derive(concat(otk0, otk1), context(view, "group"), kdf));
                }
            }
        }

        auto add_hex = [&](const std::string& hex, bool adversary) {
            try {
                Bytes v = from_hex(hex);
                if (v.size() != t.key_bytes) return;
                add_pool(v);
                if (adversary) adv_pool.push_back(v);
            } catch (const std::invalid_argument&) {
                // non-key meta entry (e.g. a decimal shift); not pool material
            }
        };
        for (const auto& [name, hex] : t.session_values) {
            (void)name;
            add_hex(hex, false);
        }
        for (const auto& [name, hex] : t.adversary_values) {
            (void)name;
            add_hex(hex, true);
        }
    }

    bool explained_by_pool(const Bytes& body) const {
        std::vector<const Bytes*> sized;
        for (const auto& v : pool)
            if (v.size() == body.size()) sized.push_back(&v);
        for (size_t i = 0; i < sized.size(); ++i)
            for (size_t j = i + 1; j < sized.size(); ++j)
                if (ct_equal(body, xor_combine(*sized[i], *sized[j]))) return true;
        for (size_t i = 0; i < sized.size(); ++i)
            for (size_t j = i + 1; j < sized.size(); ++j) {
                Bytes partial = xor_combine(*sized[i], *sized[j]);
                for (size_t k = j + 1; k < sized.size(); ++k)
                    if (ct_equal(body, xor_combine(partial, *sized[k]))) return true;
            }
        return false;
    }

    bool tag_explained(const Bytes& body, const Tag& tag) const {
        std::vector<Bytes> bodies = {body};
        for (const auto& adv : adv_pool)
            if (adv.size() == body.size()) bodies.push_back(xor_combine(body, adv));
        for (const auto& view : views) {
            KdfContext mctx;
            mctx.nonce = view.nonce;
            mctx.bound_identities = view.principal_ids();
            mctx.label = "a4f-mac";
            Bytes suffix = mctx.serialize();
            for (const auto& candidate : bodies) {
                Bytes msg = concat(candidate, suffix);
                for (const auto& key : pool)
                    if (key.size() == t.key_bytes && ct_equal(mac_tag(key, msg), tag)) return true;
            }
        }
        return false;
    }

    AuditResult fail(uint64_t seq, const std::string& message) const {
        return AuditResult{false, seq, message};
    }

    AuditResult check_events() const {
        for (const auto& ev : t.events) {
            if (ev.env.kind == MsgKind::Setup) {
                auto info = SetupInfo::decode(ev.final_payload);
                if (!info) return fail(ev.env.seq, "unparseable SETUP payload");
                // Honest setups must match the announced session parameters;
                // MODIFY/INJECT events are adversarial by record.
                if (ev.action == "DELIVER" || ev.action == "DROP") {
                    auto it = t.announcements.find(std::to_string(info->session));
                    if (it == t.announcements.end())
                        return fail(ev.env.seq, "honest SETUP with no recorded announcement");
                    if (to_hex(ev.final_payload) != it->second)
                        return fail(ev.env.seq, "SETUP payload differs from announced parameters");
                }
                continue;
            }

            Bytes body = ev.final_payload;
            std::optional<Tag> tag;
            if (macs) {
                if (body.size() != t.key_bytes + kMacTagLength)
                    return fail(ev.env.seq, "unexpected payload length for authenticated scheme");
                tag = Tag(body.begin() + static_cast<long>(t.key_bytes), body.end());
                body.resize(t.key_bytes);
            } else if (body.size() != t.key_bytes) {
                return fail(ev.env.seq, "unexpected payload length");
            }

            if (!explained_by_pool(body))
                return fail(ev.env.seq, "payload not reconstructible from recorded key material");
            if (tag && !tag_explained(body, *tag))
                return fail(ev.env.seq, "tag not reproducible from recorded key material");
        }
        return AuditResult{true, 0, "all events verified"};
    }

    // --- evidence recomputation ---------------------------------------------

    std::optional<SetupInfo> last_setup_to(const PartyId& who) const {
        std::optional<SetupInfo> out;
        for (const auto& ev : t.events)
            if (ev.env.kind == MsgKind::Setup && ev.delivered && ev.final_receiver == who)
                if (auto info = SetupInfo::decode(ev.final_payload)) out = info;
        return out;
    }

    std::vector<Bytes> masked_to(const PartyId& who, const PartyId& claimed_from) const {
        std::vector<Bytes> out;
        for (const auto& ev : t.events)
            if (ev.env.kind != MsgKind::Setup && ev.delivered && ev.final_receiver == who &&
                ev.env.claimed_sender == claimed_from)
                out.push_back(ev.final_payload);
        return out;
    }

    Bytes strip(const Bytes& payload) const {
        return Bytes(payload.begin(), payload.begin() + static_cast<long>(t.key_bytes));
    }

    // Masked-key recovery as the receiving participant would do it, from the
    // transcript and long-term keys only.
    std::optional<KeyBytes> recompute_participant(const PartyId& who) const {
        auto view = last_setup_to(who);
        if (!view) return std::nullopt;
        const KeyBytes* lt = ltk(who, view->center);
        if (!lt) return std::nullopt;
        auto payloads = masked_to(who, view->center);
        if (payloads.empty()) return std::nullopt;
        KeyBytes otk = kdf_derive(*lt, context(*view, "otk"), kdf);
        return xor_combine(strip(payloads.back()), otk);
    }

    std::optional<KeyBytes> recompute_a3_member(const PartyId& who) const {
        auto view = last_setup_to(who);
        if (!view || view->initiators.empty()) return std::nullopt;
        const PartyId& init = view->initiators[0];
        const KeyBytes* lt = ltk(who, init);
        if (!lt) return std::nullopt;
        auto payloads = masked_to(who, init);
        if (payloads.empty()) return std::nullopt;
        KeyBytes own = kdf_derive(*lt, context(*view, "otk"), kdf);
        KeyBytes other = xor_combine(strip(payloads.back()), own);
        std::vector<PartyId> members;
        for (const auto& p : view->participants)
            if (p != init) members.push_back(p);
        if (members.size() != 2) return std::nullopt;
        KeyBytes first = members[0] == who ? own : other;
        KeyBytes second = members[0] == who ? other : own;
        return kdf_derive(concat(first, second), context(*view, "group"), kdf);
    }

    struct A4View {
        KeyBytes k1, k2;
    };
    std::optional<A4View> recompute_a4_third(const PartyId& who) const {
        auto view = last_setup_to(who);
        if (!view || view->initiators.size() != 2) return std::nullopt;
        A4View out;
        for (int i = 0; i < 2; ++i) {
            const PartyId& init = view->initiators[static_cast<size_t>(i)];
            const KeyBytes* lt = ltk(who, init);
            if (!lt) return std::nullopt;
            auto payloads = masked_to(who, init);
            if (payloads.empty()) return std::nullopt;
            KeyBytes version = kdf_derive(*lt, context(*view, "otk"), kdf);
            KeyBytes k = xor_combine(strip(payloads.back()), version);
            (i == 0 ? out.k1 : out.k2) = k;
        }
        return out;
    }

    bool evidence_hex_is(const char* field, const KeyBytes& value) const {
        return t.evidence.contains(field) &&
               t.evidence[field].get<std::string>() == to_hex(value);
    }

    AuditResult check_evidence() const {
        if (t.attack.empty() || t.evidence.is_null()) return AuditResult{true, 0, ""};
        if (!t.evidence.value("success", false)) return AuditResult{true, 0, ""};

        auto bad = [&](const std::string& msg) { return AuditResult{false, 0, "evidence: " + msg}; };

        if (t.attack == "ATK_A1_IDCONF") {
            auto a = recompute_participant("A");
            auto d = recompute_participant("D");
            if (!a || !d) return bad("could not recompute accepted keys");
            if (!ct_equal(*a, *d)) return bad("victim and holder keys differ on recomputation");
            if (!evidence_hex_is("victim_accepted_hex", *a)) return bad("victim key claim mismatch");
            if (!evidence_hex_is("holder_accepted_hex", *d)) return bad("holder key claim mismatch");
            return AuditResult{true, 0, ""};
        }
        if (t.attack == "ATK_A1_MITM") {
            auto a = recompute_participant("A");
            auto b = recompute_participant("B");
            if (!a || !b) return bad("could not recompute accepted keys");
            if (!evidence_hex_is("a_accepted_hex", *a)) return bad("A key claim mismatch");
            if (!evidence_hex_is("b_accepted_hex", *b)) return bad("B key claim mismatch");
            auto x0 = t.adversary_values.find("extracted_key:0");
            auto x1 = t.adversary_values.find("extracted_key:1");
            if (x0 == t.adversary_values.end() || x1 == t.adversary_values.end())
                return bad("missing extracted keys");
            if (from_hex(x0->second) != *a || from_hex(x1->second) != *b)
                return bad("extracted keys do not match accepted keys");
            return AuditResult{true, 0, ""};
        }
        if (t.attack == "ATK_A2_TAMPER") {
            auto a = recompute_participant("A");
            if (!a) return bad("could not recompute accepted key");
            if (!evidence_hex_is("accepted_hex", *a)) return bad("accepted key claim mismatch");
            auto issued = t.session_values.find("session_key:0");
            auto mask = t.adversary_values.find("mask");
            if (issued == t.session_values.end() || mask == t.adversary_values.end())
                return bad("missing issued key or mask");
            if (*a != xor_combine(from_hex(issued->second), from_hex(mask->second)))
                return bad("accepted key is not issued xor mask");
            return AuditResult{true, 0, ""};
        }
        if (t.attack == "ATK_A3_IDCONF") {
            auto a = recompute_a3_member("A");
            auto c = recompute_a3_member("C");
            if (!a || !c) return bad("could not recompute group keys");
            if (!ct_equal(*a, *c)) return bad("group keys differ on recomputation");
            if (!evidence_hex_is("victim_accepted_hex", *a)) return bad("victim key claim mismatch");
            return AuditResult{true, 0, ""};
        }
        if (t.attack == "ATK_A4_MASK") {
            auto view = recompute_a4_third("C");
            if (!view) return bad("could not recompute C's unmaskings");
            if (!ct_equal(view->k1, view->k2)) return bad("recomputed versions disagree");
            if (!evidence_hex_is("c_accepted_hex", view->k1)) return bad("C key claim mismatch");
            auto mask = t.adversary_values.find("mask");
            if (mask == t.adversary_values.end()) return bad("missing mask");
            if (!t.evidence.contains("honest_group_key_hex")) return bad("missing honest key claim");
            Bytes honest = from_hex(t.evidence["honest_group_key_hex"].get<std::string>());
            if (view->k1 != xor_combine(honest, from_hex(mask->second)))
                return bad("accepted key is not honest key xor mask");
            return AuditResult{true, 0, ""};
        }
        if (t.attack == "ATK_A4_NONCE") {
            auto view = recompute_a4_third("C");
            if (!view) return bad("could not recompute C's unmaskings");
            if (!ct_equal(view->k1, view->k2)) return bad("recomputed versions disagree");
            auto kstar = t.adversary_values.find("kstar");
            if (kstar == t.adversary_values.end()) return bad("missing kstar");
            if (view->k1 != from_hex(kstar->second))
                return bad("C's recomputed key is not the adversary's kstar");
            if (!evidence_hex_is("c_accepted_hex", view->k1)) return bad("C key claim mismatch");
            return AuditResult{true, 0, ""};
        }
        return bad("unknown attack tag " + t.attack);
    }
};

}  // namespace

AuditResult audit_transcript(const Transcript& transcript) {
    Auditor auditor(transcript);  // throws ConfigError for unsupported scheme tags
    auditor.collect_views_and_pool();
    AuditResult events = auditor.check_events();
    if (!events.ok) return events;
    AuditResult evidence = auditor.check_evidence();
    if (!evidence.ok) return evidence;
    return AuditResult{true, 0, "transcript verified"};
}

AuditResult audit_jsonl(const std::string& text) {
    return audit_transcript(Transcript::from_jsonl(text));
}

}  // namespace keylab
