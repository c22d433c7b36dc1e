#include "keylab/smpc.hpp"

#include "keylab/errors.hpp"
#include "keylab/rng.hpp"

namespace keylab {
namespace smpc {

using nlohmann::ordered_json;

std::string group_mode_name(GroupMode m) {
    switch (m) {
        case GroupMode::AdditiveModN: return "ADDITIVE_MOD_N";
        case GroupMode::MultiplicativeModP: return "MULTIPLICATIVE_MOD_P";
        case GroupMode::IntegerLeaky: return "INTEGER_LEAKY";
    }
    return "?";
}

GroupMode group_mode_from_name(const std::string& name) {
    if (name == "ADDITIVE_MOD_N") return GroupMode::AdditiveModN;
    if (name == "MULTIPLICATIVE_MOD_P") return GroupMode::MultiplicativeModP;
    if (name == "INTEGER_LEAKY") return GroupMode::IntegerLeaky;
    throw ConfigError("unknown group mode: " + name);
}

bool is_prime_trial_division(uint64_t n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    for (uint64_t d = 3; d * d <= n; d += 2)
        if (n % d == 0) return false;
    return true;
}

void GroupSpec::validate() const {
    switch (mode) {
        case GroupMode::AdditiveModN:
            if (modulus < 2) throw ConfigError("additive mode needs modulus >= 2");
            break;
        case GroupMode::MultiplicativeModP:
            if (!is_prime_trial_division(modulus))
                throw ConfigError("multiplicative mode needs a prime modulus");
            break;
        case GroupMode::IntegerLeaky:
            if (modulus < 1) throw ConfigError("integer mode needs a key range bound n >= 1");
            break;
    }
}

bool GroupSpec::element_ok(int64_t v) const {
    switch (mode) {
        case GroupMode::AdditiveModN: return v >= 0 && static_cast<uint64_t>(v) < modulus;
        case GroupMode::MultiplicativeModP: return v >= 1 && static_cast<uint64_t>(v) < modulus;
        case GroupMode::IntegerLeaky: return v >= 0;
    }
    return false;
}

int64_t g_reduce(const GroupSpec& spec, int64_t v) {
    if (spec.mode == GroupMode::IntegerLeaky) return v;
    int64_t n = static_cast<int64_t>(spec.modulus);
    int64_t r = v % n;
    return r < 0 ? r + n : r;
}

int64_t g_add(const GroupSpec& spec, int64_t a, int64_t b) {
    if (spec.mode == GroupMode::IntegerLeaky) return a + b;
    return g_reduce(spec, g_reduce(spec, a) + g_reduce(spec, b));
}

int64_t g_sub(const GroupSpec& spec, int64_t a, int64_t b) {
    if (spec.mode == GroupMode::IntegerLeaky) return a - b;
    return g_reduce(spec, g_reduce(spec, a) - g_reduce(spec, b));
}

int64_t g_mul(const GroupSpec& spec, int64_t a, int64_t b) {
    if (spec.mode != GroupMode::MultiplicativeModP)
        throw ConfigError("multiplication defined only in multiplicative mode");
    unsigned __int128 prod = static_cast<unsigned __int128>(g_reduce(spec, a)) *
                             static_cast<unsigned __int128>(g_reduce(spec, b));
    return static_cast<int64_t>(prod % spec.modulus);
}

int64_t g_inv(const GroupSpec& spec, int64_t a) {
    if (spec.mode != GroupMode::MultiplicativeModP)
        throw ConfigError("inverses defined only in multiplicative mode");
    int64_t v = g_reduce(spec, a);
    if (v == 0) throw ConfigError("zero has no multiplicative inverse");
    // Fermat: a^(p-2) mod p.
    uint64_t result = 1, base = static_cast<uint64_t>(v), exp = spec.modulus - 2;
    while (exp > 0) {
        if (exp & 1) result = static_cast<uint64_t>((static_cast<unsigned __int128>(result) * base) % spec.modulus);
        base = static_cast<uint64_t>((static_cast<unsigned __int128>(base) * base) % spec.modulus);
        exp >>= 1;
    }
    return static_cast<int64_t>(result);
}

bool MaskingPlan::telescopes() const {
    std::map<std::string, int> totals;
    std::map<std::string, int> uses;
    for (const auto& [party, keys] : assignments) {
        (void)party;
        for (const auto& [name, sign] : keys) {
            if (sign != 1 && sign != -1) return false;
            totals[name] += sign;
            uses[name] += 1;
        }
    }
    for (const auto& [name, total] : totals)
        if (total != 0 || uses[name] != 2) return false;
    return true;
}

MaskingPlan MaskingPlan::three_party_sum() {
    MaskingPlan plan;
    plan.assignments["A"] = {{"AB", 1}, {"AC", 1}};
    plan.assignments["B"] = {{"AB", -1}, {"BC", 1}};
    plan.assignments["C"] = {{"AC", -1}, {"BC", -1}};
    return plan;
}

void KeyUsageLedger::use(const std::string& name, int64_t value) {
    std::string id = name + ":" + std::to_string(value);
    if (!used_.insert(id).second)
        throw KeyReuseError("pairwise key " + name + " offered twice; one-time keys are single-use");
}

Instance Instance::from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("instance parse error: ") + e.what());
    }
    Instance inst;
    try {
        inst.spec.mode = group_mode_from_name(j.at("mode").get<std::string>());
        inst.spec.modulus = j.at("n").get<uint64_t>();
        auto inputs = j.at("inputs").get<std::vector<int64_t>>();
        const char* names[] = {"A", "B", "C", "D"};
        if (inputs.size() < 3 || inputs.size() > 4) throw ConfigError("inputs must list 3 (or 4) values");
        for (size_t i = 0; i < inputs.size(); ++i) inst.inputs[names[i]] = inputs[i];
        for (const auto& [name, value] : j.at("keys").items())
            inst.keys[name] = value.get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("instance field error: ") + e.what());
    }
    inst.spec.validate();
    return inst;
}

ordered_json Instance::to_json() const {
    ordered_json j;
    j["mode"] = group_mode_name(spec.mode);
    j["n"] = spec.modulus;
    std::vector<int64_t> inputs;
    for (const char* name : {"A", "B", "C", "D"})
        if (this->inputs.count(name)) inputs.push_back(this->inputs.at(name));
    j["inputs"] = inputs;
    j["keys"] = keys;
    return j;
}

namespace {

int64_t need_input(const Instance& inst, const std::string& name) {
    auto it = inst.inputs.find(name);
    if (it == inst.inputs.end()) throw ConfigError("missing input for party " + name);
    return it->second;
}

int64_t need_key(const Instance& inst, const std::string& name) {
    auto it = inst.keys.find(name);
    if (it == inst.keys.end()) throw ConfigError("missing pairwise key " + name);
    return it->second;
}

void check_additive_instance(const Instance& inst, const std::vector<std::string>& key_names) {
    inst.spec.validate();
    for (const char* p : {"A", "B", "C"}) {
        int64_t d = need_input(inst, p);
        if (inst.spec.mode == GroupMode::IntegerLeaky) {
            if (d < 0) throw ConfigError("integer-mode inputs must be nonnegative");
        } else if (!inst.spec.element_ok(d)) {
            throw ConfigError(std::string("input for ") + p + " out of group range");
        }
    }
    for (const auto& name : key_names) {
        int64_t k = need_key(inst, name);
        // Keys always lie in [0, n-1]; in integer mode that range is exactly
        // what the leakage bound is about.
        if (k < 0 || static_cast<uint64_t>(k) >= inst.spec.modulus)
            throw ConfigError("key " + name + " outside [0, n-1]");
    }
}

struct Deltas {
    int64_t a, b, c;
};

Deltas compute_deltas(const Instance& inst, KeyUsageLedger& ledger) {
    check_additive_instance(inst, {"AB", "AC", "BC"});
    int64_t k_ab = need_key(inst, "AB"), k_ac = need_key(inst, "AC"), k_bc = need_key(inst, "BC");
    ledger.use("AB", k_ab);
    ledger.use("AC", k_ac);
    ledger.use("BC", k_bc);
    const GroupSpec& g = inst.spec;
    Deltas d;
    d.a = g_add(g, g_add(g, need_input(inst, "A"), k_ab), k_ac);
    d.b = g_add(g, g_sub(g, need_input(inst, "B"), k_ab), k_bc);
    d.c = g_sub(g, g_sub(g, need_input(inst, "C"), k_ac), k_bc);
    return d;
}

}  // namespace

Scheme1Result scheme1_run(const Instance& inst, KeyUsageLedger& ledger) {
    Deltas d = compute_deltas(inst, ledger);
    Scheme1Result r;
    r.deltas = {{"A", d.a}, {"B", d.b}, {"C", d.c}};
    r.sum = g_add(inst.spec, g_add(inst.spec, d.a, d.b), d.c);
    return r;
}

Scheme2Result scheme2_run(const Instance& inst, KeyUsageLedger& ledger) {
    Deltas d = compute_deltas(inst, ledger);
    Scheme2Result r;
    r.delta_a = d.a;
    r.delta_b = d.b;
    r.private_delta_c = d.c;
    r.c_sum = g_add(inst.spec, g_add(inst.spec, d.a, d.b), d.c);
    return r;
}

std::set<int64_t> scheme2_observer_candidates(const GroupSpec& spec, int64_t delta_a, int64_t delta_b) {
    if (spec.mode != GroupMode::AdditiveModN)
        throw ConfigError("observer enumeration implemented for the additive mode");
    if (spec.modulus > 64) throw ConfigError("observer enumeration is desk-scale (n <= 64)");
    std::set<int64_t> candidates;
    int64_t n = static_cast<int64_t>(spec.modulus);
    int64_t head = g_add(spec, delta_a, delta_b);
    for (int64_t d_c = 0; d_c < n; ++d_c)
        for (int64_t k_ac = 0; k_ac < n; ++k_ac)
            for (int64_t k_bc = 0; k_bc < n; ++k_bc)
                candidates.insert(g_add(spec, head, g_sub(spec, d_c, k_ac + k_bc)));
    return candidates;
}

Scheme3Result scheme3_run(const Instance& inst, KeyUsageLedger& ledger) {
    check_additive_instance(inst, {"AD", "BD", "CD"});
    Deltas d = compute_deltas(inst, ledger);
    int64_t k_ad = need_key(inst, "AD"), k_bd = need_key(inst, "BD"), k_cd = need_key(inst, "CD");
    ledger.use("AD", k_ad);
    ledger.use("BD", k_bd);
    ledger.use("CD", k_cd);

    const GroupSpec& g = inst.spec;
    Scheme3Result r;
    r.delta_stars = {{"A", g_add(g, d.a, k_ad)}, {"B", g_add(g, d.b, k_bd)}, {"C", g_add(g, d.c, k_cd)}};
    int64_t total = g_add(g, g_add(g, r.delta_stars["A"], r.delta_stars["B"]), r.delta_stars["C"]);
    r.d_sum = g_sub(g, g_sub(g, g_sub(g, total, k_ad), k_bd), k_cd);
    return r;
}

MultiplicativeResult multiplicative_run(const Instance& inst, KeyUsageLedger& ledger) {
    if (inst.spec.mode != GroupMode::MultiplicativeModP)
        throw ConfigError("multiplicative_run needs MULTIPLICATIVE_MOD_P");
    inst.spec.validate();
    for (const char* p : {"A", "B", "C"})
        if (!inst.spec.element_ok(need_input(inst, p)))
            throw ConfigError(std::string("input for ") + p + " outside [1, p-1]");
    for (const char* name : {"AB", "AC", "BC"})
        if (!inst.spec.element_ok(need_key(inst, name)))
            throw ConfigError(std::string("key ") + name + " outside [1, p-1]");

    int64_t k_ab = need_key(inst, "AB"), k_ac = need_key(inst, "AC"), k_bc = need_key(inst, "BC");
    ledger.use("AB", k_ab);
    ledger.use("AC", k_ac);
    ledger.use("BC", k_bc);

    const GroupSpec& g = inst.spec;
    MultiplicativeResult r;
    r.deltas["A"] = g_mul(g, g_mul(g, need_input(inst, "A"), k_ab), k_ac);
    r.deltas["B"] = g_mul(g, g_mul(g, need_input(inst, "B"), g_inv(g, k_ab)), k_bc);
    r.deltas["C"] = g_mul(g, g_mul(g, need_input(inst, "C"), g_inv(g, k_ac)), g_inv(g, k_bc));
    r.product = g_mul(g, g_mul(g, r.deltas["A"], r.deltas["B"]), r.deltas["C"]);
    return r;
}

int64_t leakage_bound(int64_t delta, uint64_t n) {
    int64_t ceiling = 2 * (static_cast<int64_t>(n) - 1);
    return delta > ceiling ? delta - ceiling : 0;
}

int64_t atk_output_control(const GroupSpec& spec, int64_t target,
                           const std::vector<int64_t>& observed_deltas,
                           const std::vector<std::pair<int64_t, int>>& controller_keys) {
    if (spec.mode != GroupMode::AdditiveModN)
        throw ConfigError("output control implemented for the additive mode");
    // sum = observed + d + sum(sign*key); solve for d.
    int64_t d = g_reduce(spec, target);
    for (int64_t obs : observed_deltas) d = g_sub(spec, d, obs);
    for (const auto& [key, sign] : controller_keys)
        d = sign > 0 ? g_sub(spec, d, key) : g_add(spec, d, key);
    return d;
}

namespace {

// Minimal broadcast party for the tamper demonstration: announce your own
// masked value, recover the sum once both peers reported.
struct BroadcastParty {
    std::string name;
    int64_t own_delta = 0;
    GroupSpec spec;
    std::map<std::string, int64_t> seen;
    bool done = false;
    int64_t sum = 0;

    void on_deliver(const Envelope& env) {
        auto j = nlohmann::json::parse(std::string(env.payload.begin(), env.payload.end()),
                                       nullptr, false);
        if (j.is_discarded() || !j.contains("party") || !j.contains("delta")) return;
        seen[j["party"].get<std::string>()] = j["delta"].get<int64_t>();
        if (seen.size() == 2) {
            sum = own_delta;
            for (const auto& [who, delta] : seen) {
                (void)who;
                sum = g_add(spec, sum, delta);
            }
            done = true;
        }
    }
};

class DeltaShiftStrategy : public AdversaryStrategy {
public:
    DeltaShiftStrategy(std::string sender, int64_t shift, GroupSpec spec)
        : sender_(std::move(sender)), shift_(shift), spec_(spec) {}

    AdversaryAction on_envelope(const Envelope& env) override {
        if (env.true_sender != sender_) return AdversaryAction::deliver();
        auto j = nlohmann::ordered_json::parse(std::string(env.payload.begin(), env.payload.end()),
                                               nullptr, false);
        if (j.is_discarded()) return AdversaryAction::deliver();
        j["delta"] = g_add(spec_, j["delta"].get<int64_t>(), shift_);
        std::string s = j.dump();
        return AdversaryAction::modify(Bytes(s.begin(), s.end()));
    }

private:
    std::string sender_;
    int64_t shift_;
    GroupSpec spec_;
};

}  // namespace

TamperOutcome atk_broadcast_tamper(const Instance& inst, int64_t delta, uint64_t seed) {
    KeyUsageLedger ledger;
    Scheme1Result honest = scheme1_run(inst, ledger);

    Fabric fabric;
    fabric.transcript().scheme = "SMPC1";
    fabric.transcript().seed = seed;
    fabric.transcript().attack = "ATK_SMPC_TAMPER";
    fabric.transcript().adversary_values["delta_shift"] = std::to_string(delta);

    DeltaShiftStrategy strategy("B", delta, inst.spec);
    fabric.set_adversary(&strategy, "E");

    std::map<std::string, BroadcastParty> parties;
    for (const char* name : {"A", "B", "C"})
        parties[name] = BroadcastParty{name, honest.deltas.at(name), inst.spec, {}, false, 0};
    for (auto& [name, party] : parties) {
        BroadcastParty* p = &party;
        fabric.register_party(name, [p](const Envelope& env) { p->on_deliver(env); });
    }
    for (auto& [name, party] : parties) {
        ordered_json j{{"party", name}, {"delta", party.own_delta}};
        std::string s = j.dump();
        fabric.broadcast(name, Bytes(s.begin(), s.end()));
    }
    fabric.run_until_quiescent();

    TamperOutcome out;
    out.honest_sum = honest.sum;
    out.delta = delta;
    out.observed_sum = parties["A"].sum;  // A received the tampered broadcast
    out.any_party_detected = false;       // nothing to detect with: no origin/integrity protection
    out.evidence = ordered_json{
        {"honest_sum", out.honest_sum},
        {"observed_sum", out.observed_sum},
        {"delta", delta},
        {"sum_for_sender", parties["B"].sum},
        {"all_parties_completed",
         parties["A"].done && parties["B"].done && parties["C"].done},
    };
    out.transcript = fabric.transcript();
    out.transcript.evidence = out.evidence;
    return out;
}

}  // namespace smpc
}  // namespace keylab
