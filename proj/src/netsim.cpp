#include "keylab/netsim.hpp"

#include "keylab/errors.hpp"

namespace keylab {

using nlohmann::ordered_json;

std::string msg_kind_name(MsgKind kind) {
    switch (kind) {
        case MsgKind::Setup: return "SETUP";
        case MsgKind::Protocol: return "PROTOCOL";
        case MsgKind::Broadcast: return "BROADCAST";
    }
    return "?";
}

MsgKind msg_kind_from_name(const std::string& name) {
    if (name == "SETUP") return MsgKind::Setup;
    if (name == "PROTOCOL") return MsgKind::Protocol;
    if (name == "BROADCAST") return MsgKind::Broadcast;
    throw ConfigError("unknown message kind: " + name);
}

void Fabric::register_party(const PartyId& id, std::function<void(const Envelope&)> handler) {
    parties_[id] = std::move(handler);
}

bool Fabric::is_registered(const PartyId& id) const { return parties_.count(id) > 0; }

void Fabric::set_adversary(AdversaryStrategy* strategy, PartyId adversary_id) {
    adversary_ = strategy;
    adversary_id_ = std::move(adversary_id);
}

void Fabric::enqueue(Envelope env) {
    env.seq = next_seq_++;
    queue_.push_back(std::move(env));
}

void Fabric::send(const PartyId& from, const PartyId& to, MsgKind kind, Bytes payload) {
    if (!is_registered(to)) throw ConfigError("send to unregistered party: " + to);
    ++sent_;
    enqueue(Envelope{0, from, from, to, kind, std::move(payload), false});
}

void Fabric::broadcast(const PartyId& from, Bytes payload) {
    for (const auto& [id, handler] : parties_) {
        (void)handler;
        if (id == from) continue;
        ++sent_;
        enqueue(Envelope{0, from, from, id, MsgKind::Broadcast, payload, false});
    }
}

void Fabric::inject(const PartyId& claimed_from, const PartyId& to, MsgKind kind, Bytes payload) {
    if (!is_registered(to)) throw ConfigError("inject to unregistered party: " + to);
    ++injected_;
    enqueue(Envelope{0, adversary_id_, claimed_from, to, kind, std::move(payload), true});
}

void Fabric::run_until_quiescent() {
    while (!queue_.empty()) {
        if (++processed_ > kEventLimit) throw ScenarioError("event limit exceeded (livelock?)");

        Envelope env = std::move(queue_.front());
        queue_.pop_front();

        TranscriptEvent event;
        event.env = env;
        event.final_payload = env.payload;
        event.final_receiver = env.receiver;

        AdversaryAction action = AdversaryAction::deliver();
        if (env.injected) {
            // The injection itself was the adversary's decision.
            event.action = "INJECT";
        } else if (adversary_ != nullptr) {
            action = adversary_->on_envelope(env);
            switch (action.kind) {
                case AdversaryAction::Kind::Deliver: event.action = "DELIVER"; break;
                case AdversaryAction::Kind::Drop: event.action = "DROP"; break;
                case AdversaryAction::Kind::Modify:
                    event.action = "MODIFY";
                    event.final_payload = action.new_payload;
                    break;
                case AdversaryAction::Kind::Redirect:
                    event.action = "REDIRECT";
                    event.final_receiver = action.new_receiver;
                    break;
            }
        } else {
            event.action = "DELIVER";
        }

        if (event.action == "DROP") {
            ++dropped_;
            event.delivered = false;
            transcript_.events.push_back(std::move(event));
            continue;
        }

        auto it = parties_.find(event.final_receiver);
        if (it == parties_.end()) throw ConfigError("delivery to unregistered party: " + event.final_receiver);

        ++delivered_;
        event.delivered = true;

        Envelope delivered = env;
        delivered.payload = event.final_payload;
        delivered.receiver = event.final_receiver;
        transcript_.events.push_back(event);

        it->second(delivered);
    }
}

std::string Transcript::to_jsonl() const {
    ordered_json meta;
    meta["scheme"] = scheme;
    meta["seed"] = seed;
    meta["key_bytes"] = key_bytes;
    meta["kdf"] = kdf;
    if (!attack.empty()) meta["attack"] = attack;
    meta["long_term_keys"] = long_term_keys;
    meta["session_values"] = session_values;
    meta["announcements"] = announcements;
    meta["adversary_values"] = adversary_values;
    if (!evidence.is_null()) meta["evidence"] = evidence;
    meta["warnings"] = warnings;

    std::string out;
    ordered_json header;
    header["meta"] = meta;
    out += header.dump();
    out += "\n";

    for (const auto& ev : events) {
        ordered_json line;
        line["seq"] = ev.env.seq;
        line["true_sender"] = ev.env.true_sender;
        line["claimed_sender"] = ev.env.claimed_sender;
        line["receiver"] = ev.env.receiver;
        line["kind"] = msg_kind_name(ev.env.kind);
        line["payload_hex"] = to_hex(ev.final_payload);
        line["action"] = ev.action;
        line["delivered"] = ev.delivered;
        out += line.dump();
        out += "\n";
    }
    return out;
}

Transcript Transcript::from_jsonl(const std::string& text) {
    Transcript t;
    size_t pos = 0;
    bool saw_meta = false;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;

        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("transcript parse error: ") + e.what());
        }

        if (j.contains("meta")) {
            const auto& m = j["meta"];
            t.scheme = m.value("scheme", "");
            t.seed = m.value("seed", uint64_t{0});
            t.key_bytes = m.value("key_bytes", size_t{16});
            t.kdf = m.value("kdf", "REFERENCE_KEYED_HASH");
            t.attack = m.value("attack", "");
            if (m.contains("long_term_keys"))
                t.long_term_keys = m["long_term_keys"].get<std::map<std::string, std::string>>();
            if (m.contains("session_values"))
                t.session_values = m["session_values"].get<std::map<std::string, std::string>>();
            if (m.contains("announcements"))
                t.announcements = m["announcements"].get<std::map<std::string, std::string>>();
            if (m.contains("adversary_values"))
                t.adversary_values = m["adversary_values"].get<std::map<std::string, std::string>>();
            if (m.contains("evidence")) t.evidence = m["evidence"];
            if (m.contains("warnings")) t.warnings = m["warnings"].get<std::vector<std::string>>();
            saw_meta = true;
            continue;
        }

        TranscriptEvent ev;
        try {
            ev.env.seq = j.at("seq").get<uint64_t>();
            ev.env.true_sender = j.at("true_sender").get<std::string>();
            ev.env.claimed_sender = j.at("claimed_sender").get<std::string>();
            ev.env.receiver = j.at("receiver").get<std::string>();
            ev.env.kind = msg_kind_from_name(j.at("kind").get<std::string>());
            ev.final_payload = from_hex(j.at("payload_hex").get<std::string>());
            ev.env.payload = ev.final_payload;
            ev.action = j.at("action").get<std::string>();
            ev.delivered = j.at("delivered").get<bool>();
            ev.final_receiver = ev.env.receiver;
        } catch (const std::exception& e) {
            throw ConfigError(std::string("transcript event parse error: ") + e.what());
        }
        t.events.push_back(std::move(ev));
    }
    if (!saw_meta) throw ConfigError("transcript missing meta line");
    return t;
}

}  // namespace keylab
