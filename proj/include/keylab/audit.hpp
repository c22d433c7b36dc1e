#pragma once

#include <cstdint>
#include <string>

#include "keylab/netsim.hpp"

namespace keylab {

struct AuditResult {
    bool ok = false;
    uint64_t first_bad_seq = 0;  // 0 when the failure is not tied to one event
    std::string message;
};

// Recomputes every masked payload in a key-distribution transcript from the
// recorded key material and the XOR algebra alone, cross-checks honest SETUP
// payloads against the announced session parameters, and re-derives any
// attack-evidence key equalities claimed in the meta block. Never consults
// protocol machine state.
AuditResult audit_transcript(const Transcript& transcript);

AuditResult audit_jsonl(const std::string& text);

}  // namespace keylab
