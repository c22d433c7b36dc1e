#pragma once

#include <stdexcept>
#include <string>

namespace keylab {

// Bad wiring: unknown party, wrong arity, malformed scenario file.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A running scenario went off the rails (livelock guard, broken invariant).
struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A one-time pairwise key was offered to the masking schemes twice.
struct KeyReuseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace keylab
