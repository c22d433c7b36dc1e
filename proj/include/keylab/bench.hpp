#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "keylab/bytes.hpp"

namespace keylab {
namespace bench {

enum class Op { Xor, KdfReference };

// Nanoseconds per operation, median of five timed batches after a warm-up
// batch. Inputs rotate through a seeded pool so nothing constant-folds, and a
// sink byte is accumulated so nothing dead-code-eliminates.
// Throws ConfigError for iterations < 10^4.
double measure_ns_per_op(Op op, size_t key_bits, uint64_t iterations, uint64_t seed);

struct CostReport {
    size_t key_bits = 128;
    uint64_t iterations = 0;
    double xor_ns_per_op = 0.0;
    double kdf_ns_per_op = 0.0;
    double ratio = 0.0;  // kdf / xor
    std::string environment;

    nlohmann::ordered_json to_json() const;
    std::string to_table() const;
};

CostReport run_benchmark(size_t key_bits, uint64_t iterations, uint64_t seed);

}  // namespace bench
}  // namespace keylab
