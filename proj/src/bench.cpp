#include "keylab/bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <vector>

#include "keylab/errors.hpp"
#include "keylab/kdf.hpp"
#include "keylab/rng.hpp"

namespace keylab {
namespace bench {

namespace {

using Clock = std::chrono::steady_clock;

volatile uint8_t g_sink = 0;  // defeats dead-code elimination across runs

// A timed window must dwarf both the timer tick and scheduler noise.
constexpr double kMinWindowNs = 5e6;

struct InputPool {
    std::vector<Bytes> keys, data;

    InputPool(SeededRng& rng, size_t key_bytes) : keys(256), data(256) {
        for (size_t i = 0; i < keys.size(); ++i) {
            keys[i] = rng.draw(key_bytes);
            data[i] = rng.draw(key_bytes);
        }
    }
};

uint8_t run_ops(Op op, size_t key_bytes, uint64_t iterations, const InputPool& pool) {
    uint8_t sink = 0;
    if (op == Op::Xor) {
        for (uint64_t i = 0; i < iterations; ++i) {
            const Bytes& a = pool.keys[i % pool.keys.size()];
            const Bytes& b = pool.data[(i + 1) % pool.data.size()];
            for (size_t j = 0; j < key_bytes; ++j) sink ^= static_cast<uint8_t>(a[j] ^ b[j]);
        }
    } else {
        KdfSpec spec{KdfAlgorithm::ReferenceKeyedHash, key_bytes};
        KdfContext ctx;
        ctx.label = "bench";
        for (uint64_t i = 0; i < iterations; ++i) {
            ctx.nonce = pool.data[i % pool.data.size()];
            Bytes out = kdf_derive(pool.keys[(i + 1) % pool.keys.size()], ctx, spec);
            sink ^= out[0];
        }
    }
    return sink;
}

double time_batch(Op op, size_t key_bytes, uint64_t iterations, SeededRng& rng) {
    InputPool pool(rng, key_bytes);

    // Calibrate: if one pass is too quick to time reliably, repeat it and divide.
    auto start = Clock::now();
    uint8_t sink = run_ops(op, key_bytes, iterations, pool);
    auto stop = Clock::now();
    double ns = std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();

    if (ns < kMinWindowNs) {
        uint64_t reps = static_cast<uint64_t>(kMinWindowNs / std::max(ns, 1e3)) + 1;
        start = Clock::now();
        for (uint64_t r = 0; r < reps; ++r) sink ^= run_ops(op, key_bytes, iterations, pool);
        stop = Clock::now();
        ns = std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count() /
             static_cast<double>(reps);
    }
    g_sink = g_sink ^ sink;
    return ns / static_cast<double>(iterations);
}

}  // namespace

double measure_ns_per_op(Op op, size_t key_bits, uint64_t iterations, uint64_t seed) {
    if (key_bits == 0 || key_bits % 8 != 0) throw ConfigError("key_bits must be a positive multiple of 8");
    if (iterations < 10000) throw ConfigError("bench needs at least 10^4 iterations");
    size_t key_bytes = key_bits / 8;
    SeededRng rng(seed);

    // The whole batch is timed and divided by the iteration count, so per-op
    // times far below the timer tick are still measurable.
    time_batch(op, key_bytes, iterations, rng);  // warm-up, excluded
    std::vector<double> runs;
    for (int i = 0; i < 5; ++i) runs.push_back(time_batch(op, key_bytes, iterations, rng));
    std::sort(runs.begin(), runs.end());
    return runs[runs.size() / 2];
}

nlohmann::ordered_json CostReport::to_json() const {
    return nlohmann::ordered_json{
        {"key_bits", key_bits},
        {"iterations", iterations},
        {"xor_ns_per_op", xor_ns_per_op},
        {"kdf_ns_per_op", kdf_ns_per_op},
        {"ratio", ratio},
        {"environment", environment},
    };
}

std::string CostReport::to_table() const {
    std::ostringstream os;
    os << "operation             ns/op\n";
    os << "-------------------  ------\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-19s %7.2f\n", "xor_combine", xor_ns_per_op);
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-19s %7.2f\n", "kdf_reference", kdf_ns_per_op);
    os << buf;
    std::snprintf(buf, sizeof(buf), "ratio (kdf/xor)     %7.2f\n", ratio);
    os << buf;
    os << "key bits: " << key_bits << ", iterations: " << iterations << "\n";
    os << "environment: " << environment << "\n";
    return os.str();
}

CostReport run_benchmark(size_t key_bits, uint64_t iterations, uint64_t seed) {
    CostReport report;
    report.key_bits = key_bits;
    report.iterations = iterations;
    report.xor_ns_per_op = measure_ns_per_op(Op::Xor, key_bits, iterations, seed);
    report.kdf_ns_per_op = measure_ns_per_op(Op::KdfReference, key_bits, iterations, seed + 1);
    report.ratio = report.kdf_ns_per_op / report.xor_ns_per_op;
#if defined(__clang__)
    report.environment = "clang " __clang_version__;
#elif defined(__GNUC__)
    report.environment = "gcc " __VERSION__;
#else
    report.environment = "unknown compiler";
#endif
    return report;
}

}  // namespace bench
}  // namespace keylab
