// keylab: run the key-distribution schemes and their attacks over a simulated
// channel, exercise the masked-sum computations, benchmark KDF vs XOR cost,
// and audit recorded transcripts.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "keylab/attacks.hpp"
#include "keylab/audit.hpp"
#include "keylab/bench.hpp"
#include "keylab/errors.hpp"
#include "keylab/protocols.hpp"
#include "keylab/smpc.hpp"

using namespace keylab;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // protocol reject, failed audit, unexpected attack world
constexpr int kExitUsage = 2;    // bad configuration or invocation

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
}

struct RunArgs {
    std::string scheme;
    std::string scenario_path;
    uint64_t seed = 0;
    bool seed_set = false;
    size_t n = 0;
    std::string kdf = "REFERENCE_KEYED_HASH";
    size_t key_bytes = 16;
    std::string transcript_path;
    bool json = false;
};

int cmd_run(const RunArgs& args) {
    SchemeConfig cfg;
    uint64_t seed = args.seed;
    if (!args.scenario_path.empty()) {
        std::optional<uint64_t> file_seed;
        cfg = SchemeConfig::from_json_text(read_file(args.scenario_path), file_seed);
        if (file_seed && !args.seed_set) seed = *file_seed;
    } else if (!args.scheme.empty()) {
        cfg = SchemeConfig::defaults_for(scheme_from_name(args.scheme), args.n);
        cfg.key_bytes = args.key_bytes;
        cfg.kdf.algorithm = kdf_algorithm_from_name(args.kdf);
        cfg.kdf.output_length = args.key_bytes;
    } else {
        throw ConfigError("run needs --scheme or --scenario");
    }

    ScenarioResult result = run_scenario(cfg, seed);
    if (!args.transcript_path.empty()) write_file(args.transcript_path, result.transcript.to_jsonl());

    bool all_accepted = true;
    std::optional<KeyBytes> shared;
    ordered_json parties = ordered_json::array();
    for (const auto& [id, st] : result.parties) {
        ordered_json p{{"party", id},
                       {"status", status_name(st.status)},
                       {"cause", reject_cause_name(st.cause)},
                       {"accepted_key_hex", st.accepted_key ? to_hex(*st.accepted_key) : ""}};
        parties.push_back(p);
        if (st.status != Status::Accepted) {
            all_accepted = false;
        } else if (!shared) {
            shared = st.accepted_key;
        } else if (!ct_equal(*shared, *st.accepted_key)) {
            all_accepted = false;
        }
    }

    ordered_json report{{"scheme", scheme_name(cfg.scheme)},
                        {"seed", seed},
                        {"agreed", all_accepted},
                        {"deliveries", result.transcript.events.size()},
                        {"parties", parties}};
    if (!result.transcript.warnings.empty()) report["warnings"] = result.transcript.warnings;
    if (args.json) {
        std::cout << report.dump(2) << "\n";
    } else {
        std::cout << scheme_name(cfg.scheme) << " seed=" << seed
                  << (all_accepted ? ": all parties accepted one key" : ": agreement FAILED") << "\n";
        for (const auto& p : parties)
            std::cout << "  " << p["party"].get<std::string>() << " "
                      << p["status"].get<std::string>() << "\n";
    }
    return all_accepted ? kExitOk : kExitFailure;
}

struct AttackArgs {
    std::string id;
    bool all = false;
    uint64_t seeds = 100;
    bool json = false;
    std::string out_path;
    std::string transcript_dir;
};

int cmd_attack(const AttackArgs& args) {
    std::vector<AttackId> ids;
    if (args.all) {
        ids = all_attacks();
    } else if (!args.id.empty()) {
        auto id = attack_from_name(args.id);
        if (!id) throw ConfigError("unknown attack id: " + args.id);
        ids = {*id};
    } else {
        throw ConfigError("attack needs --id or --all");
    }

    ordered_json blocks = ordered_json::array();
    bool expected_world = true;
    std::vector<std::string> deviations;
    auto save_transcript = [&](AttackId id, Scheme target, const Transcript& t) {
        if (args.transcript_dir.empty()) return;
        write_file(args.transcript_dir + "/" + attack_name(id) + "_vs_" + scheme_name(target) +
                       ".jsonl",
                   t.to_jsonl());
    };
    for (AttackId id : ids) {
        Transcript first;
        ordered_json base =
            attack_report_block(id, attack_baseline_target(id), args.seeds, {}, &first);
        save_transcript(id, attack_baseline_target(id), first);
        if (base["successes"].get<uint64_t>() != args.seeds) {
            expected_world = false;
            deviations.push_back(attack_name(id) + " did not succeed on its baseline for every seed");
        }
        blocks.push_back(base);
        if (auto fixed = attack_fixed_target(id)) {
            ordered_json rep = attack_report_block(id, *fixed, args.seeds, {}, &first);
            save_transcript(id, *fixed, first);
            if (rep["successes"].get<uint64_t>() != 0) {
                expected_world = false;
                deviations.push_back(attack_name(id) + " succeeded against fixed variant " +
                                     scheme_name(*fixed));
            }
            blocks.push_back(rep);
        }
    }

    ordered_json report{{"seeds", args.seeds}, {"expected_world", expected_world}, {"attacks", blocks}};
    if (!deviations.empty()) report["deviations"] = deviations;
    std::string dumped = report.dump(2);
    if (!args.out_path.empty()) write_file(args.out_path, dumped + "\n");
    if (args.json) {
        std::cout << dumped << "\n";
    } else {
        for (const auto& b : blocks)
            std::cout << b["attack"].get<std::string>() << " vs " << b["target"].get<std::string>()
                      << ": " << b["successes"].get<uint64_t>() << "/" << args.seeds
                      << " seeds succeeded\n";
        std::cout << (expected_world ? "expected world: attacks land on baselines, fail on fixes\n"
                                     : "DEVIATION from the expected world\n");
        for (const auto& d : deviations) std::cout << "  " << d << "\n";
    }
    return expected_world ? kExitOk : kExitFailure;
}

struct SmpcArgs {
    std::string mode = "ADDITIVE_MOD_N";
    uint64_t n = 13;
    std::string inputs = "3,5,2";
    std::string keys = "AB=7,AC=11,BC=4";
    std::string instance_path;
    int scheme = 1;
    std::string attack;
    int64_t target = 0;
    int64_t delta = 1;
    uint64_t seed = 0;
    bool json = false;
};

smpc::Instance parse_instance(const SmpcArgs& args) {
    if (!args.instance_path.empty()) return smpc::Instance::from_json_text(read_file(args.instance_path));
    smpc::Instance inst;
    inst.spec.mode = smpc::group_mode_from_name(args.mode);
    inst.spec.modulus = args.n;

    std::stringstream in(args.inputs);
    std::string item;
    const char* names[] = {"A", "B", "C", "D"};
    size_t i = 0;
    while (std::getline(in, item, ',')) {
        if (i >= 4) throw ConfigError("too many inputs");
        inst.inputs[names[i++]] = std::stoll(item);
    }
    std::stringstream kin(args.keys);
    while (std::getline(kin, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("keys must look like AB=7,AC=11,BC=4");
        inst.keys[item.substr(0, eq)] = std::stoll(item.substr(eq + 1));
    }
    inst.spec.validate();
    return inst;
}

int cmd_smpc(const SmpcArgs& args) {
    smpc::Instance inst = parse_instance(args);
    ordered_json report{{"instance", inst.to_json()}};

    if (args.attack == "tamper") {
        smpc::TamperOutcome out = smpc::atk_broadcast_tamper(inst, args.delta, args.seed);
        report["attack"] = "tamper";
        report["result"] = out.evidence;
    } else if (args.attack == "output-control") {
        smpc::KeyUsageLedger probe;
        smpc::Scheme1Result honest = smpc::scheme1_run(inst, probe);
        int64_t forced = smpc::atk_output_control(
            inst.spec, args.target, {honest.deltas.at("A"), honest.deltas.at("B")},
            {{inst.keys.at("AC"), -1}, {inst.keys.at("BC"), -1}});
        smpc::Instance forced_inst = inst;
        forced_inst.inputs["C"] = forced;
        smpc::KeyUsageLedger replay;
        smpc::Scheme1Result res = smpc::scheme1_run(forced_inst, replay);
        report["attack"] = "output-control";
        report["result"] = ordered_json{{"target", args.target},
                                        {"honest_sum", honest.sum},
                                        {"forced_input_c", forced},
                                        {"forced_sum", res.sum},
                                        {"hit_target", res.sum == smpc::g_reduce(inst.spec, args.target)}};
    } else if (!args.attack.empty()) {
        throw ConfigError("unknown smpc attack: " + args.attack);
    } else {
        smpc::KeyUsageLedger ledger;
        if (inst.spec.mode == smpc::GroupMode::MultiplicativeModP) {
            smpc::MultiplicativeResult r = smpc::multiplicative_run(inst, ledger);
            report["scheme"] = "multiplicative";
            report["result"] = ordered_json{{"deltas", r.deltas}, {"product", r.product}};
        } else if (args.scheme == 1) {
            smpc::Scheme1Result r = smpc::scheme1_run(inst, ledger);
            report["scheme"] = 1;
            report["result"] = ordered_json{{"deltas", r.deltas}, {"sum", r.sum}};
            if (inst.spec.mode == smpc::GroupMode::IntegerLeaky) {
                ordered_json leaks = ordered_json::object();
                for (const auto& [party, delta] : r.deltas)
                    leaks[party] = smpc::leakage_bound(delta, inst.spec.modulus);
                report["leakage_lower_bounds"] = leaks;
            }
        } else if (args.scheme == 2) {
            smpc::Scheme2Result r = smpc::scheme2_run(inst, ledger);
            report["scheme"] = 2;
            report["result"] = ordered_json{{"broadcast", {{"A", r.delta_a}, {"B", r.delta_b}}},
                                            {"c_sum", r.c_sum}};
        } else if (args.scheme == 3) {
            smpc::Scheme3Result r = smpc::scheme3_run(inst, ledger);
            report["scheme"] = 3;
            report["result"] = ordered_json{{"delta_stars", r.delta_stars}, {"d_sum", r.d_sum}};
        } else {
            throw ConfigError("--scheme must be 1, 2 or 3");
        }
    }

    if (args.json) {
        std::cout << report.dump(2) << "\n";
    } else {
        std::cout << report.dump(2) << "\n";
    }
    return kExitOk;
}

struct BenchArgs {
    size_t key_bits = 128;
    uint64_t iterations = 100000;
    uint64_t seed = 0;
    bool json = false;
    std::string out_path;
};

int cmd_bench(const BenchArgs& args) {
    bench::CostReport report = bench::run_benchmark(args.key_bits, args.iterations, args.seed);
    std::string dumped = report.to_json().dump(2);
    if (!args.out_path.empty()) write_file(args.out_path, dumped + "\n");
    if (args.json) {
        std::cout << dumped << "\n";
    } else {
        std::cout << report.to_table();
    }
    return kExitOk;
}

int cmd_audit(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        AuditResult result = audit_jsonl(text);
        if (result.ok) {
            std::cout << "audit ok: " << result.message << "\n";
            return kExitOk;
        }
        std::cout << "audit FAILED";
        if (result.first_bad_seq != 0) std::cout << " at seq " << result.first_bad_seq;
        std::cout << ": " << result.message << "\n";
        return kExitFailure;
    } catch (const ConfigError& e) {
        std::cout << "audit FAILED: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"keylab: XOR/KDF key-distribution schemes, their attacks, masked-sum demos"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "run one honest (or scripted) scheme scenario");
    run->add_option("--scheme", run_args.scheme, "scheme id (A1, A1F, A2, A3_3, A3_TREE, A4, A4F, B1, B2V1, B2V2)");
    run->add_option("--scenario", run_args.scenario_path, "scenario JSON file");
    run->add_option("--seed", run_args.seed)->each([&](const std::string&) { run_args.seed_set = true; });
    run->add_option("--n", run_args.n, "party count for tree/group schemes");
    run->add_option("--kdf", run_args.kdf, "REFERENCE_KEYED_HASH or TOY_MIX");
    run->add_option("--key-bytes", run_args.key_bytes);
    run->add_option("--transcript", run_args.transcript_path, "write JSON Lines transcript here");
    run->add_flag("--json", run_args.json);

    AttackArgs attack_args;
    auto* attack = app.add_subcommand("attack", "replay the attack catalog");
    attack->add_option("--id", attack_args.id, "one attack id (e.g. ATK_A4_NONCE)");
    attack->add_flag("--all", attack_args.all, "run the whole catalog");
    attack->add_option("--seeds", attack_args.seeds, "seeds per attack (default 100)");
    attack->add_flag("--json", attack_args.json);
    attack->add_option("--out", attack_args.out_path, "write the JSON report here");
    attack->add_option("--transcript-dir", attack_args.transcript_dir,
                       "write each attack's seed-0 transcript into this directory");

    SmpcArgs smpc_args;
    auto* smpc_cmd = app.add_subcommand("smpc", "masked-sum computation schemes");
    smpc_cmd->add_option("--mode", smpc_args.mode, "ADDITIVE_MOD_N, MULTIPLICATIVE_MOD_P, INTEGER_LEAKY");
    smpc_cmd->add_option("--n", smpc_args.n, "modulus / key range bound");
    smpc_cmd->add_option("--inputs", smpc_args.inputs, "comma list: dA,dB,dC");
    smpc_cmd->add_option("--keys", smpc_args.keys, "AB=..,AC=..,BC=..[,AD=..,BD=..,CD=..]");
    smpc_cmd->add_option("--instance", smpc_args.instance_path, "instance JSON file");
    smpc_cmd->add_option("--scheme", smpc_args.scheme, "1 broadcast-sum, 2 sum-to-C, 3 sum-to-D");
    smpc_cmd->add_option("--attack", smpc_args.attack, "tamper or output-control");
    smpc_cmd->add_option("--target", smpc_args.target, "output-control target value");
    smpc_cmd->add_option("--delta", smpc_args.delta, "tamper shift (default 1)");
    smpc_cmd->add_option("--seed", smpc_args.seed);
    smpc_cmd->add_flag("--json", smpc_args.json);

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "measure XOR vs reference-KDF cost");
    bench_cmd->add_option("--key-bits", bench_args.key_bits);
    bench_cmd->add_option("--iterations", bench_args.iterations, "at least 10^4");
    bench_cmd->add_option("--seed", bench_args.seed);
    bench_cmd->add_flag("--json", bench_args.json);
    bench_cmd->add_option("--out", bench_args.out_path, "write the JSON report here");

    std::string audit_path;
    auto* audit_cmd = app.add_subcommand("audit", "recompute every payload of a transcript");
    audit_cmd->add_option("transcript", audit_path, "transcript JSONL path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (attack->parsed()) return cmd_attack(attack_args);
        if (smpc_cmd->parsed()) return cmd_smpc(smpc_args);
        if (bench_cmd->parsed()) return cmd_bench(bench_args);
        if (audit_cmd->parsed()) return cmd_audit(audit_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const KeyReuseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}
