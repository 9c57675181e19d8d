// qdsim: simulate quantum distributed executions and verify traces.
//
//   qdsim run     --config <file> --seed <n> --out <trace>
//   qdsim verify  --trace <file> --out <certificate>
//   qdsim batch   --config <file> --seeds a..b --jobs <k>
//   qdsim inspect --trace <file>
//
// verify exits 0 when the trace is accepted, 2 when it is rejected and 1 when
// the trace cannot be read.

#include "qdsim/causality.hpp"
#include "qdsim/error.hpp"
#include "qdsim/trace.hpp"
#include "qdsim/verifier.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

using namespace qdsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitRejected = 2;

int report(const Error& err) {
    std::cerr << "qdsim: " << err.what() << '\n';
    return kExitError;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const auto s = std::stoull(text);
            return {s, s};
        }
        const auto a = std::stoull(text.substr(0, dots));
        const auto b = std::stoull(text.substr(dots + 2));
        if (b < a) fail(ErrorCode::InvalidArgument, "empty seed range " + text);
        return {a, b};
    } catch (const std::logic_error&) {
        fail(ErrorCode::InvalidArgument, "bad seed range '" + text + "' (expected a..b)");
    }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
    ScenarioConfig config = load_config(config_path);
    if (seed) config.seed = *seed;
    const Scenario scenario = build_scenario(config);
    std::vector<Event> script;
    if (config.scheduler.policy == SchedulePolicy::ReplayFromTrace) {
        if (config.scheduler.trace.empty()) fail(ErrorCode::InvalidArgument, "replay-from-trace needs scheduler.trace");
        script = load_trace(config.scheduler.trace).events;
    }
    const Execution x = run_simulation(scenario, config.seed, script.empty() ? nullptr : &script);
    save_trace(out, make_trace(scenario, config.seed, x));
    std::cout << x.events.size() << " events, seed " << config.seed << ", written to " << out << '\n';
    return kExitOk;
}

int cmd_verify(const std::string& trace_path, const std::string& out) {
    Trace trace;
    Execution x;
    try {
        trace = load_trace(trace_path);
        x = trace_execution(trace);
    } catch (const Error& err) {
        return report(err);
    }
    const Certificate cert = verify(x);
    if (!out.empty()) {
        std::ofstream file(out);
        if (!file) fail(ErrorCode::InvalidArgument, "cannot write " + out);
        file << to_json(cert).dump(2) << '\n';
    }
    if (cert.accepted) {
        std::cout << "accepted: " << cert.fragments.size() << " invocation(s), " << cert.swaps.size() << " swaps\n";
        return kExitOk;
    }
    std::cerr << "rejected at step " << cert.failed_step << ": " << cert.reason << '\n';
    return kExitRejected;
}

int cmd_batch(const std::string& config_path, const std::string& seeds, unsigned jobs, const std::string& out_dir) {
    const ScenarioConfig config = load_config(config_path);
    const auto [first, last] = parse_seed_range(seeds);
    const Scenario scenario = build_scenario(config);
    const std::size_t count = last - first + 1;
    std::vector<std::string> lines(count);
    std::vector<char> accepted(count, 0);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < count; k = next++) {
            const std::uint64_t seed = first + k;
            try {
                const Execution x = run_simulation(scenario, seed);
                const Certificate cert = config.mode == RunMode::Qgo ? verify(x) : Certificate{true};
                accepted[k] = cert.accepted;
                lines[k] = "seed " + std::to_string(seed) + ": " + std::to_string(x.events.size()) + " events, " +
                           (cert.accepted ? "accepted" : "rejected at " + cert.failed_step + ": " + cert.reason);
                if (!out_dir.empty())
                    save_trace(std::filesystem::path(out_dir) / ("seed-" + std::to_string(seed) + ".trace"),
                               make_trace(scenario, seed, x));
            } catch (const Error& err) {
                lines[k] = "seed " + std::to_string(seed) + ": error: " + err.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    std::size_t ok = 0;
    for (std::size_t k = 0; k < count; ++k) {
        std::cout << lines[k] << '\n';
        ok += accepted[k] != 0;
    }
    std::cout << ok << "/" << count << " accepted\n";
    return ok == count ? kExitOk : kExitRejected;
}

int cmd_inspect(const std::string& trace_path) {
    const Trace trace = load_trace(trace_path);
    const Execution x = trace_execution(trace);
    std::cout << "program " << x.program->name() << ", " << trace.initial.processors.size() << " processors, "
              << trace.initial.quantum.space.size() << " registers, " << x.events.size() << " events, seed "
              << trace.seed << '\n';
    // Immediate causal predecessors: the previous event of the same
    // component and, for a reception, the matching send.
    std::map<std::string, std::uint64_t> last_at;
    std::map<MessageId, std::uint64_t> send_of;
    for (std::size_t i = 0; i < x.events.size(); ++i) {
        const Event& e = x.events[i];
        std::vector<std::uint64_t> preds;
        if (auto it = last_at.find(e.label); it != last_at.end()) preds.push_back(it->second);
        if (e.kind == EventKind::Receive)
            if (auto it = send_of.find(e.msg); it != send_of.end()) preds.push_back(it->second);
        std::cout << (i + 1) << "\t" << describe(e);
        if (!preds.empty()) {
            std::cout << "\t<-";
            for (auto p : preds) std::cout << " #" << p;
        }
        std::cout << '\n';
        last_at[e.label] = e.id;
        if (e.kind == EventKind::Send) send_of[e.msg] = e.id;
    }
    const CausalRelation rel = compute_causality(x);
    std::cout << rel.pair_count() << " causally ordered pairs\n";
    if (trace.certificate) std::cout << "certificate: accepted=" << trace.certificate->value("accepted", false) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator and verifier for quantum distributed executions"};
    app.require_subcommand(1);

    std::string config_path, out, trace_path, seeds = "0..9", out_dir;
    std::uint64_t seed = 0;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

    auto* run = app.add_subcommand("run", "Generate one execution and write its trace");
    run->add_option("--config", config_path, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "Seed (overrides the configuration)");
    run->add_option("--out", out, "Trace file to write")->required();

    auto* ver = app.add_subcommand("verify", "Check a trace and write a certificate");
    ver->add_option("--trace", trace_path, "Trace file")->required();
    ver->add_option("--out", out, "Certificate file to write");

    auto* batch = app.add_subcommand("batch", "Run and verify a range of seeds");
    batch->add_option("--config", config_path, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    batch->add_option("--seeds", seeds, "Seed range a..b (inclusive)");
    batch->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    batch->add_option("--out-dir", out_dir, "Also write every trace into this directory")->check(CLI::ExistingDirectory);

    auto* inspect = app.add_subcommand("inspect", "List the events of a trace with their causal predecessors");
    inspect->add_option("--trace", trace_path, "Trace file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt, out);
        if (*ver) return cmd_verify(trace_path, out);
        if (*batch) return cmd_batch(config_path, seeds, jobs, out_dir);
        if (*inspect) return cmd_inspect(trace_path);
    } catch (const Error& err) {
        return report(err);
    } catch (const std::exception& err) {
        std::cerr << "qdsim: " << err.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
