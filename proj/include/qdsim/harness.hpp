#pragma once

// Scenario configuration, schedulers and the simulation loop.
//
// A configuration is a JSON object:
//
//   {
//     "processors": 3,
//     "base": {"name": "token-ring", "params": {"rounds": 2}},
//     "mode": "qgo",                      // or "base", "spec"
//     "global_ops": ["snapshot-measure"],  // default: every builtin
//     "invocations": [{"after_step": 4, "gid": "snapshot-measure", "leader": "p0"}],
//     "initial_state": {...},              // default: the base algorithm's
//     "dim_cap": 1024,
//     "scheduler": {"policy": "uniform-random", "fairness": 32},
//     "max_events": 5000,
//     "seed": 7
//   }

#include "qdsim/algorithms.hpp"
#include "qdsim/globalops.hpp"
#include "qdsim/specmachine.hpp"

#include <filesystem>
#include <optional>

namespace qdsim {

struct InvocationSpec {
    /// The invocation may start once this many events have happened (or
    /// earlier, if nothing else can happen).
    std::size_t after_step = 0;
    std::string gid;
    ProcessorId leader = "p0";
};

enum class SchedulePolicy { UniformRandom, ChannelDelayBiased, RoundRobin, ReplayFromTrace };

std::string_view to_string(SchedulePolicy p);
SchedulePolicy schedule_policy_from_string(std::string_view text);

struct SchedulerConfig {
    SchedulePolicy policy = SchedulePolicy::UniformRandom;
    /// A candidate passed over this many consecutive times is taken next;
    /// 0 disables the bound.
    std::size_t fairness = 0;
    /// Trace whose event order replay-from-trace follows.
    std::string trace;
};

enum class RunMode { Qgo, Base, Spec };

struct ScenarioConfig {
    std::size_t processors = 2;
    std::string base = "token-ring";
    nlohmann::json base_params = nlohmann::json::object();
    RunMode mode = RunMode::Qgo;
    std::vector<std::string> global_ops = builtin_global_op_names();
    std::vector<InvocationSpec> invocations;
    nlohmann::json initial_state;  // null: the base algorithm's default
    std::size_t dim_cap = 0;       // 0: leave the process default alone
    SchedulerConfig scheduler;
    std::size_t max_events = 5000;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument on a malformed object.
    static ScenarioConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Throws ParseError naming the file when it cannot be read or parsed.
ScenarioConfig load_config(const std::filesystem::path& path);

struct Scenario {
    ScenarioConfig config;
    std::shared_ptr<const BaseAlgorithm> base;
    std::shared_ptr<const GlobalOpLibrary> library;
    std::shared_ptr<const Program> program;
    SystemState initial;
};

/// Applies dim_cap unless QGO_DIM_CAP is set in the environment.
Scenario build_scenario(const ScenarioConfig& config);

/// Generates one execution. The scheduler and the outcome sampler draw from
/// separate generators derived from `seed`, so the same seed reproduces
/// the same execution. Throws EventBudgetExceeded past config.max_events.
/// For replay-from-trace, `script` supplies the event order to follow.
Execution run_simulation(const Scenario& scenario, std::uint64_t seed,
                         const std::vector<Event>* script = nullptr);

}  // namespace qdsim
