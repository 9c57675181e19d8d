#include "qdsim/harness.hpp"

#include "qdsim/error.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

namespace qdsim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kOutcomeStream = 0x9E3779B97F4A7C15ull;

std::string_view to_string(RunMode m) {
    switch (m) {
        case RunMode::Qgo: return "qgo";
        case RunMode::Base: return "base";
        case RunMode::Spec: return "spec";
    }
    return "?";
}

RunMode run_mode_from_string(std::string_view text) {
    for (RunMode m : {RunMode::Qgo, RunMode::Base, RunMode::Spec})
        if (to_string(m) == text) return m;
    fail(ErrorCode::InvalidArgument, "unknown mode '" + std::string(text) + "'");
}

std::string candidate_key(const Event& e) {
    return std::string(to_string(e.kind)) + "|" + e.label + "|" + e.action + "|" + e.peer;
}

class Scheduler {
public:
    Scheduler(const SchedulerConfig& config, std::uint64_t seed, std::size_t processors)
        : config_(config), rng_(seed), processors_(processors) {}

    std::size_t pick(const std::vector<Event>& candidates) {
        std::size_t choice = candidates.size();
        if (config_.fairness > 0) {
            std::size_t longest = 0;
            for (std::size_t k = 0; k < candidates.size(); ++k) {
                const auto it = waiting_.find(candidate_key(candidates[k]));
                const std::size_t w = it == waiting_.end() ? 0 : it->second;
                if (w >= config_.fairness && w > longest) {
                    longest = w;
                    choice = k;
                }
            }
        }
        if (choice == candidates.size()) choice = by_policy(candidates);
        std::map<std::string, std::size_t> next;
        for (std::size_t k = 0; k < candidates.size(); ++k)
            if (k != choice) next[candidate_key(candidates[k])] = waiting_[candidate_key(candidates[k])] + 1;
        next.erase(candidate_key(candidates[choice]));
        waiting_ = std::move(next);
        return choice;
    }

private:
    std::size_t by_policy(const std::vector<Event>& candidates) {
        const auto n = candidates.size();
        switch (config_.policy) {
            case SchedulePolicy::UniformRandom:
                return std::min(n - 1, static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(n)));
            case SchedulePolicy::ChannelDelayBiased: {
                std::vector<double> weights;
                for (const Event& e : candidates) weights.push_back(e.kind == EventKind::Receive ? 0.25 : 1.0);
                double total = 0;
                for (double w : weights) total += w;
                const double u = uniform01(rng_) * total;
                double acc = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    acc += weights[k];
                    if (u < acc) return k;
                }
                return n - 1;
            }
            case SchedulePolicy::RoundRobin: {
                std::size_t best = n, best_distance = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    const std::size_t idx = processor_index(candidates[k].label);
                    const std::size_t distance = (idx + processors_ - turn_ % processors_) % processors_;
                    if (best == n || distance < best_distance) {
                        best = k;
                        best_distance = distance;
                    }
                }
                turn_ = processor_index(candidates[best].label) + 1;
                return best;
            }
            case SchedulePolicy::ReplayFromTrace: break;
        }
        fail(ErrorCode::InvalidArgument, "replay-from-trace needs a recorded event order");
    }

    SchedulerConfig config_;
    std::mt19937_64 rng_;
    std::size_t processors_;
    std::map<std::string, std::size_t> waiting_;
    std::size_t turn_ = 0;
};

std::vector<Event> candidates_at(const Program& program, const SystemState& state) {
    std::vector<Event> out;
    for (const ProcessorId& p : state.processors)
        if (auto forced = program.forced_next(state, p)) out.push_back(std::move(*forced));
    for (Event& e : program.enabled_events(state)) out.push_back(std::move(e));
    return out;
}

bool same_step(const Event& a, const Event& b) {
    return a.kind == b.kind && a.label == b.label && a.action == b.action && a.peer == b.peer &&
           (a.kind != EventKind::Receive || a.msg == b.msg);
}

Execution replay_schedule(const Scenario& s, const std::vector<Event>& script) {
    const Program& program = *s.program;
    Execution x{s.program, s.initial, {}};
    SystemState state = s.initial;
    std::optional<ProcessorId> inside;
    std::size_t next_invocation = 0;
    for (std::size_t i = 0; i < script.size(); ++i) {
        const Event& e = script[i];
        bool allowed = false;
        if (inside) {
            if (auto forced = program.forced_next(state, *inside)) allowed = same_step(*forced, e);
        }
        if (!allowed && e.kind == EventKind::Invoke) {
            allowed = next_invocation < s.config.invocations.size() && qgo_idle(state) &&
                      s.config.invocations[next_invocation].gid == e.action &&
                      s.config.invocations[next_invocation].leader == e.label;
            if (allowed) ++next_invocation;
        }
        if (!allowed) {
            for (const Event& c : candidates_at(program, state))
                if (same_step(c, e)) allowed = true;
        }
        if (!allowed)
            throw Error(ErrorCode::ReplayError,
                        "recorded event " + std::to_string(i) + " is not schedulable: " + describe(e), i);
        try {
            state = program.apply(state, e);
        } catch (const Error& err) {
            throw Error(ErrorCode::ReplayError, "recorded event " + std::to_string(i) + ": " + err.what(), i);
        }
        x.events.push_back(e);
        inside = program.forced_next(state, e.label) ? std::optional<ProcessorId>(e.label) : std::nullopt;
    }
    return x;
}

}  // namespace

std::string_view to_string(SchedulePolicy p) {
    switch (p) {
        case SchedulePolicy::UniformRandom: return "uniform-random";
        case SchedulePolicy::ChannelDelayBiased: return "channel-delay-biased";
        case SchedulePolicy::RoundRobin: return "round-robin";
        case SchedulePolicy::ReplayFromTrace: return "replay-from-trace";
    }
    return "?";
}

SchedulePolicy schedule_policy_from_string(std::string_view text) {
    for (SchedulePolicy p : {SchedulePolicy::UniformRandom, SchedulePolicy::ChannelDelayBiased,
                             SchedulePolicy::RoundRobin, SchedulePolicy::ReplayFromTrace})
        if (to_string(p) == text) return p;
    fail(ErrorCode::InvalidArgument, "unknown scheduler policy '" + std::string(text) + "'");
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::InvalidArgument, "configuration must be a JSON object");
    ScenarioConfig c;
    try {
        c.processors = j.value("processors", c.processors);
        if (j.contains("base")) {
            const json& b = j.at("base");
            if (b.is_string()) {
                c.base = b.get<std::string>();
            } else {
                c.base = b.at("name").get<std::string>();
                c.base_params = b.value("params", json::object());
            }
        }
        c.mode = run_mode_from_string(j.value("mode", std::string("qgo")));
        if (j.contains("global_ops")) c.global_ops = j.at("global_ops").get<std::vector<std::string>>();
        for (const json& inv : j.value("invocations", json::array())) {
            InvocationSpec s;
            s.after_step = inv.value("after_step", std::size_t{0});
            s.gid = inv.at("gid").get<std::string>();
            s.leader = inv.value("leader", std::string("p0"));
            c.invocations.push_back(std::move(s));
        }
        if (j.contains("initial_state")) c.initial_state = j.at("initial_state");
        c.dim_cap = j.value("dim_cap", std::size_t{0});
        if (j.contains("scheduler")) {
            const json& s = j.at("scheduler");
            c.scheduler.policy = schedule_policy_from_string(s.value("policy", std::string("uniform-random")));
            c.scheduler.fairness = s.value("fairness", std::size_t{0});
            c.scheduler.trace = s.value("trace", std::string());
        }
        c.max_events = j.value("max_events", c.max_events);
        c.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& err) {
        fail(ErrorCode::InvalidArgument, std::string("bad configuration: ") + err.what());
    }
    if (c.processors == 0) fail(ErrorCode::InvalidArgument, "need at least one processor");
    for (const auto& inv : c.invocations) {
        if (std::find(c.global_ops.begin(), c.global_ops.end(), inv.gid) == c.global_ops.end())
            fail(ErrorCode::InvalidArgument, "invocation of '" + inv.gid + "', which is not in global_ops");
        if (processor_index(inv.leader) >= c.processors)
            fail(ErrorCode::InvalidArgument, "invocation leader " + inv.leader + " does not exist");
    }
    if (c.mode == RunMode::Base && !c.invocations.empty())
        fail(ErrorCode::InvalidArgument, "mode 'base' takes no invocations");
    return c;
}

json ScenarioConfig::to_json() const {
    json j;
    j["processors"] = processors;
    j["base"] = json{{"name", base}, {"params", base_params}};
    j["mode"] = to_string(mode);
    j["global_ops"] = global_ops;
    json invs = json::array();
    for (const auto& inv : invocations)
        invs.push_back({{"after_step", inv.after_step}, {"gid", inv.gid}, {"leader", inv.leader}});
    j["invocations"] = invs;
    if (!initial_state.is_null()) j["initial_state"] = initial_state;
    j["dim_cap"] = dim_cap;
    j["scheduler"] = json{{"policy", to_string(scheduler.policy)}, {"fairness", scheduler.fairness}};
    if (!scheduler.trace.empty()) j["scheduler"]["trace"] = scheduler.trace;
    j["max_events"] = max_events;
    j["seed"] = seed;
    return j;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ParseError, "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& err) {
        fail(ErrorCode::ParseError, path.string() + ": " + err.what());
    }
    return ScenarioConfig::from_json(j);
}

Scenario build_scenario(const ScenarioConfig& config) {
    if (config.dim_cap && !std::getenv("QGO_DIM_CAP")) set_dimension_cap(config.dim_cap);
    Scenario s;
    s.config = config;
    BaseScenario base = make_base_algorithm(config.base, config.processors, config.base_params);
    s.base = base.algorithm;
    s.library = make_library(config.global_ops);
    switch (config.mode) {
        case RunMode::Qgo: s.program = qgo_augment(s.base, s.library); break;
        case RunMode::Base: s.program = std::make_shared<BaseProgram>(s.base); break;
        case RunMode::Spec: s.program = std::make_shared<SpecProgram>(s.base, s.library); break;
    }
    const json& descriptor = config.initial_state.is_null() ? base.initial_state : config.initial_state;
    s.initial = make_initial_state(processor_names(config.processors), descriptor, base.classical);
    return s;
}

Execution run_simulation(const Scenario& s, std::uint64_t seed, const std::vector<Event>* script) {
    if (s.config.scheduler.policy == SchedulePolicy::ReplayFromTrace || script) {
        if (!script) fail(ErrorCode::InvalidArgument, "replay-from-trace needs a recorded event order");
        return replay_schedule(s, *script);
    }
    const Program& program = *s.program;
    Scheduler scheduler(s.config.scheduler, seed, s.config.processors);
    std::mt19937_64 outcomes(seed ^ kOutcomeStream);
    IdAllocator ids = IdAllocator::after(s.initial);
    Execution x{s.program, s.initial, {}};
    SystemState state = s.initial;
    std::size_t next_invocation = 0;
    while (true) {
        std::vector<Event> candidates = candidates_at(program, state);
        bool invocation_offered = false;
        if (next_invocation < s.config.invocations.size() && qgo_idle(state)) {
            const InvocationSpec& inv = s.config.invocations[next_invocation];
            if (x.events.size() >= inv.after_step || candidates.empty()) {
                Event e;
                e.kind = EventKind::Invoke;
                e.label = inv.leader;
                e.action = inv.gid;
                candidates.push_back(std::move(e));
                invocation_offered = true;
            }
        }
        if (candidates.empty()) {
            if (next_invocation < s.config.invocations.size())
                fail(ErrorCode::ReplayError, "no step possible while an invocation is still pending");
            break;
        }
        if (x.events.size() >= s.config.max_events)
            fail(ErrorCode::EventBudgetExceeded,
                 "execution exceeded " + std::to_string(s.config.max_events) + " events");
        const std::size_t k = scheduler.pick(candidates);
        if (invocation_offered && k + 1 == candidates.size()) ++next_invocation;
        ProcedureRun run = run_procedure(program, state, std::move(candidates[k]), outcomes, ids);
        for (Event& e : run.events) x.events.push_back(std::move(e));
        state = std::move(run.state);
    }
    return x;
}

}  // namespace qdsim
