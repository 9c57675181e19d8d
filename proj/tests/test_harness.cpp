#include "support.hpp"

#include "qdsim/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qdsim {
namespace {

using nlohmann::json;

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::InvalidArgument;
}

TEST(Config, DefaultsAndRoundTrip) {
    const ScenarioConfig d = ScenarioConfig::from_json(json::object());
    EXPECT_EQ(d.processors, 2u);
    EXPECT_EQ(d.base, "token-ring");
    EXPECT_EQ(d.mode, RunMode::Qgo);
    EXPECT_EQ(d.global_ops, builtin_global_op_names());
    EXPECT_EQ(d.scheduler.policy, SchedulePolicy::UniformRandom);

    const json j = {{"processors", 3},
                    {"base", {{"name", "teleport"}, {"params", json::object()}}},
                    {"mode", "spec"},
                    {"global_ops", {"record-only"}},
                    {"invocations", {{{"after_step", 4}, {"gid", "record-only"}, {"leader", "p2"}}}},
                    {"scheduler", {{"policy", "round-robin"}, {"fairness", 5}}},
                    {"max_events", 300},
                    {"seed", 17}};
    const ScenarioConfig c = ScenarioConfig::from_json(j);
    EXPECT_EQ(c.invocations.at(0).leader, "p2");
    EXPECT_EQ(c.scheduler.fairness, 5u);
    const ScenarioConfig back = ScenarioConfig::from_json(c.to_json());
    EXPECT_EQ(back.to_json(), c.to_json());
    EXPECT_EQ(ScenarioConfig::from_json({{"base", "chatter"}}).base, "chatter");
}

TEST(Config, RejectsMalformedObjects) {
    EXPECT_EQ(code_of([] { ScenarioConfig::from_json(json::array()); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { ScenarioConfig::from_json({{"processors", "three"}}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { ScenarioConfig::from_json({{"processors", 0}}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { ScenarioConfig::from_json({{"mode", "quantum"}}); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { ScenarioConfig::from_json({{"scheduler", {{"policy", "lottery"}}}}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] {
                  ScenarioConfig::from_json({{"global_ops", {"record-only"}},
                                             {"invocations", {{{"gid", "snapshot-measure"}}}}});
              }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { ScenarioConfig::from_json({{"invocations", {{{"gid", "record-only"}, {"leader", "p5"}}}}}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { ScenarioConfig::from_json({{"mode", "base"}, {"invocations", {{{"gid", "record-only"}}}}}); }),
              ErrorCode::InvalidArgument);
}

TEST(Config, LoadConfigReportsFileProblems) {
    const auto dir = std::filesystem::temp_directory_path() / "qdsim_harness_test";
    std::filesystem::create_directories(dir);
    EXPECT_EQ(code_of([&] { load_config(dir / "missing.json"); }), ErrorCode::ParseError);
    std::ofstream(dir / "broken.json") << "{\"processors\": ";
    EXPECT_EQ(code_of([&] { load_config(dir / "broken.json"); }), ErrorCode::ParseError);
    std::ofstream(dir / "good.json") << R"({"processors": 4, "base": "chatter"})";
    EXPECT_EQ(load_config(dir / "good.json").processors, 4u);
}

TEST(Config, SchedulePolicyNames) {
    for (SchedulePolicy p : {SchedulePolicy::UniformRandom, SchedulePolicy::ChannelDelayBiased,
                             SchedulePolicy::RoundRobin, SchedulePolicy::ReplayFromTrace})
        EXPECT_EQ(schedule_policy_from_string(to_string(p)), p);
}

TEST(Scenario, UnknownBaseAndBadParams) {
    ScenarioConfig c;
    c.base = "gossip";
    EXPECT_EQ(code_of([&] { build_scenario(c); }), ErrorCode::UnknownScenario);
    c.base = "token-ring";
    c.base_params = {{"rounds", -1}};
    EXPECT_EQ(code_of([&] { build_scenario(c); }), ErrorCode::InvalidArgument);
    c.base_params = json::object();
    c.global_ops = {"bogus"};
    EXPECT_EQ(code_of([&] { build_scenario(c); }), ErrorCode::UnknownGlobalOp);
}

TEST(Scenario, InitialStateDescriptor) {
    const std::map<ProcessorId, ClassicalState> classical{{"p0", json::object()}, {"p1", json::object()}};
    const SystemState s = make_initial_state(
        {"p0", "p1"},
        json{{"registers", {{{"owner", "p1"}, {"state", "+"}}, {{"owner", "p0"}, {"state", "1"}}}},
             {"epr_pairs", json::array({json::array({"p0", "p1"})})}},
        classical);
    EXPECT_EQ(s.ownership.at(1), Owner::of_processor("p1"));
    EXPECT_EQ(s.ownership.at(3), Owner::of_processor("p0"));
    EXPECT_EQ(s.ownership.at(4), Owner::of_processor("p1"));
    EXPECT_NEAR(s.quantum.trace(), 1.0, 1e-15);
    EXPECT_EQ(code_of([&] {
                  make_initial_state({"p0"}, json{{"registers", {{{"owner", "p0"}, {"state", "2"}}}}},
                                     {{"p0", json::object()}});
              }),
              ErrorCode::InvalidArgument);
}

TEST(Simulation, SameSeedSameExecution) {
    for (const std::string base : {"token-ring", "teleport", "chatter"}) {
        ScenarioConfig c = testing::qgo_config(base, 3, kSnapshotMeasure, 1, 5);
        const Scenario s = build_scenario(c);
        const Execution a = run_simulation(s, 42);
        const Execution b = run_simulation(s, 42);
        EXPECT_EQ(a.events, b.events) << base;
        bool differs = false;
        for (std::uint64_t seed = 43; seed < 50 && !differs; ++seed) differs = run_simulation(s, seed).events != a.events;
        EXPECT_TRUE(differs) << base;
    }
}

TEST(Simulation, EveryPolicyCompletesTheRing) {
    for (SchedulePolicy policy :
         {SchedulePolicy::UniformRandom, SchedulePolicy::ChannelDelayBiased, SchedulePolicy::RoundRobin}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            ScenarioConfig c = testing::qgo_config("token-ring", 3, kRecordOnly, 2, seed);
            c.scheduler.policy = policy;
            const Execution x = run_simulation(build_scenario(c), seed);
            EXPECT_TRUE(validate(x).ok);
            const SystemState f = final_state(x);
            for (const auto& [chan, contents] : f.channels) EXPECT_TRUE(contents.empty()) << chan.str();
            int hops = 0;
            for (const ProcessorId& p : f.processors) hops = std::max(hops, f.classical.at(p).at("hop").get<int>());
            EXPECT_EQ(hops, 6);
        }
    }
}

TEST(Simulation, InvocationsWaitForTheirStep) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ScenarioConfig c = testing::qgo_config("token-ring", 3, kRecordOnly, 1, seed);
        c.invocations[0].after_step = 9;
        const Execution x = run_simulation(build_scenario(c), seed);
        for (std::size_t k = 0; k < x.events.size(); ++k)
            if (x.events[k].kind == EventKind::Invoke) {
                EXPECT_GE(k, 9u);
                EXPECT_EQ(x.events[k].label, c.invocations[0].leader);
            }
    }
}

TEST(Simulation, EventBudget) {
    ScenarioConfig c = testing::qgo_config("token-ring", 3, kRecordOnly, 1, 0);
    c.max_events = 5;
    EXPECT_EQ(code_of([&] { run_simulation(build_scenario(c), 0); }), ErrorCode::EventBudgetExceeded);
}

// Each receiver ends up with ψ_k = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩, θ = 0.7k, φ = 0.3k.
TEST(Simulation, TeleportDeliversTheStates) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ScenarioConfig c;
        c.processors = 3;
        c.base = "teleport";
        c.mode = RunMode::Base;
        const Execution x = run_simulation(build_scenario(c), seed);
        const SystemState f = final_state(x);
        for (std::size_t k = 1; k <= 2; ++k) {
            const std::uint64_t bob = 2 + 2 * k;
            EXPECT_EQ(f.ownership.at(bob), Owner::of_processor("p" + std::to_string(k)));
            std::vector<std::uint64_t> others;
            for (const Register& r : f.quantum.space.registers())
                if (r.id != bob) others.push_back(r.id);
            const DensityMatrix reduced = partial_trace(f.quantum, others);
            const Matrix rho = reduced.rho / reduced.trace();
            const Vector psi = qubit_state(0.7 * static_cast<double>(k), 0.3 * static_cast<double>(k));
            const Matrix expected = psi * psi.adjoint();
            EXPECT_LT((rho - expected).cwiseAbs().maxCoeff(), 1e-9) << "seed " << seed << " k " << k;
        }
    }
}

TEST(Simulation, ReplayFromTraceFollowsTheRecordedOrder) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        ScenarioConfig c = testing::qgo_config("teleport", 3, kGlobalEncrypt, 1, seed);
        const Scenario s = build_scenario(c);
        const Execution x = run_simulation(s, seed);
        ScenarioConfig r = c;
        r.scheduler.policy = SchedulePolicy::ReplayFromTrace;
        const Scenario rs = build_scenario(r);
        const Execution y = run_simulation(rs, 999, &x.events);
        EXPECT_EQ(y.events, x.events);
        EXPECT_TRUE(states_identical(final_state(y), final_state(x)));

        std::vector<Event> broken = x.events;
        std::swap(broken.front(), broken.back());
        EXPECT_EQ(code_of([&] { run_simulation(rs, 0, &broken); }), ErrorCode::ReplayError);
        EXPECT_EQ(code_of([&] { run_simulation(rs, 0); }), ErrorCode::InvalidArgument);
    }
}

TEST(Trace, FormatComplexRoundTripsExactly) {
    std::mt19937_64 rng(12);
    for (int k = 0; k < 1000; ++k) {
        const Complex z(uniform01(rng) * 2 - 1, std::ldexp(uniform01(rng), -static_cast<int>(k % 60)));
        const Complex back = parse_complex(format_complex(z));
        EXPECT_EQ(back, z);
    }
    EXPECT_EQ(code_of([] { parse_complex("1.5"); }), ErrorCode::ParseError);
    EXPECT_EQ(code_of([] { parse_complex("a,b"); }), ErrorCode::ParseError);
}

TEST(Trace, StateRoundTrip) {
    const Execution x = run_simulation(build_scenario(testing::qgo_config("token-ring", 3, kSnapshotMeasure, 1, 2)), 2);
    for (const SystemState& s : replay(x)) EXPECT_TRUE(states_identical(state_from_json(state_to_json(s)), s));
}

TEST(Trace, WriteReadWriteIsIdentity) {
    for (const std::string base : {"token-ring", "teleport", "chatter"}) {
        const ScenarioConfig c = testing::qgo_config(base, 3, kGlobalEncrypt, 2, 6);
        const Scenario s = build_scenario(c);
        const Execution x = run_simulation(s, 6);
        Trace t = make_trace(s, 6, x);
        t.certificate = to_json(verify(x));
        const std::string text = trace_to_string(t);
        std::istringstream in(text);
        const Trace back = read_trace(in);
        EXPECT_EQ(trace_to_string(back), text);
        EXPECT_EQ(back.events, x.events);
        const Execution again = trace_execution(back);
        EXPECT_TRUE(states_identical(final_state(again), final_state(x)));
    }
}

TEST(Trace, ParseErrorsCarryTheLineNumber) {
    const Scenario s = build_scenario(testing::qgo_config("token-ring", 2, kRecordOnly, 1, 1));
    const std::string text = trace_to_string(make_trace(s, 1, run_simulation(s, 1)));
    std::vector<std::string> lines;
    std::istringstream split(text);
    for (std::string line; std::getline(split, line);) lines.push_back(line);
    ASSERT_GT(lines.size(), 5u);
    for (std::size_t broken : {std::size_t{0}, std::size_t{1}, std::size_t{4}}) {
        std::string joined;
        for (std::size_t k = 0; k < lines.size(); ++k) joined += (k == broken ? "{\"event\": [" : lines[k]) + "\n";
        std::istringstream in(joined);
        try {
            read_trace(in);
            ADD_FAILURE() << "line " << broken + 1;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ParseError);
            EXPECT_EQ(e.index(), std::optional<std::size_t>(broken + 1));
            EXPECT_NE(std::string(e.what()).find("line " + std::to_string(broken + 1)), std::string::npos);
        }
    }
    std::istringstream empty("");
    EXPECT_EQ(code_of([&] { read_trace(empty); }), ErrorCode::ParseError);
}

}  // namespace
}  // namespace qdsim
