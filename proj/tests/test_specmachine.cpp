#include "support.hpp"

#include "qdsim/error.hpp"

#include <gtest/gtest.h>

#include <cmath>

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

Scenario spec_scenario(const std::string& base, std::size_t n, json initial = nullptr) {
    ScenarioConfig c;
    c.processors = n;
    c.base = base;
    c.mode = RunMode::Spec;
    c.initial_state = std::move(initial);
    return build_scenario(c);
}

const SpecProgram& spec_of(const Scenario& s) { return dynamic_cast<const SpecProgram&>(*s.program); }

Event invoke(const ProcessorId& p, const std::string& gid) {
    Event e;
    e.kind = EventKind::Invoke;
    e.label = p;
    e.action = gid;
    return e;
}

TEST(Spec, InvokeExecuteRespond) {
    const Scenario s = spec_scenario("token-ring", 2);
    const SpecProgram& spec = spec_of(s);
    std::mt19937_64 rng(1);
    SystemState st = spec.apply(s.initial, invoke("p1", kRecordOnly));
    EXPECT_EQ(st.ext.at("p1"), (json{{"op", kRecordOnly}, {"res", nullptr}}));

    Event atomic = *spec.forced_next(st, "p1");
    EXPECT_EQ(atomic.kind, EventKind::AtomicExecute);
    EXPECT_FALSE(spec.forced_next(st, "p0").has_value());
    atomic = spec.realize(st, atomic, rng);
    EXPECT_EQ(atomic.payload.at("processors").at("p0"), s.initial.classical.at("p0").dump());
    st = spec.apply(st, atomic);
    EXPECT_FALSE(states_equal(st, s.initial, 1e-12));
    for (const ProcessorId p : {"p0", "p1"}) {
        const Event respond = *spec.forced_next(st, p);
        EXPECT_EQ(respond.kind, EventKind::Respond);
        EXPECT_EQ(respond.payload.at("processor"), p);
        EXPECT_TRUE(spec.permits(st, respond));
        st = spec.apply(st, respond);
    }
    EXPECT_TRUE(states_equal(st, s.initial, 1e-12));
}

TEST(Spec, GuardsRaiseSpecViolation) {
    const Scenario s = spec_scenario("token-ring", 2);
    const SpecProgram& spec = spec_of(s);
    std::mt19937_64 rng(2);

    Event atomic;
    atomic.kind = EventKind::AtomicExecute;
    atomic.label = "p0";
    atomic.action = kRecordOnly;
    atomic.payload = json{{"processors", json::object()}, {"messages", json::object()}};
    EXPECT_EQ(code_of([&] { spec.apply(s.initial, atomic); }), ErrorCode::SpecViolation);
    EXPECT_FALSE(spec.permits(s.initial, atomic));

    Event respond;
    respond.kind = EventKind::Respond;
    respond.label = "p0";
    EXPECT_EQ(code_of([&] { spec.apply(s.initial, respond); }), ErrorCode::SpecViolation);
    EXPECT_EQ(code_of([&] { spec.apply(s.initial, invoke("p0", "nope")); }), ErrorCode::SpecViolation);

    const SystemState invoked = spec.apply(s.initial, invoke("p0", kRecordOnly));
    EXPECT_EQ(code_of([&] { spec.apply(invoked, invoke("p0", kRecordOnly)); }), ErrorCode::SpecViolation);
    // The guard is local; a second leader is refused by validation instead.
    EXPECT_TRUE(spec.permits(invoked, invoke("p1", kRecordOnly)));
    Event first = invoke("p0", kRecordOnly);
    first.id = 100;
    Event second = invoke("p1", kRecordOnly);
    second.id = 101;
    const ValidationResult v = validate_spec_execution(spec, {s.program, s.initial, {first, second}});
    EXPECT_FALSE(v.ok);
    EXPECT_EQ(v.first_failure, std::optional<std::size_t>(1));
    // Missing a processor in the outcome tuple.
    EXPECT_EQ(code_of([&] { spec.apply(invoked, atomic); }), ErrorCode::SpecViolation);
    // Wrong gid.
    Event other = spec.realize(invoked, *spec.forced_next(invoked, "p0"), rng);
    other.action = kSnapshotMeasure;
    EXPECT_EQ(code_of([&] { spec.apply(invoked, other); }), ErrorCode::SpecViolation);

    Event ok = spec.realize(invoked, *spec.forced_next(invoked, "p0"), rng);
    const SystemState executed = spec.apply(invoked, ok);
    Event forged = *spec.forced_next(executed, "p1");
    forged.payload["self"] = "forged";
    EXPECT_FALSE(spec.permits(executed, forged));
    EXPECT_EQ(code_of([&] { spec.apply(executed, forged); }), ErrorCode::SpecViolation);

    Event marker_step;
    marker_step.kind = EventKind::Apply;
    marker_step.label = "p0";
    marker_step.action = qgo::kApplyOp;
    EXPECT_EQ(code_of([&] { spec.apply(s.initial, marker_step); }), ErrorCode::SpecViolation);
}

TEST(Spec, InFlightMessagesAreCoveredAndRecorded) {
    const Scenario s = spec_scenario("token-ring", 3);
    const SpecProgram& spec = spec_of(s);
    std::mt19937_64 rng(4);
    IdAllocator ids = IdAllocator::after(s.initial);
    SystemState st = s.initial;
    // p0 ticks and passes the token with its qubit.
    for (int k = 0; k < 2; ++k) {
        Event e = spec.enabled_events(st).front();
        ASSERT_EQ(e.label, "p0");
        e = spec.realize(st, e, rng);
        ids.assign(e);
        st = spec.apply(st, e);
    }
    const std::vector<MessageId> flying = in_flight_messages(st);
    ASSERT_EQ(flying.size(), 1u);
    st = spec.apply(st, invoke("p2", kSnapshotMeasure));
    Event atomic = spec.realize(st, *spec.forced_next(st, "p2"), rng);
    const std::string key = std::to_string(flying[0]);
    ASSERT_TRUE(atomic.payload.at("messages").contains(key));
    const json digit = json::parse(atomic.payload.at("messages").at(key).get<std::string>()).at("q");
    const SystemState after = spec.apply(st, atomic);
    EXPECT_EQ(after.ext.at("p1").at("res").at("channels").at("p0->p1"), json::array({atomic.payload.at("messages").at(key)}));
    EXPECT_EQ(after.ext.at("p2").at("res").at("channels").at("p0->p2"), json::array());
    EXPECT_EQ(after.channels.at({"p0", "p1"}).front().op_outcome, std::nullopt);
    EXPECT_TRUE(digit == "0" || digit == "1");

    Event dropped = atomic;
    dropped.payload["messages"] = json::object();
    EXPECT_EQ(code_of([&] { spec.apply(st, dropped); }), ErrorCode::SpecViolation);
}

TEST(Spec, InFlightMessagesSkipMarkers) {
    SystemState st = testing::epr_system();
    MessageInstance marker;
    marker.id = 4;
    marker.marker = kRecordOnly;
    st = send(st, "p0", marker, "p1");
    MessageInstance plain;
    plain.id = 5;
    st = send(st, "p1", plain, "p0");
    MessageInstance second;
    second.id = 3;
    st = send(st, "p0", second, "p1");
    EXPECT_EQ(in_flight_messages(st), (std::vector<MessageId>{3, 5}));
}

// P(0) = cos²(θ/2) for the state cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
TEST(Spec, AtomicSnapshotFrequenciesMatchBornRule) {
    const double theta = 1.1;
    const Scenario s = spec_scenario(
        "empty", 1, json{{"registers", json::array({{{"owner", "p0"}, {"state", "psi:1.1,0.5"}}})}});
    const SpecProgram& spec = spec_of(s);
    const SystemState invoked = spec.apply(s.initial, invoke("p0", kSnapshotMeasure));
    std::mt19937_64 rng(99);
    const int trials = 4000;
    int zeros = 0;
    for (int k = 0; k < trials; ++k) {
        const Event atomic = spec.realize(invoked, *spec.forced_next(invoked, "p0"), rng);
        zeros += json::parse(atomic.payload.at("processors").at("p0").get<std::string>()).at("q") == "0";
    }
    const double p = std::pow(std::cos(theta / 2), 2);
    const double sigma = std::sqrt(p * (1 - p) / trials);
    EXPECT_NEAR(static_cast<double>(zeros) / trials, p, 5 * sigma);
}

TEST(Spec, HistoryDropsTheAtomicStep) {
    const Scenario s = spec_scenario("token-ring", 2);
    Event atomic;
    atomic.kind = EventKind::AtomicExecute;
    EXPECT_FALSE(s.program->in_history(atomic));
    EXPECT_TRUE(s.program->in_history(invoke("p0", kRecordOnly)));
}

TEST(Spec, HarnessRunsAreValidSpecExecutions) {
    for (const std::string gid : builtin_global_op_names())
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            ScenarioConfig c = testing::qgo_config("teleport", 3, gid, 2, seed);
            c.mode = RunMode::Spec;
            const Scenario s = build_scenario(c);
            const Execution x = run_simulation(s, seed);
            const ValidationResult v = validate_spec_execution(spec_of(s), x);
            EXPECT_TRUE(v.ok) << gid << " " << seed << ": " << v.reason;
            std::size_t atomics = 0;
            for (const Event& e : x.events) atomics += e.kind == EventKind::AtomicExecute;
            EXPECT_EQ(atomics, 2u);
        }
}

}  // namespace
}  // namespace qdsim
