#include "support.hpp"

#include "qdsim/error.hpp"

#include <gtest/gtest.h>

namespace qdsim {
namespace {

using nlohmann::json;
using testing::epr_system;

MessageInstance classical_message(MessageId id, json body = json{{"v", 1}}) {
    MessageInstance m;
    m.id = id;
    m.classical = std::move(body);
    return m;
}

LocalOperation measure(std::uint64_t reg, const std::string& key) {
    return {"measure", basis_measurement({2}), {{reg}, {}}, [key](const ClassicalState& s, const std::string& r) {
                ClassicalState out = s;
                out[key] = r;
                return out;
            }};
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::InvalidArgument;
}

TEST(MakeSystem, CreatesEveryChannelIncludingSelfChannels) {
    const SystemState s = epr_system();
    EXPECT_EQ(s.channels.size(), 4u);
    EXPECT_TRUE(s.channels.contains(ChannelId{"p0", "p0"}));
    EXPECT_EQ(s.incoming("p1").size(), 2u);
    EXPECT_EQ(s.owned_registers("p0").size(), 1u);
    EXPECT_EQ(s.owned_registers("p0")[0].id, 1u);
    EXPECT_FALSE(ownership_problem(s));
}

TEST(MakeSystem, RejectsIncompleteOwnership) {
    EXPECT_EQ(code_of([] {
                  make_system({"p0"}, {{"p0", json::object()}}, {{"p0", nullptr}}, testing::epr_density(),
                              {{1, Owner::of_processor("p0")}});
              }),
              ErrorCode::OwnershipViolation);
}

TEST(ChannelId, ParseRoundTrip) {
    const ChannelId c{"p3", "p12"};
    EXPECT_EQ(ChannelId::parse(c.str()), c);
    EXPECT_EQ(code_of([] { ChannelId::parse("p0p1"); }), ErrorCode::ParseError);
}

TEST(Send, ClassicalMessageLeavesQuantumStateIdentical) {
    const SystemState s = epr_system();
    const SystemState t = send(s, "p0", classical_message(1), "p1");
    EXPECT_EQ(t.channels.at({"p0", "p1"}).size(), 1u);
    EXPECT_EQ(t.quantum.rho, s.quantum.rho);
    EXPECT_EQ(t.ownership, s.ownership);
}

TEST(Send, EprHalfMovesOwnershipToTheMessage) {
    const SystemState s = epr_system();
    MessageInstance m = classical_message(1);
    m.quantum_regs = {1};
    const SystemState t = send(s, "p0", m, "p1");
    EXPECT_EQ(t.quantum.rho, s.quantum.rho);
    EXPECT_EQ(t.ownership.at(1), Owner::of_message(1));
    EXPECT_TRUE(t.owned_registers("p0").empty());
    EXPECT_FALSE(ownership_problem(t));

    const auto [u, got] = receive(t, "p1", {"p0", "p1"});
    EXPECT_EQ(got.id, 1u);
    EXPECT_EQ(u.ownership.at(1), Owner::of_processor("p1"));
    EXPECT_EQ(u.quantum.rho, s.quantum.rho);
    EXPECT_EQ(u.owned_registers("p1").size(), 2u);
}

TEST(Send, Errors) {
    const SystemState s = epr_system();
    MessageInstance foreign = classical_message(1);
    foreign.quantum_regs = {2};
    EXPECT_EQ(code_of([&] { send(s, "p0", foreign, "p1"); }), ErrorCode::OwnershipViolation);
    const SystemState t = send(s, "p0", classical_message(1), "p1");
    EXPECT_EQ(code_of([&] { send(t, "p1", classical_message(1), "p0"); }), ErrorCode::DuplicateMessage);
    EXPECT_EQ(code_of([&] { send(s, "p0", classical_message(2), "p9"); }), ErrorCode::NotRecipient);
}

TEST(Receive, FifoOrder) {
    SystemState s = epr_system();
    s = send(s, "p0", classical_message(1, {{"n", "first"}}), "p1");
    s = send(s, "p0", classical_message(2, {{"n", "second"}}), "p1");
    auto [t, m1] = receive(s, "p1", {"p0", "p1"});
    auto [u, m2] = receive(t, "p1", {"p0", "p1"});
    EXPECT_EQ(m1.id, 1u);
    EXPECT_EQ(m2.id, 2u);
    const json& inbox = u.classical.at("p1").at("inbox");
    ASSERT_EQ(inbox.size(), 2u);
    EXPECT_EQ(inbox[0].at("msg").at("n"), "first");
    EXPECT_EQ(inbox[1].at("chan"), "p0->p1");
}

TEST(Receive, ClassicalMessageKeepsOwnership) {
    SystemState s = send(epr_system(), "p0", classical_message(5), "p1");
    const auto [t, m] = receive(s, "p1", {"p0", "p1"});
    EXPECT_EQ(t.ownership, epr_system().ownership);
    EXPECT_EQ(m.classical, (json{{"v", 1}}));
}

TEST(Receive, Errors) {
    const SystemState s = epr_system();
    EXPECT_EQ(code_of([&] { receive(s, "p1", {"p0", "p1"}); }), ErrorCode::EmptyChannel);
    const SystemState t = send(s, "p0", classical_message(1), "p1");
    EXPECT_EQ(code_of([&] { receive(t, "p0", {"p0", "p1"}); }), ErrorCode::NotRecipient);
}

TEST(ApplyLocal, IdentityWithNoOutcomeOnlyUpdatesClassicalState) {
    const SystemState s = epr_system();
    const LocalOperation op{"note", identity_operation({2}), {{1}, {}},
                            [](const ClassicalState& c, const std::string& r) {
                                ClassicalState out = c;
                                out["seen"] = r;
                                return out;
                            }};
    const SystemState t = apply_local(s, "p0", op, std::string(kNoOutcome));
    EXPECT_EQ(t.quantum.rho, s.quantum.rho);
    EXPECT_EQ(t.classical.at("p0").at("seen"), kNoOutcome);
    EXPECT_EQ(t.classical.at("p1"), s.classical.at("p1"));
}

TEST(ApplyLocal, MeasuringEprHalfCollapsesBoth) {
    const SystemState t = apply_local(epr_system(), "p1", measure(2, "m"), "1");
    Matrix expected = Matrix::Zero(4, 4);
    expected(3, 3) = 0.5;
    EXPECT_LT((canonical_form(t.quantum).rho - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(t.classical.at("p1").at("m"), "1");
}

TEST(ApplyLocal, LocalityAndZeroProbability) {
    const SystemState s = epr_system();
    EXPECT_EQ(code_of([&] { apply_local(s, "p0", measure(2, "m"), "0"); }), ErrorCode::LocalityViolation);
    const SystemState t = apply_local(s, "p0", measure(1, "m"), "0");
    EXPECT_EQ(code_of([&] { apply_local(t, "p1", measure(2, "m"), "1"); }), ErrorCode::ZeroProbabilityHistory);
}

TEST(ApplyLocal, DisjointProcessorsCommute) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const SystemState s = epr_system();
        const QuantumOperation a = testing::random_operation({2}, 2, rng);
        const QuantumOperation b = testing::random_operation({2}, 3, rng);
        const LocalOperation la{"a", a, {{1}, {}}, nullptr};
        const LocalOperation lb{"b", b, {{2}, {}}, nullptr};
        const SystemState ab = apply_local(apply_local(s, "p0", la, "r1"), "p1", lb, "r2");
        const SystemState ba = apply_local(apply_local(s, "p1", lb, "r2"), "p0", la, "r1");
        EXPECT_TRUE(states_equal(ab, ba, 1e-12));
    }
}

TEST(ApplyLocal, PreparationAndDiscardMaintainOwnership) {
    const SystemState s = epr_system();
    Vector zero(2);
    zero << 1, 0;
    const SystemState grown = apply_local(s, "p0", {"prep", preparation(zero, {2}), {{}, {{3, 2}}}, nullptr}, "⊥");
    EXPECT_EQ(grown.ownership.at(3), Owner::of_processor("p0"));
    EXPECT_FALSE(ownership_problem(grown));
    const SystemState shrunk = apply_local(grown, "p0", {"disc", discard({2}), {{1}, {}}, nullptr}, "⊥");
    EXPECT_FALSE(shrunk.ownership.contains(1));
    EXPECT_FALSE(ownership_problem(shrunk));
    EXPECT_EQ(shrunk.quantum.space.total_dim(), 4u);
}

TEST(ApplyInFlight, ActsOnMessageRegistersOnly) {
    SystemState s = epr_system();
    MessageInstance m = classical_message(1);
    m.quantum_regs = {1};
    s = send(s, "p0", m, "p1");
    const LocalOperation op{"g", basis_measurement({2}), {{1}, {}}, [](const ClassicalState& c, const std::string& r) {
                                ClassicalState out = c;
                                out["g"] = r;
                                return out;
                            }};
    const SystemState t = apply_in_flight(s, 1, op, "0");
    EXPECT_NEAR(t.quantum.trace(), 0.5, 1e-15);
    EXPECT_EQ(t.channels.at({"p0", "p1"})[0].classical.at("g"), "0");
    const LocalOperation other{"g", basis_measurement({2}), {{2}, {}}, nullptr};
    EXPECT_EQ(code_of([&] { apply_in_flight(s, 1, other, "0"); }), ErrorCode::LocalityViolation);
    EXPECT_EQ(code_of([&] { apply_in_flight(s, 9, op, "0"); }), ErrorCode::ReplayError);
}

TEST(StatesEqual, Basics) {
    const SystemState s = epr_system();
    EXPECT_TRUE(states_equal(s, s, 0.0));
    EXPECT_TRUE(states_identical(s, s));
    SystemState flipped = s;
    flipped.classical.at("p0")["bit"] = 1;
    EXPECT_FALSE(states_equal(s, flipped, 1e-9));
    SystemState nudged = s;
    nudged.quantum.rho(0, 0) += 1e-11;
    EXPECT_TRUE(states_equal(s, nudged, 1e-9));
    EXPECT_FALSE(states_identical(s, nudged));
    nudged.quantum.rho(0, 0) += 1e-6;
    EXPECT_FALSE(states_equal(s, nudged, 1e-9));
}

TEST(StatesEqual, ToleranceIsRelativeForSubnormalizedStates) {
    SystemState a = epr_system();
    a.quantum.rho *= 1e-10;
    SystemState b = a;
    b.quantum.rho(0, 0) *= 2.0;  // a relative error of 100% far below 1e-9 absolute
    EXPECT_FALSE(states_equal(a, b, 1e-9));
}

TEST(MessageJson, RoundTrip) {
    MessageInstance m = classical_message(4, {{"class", "token"}, {"hop", 2}});
    m.quantum_regs = {3, 5};
    m.marker = "snapshot-measure";
    m.op_outcome = "01";
    EXPECT_EQ(message_from_json(to_json(m)), m);
}

}  // namespace
}  // namespace qdsim
