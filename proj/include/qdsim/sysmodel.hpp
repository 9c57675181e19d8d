#pragma once

// Distributed-system state: processors and FIFO channels, each with a
// classical part, plus one global density matrix over every live register.
// Send and receive only relabel register ownership; the matrix entries are
// never touched by them.

#include "qdsim/qcore.hpp"

#include <nlohmann/json.hpp>

#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace qdsim {

using ProcessorId = std::string;
using MessageId = std::uint64_t;
/// Structured immutable datum; equality is structural and dump() is
/// deterministic (object keys are kept sorted).
using ClassicalState = nlohmann::json;

struct ChannelId {
    ProcessorId source;
    ProcessorId destination;

    std::string str() const { return source + "->" + destination; }
    static ChannelId parse(const std::string& text);

    friend auto operator<=>(const ChannelId&, const ChannelId&) = default;
};

struct MessageInstance {
    MessageId id = 0;
    ClassicalState classical = ClassicalState::object();
    std::vector<std::uint64_t> quantum_regs;
    /// Global-operation marker (gid); set only on marker messages.
    std::optional<std::string> marker;
    /// Outcome of the global operation on this message, held until the
    /// receiver moves it into its record.
    std::optional<std::string> op_outcome;

    friend bool operator==(const MessageInstance&, const MessageInstance&) = default;
};

struct Owner {
    enum class Kind { Processor, Message };
    Kind kind = Kind::Processor;
    ProcessorId processor;
    MessageId message = 0;

    static Owner of_processor(ProcessorId p) { return {Kind::Processor, std::move(p), 0}; }
    static Owner of_message(MessageId m) { return {Kind::Message, {}, m}; }

    friend bool operator==(const Owner&, const Owner&) = default;
};

struct SystemState {
    std::vector<ProcessorId> processors;
    std::map<ProcessorId, ClassicalState> classical;
    /// Protocol-extension register per processor (QGO τ or the spec's σ̂).
    std::map<ProcessorId, ClassicalState> ext;
    std::map<ChannelId, std::vector<MessageInstance>> channels;
    std::map<std::uint64_t, Owner> ownership;
    std::set<MessageId> sent_ids;
    DensityMatrix quantum;

    bool has_processor(const ProcessorId& p) const;
    std::vector<ChannelId> incoming(const ProcessorId& p) const;
    std::vector<ChannelId> outgoing(const ProcessorId& p) const;
    /// Registers owned by the processor, sorted by id.
    std::vector<Register> owned_registers(const ProcessorId& p) const;
    /// The in-flight message with this id and its channel, if any.
    std::optional<std::pair<ChannelId, std::size_t>> locate(MessageId id) const;
};

/// Classical part of a local operation: σ' = cop(σ, r).
using ClassicalUpdate = std::function<ClassicalState(const ClassicalState&, const std::string&)>;

/// A fully resolved operation: the quantum part with its register placement
/// and the classical update applied afterwards.
struct LocalOperation {
    std::string name;
    QuantumOperation op;
    RegisterMap map;
    ClassicalUpdate update;
};

/// Builds a state with every channel p->p' (self-channels included) empty.
/// `owners` must partition the registers of `quantum` among the processors.
SystemState make_system(std::vector<ProcessorId> processors, std::map<ProcessorId, ClassicalState> classical,
                        std::map<ProcessorId, ClassicalState> ext, DensityMatrix quantum,
                        std::map<std::uint64_t, Owner> owners);

/// Appends `msg` to sender->dest; ownership of its registers moves to the message.
SystemState send(const SystemState& state, const ProcessorId& sender, MessageInstance msg, const ProcessorId& dest);

/// Pops the head of `chan` and moves its registers to the receiver, without
/// recording the classical contents.
std::pair<SystemState, MessageInstance> pop_message(const SystemState& state, const ProcessorId& receiver,
                                                    const ChannelId& chan);

/// Appends {"chan", "msg"} to the receiver's "inbox" array.
SystemState record_delivery(const SystemState& state, const ProcessorId& receiver, const ChannelId& chan,
                            const MessageInstance& msg);

/// pop_message followed by record_delivery.
std::pair<SystemState, MessageInstance> receive(const SystemState& state, const ProcessorId& receiver,
                                                const ChannelId& chan);

/// Applies the local operation at `proc` with outcome r. Every input register
/// must be owned by `proc` (LocalityViolation otherwise); created registers
/// become owned by `proc`, discarded ones leave the ownership map.
SystemState apply_local(const SystemState& state, const ProcessorId& proc, const LocalOperation& op,
                        const std::string& outcome);

/// Applies an operation to the registers and classical part of an in-flight
/// message, wherever it sits in its channel.
SystemState apply_in_flight(const SystemState& state, MessageId msg, const LocalOperation& op,
                            const std::string& outcome);

/// Checks that ownership partitions the live registers and that every
/// message's registers are owned by it. Returns a description of the first
/// problem, or nullopt.
std::optional<std::string> ownership_problem(const SystemState& state);

/// Structural equality of the classical parts plus entry-wise comparison of
/// the canonical quantum matrices. The quantum tolerance is relative to the
/// larger trace when that is below one, so heavily subnormalized states are
/// not compared vacuously.
bool states_equal(const SystemState& a, const SystemState& b, double tol);

/// Exact equality (used for fragment boundaries).
bool states_identical(const SystemState& a, const SystemState& b);

nlohmann::json to_json(const MessageInstance& msg);
MessageInstance message_from_json(const nlohmann::json& j);

}  // namespace qdsim
