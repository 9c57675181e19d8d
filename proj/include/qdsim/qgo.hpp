#pragma once

// Decomposable global operations and the marker-based augmentation of a base
// algorithm that executes them.
//
// Per-processor protocol state lives in SystemState::ext as a JSON object
// (null when idle):
//
//   {"op": gid, "phase": p, "trigger": chan|null, "self": r|null,
//    "channels": {chan: [r...]}, "waitset": [chan...], "broadcast": [dest...],
//    "held": message|null, "held_chan": chan|null}
//
// with p one of "execute", "broadcast", "wait", "record-op", "record",
// "respond". Every phase except "wait" belongs to an atomic procedure and
// determines the processor's next event (see QgoProgram::forced_next).

#include "qdsim/exec.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace qdsim {

/// Builds one component of a global operation from the component's
/// registers (sorted by id) and classical part.
using ComponentFactory = std::function<LocalOperation(const std::vector<Register>&, const ClassicalState&)>;

struct DecomposableGlobalOp {
    std::string gid;
    /// Applied to every processor without an entry in processor_overrides.
    ComponentFactory processor_op;
    std::map<ProcessorId, ComponentFactory> processor_overrides;
    /// Keyed by the "class" field of a message's classical part; "*" is the
    /// fallback.
    std::map<std::string, ComponentFactory> message_ops;

    LocalOperation for_processor(const ProcessorId& p, const std::vector<Register>& regs,
                                 const ClassicalState& classical) const;
    LocalOperation for_message(const MessageInstance& msg, const std::vector<Register>& regs) const;
};

using GlobalOpLibrary = std::map<std::string, DecomposableGlobalOp>;

/// Fetches a gid from the library; throws UnknownGlobalOp.
const DecomposableGlobalOp& lookup(const GlobalOpLibrary& library, const std::string& gid);

/// Quantum registers of an in-flight or held message, sorted by id.
std::vector<Register> message_registers(const DensityMatrix& quantum, const MessageInstance& msg);

namespace qgo {

inline constexpr const char* kApplyOp = "qgo.op";
inline constexpr const char* kApplyMessage = "qgo.msg";
inline constexpr const char* kRecord = "qgo.record";
inline constexpr const char* kMarker = "qgo.marker";

/// True for events the protocol adds (markers, component applications,
/// recording steps, message-labelled applications).
bool is_protocol_event(const Event& e);

/// {"processor", "gid", "self", "channels"}.
nlohmann::json response_record(const ProcessorId& p, const std::string& gid, const std::string& self,
                               const nlohmann::json& channels);

}  // namespace qgo

/// The augmented algorithm Ã. δ̃ admits base steps while no procedure is
/// running at the processor, plus the protocol's Invoke, component, marker,
/// recording and Respond events in the order the procedures prescribe.
/// Applies labelled message_label(μ) model G.μ acting on μ in flight; they
/// are physically well formed but never admitted by δ̃.
class QgoProgram : public Program {
public:
    QgoProgram(std::shared_ptr<const BaseAlgorithm> base, std::shared_ptr<const GlobalOpLibrary> library);

    std::string name() const override;
    const BaseAlgorithm& base() const override { return *base_; }
    const GlobalOpLibrary& library() const { return *library_; }
    std::shared_ptr<const BaseAlgorithm> base_ptr() const { return base_; }
    std::shared_ptr<const GlobalOpLibrary> library_ptr() const { return library_; }

    SystemState apply(const SystemState& pre, const Event& e) const override;
    bool permits(const SystemState& pre, const Event& e) const override;
    /// Invocations, responses and base events.
    bool in_history(const Event& e) const override;
    Event realize(const SystemState& pre, Event e, std::mt19937_64& rng) const override;
    /// Base steps and receptions at processors not inside a procedure.
    std::vector<Event> enabled_events(const SystemState& state) const override;
    std::optional<Event> forced_next(const SystemState& state, const ProcessorId& proc) const override;

    /// The resolved G.π for the next qgo.op event at `proc`.
    LocalOperation processor_component(const SystemState& state, const ProcessorId& proc,
                                       const std::string& gid) const;
    LocalOperation message_component(const SystemState& state, const MessageInstance& msg,
                                     const std::string& gid) const;

private:
    SystemState apply_receive(const SystemState& pre, const Event& e) const;
    SystemState apply_protocol_step(const SystemState& pre, const Event& e) const;

    std::shared_ptr<const BaseAlgorithm> base_;
    std::shared_ptr<const GlobalOpLibrary> library_;
};

std::shared_ptr<const QgoProgram> qgo_augment(std::shared_ptr<const BaseAlgorithm> base,
                                              std::shared_ptr<const GlobalOpLibrary> library);

struct ProcedureRun {
    std::vector<Event> events;
    SystemState state;
};

/// Runs `first` and then every event the procedure it opens forces, sampling
/// outcomes from `rng`.
ProcedureRun run_procedure(const Program& program, const SystemState& state, Event first, std::mt19937_64& rng,
                           IdAllocator& ids);

/// Invoke(G) at `proc` followed by ProcessNewGlobalOp(G, ⊥). Throws
/// ConcurrentInvocation when any processor has an operation underway.
ProcedureRun qgo_invoke(const QgoProgram& program, const SystemState& state, const ProcessorId& proc,
                        const std::string& gid, std::mt19937_64& rng, IdAllocator& ids);

/// ProcessNewGlobalOp(G, chan) at `proc`: the component, the channel records
/// and the marker broadcast. Throws AlreadyActive when `proc` is not idle.
ProcedureRun qgo_process_new_global_op(const QgoProgram& program, const SystemState& state, const ProcessorId& proc,
                                       const std::string& gid, const std::optional<ChannelId>& chan,
                                       std::mt19937_64& rng, IdAllocator& ids);

/// Receive at `proc` of the head of `chan`, with whatever the protocol does
/// about it.
ProcedureRun qgo_receive(const QgoProgram& program, const SystemState& state, const ProcessorId& proc,
                         const ChannelId& chan, std::mt19937_64& rng, IdAllocator& ids);

/// True when no processor has a global operation underway.
bool qgo_idle(const SystemState& state);

}  // namespace qdsim
