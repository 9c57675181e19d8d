#pragma once

// Events, algorithms, transition systems and executions.

#include "qdsim/sysmodel.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace qdsim {

enum class EventKind { Invoke, Respond, Apply, Send, Receive, AtomicExecute };

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view text);

/// Label of an event acting on an in-flight message rather than a processor.
std::string message_label(MessageId id);
bool is_message_label(const std::string& label);

/// Something that definitely happened. Apply events carry their realized
/// outcome; Send/Receive carry the message id so pairing is explicit.
struct Event {
    /// Stable identity assigned at generation time; survives reordering.
    std::uint64_t id = 0;
    EventKind kind = EventKind::Apply;
    /// Acting component: a processor, or message_label(m).
    std::string label;
    /// Apply: operation name. Send/Receive: message tag ("" for base
    /// messages). Invoke/AtomicExecute: gid.
    std::string action;
    std::string outcome;
    MessageId msg = 0;
    /// Send: destination. Receive: sender.
    ProcessorId peer;
    /// Apply: ids for registers the operation creates.
    std::vector<std::uint64_t> fresh;
    /// Respond: the response. AtomicExecute: the outcome tuple. Global-op
    /// applications: {"gid": ...}.
    nlohmann::json payload;

    friend bool operator==(const Event&, const Event&) = default;
};

std::string describe(const Event& e);

/// {"id", "kind", "label", ...}; empty fields are omitted.
nlohmann::json to_json(const Event& e);
/// Throws ParseError on malformed records.
Event event_from_json(const nlohmann::json& j);

/// What a processor's algorithm may look at: its own classical state and
/// the registers it owns.
struct LocalView {
    ProcessorId proc;
    ClassicalState classical;
    std::vector<Register> owned;
};

LocalView local_view(const SystemState& state, const ProcessorId& proc);

/// A base step a processor's algorithm is willing to take now.
struct BaseStep {
    EventKind kind = EventKind::Apply;  // Apply or Send
    std::string action;
    ProcessorId dest;  // Send only
    std::size_t fresh_count = 0;  // Apply only

    friend bool operator==(const BaseStep&, const BaseStep&) = default;
};

struct OutgoingMessage {
    ClassicalState classical = ClassicalState::object();
    std::vector<std::uint64_t> quantum_regs;
    ClassicalState sender_after;
};

/// A distributed algorithm {A_π}: every hook sees only the local view of one
/// processor, so the induced transition predicate is local by construction.
class BaseAlgorithm {
public:
    virtual ~BaseAlgorithm() = default;

    virtual std::string name() const = 0;
    virtual std::vector<BaseStep> enabled(const LocalView& view) const = 0;
    virtual LocalOperation resolve_apply(const LocalView& view, const std::string& action,
                                         std::span<const std::uint64_t> fresh) const = 0;
    virtual OutgoingMessage resolve_send(const LocalView& view, const std::string& action,
                                         const ProcessorId& dest) const = 0;
    /// Classical state after delivery; the inbox entry is already recorded.
    virtual ClassicalState on_receive(const LocalView& view, const ChannelId& chan,
                                      const MessageInstance& msg) const = 0;
};

/// Transition semantics (the step function) together with the transition
/// predicate δ and the history filter F of one transition system.
class Program {
public:
    virtual ~Program() = default;

    virtual std::string name() const = 0;
    virtual const BaseAlgorithm& base() const = 0;
    /// Post-event state; throws Error when the step is not well formed.
    virtual SystemState apply(const SystemState& pre, const Event& e) const = 0;
    /// δ restricted to the acting component's local classical state.
    virtual bool permits(const SystemState& pre, const Event& e) const = 0;
    virtual bool in_history(const Event& e) const = 0;
    /// Fills in the outcome of an Apply/AtomicExecute template by sampling.
    virtual Event realize(const SystemState& pre, Event e, std::mt19937_64& rng) const;
    /// Event templates the system may take next (ids and msg ids unassigned).
    virtual std::vector<Event> enabled_events(const SystemState& state) const = 0;
    /// The next event of an atomic block in progress at `proc`, if any.
    virtual std::optional<Event> forced_next(const SystemState& state, const ProcessorId& proc) const;
};

/// The plain base algorithm A: base events only, receptions deliver at once.
class BaseProgram : public Program {
public:
    explicit BaseProgram(std::shared_ptr<const BaseAlgorithm> base);

    std::string name() const override;
    const BaseAlgorithm& base() const override { return *base_; }
    SystemState apply(const SystemState& pre, const Event& e) const override;
    bool permits(const SystemState& pre, const Event& e) const override;
    bool in_history(const Event& e) const override;
    Event realize(const SystemState& pre, Event e, std::mt19937_64& rng) const override;
    std::vector<Event> enabled_events(const SystemState& state) const override;

private:
    std::shared_ptr<const BaseAlgorithm> base_;
};

// Shared semantics of base-algorithm events.
LocalOperation resolve_base_apply(const BaseAlgorithm& base, const SystemState& pre, const Event& e);
SystemState apply_base_event(const BaseAlgorithm& base, const SystemState& pre, const Event& e);
SystemState deliver(const BaseAlgorithm& base, const SystemState& state, const ProcessorId& receiver,
                    const ChannelId& chan, const MessageInstance& msg);
bool base_permits(const BaseAlgorithm& base, const SystemState& pre, const Event& e);
std::vector<Event> base_enabled_events(const BaseAlgorithm& base, const SystemState& state,
                                       const std::function<bool(const ProcessorId&)>& processor_free);
/// Samples the outcome of a local operation.
std::string sample_local(const SystemState& pre, const LocalOperation& op, std::mt19937_64& rng);

/// Hands out event ids, message ids and fresh register ids in generation
/// order.
struct IdAllocator {
    std::uint64_t next_event = 0;
    MessageId next_message = 1;
    std::uint64_t next_register = 1;

    /// Fills the id, the message id of a Send and the fresh register ids.
    void assign(Event& e);
    /// Starts register numbering after the largest id in the state.
    static IdAllocator after(const SystemState& state);
};

/// X = (Ψ⁰, e¹…eⁿ). A fragment is the same thing viewed as a piece of a
/// larger execution.
struct Execution {
    std::shared_ptr<const Program> program;
    SystemState initial;
    std::vector<Event> events;
};
using Fragment = Execution;

/// Ψ⁰…Ψⁿ. Throws Error(ReplayError) carrying the failing event index.
std::vector<SystemState> replay(const Execution& x);
SystemState final_state(const Execution& x);

struct ValidationResult {
    bool ok = true;
    std::optional<std::size_t> first_failure;
    std::string reason;
};

/// Well-formedness (replay succeeds, ownership partitions the registers)
/// plus δ-validity of every step under `delta`.
ValidationResult validate(const Program& delta, const Execution& x);
ValidationResult validate(const Execution& x);

/// X_{i:j} with 1 ≤ i ≤ j ≤ n (one-based, inclusive); initial state Ψ^{i-1}.
Fragment slice(const Execution& x, std::size_t i, std::size_t j);
/// a :: b; throws ConcatMismatch unless final_state(a) equals b.initial exactly.
Fragment concat(const Fragment& a, const Fragment& b);

/// Events passing the program's history filter, order preserved.
std::vector<Event> history(const Execution& x);

}  // namespace qdsim
