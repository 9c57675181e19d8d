#pragma once

// The atomic specification δ̂: base events, plus Invoke, a single
// AtomicExecute applying every component of G at once, and Respond.
//
// σ̂_π lives in SystemState::ext: null, or {"op": gid, "res": null | R_π}.

#include "qdsim/qgo.hpp"

namespace qdsim {

class SpecProgram : public Program {
public:
    SpecProgram(std::shared_ptr<const BaseAlgorithm> base, std::shared_ptr<const GlobalOpLibrary> library);

    std::string name() const override;
    const BaseAlgorithm& base() const override { return *base_; }
    const GlobalOpLibrary& library() const { return *library_; }

    /// Throws SpecViolation when a guard of the four transition kinds fails.
    SystemState apply(const SystemState& pre, const Event& e) const override;
    bool permits(const SystemState& pre, const Event& e) const override;
    bool in_history(const Event& e) const override;
    /// Samples the outcome tuple of an AtomicExecute template component by
    /// component: processors in order, then in-flight messages in channel order.
    Event realize(const SystemState& pre, Event e, std::mt19937_64& rng) const override;
    /// Base steps only; invocations come from outside.
    std::vector<Event> enabled_events(const SystemState& state) const override;
    /// AtomicExecute after an Invoke, then the pending Respond of each processor.
    std::optional<Event> forced_next(const SystemState& state, const ProcessorId& proc) const override;

private:
    std::shared_ptr<const BaseAlgorithm> base_;
    std::shared_ptr<const GlobalOpLibrary> library_;
};

/// Non-concurrency is checked here on top of δ̂: an Invoke is rejected
/// while any σ̂ is set.
ValidationResult validate_spec_execution(const SpecProgram& spec, const Execution& x);

/// Ids of the non-marker messages in flight, in channel order then FIFO order.
std::vector<MessageId> in_flight_messages(const SystemState& state);

}  // namespace qdsim
