#pragma once

// Reorders an execution X̃ of the augmented algorithm into Ỹ (pre, op and
// post events of every invocation grouped), Z̃ (message components applied
// while the messages are in flight) and the specification execution Ŷ,
// checking each claimed property along the way.

#include "qdsim/causality.hpp"
#include "qdsim/specmachine.hpp"

#include <map>
#include <string>
#include <vector>

namespace qdsim {

/// One invocation: the events from its Invoke to its last Respond
/// (one-based, inclusive).
struct MainFragment {
    std::size_t begin = 0;
    std::size_t end = 0;
    ProcessorId leader;
    std::string gid;
};

/// Throws HypothesisViolation for overlapping or unfinished invocations.
std::vector<MainFragment> decompose(const Execution& x);

enum class Part { Pre, Op, Post };

struct Tripartition {
    std::map<std::uint64_t, Part> part;
    /// Event ids of each processor's fused block: trigger (Invoke or first
    /// marker reception), component application, marker broadcast.
    std::map<ProcessorId, std::vector<std::uint64_t>> star;

    std::size_t count(Part p) const;
};

/// Throws ProtocolIncomplete when a processor never applied its component,
/// ClaimViolation when a block is not contiguous.
Tripartition tripartition(const Execution& x, const MainFragment& f);

struct SwapRecord {
    /// "inversion", "reception" (the non-equicausal swap) or "bubble".
    std::string kind;
    std::uint64_t first = 0;
    std::uint64_t second = 0;
};

/// Swaps the first adjacent (post, pre), (post, op) or (op, pre) pair of the
/// fragment, scanning left to right, until none is left. Returns the swaps.
std::vector<SwapRecord> eliminate_inversions(CheckedExecution& c, const MainFragment& f, const Tripartition& t);

/// Moves every recorded message's component application in front of its
/// reception, relabelled to the message, then back to just after the op
/// block. Expects the fragment in pre::op::post form; returns the message
/// ids in order together with the swaps.
std::vector<MessageId> reorder_message_ops(CheckedExecution& c, const MainFragment& f, const Tripartition& t,
                                           std::vector<SwapRecord>& log);

/// e ≃ ê: same kind, component and action, with the same outcome, message,
/// peer, fresh registers and payload.
bool corresponds(const Event& a, const Event& b);
bool histories_correspond(const std::vector<Event>& a, const std::vector<Event>& b);

struct Verdict {
    std::string name;
    bool ok = false;
    std::string detail;
};

struct Certificate {
    bool accepted = false;
    std::string failed_step;
    std::string reason;
    std::vector<MainFragment> fragments;
    std::vector<std::vector<MessageId>> recorded;  // per fragment
    std::vector<Verdict> verdicts;
    std::vector<SwapRecord> swaps;
    Execution y;
    Execution z;
    Execution spec;
    /// One-based position of each AtomicExecute event in `spec`.
    std::vector<std::size_t> atomic_positions;

    const Verdict* verdict(const std::string& name) const;
};

/// Builds Ŷ from Z̃ in normal form: events outside the history filter are
/// dropped and each op block with its message components becomes one
/// AtomicExecute right after it.
Execution build_spec_execution(const Execution& z, const std::vector<MainFragment>& fragments,
                               const std::vector<Tripartition>& parts,
                               const std::vector<std::vector<MessageId>>& recorded,
                               std::shared_ptr<const SpecProgram> spec, std::vector<std::size_t>* atomic_positions);

/// The full pipeline. Never throws for a malformed X̃; a failure rejects the
/// certificate and names the step.
Certificate verify(const Execution& x);

/// Re-checks every verdict of a certificate from scratch: replays, causal
/// relations and histories are recomputed from X̃ and the embedded executions.
std::vector<Verdict> recheck(const Execution& x, const Certificate& cert);

nlohmann::json to_json(const Certificate& cert);

}  // namespace qdsim
