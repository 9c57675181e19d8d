#pragma once

// Computational causality over executions and the reordering lemmas as
// checked transformations. Positions are one-based, as for slice().

#include "qdsim/exec.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace qdsim {

/// The strict partial order ≺_X, stored over event ids so that it can be
/// compared between reorderings of the same events.
class CausalRelation {
public:
    CausalRelation() = default;

    std::size_t size() const { return ids_.size(); }
    /// Event ids in increasing order.
    const std::vector<std::uint64_t>& ids() const { return ids_; }
    bool contains(std::uint64_t id) const;
    /// a ≺ b; throws InvalidArgument for unknown ids.
    bool precedes(std::uint64_t a, std::uint64_t b) const;
    /// Every pair (a, b) with a ≺ b, sorted.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs() const;
    std::size_t pair_count() const;

    friend bool operator==(const CausalRelation&, const CausalRelation&) = default;

private:
    friend CausalRelation compute_causality(const Execution& x);

    using Row = std::vector<std::uint64_t>;

    std::size_t slot(std::uint64_t id) const;
    bool bit(const Row& row, std::size_t k) const { return (row[k / 64] >> (k % 64)) & 1U; }

    std::vector<std::uint64_t> ids_;
    /// past_[k] holds the slots of the strict causal past of ids_[k].
    std::vector<Row> past_;
};

/// A1 ∪ A2 for two events with `a` earlier: same acting component, or the
/// send and the reception of one message.
bool directly_ordered(const Event& a, const Event& b);

/// Transitive closure of A1 ∪ A2. Throws InvalidArgument on duplicate event ids.
CausalRelation compute_causality(const Execution& x);

/// ≺_X = ≺_X′. Throws NotComparable unless both executions start from the
/// same state and contain the same events.
bool equicausal(const Execution& x, const Execution& y);

struct Lightcones {
    std::vector<std::uint64_t> past;
    std::vector<std::uint64_t> future;
};

/// L_P(D) and L_F(D) for a set of event ids, each sorted.
Lightcones lightcones(const Execution& x, std::span<const std::uint64_t> d);

/// Exchanges the events at positions i and i+1. Throws CausalDependency when
/// e_i ≺ e_{i+1}, and LemmaViolation if the result is ill formed, changes ≺ or
/// changes the final state beyond 1e-12.
Execution swap_adjacent(const Execution& x, std::size_t i);

/// Moves the event at position i to just after position j through adjacent
/// swaps. Throws CausalDependency when it has a causal successor in (i, j].
Execution move_to_end(const Execution& x, std::size_t i, std::size_t j);

/// X_{1:i-1} :: Y₀ :: X_{j+1:n}. Throws SubstitutionMismatch unless Y₀ starts
/// at Ψ^{i-1}, is equicausal with X_{i:j} and reaches its final state within
/// `tol`; LemmaViolation if the result breaks the lemma's conclusions.
Execution substitute(const Execution& x, std::size_t i, std::size_t j, const Fragment& y0,
                     double tol = tol::algebraic);

/// Final states agree within 1e-9. Throws NotComparable unless x and y are
/// equicausal.
bool check_equiv_theorem(const Execution& x, const Execution& y);

/// An execution together with its replayed states and causal relation, kept
/// current under lemma-checked adjacent swaps. A swap recomputes the one
/// state that changes and compares the next one against the cached value,
/// so long swap chains avoid full replays.
class CheckedExecution {
public:
    explicit CheckedExecution(Execution x);

    const Execution& execution() const { return x_; }
    const std::vector<Event>& events() const { return x_.events; }
    std::size_t size() const { return x_.events.size(); }
    /// Ψ^k, for k = 0..n.
    const SystemState& state(std::size_t k) const { return states_[k]; }
    const SystemState& final_state() const { return states_.back(); }
    const CausalRelation& causality() const { return causality_; }
    /// Position (one-based) of the event with this id.
    std::size_t position(std::uint64_t id) const;

    /// swap_adjacent(i) in place, with the same errors.
    void swap(std::size_t i, double tol = tol::algebraic);
    /// move_to_end(i, j) in place.
    void move_to_end(std::size_t i, std::size_t j, double tol = tol::algebraic);
    /// Moves the event at position i back to position j < i.
    void move_back(std::size_t i, std::size_t j, double tol = tol::algebraic);
    /// Replaces the events from position `from` on and replays the suffix.
    /// The causal relation is recomputed; no lemma is asserted.
    void replace_suffix(std::size_t from, std::vector<Event> events);

private:
    Execution x_;
    std::vector<SystemState> states_;
    CausalRelation causality_;
};

}  // namespace qdsim
