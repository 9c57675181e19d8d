#include "qdsim/causality.hpp"

#include "qdsim/error.hpp"

#include <algorithm>
#include <map>

namespace qdsim {

std::size_t CausalRelation::slot(std::uint64_t id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) fail(ErrorCode::InvalidArgument, "event " + std::to_string(id) + " not in relation");
    return static_cast<std::size_t>(it - ids_.begin());
}

bool CausalRelation::contains(std::uint64_t id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

bool CausalRelation::precedes(std::uint64_t a, std::uint64_t b) const { return bit(past_[slot(b)], slot(a)); }

std::vector<std::pair<std::uint64_t, std::uint64_t>> CausalRelation::pairs() const {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (std::size_t a = 0; a < ids_.size(); ++a)
        for (std::size_t b = 0; b < ids_.size(); ++b)
            if (bit(past_[b], a)) out.emplace_back(ids_[a], ids_[b]);
    return out;
}

std::size_t CausalRelation::pair_count() const {
    std::size_t n = 0;
    for (const Row& row : past_)
        for (std::uint64_t word : row) n += static_cast<std::size_t>(std::popcount(word));
    return n;
}

bool directly_ordered(const Event& a, const Event& b) {
    if (a.label == b.label) return true;
    return a.kind == EventKind::Send && b.kind == EventKind::Receive && a.msg == b.msg;
}

CausalRelation compute_causality(const Execution& x) {
    CausalRelation rel;
    for (const Event& e : x.events) rel.ids_.push_back(e.id);
    std::sort(rel.ids_.begin(), rel.ids_.end());
    if (std::adjacent_find(rel.ids_.begin(), rel.ids_.end()) != rel.ids_.end())
        fail(ErrorCode::InvalidArgument, "execution has duplicate event ids");

    const std::size_t n = rel.ids_.size();
    const std::size_t words = (n + 63) / 64;
    rel.past_.assign(n, CausalRelation::Row(words, 0));

    std::map<std::string, std::size_t> last_at;  // label -> slot of its latest event
    std::map<MessageId, std::size_t> send_of;    // msg -> slot of its send
    auto inherit = [&](std::size_t into, std::size_t from) {
        auto& row = rel.past_[into];
        const auto& src = rel.past_[from];
        for (std::size_t w = 0; w < words; ++w) row[w] |= src[w];
        row[from / 64] |= std::uint64_t{1} << (from % 64);
    };
    for (const Event& e : x.events) {
        const std::size_t k = rel.slot(e.id);
        if (auto it = last_at.find(e.label); it != last_at.end()) inherit(k, it->second);
        if (e.kind == EventKind::Receive)
            if (auto it = send_of.find(e.msg); it != send_of.end()) inherit(k, it->second);
        if (e.kind == EventKind::Send) send_of[e.msg] = k;
        last_at[e.label] = k;
    }
    return rel;
}

namespace {

std::vector<std::uint64_t> sorted_ids(const Execution& x) {
    std::vector<std::uint64_t> ids;
    for (const Event& e : x.events) ids.push_back(e.id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

void require_comparable(const Execution& x, const Execution& y) {
    if (sorted_ids(x) != sorted_ids(y)) fail(ErrorCode::NotComparable, "executions have different event sets");
    std::map<std::uint64_t, const Event*> by_id;
    for (const Event& e : x.events) by_id[e.id] = &e;
    for (const Event& e : y.events)
        if (*by_id.at(e.id) != e)
            fail(ErrorCode::NotComparable, "event " + std::to_string(e.id) + " differs between the executions");
    if (!states_identical(x.initial, y.initial))
        fail(ErrorCode::NotComparable, "executions start from different states");
}

void check_position(const Execution& x, std::size_t i, std::size_t last, const char* what) {
    if (i < 1 || i > last || last > x.events.size())
        fail(ErrorCode::InvalidArgument, std::string(what) + ": position out of range");
}

std::vector<SystemState> replay_for_lemma(const Execution& x, const char* lemma) {
    try {
        return replay(x);
    } catch (const Error& err) {
        fail(ErrorCode::LemmaViolation, std::string(lemma) + " produced an ill-formed execution: " + err.what());
    }
}

}  // namespace

bool equicausal(const Execution& x, const Execution& y) {
    require_comparable(x, y);
    return compute_causality(x) == compute_causality(y);
}

Lightcones lightcones(const Execution& x, std::span<const std::uint64_t> d) {
    const CausalRelation rel = compute_causality(x);
    for (std::uint64_t id : d)
        if (!rel.contains(id)) fail(ErrorCode::InvalidArgument, "event " + std::to_string(id) + " not in execution");
    Lightcones out;
    for (std::uint64_t e : rel.ids()) {
        bool in_past = false;
        bool in_future = false;
        for (std::uint64_t member : d) {
            in_past = in_past || rel.precedes(e, member);
            in_future = in_future || rel.precedes(member, e);
        }
        if (in_past) out.past.push_back(e);
        if (in_future) out.future.push_back(e);
    }
    return out;
}

Execution swap_adjacent(const Execution& x, std::size_t i) {
    check_position(x, i, i + 1, "swap_adjacent");
    const Event& a = x.events[i - 1];
    const Event& b = x.events[i];
    if (directly_ordered(a, b))
        fail(ErrorCode::CausalDependency, "cannot swap " + describe(a) + " before " + describe(b));

    const SystemState before = final_state(x);
    Execution y = x;
    std::swap(y.events[i - 1], y.events[i]);
    const auto states = replay_for_lemma(y, "swap_adjacent");
    if (compute_causality(x) != compute_causality(y))
        fail(ErrorCode::LemmaViolation, "swap_adjacent changed the causal relation");
    if (!states_equal(before, states.back(), tol::algebraic))
        fail(ErrorCode::LemmaViolation, "swap_adjacent changed the final state");
    return y;
}

Execution move_to_end(const Execution& x, std::size_t i, std::size_t j) {
    check_position(x, i, j, "move_to_end");
    CheckedExecution c(x);
    c.move_to_end(i, j);
    return c.execution();
}

Execution substitute(const Execution& x, std::size_t i, std::size_t j, const Fragment& y0, double tol) {
    const Fragment piece = slice(x, i, j);
    if (!states_identical(piece.initial, y0.initial))
        fail(ErrorCode::SubstitutionMismatch, "replacement does not start at the fragment's initial state");
    try {
        if (!equicausal(piece, y0)) fail(ErrorCode::SubstitutionMismatch, "replacement is not equicausal with the fragment");
    } catch (const Error& err) {
        if (err.code() != ErrorCode::NotComparable) throw;
        fail(ErrorCode::SubstitutionMismatch, err.what());
    }
    SystemState y0_final;
    try {
        y0_final = final_state(y0);
    } catch (const Error& err) {
        fail(ErrorCode::SubstitutionMismatch, std::string("replacement is ill formed: ") + err.what());
    }
    if (!states_equal(final_state(piece), y0_final, tol))
        fail(ErrorCode::SubstitutionMismatch, "replacement reaches a different final state");

    Execution out{x.program, x.initial, {}};
    out.events.assign(x.events.begin(), x.events.begin() + static_cast<long>(i - 1));
    out.events.insert(out.events.end(), y0.events.begin(), y0.events.end());
    out.events.insert(out.events.end(), x.events.begin() + static_cast<long>(j), x.events.end());

    const auto states = replay_for_lemma(out, "substitute");
    if (!equicausal(x, out)) fail(ErrorCode::LemmaViolation, "substitution changed the causal relation");
    if (!states_equal(final_state(x), states.back(), tol))
        fail(ErrorCode::LemmaViolation, "substitution changed the final state");
    if (validate(x).ok && validate(y0).ok) {
        const ValidationResult v = validate(out);
        if (!v.ok) fail(ErrorCode::LemmaViolation, "substitution broke validity: " + v.reason);
    }
    return out;
}

bool check_equiv_theorem(const Execution& x, const Execution& y) {
    if (!equicausal(x, y)) fail(ErrorCode::NotComparable, "executions are not equicausal");
    return states_equal(final_state(x), final_state(y), tol::validation);
}

CheckedExecution::CheckedExecution(Execution x)
    : x_(std::move(x)), states_(replay(x_)), causality_(compute_causality(x_)) {}

std::size_t CheckedExecution::position(std::uint64_t id) const {
    for (std::size_t k = 0; k < x_.events.size(); ++k)
        if (x_.events[k].id == id) return k + 1;
    fail(ErrorCode::InvalidArgument, "event " + std::to_string(id) + " not in execution");
}

void CheckedExecution::swap(std::size_t i, double tol) {
    check_position(x_, i, i + 1, "swap");
    const Event& a = x_.events[i - 1];
    const Event& b = x_.events[i];
    if (directly_ordered(a, b))
        fail(ErrorCode::CausalDependency, "cannot swap " + describe(a) + " before " + describe(b));

    SystemState mid;
    SystemState after;
    try {
        mid = x_.program->apply(states_[i - 1], b);
        after = x_.program->apply(mid, a);
    } catch (const Error& err) {
        fail(ErrorCode::LemmaViolation, std::string("swap produced an ill-formed step: ") + err.what());
    }
    for (const SystemState* s : {&mid, &after})
        if (auto problem = ownership_problem(*s)) fail(ErrorCode::LemmaViolation, "swap broke ownership: " + *problem);
    if (!states_equal(after, states_[i + 1], tol))
        fail(ErrorCode::LemmaViolation, "swap changed the state after " + describe(a));

    std::swap(x_.events[i - 1], x_.events[i]);
    states_[i] = std::move(mid);
    CausalRelation updated = compute_causality(x_);
    if (updated != causality_) fail(ErrorCode::LemmaViolation, "swap changed the causal relation");
}

void CheckedExecution::move_to_end(std::size_t i, std::size_t j, double tol) {
    check_position(x_, i, j, "move_to_end");
    const Event moving = x_.events[i - 1];
    for (std::size_t k = i + 1; k <= j; ++k)
        if (causality_.precedes(moving.id, x_.events[k - 1].id))
            fail(ErrorCode::CausalDependency,
                 describe(moving) + " causally precedes " + describe(x_.events[k - 1]));
    for (std::size_t k = i; k < j; ++k) swap(k, tol);
}

void CheckedExecution::move_back(std::size_t i, std::size_t j, double tol) {
    if (j < 1 || j > i || i > x_.events.size()) fail(ErrorCode::InvalidArgument, "move_back: position out of range");
    const Event moving = x_.events[i - 1];
    for (std::size_t k = j; k < i; ++k)
        if (causality_.precedes(x_.events[k - 1].id, moving.id))
            fail(ErrorCode::CausalDependency,
                 describe(x_.events[k - 1]) + " causally precedes " + describe(moving));
    for (std::size_t k = i - 1; k >= j; --k) swap(k, tol);
}

void CheckedExecution::replace_suffix(std::size_t from, std::vector<Event> events) {
    if (from < 1 || from > x_.events.size() + 1) fail(ErrorCode::InvalidArgument, "replace_suffix: position out of range");
    x_.events.resize(from - 1);
    x_.events.insert(x_.events.end(), events.begin(), events.end());
    states_.resize(from);
    for (std::size_t k = from - 1; k < x_.events.size(); ++k) {
        try {
            states_.push_back(x_.program->apply(states_.back(), x_.events[k]));
        } catch (const Error& err) {
            throw Error(ErrorCode::ReplayError, "event " + std::to_string(k) + ": " + err.what(), k);
        }
        if (auto problem = ownership_problem(states_.back()))
            throw Error(ErrorCode::ReplayError, "event " + std::to_string(k) + ": " + *problem, k);
    }
    causality_ = compute_causality(x_);
}

}  // namespace qdsim
