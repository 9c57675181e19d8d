#include "qdsim/exec.hpp"

#include "qdsim/error.hpp"

#include <algorithm>

namespace qdsim {

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::Invoke: return "invoke";
        case EventKind::Respond: return "respond";
        case EventKind::Apply: return "apply";
        case EventKind::Send: return "send";
        case EventKind::Receive: return "receive";
        case EventKind::AtomicExecute: return "atomic";
    }
    return "?";
}

EventKind event_kind_from_string(std::string_view text) {
    for (EventKind k : {EventKind::Invoke, EventKind::Respond, EventKind::Apply, EventKind::Send, EventKind::Receive,
                        EventKind::AtomicExecute})
        if (to_string(k) == text) return k;
    fail(ErrorCode::ParseError, "unknown event kind '" + std::string(text) + "'");
}

std::string message_label(MessageId id) { return "msg:" + std::to_string(id); }

bool is_message_label(const std::string& label) { return label.rfind("msg:", 0) == 0; }

std::string describe(const Event& e) {
    std::string out = "#" + std::to_string(e.id) + " " + std::string(to_string(e.kind)) + " @" + e.label;
    switch (e.kind) {
        case EventKind::Invoke: out += " gid=" + e.action; break;
        case EventKind::Respond: out += " " + e.payload.dump(); break;
        case EventKind::Apply:
            out += " " + e.action + " r=" + e.outcome;
            if (e.msg) out += " msg=" + std::to_string(e.msg);
            break;
        case EventKind::Send:
            out += " msg=" + std::to_string(e.msg) + " to " + e.peer;
            if (!e.action.empty()) out += " [" + e.action + "]";
            break;
        case EventKind::Receive:
            out += " msg=" + std::to_string(e.msg) + " from " + e.peer;
            if (!e.action.empty()) out += " [" + e.action + "]";
            break;
        case EventKind::AtomicExecute: out += " gid=" + e.action + " " + e.payload.dump(); break;
    }
    return out;
}

nlohmann::json to_json(const Event& e) {
    nlohmann::json j;
    j["id"] = e.id;
    j["kind"] = to_string(e.kind);
    j["label"] = e.label;
    if (!e.action.empty()) j["action"] = e.action;
    if (!e.outcome.empty()) j["outcome"] = e.outcome;
    if (e.msg) j["msg"] = e.msg;
    if (!e.peer.empty()) j["peer"] = e.peer;
    if (!e.fresh.empty()) j["fresh"] = e.fresh;
    if (!e.payload.is_null()) j["payload"] = e.payload;
    return j;
}

Event event_from_json(const nlohmann::json& j) {
    try {
        Event e;
        e.id = j.at("id").get<std::uint64_t>();
        e.kind = event_kind_from_string(j.at("kind").get<std::string>());
        e.label = j.at("label").get<std::string>();
        e.action = j.value("action", std::string());
        e.outcome = j.value("outcome", std::string());
        e.msg = j.value("msg", MessageId{0});
        e.peer = j.value("peer", std::string());
        if (j.contains("fresh")) e.fresh = j.at("fresh").get<std::vector<std::uint64_t>>();
        if (j.contains("payload")) e.payload = j.at("payload");
        return e;
    } catch (const nlohmann::json::exception& err) {
        fail(ErrorCode::ParseError, std::string("malformed event record: ") + err.what());
    }
}

LocalView local_view(const SystemState& state, const ProcessorId& proc) {
    if (!state.has_processor(proc)) fail(ErrorCode::LocalityViolation, "unknown processor " + proc);
    return {proc, state.classical.at(proc), state.owned_registers(proc)};
}

Event Program::realize(const SystemState&, Event e, std::mt19937_64&) const { return e; }

std::optional<Event> Program::forced_next(const SystemState&, const ProcessorId&) const { return std::nullopt; }

LocalOperation resolve_base_apply(const BaseAlgorithm& base, const SystemState& pre, const Event& e) {
    return base.resolve_apply(local_view(pre, e.label), e.action, e.fresh);
}

std::string sample_local(const SystemState& pre, const LocalOperation& op, std::mt19937_64& rng) {
    return sample_outcome(pre.quantum, op.op, op.map, rng).outcome;
}

SystemState deliver(const BaseAlgorithm& base, const SystemState& state, const ProcessorId& receiver,
                    const ChannelId& chan, const MessageInstance& msg) {
    SystemState next = record_delivery(state, receiver, chan, msg);
    next.classical.at(receiver) = base.on_receive(local_view(next, receiver), chan, msg);
    return next;
}

namespace {

const MessageInstance& head_for(const SystemState& pre, const Event& e) {
    const ChannelId chan{e.peer, e.label};
    auto it = pre.channels.find(chan);
    if (it == pre.channels.end()) fail(ErrorCode::NotRecipient, "no channel " + chan.str());
    if (it->second.empty()) fail(ErrorCode::EmptyChannel, "channel " + chan.str() + " is empty");
    const MessageInstance& head = it->second.front();
    if (head.id != e.msg)
        fail(ErrorCode::ReplayError, "head of " + chan.str() + " is message " + std::to_string(head.id) +
                                         ", event receives " + std::to_string(e.msg));
    return head;
}

}  // namespace

SystemState apply_base_event(const BaseAlgorithm& base, const SystemState& pre, const Event& e) {
    if (!pre.has_processor(e.label)) fail(ErrorCode::ReplayError, "event label is not a processor: " + e.label);
    switch (e.kind) {
        case EventKind::Apply: {
            const LocalOperation op = resolve_base_apply(base, pre, e);
            return apply_local(pre, e.label, op, e.outcome);
        }
        case EventKind::Send: {
            OutgoingMessage out = base.resolve_send(local_view(pre, e.label), e.action, e.peer);
            MessageInstance msg;
            msg.id = e.msg;
            msg.classical = std::move(out.classical);
            msg.quantum_regs = std::move(out.quantum_regs);
            SystemState next = send(pre, e.label, std::move(msg), e.peer);
            next.classical.at(e.label) = std::move(out.sender_after);
            return next;
        }
        case EventKind::Receive: {
            const MessageInstance& head = head_for(pre, e);
            if (head.marker) fail(ErrorCode::ReplayError, "base reception of a marker message");
            const ChannelId chan{e.peer, e.label};
            auto [next, msg] = pop_message(pre, e.label, chan);
            return deliver(base, next, e.label, chan, msg);
        }
        default: fail(ErrorCode::ReplayError, "not a base event: " + describe(e));
    }
}

bool base_permits(const BaseAlgorithm& base, const SystemState& pre, const Event& e) {
    if (!pre.has_processor(e.label)) return false;
    switch (e.kind) {
        case EventKind::Apply:
        case EventKind::Send: {
            const BaseStep step{e.kind, e.action, e.kind == EventKind::Send ? e.peer : ProcessorId{},
                                e.kind == EventKind::Apply ? e.fresh.size() : 0};
            const auto steps = base.enabled(local_view(pre, e.label));
            return std::find(steps.begin(), steps.end(), step) != steps.end();
        }
        case EventKind::Receive: return e.action.empty();
        default: return false;
    }
}

std::vector<Event> base_enabled_events(const BaseAlgorithm& base, const SystemState& state,
                                       const std::function<bool(const ProcessorId&)>& processor_free) {
    std::vector<Event> out;
    for (const auto& p : state.processors) {
        if (!processor_free(p)) continue;
        for (const BaseStep& step : base.enabled(local_view(state, p))) {
            Event e;
            e.kind = step.kind;
            e.label = p;
            e.action = step.action;
            if (step.kind == EventKind::Send) e.peer = step.dest;
            e.fresh.assign(step.fresh_count, 0);
            out.push_back(std::move(e));
        }
    }
    for (const auto& [chan, contents] : state.channels) {
        if (contents.empty() || !processor_free(chan.destination)) continue;
        Event e;
        e.kind = EventKind::Receive;
        e.label = chan.destination;
        e.peer = chan.source;
        e.msg = contents.front().id;
        e.action = contents.front().marker ? "qgo.marker" : "";
        out.push_back(std::move(e));
    }
    return out;
}

BaseProgram::BaseProgram(std::shared_ptr<const BaseAlgorithm> base) : base_(std::move(base)) {}

std::string BaseProgram::name() const { return "base:" + base_->name(); }

SystemState BaseProgram::apply(const SystemState& pre, const Event& e) const {
    return apply_base_event(*base_, pre, e);
}

bool BaseProgram::permits(const SystemState& pre, const Event& e) const { return base_permits(*base_, pre, e); }

bool BaseProgram::in_history(const Event& e) const {
    return e.kind == EventKind::Apply || e.kind == EventKind::Send || e.kind == EventKind::Receive;
}

Event BaseProgram::realize(const SystemState& pre, Event e, std::mt19937_64& rng) const {
    if (e.kind == EventKind::Apply) e.outcome = sample_local(pre, resolve_base_apply(*base_, pre, e), rng);
    return e;
}

std::vector<Event> BaseProgram::enabled_events(const SystemState& state) const {
    return base_enabled_events(*base_, state, [](const ProcessorId&) { return true; });
}

void IdAllocator::assign(Event& e) {
    e.id = next_event++;
    if (e.kind == EventKind::Send) e.msg = next_message++;
    for (auto& reg : e.fresh) reg = next_register++;
}

IdAllocator IdAllocator::after(const SystemState& state) {
    IdAllocator ids;
    for (std::uint64_t id : state.quantum.space.ids()) ids.next_register = std::max(ids.next_register, id + 1);
    return ids;
}

std::vector<SystemState> replay(const Execution& x) {
    if (!x.program) fail(ErrorCode::ReplayError, "execution has no program");
    std::vector<SystemState> states;
    states.reserve(x.events.size() + 1);
    states.push_back(x.initial);
    for (std::size_t i = 0; i < x.events.size(); ++i) {
        try {
            states.push_back(x.program->apply(states.back(), x.events[i]));
        } catch (const Error& err) {
            throw Error(ErrorCode::ReplayError, "event " + std::to_string(i) + " (" + describe(x.events[i]) +
                                                    "): " + err.what(), i);
        } catch (const nlohmann::json::exception& err) {
            throw Error(ErrorCode::ReplayError, "event " + std::to_string(i) + " (" + describe(x.events[i]) +
                                                    "): malformed field: " + err.what(), i);
        }
        if (auto problem = ownership_problem(states.back()))
            throw Error(ErrorCode::ReplayError, "event " + std::to_string(i) + ": " + *problem, i);
    }
    return states;
}

SystemState final_state(const Execution& x) { return std::move(replay(x).back()); }

ValidationResult validate(const Program& delta, const Execution& x) {
    ValidationResult result;
    std::vector<SystemState> states;
    try {
        // Non-owning alias: replay under delta's own step function.
        const Execution under_delta{std::shared_ptr<const Program>(std::shared_ptr<const Program>(), &delta),
                                    x.initial, x.events};
        states = replay(under_delta);
    } catch (const Error& err) {
        result.ok = false;
        result.first_failure = err.index();
        result.reason = err.what();
        return result;
    }
    for (std::size_t i = 0; i < x.events.size(); ++i) {
        bool allowed = false;
        try {
            allowed = delta.permits(states[i], x.events[i]);
        } catch (const nlohmann::json::exception&) {
        }
        if (!allowed) {
            result.ok = false;
            result.first_failure = i;
            result.reason = "step not allowed by " + delta.name() + ": " + describe(x.events[i]);
            return result;
        }
    }
    return result;
}

ValidationResult validate(const Execution& x) {
    if (!x.program) return {false, 0, "execution has no program"};
    return validate(*x.program, x);
}

Fragment slice(const Execution& x, std::size_t i, std::size_t j) {
    if (i < 1 || i > j || j > x.events.size())
        fail(ErrorCode::InvalidArgument, "slice bounds out of range");
    Fragment f;
    f.program = x.program;
    if (i == 1) {
        f.initial = x.initial;
    } else {
        Execution prefix{x.program, x.initial, {x.events.begin(), x.events.begin() + static_cast<long>(i - 1)}};
        f.initial = final_state(prefix);
    }
    f.events.assign(x.events.begin() + static_cast<long>(i - 1), x.events.begin() + static_cast<long>(j));
    return f;
}

Fragment concat(const Fragment& a, const Fragment& b) {
    if (!states_identical(final_state(a), b.initial))
        fail(ErrorCode::ConcatMismatch, "final state of the first fragment differs from the second's initial state");
    Fragment out{a.program, a.initial, a.events};
    out.events.insert(out.events.end(), b.events.begin(), b.events.end());
    return out;
}

std::vector<Event> history(const Execution& x) {
    std::vector<Event> out;
    for (const Event& e : x.events)
        if (x.program->in_history(e)) out.push_back(e);
    return out;
}

}  // namespace qdsim
