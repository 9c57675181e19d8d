#include "qdsim/specmachine.hpp"

#include "qdsim/error.hpp"

namespace qdsim {

using nlohmann::json;

namespace {

[[noreturn]] void violation(const Event& e, const std::string& why) {
    fail(ErrorCode::SpecViolation, describe(e) + ": " + why);
}

bool any_pending(const SystemState& s) {
    for (const auto& p : s.processors)
        if (!s.ext.at(p).is_null()) return true;
    return false;
}

bool awaiting_execution(const json& sigma, const std::string& gid) {
    return sigma.is_object() && sigma.at("op") == gid && sigma.at("res").is_null();
}

}  // namespace

std::vector<MessageId> in_flight_messages(const SystemState& state) {
    std::vector<MessageId> out;
    for (const auto& [chan, contents] : state.channels)
        for (const MessageInstance& m : contents)
            if (!m.marker) out.push_back(m.id);
    return out;
}

SpecProgram::SpecProgram(std::shared_ptr<const BaseAlgorithm> base, std::shared_ptr<const GlobalOpLibrary> library)
    : base_(std::move(base)), library_(std::move(library)) {}

std::string SpecProgram::name() const { return "spec:" + base_->name(); }

SystemState SpecProgram::apply(const SystemState& pre, const Event& e) const {
    if (!pre.has_processor(e.label)) violation(e, "label is not a processor");
    const json& sigma = pre.ext.at(e.label);
    switch (e.kind) {
        case EventKind::Apply:
        case EventKind::Send:
        case EventKind::Receive:
            if (!e.action.empty() && e.action.rfind("qgo.", 0) == 0) violation(e, "not a base event");
            return apply_base_event(*base_, pre, e);
        case EventKind::Invoke: {
            if (!sigma.is_null()) violation(e, "processor already has an operation");
            if (!library_->contains(e.action)) violation(e, "unknown global operation");
            SystemState next = pre;
            next.ext.at(e.label) = json{{"op", e.action}, {"res", nullptr}};
            return next;
        }
        case EventKind::AtomicExecute: {
            if (!awaiting_execution(sigma, e.action)) violation(e, "no invocation awaiting execution");
            const DecomposableGlobalOp& g = lookup(*library_, e.action);
            const json& procs = e.payload.at("processors");
            const json& msgs = e.payload.at("messages");
            if (procs.size() != pre.processors.size()) violation(e, "outcome tuple does not cover every processor");
            const std::vector<MessageId> flying = in_flight_messages(pre);
            if (msgs.size() != flying.size()) violation(e, "outcome tuple does not cover the messages in flight");
            for (MessageId id : flying)
                if (!msgs.contains(std::to_string(id))) violation(e, "no outcome for message " + std::to_string(id));

            SystemState next = pre;
            for (const ProcessorId& p : pre.processors) {
                if (!procs.contains(p)) violation(e, "no outcome for processor " + p);
                const LocalOperation op = g.for_processor(p, next.owned_registers(p), next.classical.at(p));
                next = apply_local(next, p, op, procs.at(p).get<std::string>());
            }
            for (MessageId id : flying) {
                const auto where = next.locate(id);
                const MessageInstance& m = next.channels.at(where->first)[where->second];
                const LocalOperation op = g.for_message(m, message_registers(next.quantum, m));
                next = apply_in_flight(next, id, op, msgs.at(std::to_string(id)).get<std::string>());
            }
            for (const ProcessorId& p : pre.processors) {
                json channels = json::object();
                for (const ChannelId& c : pre.incoming(p)) {
                    json outcomes = json::array();
                    for (const MessageInstance& m : pre.channels.at(c))
                        if (!m.marker) outcomes.push_back(msgs.at(std::to_string(m.id)));
                    channels[c.str()] = std::move(outcomes);
                }
                const json record = qgo::response_record(p, e.action, procs.at(p).get<std::string>(), channels);
                next.ext.at(p) = json{{"op", e.action}, {"res", record}};
            }
            return next;
        }
        case EventKind::Respond: {
            if (!sigma.is_object() || sigma.at("res").is_null()) violation(e, "nothing to respond with");
            if (e.payload != sigma.at("res")) violation(e, "response differs from the recorded outcomes");
            SystemState next = pre;
            next.ext.at(e.label) = nullptr;
            return next;
        }
    }
    violation(e, "unknown event kind");
}

bool SpecProgram::permits(const SystemState& pre, const Event& e) const {
    if (!pre.has_processor(e.label)) return false;
    const json& sigma = pre.ext.at(e.label);
    switch (e.kind) {
        case EventKind::Invoke: return sigma.is_null() && library_->contains(e.action);
        case EventKind::AtomicExecute: return awaiting_execution(sigma, e.action);
        case EventKind::Respond: return sigma.is_object() && !sigma.at("res").is_null() && e.payload == sigma.at("res");
        default: return base_permits(*base_, pre, e);
    }
}

bool SpecProgram::in_history(const Event& e) const { return e.kind != EventKind::AtomicExecute; }

Event SpecProgram::realize(const SystemState& pre, Event e, std::mt19937_64& rng) const {
    if (e.kind == EventKind::Apply) {
        e.outcome = sample_local(pre, resolve_base_apply(*base_, pre, e), rng);
        return e;
    }
    if (e.kind != EventKind::AtomicExecute) return e;
    const DecomposableGlobalOp& g = lookup(*library_, e.action);
    json procs = json::object();
    json msgs = json::object();
    SystemState cur = pre;
    for (const ProcessorId& p : pre.processors) {
        const LocalOperation op = g.for_processor(p, cur.owned_registers(p), cur.classical.at(p));
        const std::string r = sample_local(cur, op, rng);
        cur = apply_local(cur, p, op, r);
        procs[p] = r;
    }
    for (MessageId id : in_flight_messages(pre)) {
        const auto where = cur.locate(id);
        const MessageInstance& m = cur.channels.at(where->first)[where->second];
        const LocalOperation op = g.for_message(m, message_registers(cur.quantum, m));
        const std::string r = sample_outcome(cur.quantum, op.op, op.map, rng).outcome;
        cur = apply_in_flight(cur, id, op, r);
        msgs[std::to_string(id)] = r;
    }
    e.payload = json{{"processors", procs}, {"messages", msgs}};
    return e;
}

std::vector<Event> SpecProgram::enabled_events(const SystemState& state) const {
    return base_enabled_events(*base_, state, [](const ProcessorId&) { return true; });
}

std::optional<Event> SpecProgram::forced_next(const SystemState& state, const ProcessorId& proc) const {
    const json& sigma = state.ext.at(proc);
    if (!sigma.is_object()) return std::nullopt;
    Event e;
    e.label = proc;
    if (sigma.at("res").is_null()) {
        e.kind = EventKind::AtomicExecute;
        e.action = sigma.at("op").get<std::string>();
    } else {
        e.kind = EventKind::Respond;
        e.payload = sigma.at("res");
    }
    return e;
}

ValidationResult validate_spec_execution(const SpecProgram& spec, const Execution& x) {
    ValidationResult result = validate(spec, x);
    if (!result.ok) return result;
    SystemState state = x.initial;
    for (std::size_t i = 0; i < x.events.size(); ++i) {
        if (x.events[i].kind == EventKind::Invoke && any_pending(state))
            return {false, i, "concurrent invocation: " + describe(x.events[i])};
        state = spec.apply(state, x.events[i]);
    }
    return result;
}

}  // namespace qdsim
