#include "qdsim/qgo.hpp"

#include "qdsim/error.hpp"

#include <algorithm>

namespace qdsim {

using nlohmann::json;

LocalOperation DecomposableGlobalOp::for_processor(const ProcessorId& p, const std::vector<Register>& regs,
                                                   const ClassicalState& classical) const {
    const auto it = processor_overrides.find(p);
    const ComponentFactory& make = it != processor_overrides.end() ? it->second : processor_op;
    if (!make) fail(ErrorCode::UnknownGlobalOp, gid + " has no component for processor " + p);
    LocalOperation op = make(regs, classical);
    op.map.inputs.clear();
    for (const Register& r : regs) op.map.inputs.push_back(r.id);
    op.map.outputs.clear();
    if (op.name.empty()) op.name = gid + "." + p;
    return op;
}

LocalOperation DecomposableGlobalOp::for_message(const MessageInstance& msg, const std::vector<Register>& regs) const {
    std::string cls = "*";
    if (msg.classical.is_object() && msg.classical.contains("class") && msg.classical["class"].is_string())
        cls = msg.classical["class"].get<std::string>();
    auto it = message_ops.find(cls);
    if (it == message_ops.end()) it = message_ops.find("*");
    if (it == message_ops.end() || !it->second)
        fail(ErrorCode::UnknownGlobalOp, gid + " has no component for message class " + cls);
    LocalOperation op = it->second(regs, msg.classical);
    op.map.inputs.clear();
    for (const Register& r : regs) op.map.inputs.push_back(r.id);
    op.map.outputs.clear();
    if (op.name.empty()) op.name = gid + ".msg";
    return op;
}

const DecomposableGlobalOp& lookup(const GlobalOpLibrary& library, const std::string& gid) {
    const auto it = library.find(gid);
    if (it == library.end()) fail(ErrorCode::UnknownGlobalOp, "unknown global operation '" + gid + "'");
    return it->second;
}

std::vector<Register> message_registers(const DensityMatrix& quantum, const MessageInstance& msg) {
    std::vector<std::uint64_t> ids = msg.quantum_regs;
    std::sort(ids.begin(), ids.end());
    std::vector<Register> out;
    for (std::uint64_t id : ids) out.push_back(quantum.space.at(id));
    return out;
}

namespace qgo {

bool is_protocol_event(const Event& e) {
    return is_message_label(e.label) || e.action.rfind("qgo.", 0) == 0;
}

json response_record(const ProcessorId& p, const std::string& gid, const std::string& self, const json& channels) {
    return json{{"processor", p}, {"gid", gid}, {"self", self}, {"channels", channels}};
}

}  // namespace qgo

namespace {

std::string phase_of(const SystemState& s, const ProcessorId& p) {
    const json& tau = s.ext.at(p);
    return tau.is_null() ? std::string() : tau.at("phase").get<std::string>();
}

bool between_procedures(const std::string& phase) { return phase.empty() || phase == "wait"; }

json fresh_tau(const std::string& gid, const json& trigger) {
    return json{{"op", gid},         {"phase", "execute"},        {"trigger", trigger},
                {"self", nullptr},   {"channels", json::object()}, {"waitset", json::array()},
                {"broadcast", json::array()}, {"held", nullptr}, {"held_chan", nullptr}};
}

json& tau_at(SystemState& s, const ProcessorId& p) { return s.ext.at(p); }

void require_phase(const SystemState& s, const ProcessorId& p, const std::string& phase, const Event& e) {
    const std::string actual = phase_of(s, p);
    if (actual != phase)
        fail(phase == "execute" && !actual.empty() ? ErrorCode::AlreadyActive : ErrorCode::ReplayError,
             describe(e) + " needs phase '" + phase + "' at " + p + ", found '" + actual + "'");
}

void check_trace(const DensityMatrix& rho, const std::string& what) {
    if (rho.trace() <= tol::zero_probability)
        fail(ErrorCode::ZeroProbabilityHistory, what + " leaves a zero-probability history");
}

const MessageInstance& channel_head(const SystemState& pre, const Event& e) {
    const ChannelId chan{e.peer, e.label};
    const auto it = pre.channels.find(chan);
    if (it == pre.channels.end()) fail(ErrorCode::NotRecipient, "no channel " + chan.str());
    if (it->second.empty()) fail(ErrorCode::EmptyChannel, "channel " + chan.str() + " is empty");
    if (it->second.front().id != e.msg)
        fail(ErrorCode::ReplayError, "head of " + chan.str() + " is not message " + std::to_string(e.msg));
    return it->second.front();
}

bool in_waitset(const json& tau, const std::string& chan) {
    const json& ws = tau.at("waitset");
    return std::find(ws.begin(), ws.end(), chan) != ws.end();
}

void remove_from_waitset(json& tau, const std::string& chan) {
    json& ws = tau.at("waitset");
    for (auto it = ws.begin(); it != ws.end(); ++it)
        if (*it == chan) {
            ws.erase(it);
            return;
        }
    fail(ErrorCode::ReplayError, "channel " + chan + " is not in the waitset");
}

json expected_response(const ProcessorId& p, const json& tau) {
    return qgo::response_record(p, tau.at("op").get<std::string>(), tau.at("self").get<std::string>(),
                                tau.at("channels"));
}

}  // namespace

QgoProgram::QgoProgram(std::shared_ptr<const BaseAlgorithm> base, std::shared_ptr<const GlobalOpLibrary> library)
    : base_(std::move(base)), library_(std::move(library)) {}

std::string QgoProgram::name() const { return "qgo:" + base_->name(); }

LocalOperation QgoProgram::processor_component(const SystemState& state, const ProcessorId& proc,
                                               const std::string& gid) const {
    return lookup(*library_, gid).for_processor(proc, state.owned_registers(proc), state.classical.at(proc));
}

LocalOperation QgoProgram::message_component(const SystemState& state, const MessageInstance& msg,
                                             const std::string& gid) const {
    return lookup(*library_, gid).for_message(msg, message_registers(state.quantum, msg));
}

SystemState QgoProgram::apply(const SystemState& pre, const Event& e) const {
    if (is_message_label(e.label)) {
        if (e.kind != EventKind::Apply || e.action != qgo::kApplyMessage)
            fail(ErrorCode::ReplayError, "message-labelled event must apply " + std::string(qgo::kApplyMessage));
        const auto where = pre.locate(e.msg);
        if (!where || e.label != message_label(e.msg))
            fail(ErrorCode::ReplayError, "message " + std::to_string(e.msg) + " is not in flight");
        const MessageInstance& m = pre.channels.at(where->first)[where->second];
        if (m.marker || m.op_outcome)
            fail(ErrorCode::ReplayError, "message " + std::to_string(e.msg) + " cannot take a global operation");
        const LocalOperation op = message_component(pre, m, e.payload.at("gid").get<std::string>());
        SystemState next = apply_in_flight(pre, e.msg, op, e.outcome);
        next.channels[where->first][where->second].op_outcome = e.outcome;
        return next;
    }
    if (!pre.has_processor(e.label)) fail(ErrorCode::ReplayError, "event label is not a processor: " + e.label);
    switch (e.kind) {
        case EventKind::Invoke: {
            if (!pre.ext.at(e.label).is_null())
                fail(ErrorCode::ConcurrentInvocation, "global operation already underway at " + e.label);
            lookup(*library_, e.action);
            SystemState next = pre;
            tau_at(next, e.label) = fresh_tau(e.action, nullptr);
            return next;
        }
        case EventKind::Receive: return apply_receive(pre, e);
        case EventKind::Respond: {
            require_phase(pre, e.label, "respond", e);
            if (e.payload != expected_response(e.label, pre.ext.at(e.label)))
                fail(ErrorCode::ReplayError, "response does not match the record at " + e.label);
            SystemState next = pre;
            tau_at(next, e.label) = nullptr;
            return next;
        }
        case EventKind::Apply:
        case EventKind::Send:
            if (e.action.rfind("qgo.", 0) == 0) return apply_protocol_step(pre, e);
            if (!between_procedures(phase_of(pre, e.label)))
                fail(ErrorCode::ReplayError, "base step inside a procedure at " + e.label);
            return apply_base_event(*base_, pre, e);
        case EventKind::AtomicExecute: break;
    }
    fail(ErrorCode::ReplayError, "event not part of the augmented algorithm: " + describe(e));
}

SystemState QgoProgram::apply_receive(const SystemState& pre, const Event& e) const {
    const std::string phase = phase_of(pre, e.label);
    if (!between_procedures(phase)) fail(ErrorCode::ReplayError, "reception inside a procedure at " + e.label);
    const MessageInstance& head = channel_head(pre, e);
    const ChannelId chan{e.peer, e.label};

    if (e.action == qgo::kMarker) {
        if (!head.marker) fail(ErrorCode::ReplayError, "marker reception of a base message");
        auto [next, msg] = pop_message(pre, e.label, chan);
        json& tau = tau_at(next, e.label);
        if (tau.is_null()) {
            lookup(*library_, *msg.marker);
            tau = fresh_tau(*msg.marker, chan.str());
        } else {
            if (tau.at("op") != *msg.marker)
                fail(ErrorCode::ConcurrentInvocation, "marker for " + *msg.marker + " during another operation");
            remove_from_waitset(tau, chan.str());
            if (tau.at("waitset").empty()) tau["phase"] = "respond";
        }
        return next;
    }
    if (!e.action.empty()) fail(ErrorCode::ReplayError, "unknown reception tag " + e.action);
    if (head.marker) fail(ErrorCode::ReplayError, "base reception of a marker message");
    const json& tau = pre.ext.at(e.label);
    if (tau.is_null() || !in_waitset(tau, chan.str())) return apply_base_event(*base_, pre, e);

    auto [next, msg] = pop_message(pre, e.label, chan);
    json& t = tau_at(next, e.label);
    t["phase"] = msg.op_outcome ? "record" : "record-op";
    t["held"] = to_json(msg);
    t["held_chan"] = chan.str();
    return next;
}

SystemState QgoProgram::apply_protocol_step(const SystemState& pre, const Event& e) const {
    const ProcessorId& p = e.label;
    if (e.kind == EventKind::Send) {
        if (e.action != qgo::kMarker) fail(ErrorCode::ReplayError, "unknown protocol send " + e.action);
        require_phase(pre, p, "broadcast", e);
        const json& tau = pre.ext.at(p);
        if (tau.at("broadcast").empty() || tau.at("broadcast").front() != e.peer)
            fail(ErrorCode::ReplayError, "marker sent out of broadcast order at " + p);
        MessageInstance marker;
        marker.id = e.msg;
        marker.marker = tau.at("op").get<std::string>();
        SystemState next = send(pre, p, std::move(marker), e.peer);
        json& t = tau_at(next, p);
        t["broadcast"].erase(t["broadcast"].begin());
        if (t["broadcast"].empty()) t["phase"] = t["waitset"].empty() ? "respond" : "wait";
        return next;
    }

    if (e.action == qgo::kApplyOp) {
        require_phase(pre, p, "execute", e);
        const std::string gid = pre.ext.at(p).at("op").get<std::string>();
        if (e.payload != json{{"gid", gid}}) fail(ErrorCode::ReplayError, "component event names the wrong operation");
        SystemState next = apply_local(pre, p, processor_component(pre, p, gid), e.outcome);
        json& t = tau_at(next, p);
        t["self"] = e.outcome;
        const json trigger = t.at("trigger");
        for (const ChannelId& c : next.incoming(p)) {
            t["channels"][c.str()] = json::array();
            if (trigger.is_null() || trigger != c.str()) t["waitset"].push_back(c.str());
        }
        t["broadcast"] = next.processors;
        t["phase"] = "broadcast";
        return next;
    }

    if (e.action == qgo::kApplyMessage) {
        require_phase(pre, p, "record-op", e);
        MessageInstance held = message_from_json(pre.ext.at(p).at("held"));
        if (held.id != e.msg) fail(ErrorCode::ReplayError, "message operation names the wrong message");
        const std::string gid = pre.ext.at(p).at("op").get<std::string>();
        if (e.payload != json{{"gid", gid}}) fail(ErrorCode::ReplayError, "message operation names the wrong operation");
        const LocalOperation op = message_component(pre, held, gid);
        for (std::uint64_t reg : op.map.inputs)
            if (pre.ownership.at(reg) != Owner::of_processor(p))
                fail(ErrorCode::LocalityViolation, "held message register not owned by " + p);
        SystemState next = pre;
        next.quantum = apply_outcome(pre.quantum, op.op, op.map, e.outcome);
        check_trace(next.quantum, op.name);
        if (op.update) held.classical = op.update(held.classical, e.outcome);
        held.op_outcome = e.outcome;
        json& t = tau_at(next, p);
        t["held"] = to_json(held);
        t["phase"] = "record";
        return next;
    }

    if (e.action == qgo::kRecord) {
        require_phase(pre, p, "record", e);
        const json& tau = pre.ext.at(p);
        MessageInstance held = message_from_json(tau.at("held"));
        if (held.id != e.msg) fail(ErrorCode::ReplayError, "record step names the wrong message");
        const ChannelId chan = ChannelId::parse(tau.at("held_chan").get<std::string>());
        SystemState next = pre;
        json& t = tau_at(next, p);
        t["channels"][chan.str()].push_back(*held.op_outcome);
        t["held"] = nullptr;
        t["held_chan"] = nullptr;
        t["phase"] = "wait";
        held.op_outcome.reset();
        return deliver(*base_, next, p, chan, held);
    }
    fail(ErrorCode::ReplayError, "unknown protocol step " + e.action);
}

bool QgoProgram::permits(const SystemState& pre, const Event& e) const {
    if (!pre.has_processor(e.label)) return false;
    const std::string phase = phase_of(pre, e.label);
    const json& tau = pre.ext.at(e.label);
    switch (e.kind) {
        case EventKind::Invoke: return tau.is_null() && library_->contains(e.action);
        case EventKind::Respond: return phase == "respond" && e.payload == expected_response(e.label, tau);
        case EventKind::Receive: return between_procedures(phase) && (e.action.empty() || e.action == qgo::kMarker);
        case EventKind::Send:
            if (e.action == qgo::kMarker)
                return phase == "broadcast" && !tau.at("broadcast").empty() && tau.at("broadcast").front() == e.peer;
            return between_procedures(phase) && base_permits(*base_, pre, e);
        case EventKind::Apply:
            if (e.action == qgo::kApplyOp) return phase == "execute";
            if (e.action == qgo::kApplyMessage) return phase == "record-op";
            if (e.action == qgo::kRecord) return phase == "record";
            return between_procedures(phase) && base_permits(*base_, pre, e);
        case EventKind::AtomicExecute: return false;
    }
    return false;
}

bool QgoProgram::in_history(const Event& e) const {
    if (e.kind == EventKind::AtomicExecute) return false;
    return !qgo::is_protocol_event(e);
}

Event QgoProgram::realize(const SystemState& pre, Event e, std::mt19937_64& rng) const {
    if (e.kind != EventKind::Apply) return e;
    if (is_message_label(e.label)) {
        const auto where = pre.locate(e.msg);
        if (!where) fail(ErrorCode::ReplayError, "message not in flight");
        const LocalOperation op =
            message_component(pre, pre.channels.at(where->first)[where->second], e.payload.at("gid").get<std::string>());
        e.outcome = sample_outcome(pre.quantum, op.op, op.map, rng).outcome;
    } else if (e.action == qgo::kApplyOp) {
        e.outcome = sample_local(pre, processor_component(pre, e.label, e.payload.at("gid").get<std::string>()), rng);
    } else if (e.action == qgo::kApplyMessage) {
        const json& tau = pre.ext.at(e.label);
        const LocalOperation op =
            message_component(pre, message_from_json(tau.at("held")), tau.at("op").get<std::string>());
        e.outcome = sample_outcome(pre.quantum, op.op, op.map, rng).outcome;
    } else if (e.action == qgo::kRecord) {
        e.outcome = std::string(kNoOutcome);
    } else {
        e.outcome = sample_local(pre, resolve_base_apply(*base_, pre, e), rng);
    }
    return e;
}

std::vector<Event> QgoProgram::enabled_events(const SystemState& state) const {
    return base_enabled_events(*base_, state,
                               [&](const ProcessorId& p) { return between_procedures(phase_of(state, p)); });
}

std::optional<Event> QgoProgram::forced_next(const SystemState& state, const ProcessorId& proc) const {
    const std::string phase = phase_of(state, proc);
    if (between_procedures(phase)) return std::nullopt;
    const json& tau = state.ext.at(proc);
    const std::string gid = tau.at("op").get<std::string>();
    Event e;
    e.label = proc;
    if (phase == "execute") {
        e.kind = EventKind::Apply;
        e.action = qgo::kApplyOp;
        e.payload = json{{"gid", gid}};
    } else if (phase == "broadcast") {
        e.kind = EventKind::Send;
        e.action = qgo::kMarker;
        e.peer = tau.at("broadcast").front().get<std::string>();
    } else if (phase == "record-op" || phase == "record") {
        e.kind = EventKind::Apply;
        e.action = phase == "record-op" ? qgo::kApplyMessage : qgo::kRecord;
        e.msg = tau.at("held").at("id").get<MessageId>();
        if (phase == "record-op") e.payload = json{{"gid", gid}};
    } else if (phase == "respond") {
        e.kind = EventKind::Respond;
        e.payload = expected_response(proc, tau);
    } else {
        fail(ErrorCode::ReplayError, "unknown protocol phase '" + phase + "'");
    }
    return e;
}

std::shared_ptr<const QgoProgram> qgo_augment(std::shared_ptr<const BaseAlgorithm> base,
                                              std::shared_ptr<const GlobalOpLibrary> library) {
    return std::make_shared<const QgoProgram>(std::move(base), std::move(library));
}

ProcedureRun run_procedure(const Program& program, const SystemState& state, Event first, std::mt19937_64& rng,
                           IdAllocator& ids) {
    ProcedureRun run{{}, state};
    std::optional<Event> next = std::move(first);
    const ProcessorId proc = next->label;
    while (next) {
        Event e = program.realize(run.state, std::move(*next), rng);
        ids.assign(e);
        run.state = program.apply(run.state, e);
        run.events.push_back(std::move(e));
        next = program.forced_next(run.state, proc);
    }
    return run;
}

ProcedureRun qgo_invoke(const QgoProgram& program, const SystemState& state, const ProcessorId& proc,
                        const std::string& gid, std::mt19937_64& rng, IdAllocator& ids) {
    if (!qgo_idle(state)) fail(ErrorCode::ConcurrentInvocation, "a global operation is already underway");
    Event e;
    e.kind = EventKind::Invoke;
    e.label = proc;
    e.action = gid;
    return run_procedure(program, state, std::move(e), rng, ids);
}

ProcedureRun qgo_process_new_global_op(const QgoProgram& program, const SystemState& state, const ProcessorId& proc,
                                       const std::string& gid, const std::optional<ChannelId>& chan,
                                       std::mt19937_64& rng, IdAllocator& ids) {
    if (!state.ext.at(proc).is_null()) fail(ErrorCode::AlreadyActive, proc + " already has an operation underway");
    lookup(program.library(), gid);
    SystemState opened = state;
    tau_at(opened, proc) = fresh_tau(gid, chan ? json(chan->str()) : json());
    Event first = *program.forced_next(opened, proc);
    return run_procedure(program, opened, std::move(first), rng, ids);
}

ProcedureRun qgo_receive(const QgoProgram& program, const SystemState& state, const ProcessorId& proc,
                         const ChannelId& chan, std::mt19937_64& rng, IdAllocator& ids) {
    const auto it = state.channels.find(chan);
    if (chan.destination != proc || it == state.channels.end())
        fail(ErrorCode::NotRecipient, proc + " is not the destination of " + chan.str());
    if (it->second.empty()) fail(ErrorCode::EmptyChannel, "channel " + chan.str() + " is empty");
    Event e;
    e.kind = EventKind::Receive;
    e.label = proc;
    e.peer = chan.source;
    e.msg = it->second.front().id;
    if (it->second.front().marker) e.action = qgo::kMarker;
    return run_procedure(program, state, std::move(e), rng, ids);
}

bool qgo_idle(const SystemState& state) {
    return std::all_of(state.processors.begin(), state.processors.end(),
                       [&](const ProcessorId& p) { return state.ext.at(p).is_null(); });
}

}  // namespace qdsim
