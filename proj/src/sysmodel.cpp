#include "qdsim/sysmodel.hpp"

#include "qdsim/error.hpp"

#include <algorithm>

namespace qdsim {

ChannelId ChannelId::parse(const std::string& text) {
    const auto arrow = text.find("->");
    if (arrow == std::string::npos || arrow == 0 || arrow + 2 >= text.size())
        fail(ErrorCode::ParseError, "malformed channel '" + text + "'");
    return {text.substr(0, arrow), text.substr(arrow + 2)};
}

bool SystemState::has_processor(const ProcessorId& p) const {
    return std::find(processors.begin(), processors.end(), p) != processors.end();
}

std::vector<ChannelId> SystemState::incoming(const ProcessorId& p) const {
    std::vector<ChannelId> out;
    for (const auto& src : processors) out.push_back({src, p});
    return out;
}

std::vector<ChannelId> SystemState::outgoing(const ProcessorId& p) const {
    std::vector<ChannelId> out;
    for (const auto& dst : processors) out.push_back({p, dst});
    return out;
}

std::vector<Register> SystemState::owned_registers(const ProcessorId& p) const {
    std::vector<Register> out;
    for (const auto& [id, owner] : ownership)
        if (owner.kind == Owner::Kind::Processor && owner.processor == p) out.push_back(quantum.space.at(id));
    return out;
}

std::optional<std::pair<ChannelId, std::size_t>> SystemState::locate(MessageId id) const {
    for (const auto& [chan, contents] : channels)
        for (std::size_t k = 0; k < contents.size(); ++k)
            if (contents[k].id == id) return std::pair{chan, k};
    return std::nullopt;
}

SystemState make_system(std::vector<ProcessorId> processors, std::map<ProcessorId, ClassicalState> classical,
                        std::map<ProcessorId, ClassicalState> ext, DensityMatrix quantum,
                        std::map<std::uint64_t, Owner> owners) {
    SystemState s;
    s.processors = std::move(processors);
    for (const auto& p : s.processors) {
        s.classical[p] = classical.contains(p) ? classical.at(p) : ClassicalState::object();
        s.ext[p] = ext.contains(p) ? ext.at(p) : ClassicalState();
        if (!s.classical[p].contains("inbox")) s.classical[p]["inbox"] = ClassicalState::array();
    }
    for (const auto& src : s.processors)
        for (const auto& dst : s.processors) s.channels[{src, dst}] = {};
    s.quantum = std::move(quantum);
    s.ownership = std::move(owners);
    if (auto problem = ownership_problem(s)) fail(ErrorCode::OwnershipViolation, *problem);
    return s;
}

SystemState send(const SystemState& state, const ProcessorId& sender, MessageInstance msg, const ProcessorId& dest) {
    if (!state.has_processor(sender) || !state.has_processor(dest))
        fail(ErrorCode::NotRecipient, "unknown processor in send " + sender + "->" + dest);
    if (state.sent_ids.contains(msg.id) || state.locate(msg.id))
        fail(ErrorCode::DuplicateMessage, "message id " + std::to_string(msg.id) + " already used");
    SystemState next = state;
    for (std::uint64_t reg : msg.quantum_regs) {
        auto it = next.ownership.find(reg);
        if (it == next.ownership.end() || it->second != Owner::of_processor(sender))
            fail(ErrorCode::OwnershipViolation,
                 "register " + std::to_string(reg) + " is not owned by sender " + sender);
        it->second = Owner::of_message(msg.id);
    }
    next.sent_ids.insert(msg.id);
    next.channels[{sender, dest}].push_back(std::move(msg));
    return next;
}

std::pair<SystemState, MessageInstance> pop_message(const SystemState& state, const ProcessorId& receiver,
                                                    const ChannelId& chan) {
    if (chan.destination != receiver)
        fail(ErrorCode::NotRecipient, receiver + " is not the destination of " + chan.str());
    auto it = state.channels.find(chan);
    if (it == state.channels.end()) fail(ErrorCode::NotRecipient, "no channel " + chan.str());
    if (it->second.empty()) fail(ErrorCode::EmptyChannel, "channel " + chan.str() + " is empty");
    SystemState next = state;
    auto& contents = next.channels[chan];
    MessageInstance msg = contents.front();
    contents.erase(contents.begin());
    for (std::uint64_t reg : msg.quantum_regs) next.ownership[reg] = Owner::of_processor(receiver);
    return {std::move(next), std::move(msg)};
}

SystemState record_delivery(const SystemState& state, const ProcessorId& receiver, const ChannelId& chan,
                            const MessageInstance& msg) {
    SystemState next = state;
    auto& sigma = next.classical.at(receiver);
    if (!sigma.contains("inbox")) sigma["inbox"] = ClassicalState::array();
    sigma["inbox"].push_back({{"chan", chan.str()}, {"msg", msg.classical}});
    return next;
}

std::pair<SystemState, MessageInstance> receive(const SystemState& state, const ProcessorId& receiver,
                                                const ChannelId& chan) {
    auto [popped, msg] = pop_message(state, receiver, chan);
    return {record_delivery(popped, receiver, chan, msg), std::move(msg)};
}

namespace {

void check_outcome(const DensityMatrix& rho, const std::string& what) {
    if (rho.trace() <= tol::zero_probability)
        fail(ErrorCode::ZeroProbabilityHistory, what + " leaves a zero-probability history");
}

}  // namespace

SystemState apply_local(const SystemState& state, const ProcessorId& proc, const LocalOperation& op,
                        const std::string& outcome) {
    if (!state.has_processor(proc)) fail(ErrorCode::LocalityViolation, "unknown processor " + proc);
    for (std::uint64_t reg : op.map.inputs) {
        auto it = state.ownership.find(reg);
        if (it == state.ownership.end() || it->second != Owner::of_processor(proc))
            fail(ErrorCode::LocalityViolation,
                 op.name + " touches register " + std::to_string(reg) + " not owned by " + proc);
    }
    SystemState next = state;
    next.quantum = apply_outcome(state.quantum, op.op, op.map, outcome);
    check_outcome(next.quantum, op.name);
    const bool in_place = op.map.outputs.empty() && op.op.out_dims == op.op.in_dims;
    if (!in_place) {
        for (std::uint64_t reg : op.map.inputs) next.ownership.erase(reg);
        for (const Register& reg : op.map.outputs) next.ownership[reg.id] = Owner::of_processor(proc);
    }
    if (op.update) next.classical.at(proc) = op.update(state.classical.at(proc), outcome);
    return next;
}

SystemState apply_in_flight(const SystemState& state, MessageId msg, const LocalOperation& op,
                            const std::string& outcome) {
    const auto where = state.locate(msg);
    if (!where) fail(ErrorCode::ReplayError, "message " + std::to_string(msg) + " is not in flight");
    const MessageInstance& m = state.channels.at(where->first)[where->second];
    for (std::uint64_t reg : op.map.inputs)
        if (std::find(m.quantum_regs.begin(), m.quantum_regs.end(), reg) == m.quantum_regs.end())
            fail(ErrorCode::LocalityViolation,
                 op.name + " touches register " + std::to_string(reg) + " outside message " + std::to_string(msg));
    if (!op.map.outputs.empty()) fail(ErrorCode::ShapeError, "operations on messages must act in place");
    SystemState next = state;
    next.quantum = apply_outcome(state.quantum, op.op, op.map, outcome);
    check_outcome(next.quantum, op.name);
    auto& target = next.channels[where->first][where->second];
    if (op.update) target.classical = op.update(m.classical, outcome);
    return next;
}

std::optional<std::string> ownership_problem(const SystemState& state) {
    const auto ids = state.quantum.space.ids();
    if (ids.size() != state.ownership.size()) return "ownership map does not cover exactly the live registers";
    for (std::uint64_t id : ids) {
        auto it = state.ownership.find(id);
        if (it == state.ownership.end()) return "register " + std::to_string(id) + " has no owner";
        const Owner& o = it->second;
        if (o.kind == Owner::Kind::Processor && !state.has_processor(o.processor))
            return "register " + std::to_string(id) + " owned by unknown processor";
        if (o.kind == Owner::Kind::Message) {
            const auto where = state.locate(o.message);
            if (!where) return "register " + std::to_string(id) + " owned by a message not in flight";
            const auto& regs = state.channels.at(where->first)[where->second].quantum_regs;
            if (std::find(regs.begin(), regs.end(), id) == regs.end())
                return "register " + std::to_string(id) + " owner does not list it";
        }
    }
    for (const auto& [chan, contents] : state.channels)
        for (const auto& m : contents)
            for (std::uint64_t reg : m.quantum_regs) {
                auto it = state.ownership.find(reg);
                if (it == state.ownership.end() || it->second != Owner::of_message(m.id))
                    return "message " + std::to_string(m.id) + " register not owned by it";
            }
    return std::nullopt;
}

namespace {

bool classical_parts_equal(const SystemState& a, const SystemState& b) {
    return a.processors == b.processors && a.classical == b.classical && a.ext == b.ext &&
           a.channels == b.channels && a.ownership == b.ownership;
}

}  // namespace

bool states_equal(const SystemState& a, const SystemState& b, double tol) {
    if (!classical_parts_equal(a, b)) return false;
    const double scale = std::clamp(std::max(std::abs(a.quantum.trace()), std::abs(b.quantum.trace())), 1e-300, 1.0);
    return max_entry_difference(a.quantum, b.quantum) <= tol * scale;
}

bool states_identical(const SystemState& a, const SystemState& b) {
    return classical_parts_equal(a, b) && a.quantum.space == b.quantum.space && a.quantum.rho == b.quantum.rho;
}

nlohmann::json to_json(const MessageInstance& msg) {
    nlohmann::json j;
    j["id"] = msg.id;
    j["classical"] = msg.classical;
    j["regs"] = msg.quantum_regs;
    j["marker"] = msg.marker ? nlohmann::json(*msg.marker) : nlohmann::json();
    j["op_outcome"] = msg.op_outcome ? nlohmann::json(*msg.op_outcome) : nlohmann::json();
    return j;
}

MessageInstance message_from_json(const nlohmann::json& j) {
    MessageInstance m;
    m.id = j.at("id").get<MessageId>();
    m.classical = j.at("classical");
    m.quantum_regs = j.at("regs").get<std::vector<std::uint64_t>>();
    if (!j.at("marker").is_null()) m.marker = j.at("marker").get<std::string>();
    if (!j.at("op_outcome").is_null()) m.op_outcome = j.at("op_outcome").get<std::string>();
    return m;
}

}  // namespace qdsim
