#include "qdsim/algorithms.hpp"

#include "qdsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qdsim {

using nlohmann::json;

namespace {

constexpr Complex I{0.0, 1.0};

Matrix pauli_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

Matrix pauli_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

Matrix hadamard() {
    Matrix m(2, 2);
    m << 1, 1, 1, -1;
    return m / std::sqrt(2.0);
}

Matrix rotation_y(double angle) {
    const double c = std::cos(angle / 2), s = std::sin(angle / 2);
    Matrix m(2, 2);
    m << c, -s, s, c;
    return m;
}

std::vector<int> dims_of(const std::vector<Register>& regs) {
    std::vector<int> dims;
    for (const Register& r : regs) dims.push_back(r.dim);
    return dims;
}

std::vector<std::uint64_t> ids_of(const std::vector<Register>& regs) {
    std::vector<std::uint64_t> ids;
    for (const Register& r : regs) ids.push_back(r.id);
    return ids;
}

LocalOperation no_op(std::string name, ClassicalUpdate update) {
    return LocalOperation{std::move(name), identity_operation({}), {}, std::move(update)};
}

std::size_t step_index(const std::string& action) {
    const auto colon = action.find(':');
    if (colon == std::string::npos) fail(ErrorCode::InvalidArgument, "malformed action '" + action + "'");
    return std::stoul(action.substr(colon + 1));
}

std::string action_kind(const std::string& action) { return action.substr(0, action.find(':')); }

ProcessorId successor(const ProcessorId& p, std::size_t n) { return "p" + std::to_string((processor_index(p) + 1) % n); }

// ---------------------------------------------------------------------------

class EmptyAlgorithm : public BaseAlgorithm {
public:
    std::string name() const override { return "empty"; }
    std::vector<BaseStep> enabled(const LocalView&) const override { return {}; }
    LocalOperation resolve_apply(const LocalView&, const std::string& action,
                                 std::span<const std::uint64_t>) const override {
        fail(ErrorCode::ReplayError, "empty algorithm has no step '" + action + "'");
    }
    OutgoingMessage resolve_send(const LocalView&, const std::string& action, const ProcessorId&) const override {
        fail(ErrorCode::ReplayError, "empty algorithm has no send '" + action + "'");
    }
    ClassicalState on_receive(const LocalView& view, const ChannelId&, const MessageInstance&) const override {
        return view.classical;
    }
};

// ---------------------------------------------------------------------------

class TokenRing : public BaseAlgorithm {
public:
    TokenRing(std::size_t n, int rounds, bool quantum_token, double tick, int pings)
        : n_(n), rounds_(rounds), quantum_token_(quantum_token), tick_(tick), pings_(pings) {}

    std::string name() const override { return "token-ring"; }

    ClassicalState initial(std::size_t k) const {
        return json{{"holding", k == 0}, {"hop", 0}, {"ticked", false}, {"pings_left", pings_}, {"pings_seen", 0}};
    }

    std::vector<BaseStep> enabled(const LocalView& v) const override {
        std::vector<BaseStep> out;
        const json& s = v.classical;
        if (s.at("holding").get<bool>()) {
            if (!s.at("ticked").get<bool>())
                out.push_back({EventKind::Apply, "tick", {}, 0});
            else if (s.at("hop").get<int>() < rounds_ * static_cast<int>(n_))
                out.push_back({EventKind::Send, "token", successor(v.proc, n_), 0});
        }
        if (s.at("pings_left").get<int>() > 0) out.push_back({EventKind::Send, "ping", successor(v.proc, n_), 0});
        return out;
    }

    LocalOperation resolve_apply(const LocalView& v, const std::string& action,
                                 std::span<const std::uint64_t>) const override {
        if (action != "tick") fail(ErrorCode::ReplayError, "token-ring has no step '" + action + "'");
        auto mark = [](const ClassicalState& s, const std::string&) {
            ClassicalState out = s;
            out["ticked"] = true;
            return out;
        };
        std::vector<Register> qubits;
        for (const Register& r : v.owned)
            if (r.dim == 2) qubits.push_back(r);
        Matrix u = Matrix::Identity(1, 1);
        for (std::size_t k = 0; k < qubits.size(); ++k) u = kron(u, rotation_y(tick_));
        LocalOperation op{"tick", unitary_operation(u, dims_of(qubits)), {ids_of(qubits), {}}, mark};
        return op;
    }

    OutgoingMessage resolve_send(const LocalView& v, const std::string& action, const ProcessorId&) const override {
        OutgoingMessage out;
        out.sender_after = v.classical;
        if (action == "token") {
            const int hop = v.classical.at("hop").get<int>() + 1;
            out.classical = json{{"class", "token"}, {"hop", hop}};
            if (quantum_token_) out.quantum_regs = ids_of(v.owned);
            out.sender_after["holding"] = false;
            out.sender_after["ticked"] = false;
        } else if (action == "ping") {
            out.classical = json{{"class", "ping"}, {"from", v.proc}};
            out.sender_after["pings_left"] = v.classical.at("pings_left").get<int>() - 1;
        } else {
            fail(ErrorCode::ReplayError, "token-ring has no send '" + action + "'");
        }
        return out;
    }

    ClassicalState on_receive(const LocalView& v, const ChannelId&, const MessageInstance& msg) const override {
        ClassicalState s = v.classical;
        const std::string cls = msg.classical.value("class", std::string());
        if (cls == "token") {
            s["holding"] = true;
            s["ticked"] = false;
            s["hop"] = msg.classical.at("hop");
        } else if (cls == "ping") {
            s["pings_seen"] = s.at("pings_seen").get<int>() + 1;
        }
        return s;
    }

private:
    std::size_t n_;
    int rounds_;
    bool quantum_token_;
    double tick_;
    int pings_;
};

// ---------------------------------------------------------------------------

// Register layout for K = n - 1 targets: ψ_k = k, a_k = K + 2k - 1, b_k = K + 2k.
class Teleport : public BaseAlgorithm {
public:
    explicit Teleport(std::size_t n) : n_(n), targets_(n - 1) {}

    std::string name() const override { return "teleport"; }

    std::uint64_t psi(std::size_t k) const { return k; }
    std::uint64_t alice(std::size_t k) const { return targets_ + 2 * k - 1; }
    std::uint64_t bob(std::size_t k) const { return targets_ + 2 * k; }

    ClassicalState initial(std::size_t p) const {
        if (p == 0) return json{{"next", 0}, {"bits", json::object()}};
        return json{{"qubit", nullptr}, {"bits", nullptr}, {"fixed", false}};
    }

    json initial_state() const {
        json regs = json::array();
        for (std::size_t k = 1; k <= targets_; ++k)
            regs.push_back({{"owner", "p0"}, {"state", "psi:" + std::to_string(0.7 * static_cast<double>(k)) + "," +
                                                           std::to_string(0.3 * static_cast<double>(k))}});
        json pairs = json::array();
        for (std::size_t k = 1; k <= targets_; ++k) pairs.push_back({"p0", "p0"});
        return json{{"registers", regs}, {"epr_pairs", pairs}};
    }

    std::vector<BaseStep> enabled(const LocalView& v) const override {
        const json& s = v.classical;
        if (v.proc == "p0") {
            const std::size_t next = s.at("next").get<std::size_t>();
            if (next >= 3 * targets_) return {};
            const std::size_t k = next / 3 + 1;
            const std::string dest = "p" + std::to_string(k);
            switch (next % 3) {
                case 0: return {{EventKind::Send, "distribute:" + std::to_string(k), dest, 0}};
                case 1: return {{EventKind::Apply, "bell:" + std::to_string(k), {}, 0}};
                default: return {{EventKind::Send, "correct:" + std::to_string(k), dest, 0}};
            }
        }
        if (!s.at("fixed").get<bool>() && !s.at("qubit").is_null() && !s.at("bits").is_null())
            return {{EventKind::Apply, "fix", {}, 0}};
        return {};
    }

    LocalOperation resolve_apply(const LocalView& v, const std::string& action,
                                 std::span<const std::uint64_t>) const override {
        if (action == "fix") {
            const std::string bits = v.classical.at("bits").get<std::string>();
            Matrix u = Matrix::Identity(2, 2);
            if (bits[1] == '1') u = pauli_x() * u;
            if (bits[0] == '1') u = pauli_z() * u;
            const std::uint64_t q = v.classical.at("qubit").get<std::uint64_t>();
            return {"fix", unitary_operation(u, {2}), {{q}, {}}, [](const ClassicalState& s, const std::string&) {
                        ClassicalState out = s;
                        out["fixed"] = true;
                        return out;
                    }};
        }
        if (action_kind(action) != "bell") fail(ErrorCode::ReplayError, "teleport has no step '" + action + "'");
        const std::size_t k = step_index(action);
        Matrix cnot = Matrix::Zero(4, 4);
        cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1;
        const Matrix pre = kron(hadamard(), Matrix::Identity(2, 2)) * cnot;
        QuantumOperation op;
        op.in_dims = op.out_dims = {2, 2};
        for (int m = 0; m < 4; ++m) {
            Matrix proj = Matrix::Zero(4, 4);
            proj(m, m) = 1;
            op.outcomes.push_back(std::string{char('0' + m / 2), char('0' + m % 2)});
            op.kraus.push_back({proj * pre});
        }
        const std::string key = std::to_string(k);
        return {action, std::move(op), {{psi(k), alice(k)}, {}},
                [key](const ClassicalState& s, const std::string& r) {
                    ClassicalState out = s;
                    out["bits"][key] = r;
                    out["next"] = s.at("next").get<int>() + 1;
                    return out;
                }};
    }

    OutgoingMessage resolve_send(const LocalView& v, const std::string& action, const ProcessorId&) const override {
        const std::size_t k = step_index(action);
        OutgoingMessage out;
        out.sender_after = v.classical;
        out.sender_after["next"] = v.classical.at("next").get<int>() + 1;
        if (action_kind(action) == "distribute") {
            out.classical = json{{"class", "epr"}, {"k", k}};
            out.quantum_regs = {bob(k)};
        } else if (action_kind(action) == "correct") {
            out.classical = json{{"class", "bits"}, {"k", k}, {"m", v.classical.at("bits").at(std::to_string(k))}};
        } else {
            fail(ErrorCode::ReplayError, "teleport has no send '" + action + "'");
        }
        return out;
    }

    ClassicalState on_receive(const LocalView& v, const ChannelId&, const MessageInstance& msg) const override {
        ClassicalState s = v.classical;
        const std::string cls = msg.classical.value("class", std::string());
        if (cls == "epr" && !msg.quantum_regs.empty()) s["qubit"] = msg.quantum_regs.front();
        if (cls == "bits") s["bits"] = msg.classical.at("m");
        return s;
    }

private:
    std::size_t n_;
    std::size_t targets_;
};

// ---------------------------------------------------------------------------

class Chatter : public BaseAlgorithm {
public:
    Chatter(std::size_t n, std::uint64_t seed, int steps, int budget) : seed_(seed), budget_(budget) {
        std::mt19937_64 rng(seed);
        static const char* kinds[] = {"rot", "meas", "prep", "disc", "send"};
        scripts_.resize(n);
        for (std::size_t p = 0; p < n; ++p) {
            for (int s = 0; s < steps; ++s) {
                std::string kind = kinds[static_cast<std::size_t>(uniform01(rng) * 5)];
                std::string dest;
                if (kind == "send") {
                    std::size_t d = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - 1));
                    if (d >= p) ++d;
                    dest = "p" + std::to_string(d);
                }
                scripts_[p].push_back({kind, dest});
            }
        }
    }

    std::string name() const override { return "chatter"; }

    ClassicalState initial() const { return json{{"pc", 0}, {"created", 0}, {"log", json::array()}}; }

    std::vector<BaseStep> enabled(const LocalView& v) const override {
        const auto& script = scripts_.at(processor_index(v.proc));
        const std::size_t pc = v.classical.at("pc").get<std::size_t>();
        if (pc >= script.size()) return {};
        const auto& [kind, dest] = script[pc];
        const std::string tag = ":" + std::to_string(pc);
        if (kind == "send") return {{EventKind::Send, "send" + tag, dest, 0}};
        if (kind == "prep") {
            if (v.classical.at("created").get<int>() < budget_) return {{EventKind::Apply, "prep" + tag, {}, 1}};
            return {{EventKind::Apply, "skip" + tag, {}, 0}};
        }
        return {{EventKind::Apply, kind + tag, {}, 0}};
    }

    LocalOperation resolve_apply(const LocalView& v, const std::string& action,
                                 std::span<const std::uint64_t> fresh) const override {
        const std::string kind = action_kind(action);
        const std::size_t pc = step_index(action);
        auto advance = [kind, pc](const ClassicalState& s, const std::string& r) {
            ClassicalState out = s;
            out["pc"] = pc + 1;
            out["log"].push_back(kind + "=" + r);
            if (kind == "prep") out["created"] = s.at("created").get<int>() + 1;
            return out;
        };
        if (kind == "skip") return no_op(action, advance);
        if (kind == "prep") {
            if (fresh.size() != 1) fail(ErrorCode::ReplayError, "prep needs one fresh register");
            Vector plus(2);
            plus << 1, 1;
            plus /= std::sqrt(2.0);
            return {action, preparation(plus, {2}), {{}, {Register{fresh[0], 2}}}, advance};
        }
        if (v.owned.empty()) return no_op(action, advance);
        if (kind == "rot") {
            std::mt19937_64 rng(seed_ ^ (0x51ED27u * (processor_index(v.proc) + 1)) ^ (pc << 32));
            const auto dims = dims_of(v.owned);
            std::size_t dim = 1;
            for (int d : dims) dim *= static_cast<std::size_t>(d);
            return {action, unitary_operation(random_unitary(dim, rng), dims), {ids_of(v.owned), {}}, advance};
        }
        const Register& first = v.owned.front();
        if (kind == "meas") return {action, basis_measurement({first.dim}), {{first.id}, {}}, advance};
        if (kind == "disc") return {action, discard({first.dim}), {{first.id}, {}}, advance};
        fail(ErrorCode::ReplayError, "chatter has no step '" + action + "'");
    }

    OutgoingMessage resolve_send(const LocalView& v, const std::string& action, const ProcessorId&) const override {
        if (action_kind(action) != "send") fail(ErrorCode::ReplayError, "chatter has no send '" + action + "'");
        const std::size_t pc = step_index(action);
        OutgoingMessage out;
        out.classical = json{{"class", "chat"}, {"from", v.proc}, {"pc", pc}};
        if (!v.owned.empty()) out.quantum_regs = {v.owned.front().id};
        out.sender_after = v.classical;
        out.sender_after["pc"] = pc + 1;
        return out;
    }

    ClassicalState on_receive(const LocalView& v, const ChannelId& chan, const MessageInstance& msg) const override {
        ClassicalState s = v.classical;
        s["log"].push_back("recv " + chan.str() + " pc=" + msg.classical.at("pc").dump());
        return s;
    }

private:
    struct Step {
        std::string kind;
        ProcessorId dest;
    };
    std::uint64_t seed_;
    int budget_;
    std::vector<std::vector<Step>> scripts_;
};

Vector named_state(const std::string& text) {
    Vector v(2);
    const double h = 1.0 / std::sqrt(2.0);
    if (text == "0") v << 1, 0;
    else if (text == "1") v << 0, 1;
    else if (text == "+") v << h, h;
    else if (text == "-") v << h, -h;
    else if (text.rfind("psi:", 0) == 0) {
        const auto comma = text.find(',');
        if (comma == std::string::npos) fail(ErrorCode::InvalidArgument, "bad state '" + text + "'");
        try {
            return qubit_state(std::stod(text.substr(4, comma - 4)), std::stod(text.substr(comma + 1)));
        } catch (const std::logic_error&) {
            fail(ErrorCode::InvalidArgument, "bad state '" + text + "'");
        }
    } else {
        fail(ErrorCode::InvalidArgument, "unknown register state '" + text + "'");
    }
    return v;
}

template <class T>
T param(const json& params, const char* key, T fallback) {
    if (!params.is_object() || !params.contains(key)) return fallback;
    try {
        return params.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::InvalidArgument, std::string("parameter '") + key + "' has the wrong type");
    }
}

}  // namespace

std::vector<ProcessorId> processor_names(std::size_t n) {
    std::vector<ProcessorId> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back("p" + std::to_string(k));
    return out;
}

std::size_t processor_index(const ProcessorId& p) {
    if (p.size() < 2 || p[0] != 'p' || !std::all_of(p.begin() + 1, p.end(), ::isdigit))
        fail(ErrorCode::InvalidArgument, "not a processor name: " + p);
    return std::stoul(p.substr(1));
}

Vector qubit_state(double theta, double phi) {
    Vector v(2);
    v << std::cos(theta / 2), std::exp(I * phi) * std::sin(theta / 2);
    return v;
}

Matrix random_unitary(std::size_t dim, std::mt19937_64& rng) {
    const auto d = static_cast<Eigen::Index>(dim);
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            // Box-Muller on our own uniform draws keeps the stream portable.
            const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
            const double r = std::sqrt(-2.0 * std::log(u1));
            g(i, j) = Complex(r * std::cos(2 * std::numbers::pi * u2), r * std::sin(2 * std::numbers::pi * u2));
        }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix rm = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index k = 0; k < d; ++k) {
        const Complex diag = rm(k, k);
        if (std::abs(diag) > 0) q.col(k) *= diag / std::abs(diag);
    }
    return q;
}

BaseScenario make_base_algorithm(const std::string& name, std::size_t processors, const json& params) {
    if (processors == 0) fail(ErrorCode::InvalidArgument, "need at least one processor");
    BaseScenario out;
    const auto names = processor_names(processors);
    if (name == "empty") {
        out.algorithm = std::make_shared<EmptyAlgorithm>();
        for (const auto& p : names) out.classical[p] = json::object();
    } else if (name == "token-ring") {
        const int rounds = param(params, "rounds", 1);
        const bool quantum = param(params, "quantum_token", true);
        const double tick = param(params, "tick", 0.3);
        const int pings = param(params, "pings", 0);
        if (rounds < 0 || pings < 0) fail(ErrorCode::InvalidArgument, "token-ring counts must be non-negative");
        auto algo = std::make_shared<TokenRing>(processors, rounds, quantum, tick, pings);
        for (std::size_t k = 0; k < processors; ++k) out.classical[names[k]] = algo->initial(k);
        out.initial_state = json{{"registers", json::array()}};
        if (quantum) out.initial_state["registers"].push_back({{"owner", "p0"}, {"state", "psi:0.9,0.4"}});
        out.algorithm = algo;
    } else if (name == "teleport") {
        if (processors < 2 || processors > 3) fail(ErrorCode::InvalidArgument, "teleport runs on 2 or 3 processors");
        auto algo = std::make_shared<Teleport>(processors);
        for (std::size_t k = 0; k < processors; ++k) out.classical[names[k]] = algo->initial(k);
        out.initial_state = algo->initial_state();
        out.algorithm = algo;
    } else if (name == "chatter") {
        const auto seed = param<std::uint64_t>(params, "seed", 1);
        const int steps = param(params, "steps", 4);
        const int qubits = param(params, "qubits", 1);
        const int max_qubits = param(params, "max_qubits", 4);
        if (steps < 0 || qubits < 0) fail(ErrorCode::InvalidArgument, "chatter counts must be non-negative");
        const int budget = std::max(0, (max_qubits - qubits * static_cast<int>(processors)) /
                                           static_cast<int>(processors));
        auto algo = std::make_shared<Chatter>(processors, seed, steps, budget);
        json regs = json::array();
        const char* basis[] = {"0", "+", "1", "-"};
        for (std::size_t k = 0; k < processors; ++k) {
            out.classical[names[k]] = algo->initial();
            for (int q = 0; q < qubits; ++q) regs.push_back({{"owner", names[k]}, {"state", basis[(k + q) % 4]}});
        }
        out.initial_state = json{{"registers", regs}};
        out.algorithm = algo;
    } else {
        fail(ErrorCode::UnknownScenario, "unknown base algorithm '" + name + "'");
    }
    return out;
}

SystemState make_initial_state(const std::vector<ProcessorId>& processors, const json& descriptor,
                               const std::map<ProcessorId, ClassicalState>& classical) {
    std::vector<Register> regs;
    std::map<std::uint64_t, Owner> owners;
    Matrix amplitudes = Matrix::Ones(1, 1);
    auto owner_of = [&](const json& j) {
        const ProcessorId p = j.get<std::string>();
        if (std::find(processors.begin(), processors.end(), p) == processors.end())
            fail(ErrorCode::InvalidArgument, "register owner " + p + " is not a processor");
        return Owner::of_processor(p);
    };
    try {
        std::uint64_t next = 1;
        for (const json& r : descriptor.value("registers", json::array())) {
            owners[next] = owner_of(r.at("owner"));
            regs.push_back({next++, 2});
            amplitudes = kron(amplitudes, named_state(r.at("state").get<std::string>()));
        }
        Vector bell = Vector::Zero(4);
        bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
        for (const json& pair : descriptor.value("epr_pairs", json::array())) {
            if (!pair.is_array() || pair.size() != 2) fail(ErrorCode::InvalidArgument, "an EPR pair names two owners");
            owners[next] = owner_of(pair[0]);
            regs.push_back({next++, 2});
            owners[next] = owner_of(pair[1]);
            regs.push_back({next++, 2});
            amplitudes = kron(amplitudes, bell);
        }
    } catch (const json::exception& err) {
        fail(ErrorCode::InvalidArgument, std::string("bad initial state: ") + err.what());
    }
    std::map<ProcessorId, ClassicalState> sigma;
    std::map<ProcessorId, ClassicalState> ext;
    for (const auto& p : processors) {
        auto it = classical.find(p);
        sigma[p] = it != classical.end() ? it->second : json::object();
        ext[p] = nullptr;
    }
    const Vector psi = amplitudes.col(0);
    return make_system(processors, std::move(sigma), std::move(ext), DensityMatrix::pure(RegisterSpace(regs), psi),
                       std::move(owners));
}

}  // namespace qdsim
