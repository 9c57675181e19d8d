#include "qdsim/globalops.hpp"

#include "qdsim/error.hpp"

#include <algorithm>

namespace qdsim {

using nlohmann::json;

namespace {

std::vector<int> dims_of(const std::vector<Register>& regs) {
    std::vector<int> dims;
    for (const Register& r : regs) dims.push_back(r.dim);
    return dims;
}

std::size_t total_dim(const std::vector<Register>& regs) {
    std::size_t d = 1;
    for (const Register& r : regs) d *= static_cast<std::size_t>(r.dim);
    return d;
}

Matrix pauli(char letter) {
    Matrix m = Matrix::Zero(2, 2);
    switch (letter) {
        case 'I': m(0, 0) = m(1, 1) = 1; break;
        case 'X': m(0, 1) = m(1, 0) = 1; break;
        case 'Y': m(0, 1) = Complex(0, -1); m(1, 0) = Complex(0, 1); break;
        case 'Z': m(0, 0) = 1; m(1, 1) = -1; break;
        default: fail(ErrorCode::BadOutcome, std::string("not a Pauli letter: ") + letter);
    }
    return m;
}

LocalOperation snapshot(const std::vector<Register>& regs, const ClassicalState& classical) {
    QuantumOperation op = basis_measurement(dims_of(regs));
    for (std::string& label : op.outcomes) label = json{{"c", classical}, {"q", label}}.dump();
    return {kSnapshotMeasure, std::move(op), {}, nullptr};
}

LocalOperation encrypt(const std::vector<Register>& regs, const ClassicalState&) {
    const std::size_t m = regs.size();
    if (std::any_of(regs.begin(), regs.end(), [](const Register& r) { return r.dim != 2; }))
        fail(ErrorCode::ShapeError, "global-encrypt acts on qubits only");
    if (m == 0) return {kGlobalEncrypt, identity_operation({}), {}, nullptr};
    if (m > kMaxEncryptQubits)
        fail(ErrorCode::CapacityError, "global-encrypt component over " + std::to_string(m) + " qubits");
    QuantumOperation op;
    op.in_dims = op.out_dims = dims_of(regs);
    const double scale = 1.0 / static_cast<double>(std::size_t{1} << m);
    static const char letters[] = {'I', 'X', 'Y', 'Z'};
    std::vector<int> digits(m, 0);
    for (std::size_t n = 0; n < (std::size_t{1} << (2 * m)); ++n) {
        std::string key;
        for (int d : digits) key += letters[d];
        op.kraus.push_back({pauli_key_unitary(key) * scale});
        op.outcomes.push_back(std::move(key));
        for (std::size_t k = m; k-- > 0;) {
            if (++digits[k] < 4) break;
            digits[k] = 0;
        }
    }
    return {kGlobalEncrypt, std::move(op), {}, nullptr};
}

LocalOperation record(const std::vector<Register>& regs, const ClassicalState& classical) {
    const auto d = static_cast<Eigen::Index>(total_dim(regs));
    return {kRecordOnly, unitary_operation(Matrix::Identity(d, d), dims_of(regs), classical.dump()), {}, nullptr};
}

}  // namespace

std::vector<std::string> builtin_global_op_names() { return {kSnapshotMeasure, kGlobalEncrypt, kRecordOnly}; }

DecomposableGlobalOp make_global_op(const std::string& gid) {
    ComponentFactory f;
    if (gid == kSnapshotMeasure) f = snapshot;
    else if (gid == kGlobalEncrypt) f = encrypt;
    else if (gid == kRecordOnly) f = record;
    else fail(ErrorCode::UnknownGlobalOp, "unknown global operation '" + gid + "'");
    DecomposableGlobalOp g;
    g.gid = gid;
    g.processor_op = f;
    g.message_ops["*"] = f;
    return g;
}

std::shared_ptr<const GlobalOpLibrary> make_library(const std::vector<std::string>& gids) {
    auto lib = std::make_shared<GlobalOpLibrary>();
    for (const auto& gid : gids) lib->emplace(gid, make_global_op(gid));
    return lib;
}

Matrix pauli_key_unitary(const std::string& key) {
    Matrix u = Matrix::Identity(1, 1);
    if (key == kNoOutcome) return u;
    for (char c : key) u = kron(u, pauli(c));
    return u;
}

}  // namespace qdsim
