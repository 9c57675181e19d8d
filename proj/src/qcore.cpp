#include "qdsim/qcore.hpp"

#include "qdsim/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace qdsim {

namespace {

constexpr std::size_t kDefaultCap = 4096;
std::atomic<std::size_t> g_cap_override{0};

std::size_t env_cap() {
    static const std::size_t cap = [] {
        if (const char* raw = std::getenv("QGO_DIM_CAP")) {
            char* end = nullptr;
            const unsigned long long v = std::strtoull(raw, &end, 10);
            if (end != raw && v > 0) return static_cast<std::size_t>(v);
        }
        return kDefaultCap;
    }();
    return cap;
}

std::size_t product(const std::vector<int>& dims) {
    std::size_t p = 1;
    for (int d : dims) p *= static_cast<std::size_t>(d);
    return p;
}

// For each index of `target` (a permutation of the registers of `source`),
// the index in `source` holding the same basis state.
std::vector<Eigen::Index> index_map(const RegisterSpace& source, const RegisterSpace& target) {
    const auto& regs = target.registers();
    std::vector<std::size_t> source_stride(regs.size());
    {
        std::vector<std::size_t> strides(source.size());
        std::size_t s = 1;
        for (std::size_t k = source.size(); k-- > 0;) {
            strides[k] = s;
            s *= static_cast<std::size_t>(source.registers()[k].dim);
        }
        for (std::size_t k = 0; k < regs.size(); ++k) source_stride[k] = strides[source.position(regs[k].id)];
    }
    std::vector<Eigen::Index> map(target.total_dim());
    std::vector<int> digits(regs.size(), 0);
    for (std::size_t n = 0; n < map.size(); ++n) {
        std::size_t old = 0;
        for (std::size_t k = 0; k < regs.size(); ++k) old += static_cast<std::size_t>(digits[k]) * source_stride[k];
        map[n] = static_cast<Eigen::Index>(old);
        for (std::size_t k = regs.size(); k-- > 0;) {
            if (++digits[k] < regs[k].dim) break;
            digits[k] = 0;
        }
    }
    return map;
}

struct Placement {
    std::vector<Register> rest;
    std::vector<Register> inputs;
    std::vector<Register> outputs;
    bool in_place = false;
};

Placement place(const DensityMatrix& state, const QuantumOperation& op, const RegisterMap& map) {
    Placement p;
    if (map.inputs.size() != op.in_dims.size())
        fail(ErrorCode::ShapeError, "register map has " + std::to_string(map.inputs.size()) +
                                        " input slots, operation expects " + std::to_string(op.in_dims.size()));
    std::unordered_set<std::uint64_t> seen;
    for (std::size_t k = 0; k < map.inputs.size(); ++k) {
        const std::uint64_t id = map.inputs[k];
        if (!seen.insert(id).second) fail(ErrorCode::ShapeError, "register map is not injective");
        const Register& reg = state.space.at(id);
        if (reg.dim != op.in_dims[k])
            fail(ErrorCode::ShapeError, "register " + std::to_string(id) + " has dim " + std::to_string(reg.dim) +
                                            ", slot expects " + std::to_string(op.in_dims[k]));
        p.inputs.push_back(reg);
    }
    for (const Register& r : state.space.registers())
        if (!seen.contains(r.id)) p.rest.push_back(r);
    if (map.outputs.empty() && op.out_dims.empty() && !op.in_dims.empty()) {
        // discards its inputs; nothing to place
    } else if (map.outputs.empty()) {
        if (op.out_dims != op.in_dims)
            fail(ErrorCode::ShapeError, "operation changes register dims; output registers must be given");
        p.outputs = p.inputs;
        p.in_place = true;
    } else {
        if (map.outputs.size() != op.out_dims.size())
            fail(ErrorCode::ShapeError, "output register count does not match operation");
        for (std::size_t k = 0; k < map.outputs.size(); ++k)
            if (map.outputs[k].dim != op.out_dims[k]) fail(ErrorCode::ShapeError, "output register dim mismatch");
        p.outputs = map.outputs;
    }
    for (const auto& family : op.kraus)
        for (const Matrix& k : family)
            if (static_cast<std::size_t>(k.rows()) != op.out_dim() ||
                static_cast<std::size_t>(k.cols()) != op.in_dim())
                fail(ErrorCode::ShapeError, "Kraus matrix shape does not match operation dims");
    return p;
}

std::vector<std::uint64_t> ids_of(const std::vector<Register>& regs) {
    std::vector<std::uint64_t> out;
    out.reserve(regs.size());
    for (const auto& r : regs) out.push_back(r.id);
    return out;
}

std::vector<Register> concat(std::vector<Register> a, const std::vector<Register>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// (I_rest ⊗ K) rho (I_rest ⊗ K)^dagger, summed over Kraus matrices, for rho
// laid out as rest ++ inputs.
Matrix conjugate_blocks(const Matrix& rho, std::size_t rest_dim, const std::vector<Matrix>& kraus, std::size_t in_dim,
                        std::size_t out_dim) {
    const auto R = static_cast<Eigen::Index>(rest_dim);
    const auto di = static_cast<Eigen::Index>(in_dim);
    const auto dout = static_cast<Eigen::Index>(out_dim);
    Matrix result = Matrix::Zero(R * dout, R * dout);
    Matrix left(R * dout, R * di);
    for (const Matrix& k : kraus) {
        for (Eigen::Index b = 0; b < R; ++b) left.middleRows(b * dout, dout).noalias() = k * rho.middleRows(b * di, di);
        const Matrix kd = k.adjoint();
        for (Eigen::Index b = 0; b < R; ++b)
            result.middleCols(b * dout, dout).noalias() += left.middleCols(b * di, di) * kd;
    }
    return result;
}

}  // namespace

std::size_t dimension_cap() {
    const std::size_t o = g_cap_override.load();
    return o ? o : env_cap();
}

void set_dimension_cap(std::size_t cap) { g_cap_override.store(cap); }

RegisterSpace::RegisterSpace(std::vector<Register> registers) : registers_(std::move(registers)) {
    std::unordered_set<std::uint64_t> seen;
    total_dim_ = 1;
    for (const Register& r : registers_) {
        if (!seen.insert(r.id).second) fail(ErrorCode::IdCollision, "register id " + std::to_string(r.id) + " repeated");
        if (r.dim < 1) fail(ErrorCode::ShapeError, "register dim must be positive");
        total_dim_ *= static_cast<std::size_t>(r.dim);
        if (total_dim_ > dimension_cap())
            fail(ErrorCode::CapacityError,
                 "total dimension exceeds cap " + std::to_string(dimension_cap()));
    }
}

bool RegisterSpace::contains(std::uint64_t id) const {
    return std::any_of(registers_.begin(), registers_.end(), [id](const Register& r) { return r.id == id; });
}

std::size_t RegisterSpace::position(std::uint64_t id) const {
    for (std::size_t k = 0; k < registers_.size(); ++k)
        if (registers_[k].id == id) return k;
    fail(ErrorCode::UnknownRegister, "register " + std::to_string(id) + " not in space");
}

const Register& RegisterSpace::at(std::uint64_t id) const { return registers_[position(id)]; }

std::vector<std::uint64_t> RegisterSpace::ids() const { return ids_of(registers_); }

DensityMatrix DensityMatrix::scalar(double weight) {
    DensityMatrix d;
    d.rho = Matrix::Constant(1, 1, Complex(weight, 0.0));
    return d;
}

DensityMatrix DensityMatrix::pure(RegisterSpace space, const Vector& amplitudes) {
    if (static_cast<std::size_t>(amplitudes.size()) != space.total_dim())
        fail(ErrorCode::ShapeError, "amplitude vector does not match register space");
    DensityMatrix d;
    d.space = std::move(space);
    d.rho = amplitudes * amplitudes.adjoint();
    return d;
}

DensityMatrix DensityMatrix::basis(RegisterSpace space, std::size_t index) {
    const auto D = static_cast<Eigen::Index>(space.total_dim());
    if (static_cast<Eigen::Index>(index) >= D) fail(ErrorCode::ShapeError, "basis index out of range");
    DensityMatrix d;
    d.space = std::move(space);
    d.rho = Matrix::Zero(D, D);
    d.rho(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
    return d;
}

StateReport check_state(const DensityMatrix& state, double eps) {
    StateReport r;
    r.hermiticity_error = (state.rho - state.rho.adjoint()).cwiseAbs().maxCoeff();
    r.hermitian = r.hermiticity_error <= eps;
    const Matrix h = (state.rho + state.rho.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = solver.eigenvalues().minCoeff();
    r.positive = r.min_eigenvalue >= -eps;
    r.trace = state.trace();
    r.trace_in_range = r.trace >= -eps && r.trace <= 1.0 + eps;
    return r;
}

std::size_t QuantumOperation::in_dim() const { return product(in_dims); }
std::size_t QuantumOperation::out_dim() const { return product(out_dims); }

std::optional<std::size_t> QuantumOperation::outcome_index(std::string_view outcome) const {
    for (std::size_t k = 0; k < outcomes.size(); ++k)
        if (outcomes[k] == outcome) return k;
    return std::nullopt;
}

QuantumOperation identity_operation(std::vector<int> dims) {
    const auto d = static_cast<Eigen::Index>(product(dims));
    return QuantumOperation{{std::string(kNoOutcome)}, {{Matrix::Identity(d, d)}}, dims, dims};
}

QuantumOperation unitary_operation(const Matrix& unitary, std::vector<int> dims, std::string outcome) {
    if (static_cast<std::size_t>(unitary.rows()) != product(dims) || unitary.rows() != unitary.cols())
        fail(ErrorCode::ShapeError, "unitary does not match dims");
    return QuantumOperation{{std::move(outcome)}, {{unitary}}, dims, dims};
}

QuantumOperation basis_measurement(std::vector<int> dims) {
    QuantumOperation op;
    op.in_dims = dims;
    op.out_dims = dims;
    const std::size_t D = product(dims);
    std::vector<int> digits(dims.size(), 0);
    for (std::size_t n = 0; n < D; ++n) {
        std::string label;
        for (int dgt : digits) label += std::to_string(dgt);
        Matrix proj = Matrix::Zero(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D));
        proj(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = 1.0;
        op.outcomes.push_back(std::move(label));
        op.kraus.push_back({std::move(proj)});
        for (std::size_t k = dims.size(); k-- > 0;) {
            if (++digits[k] < dims[k]) break;
            digits[k] = 0;
        }
    }
    return op;
}

QuantumOperation preparation(const Vector& state, std::vector<int> dims) {
    if (static_cast<std::size_t>(state.size()) != product(dims)) fail(ErrorCode::ShapeError, "state does not match dims");
    return QuantumOperation{{std::string(kNoOutcome)}, {{Matrix(state)}}, {}, dims};
}

QuantumOperation discard(std::vector<int> dims) {
    const auto D = static_cast<Eigen::Index>(product(dims));
    std::vector<Matrix> bras;
    for (Eigen::Index n = 0; n < D; ++n) {
        Matrix bra = Matrix::Zero(1, D);
        bra(0, n) = 1.0;
        bras.push_back(std::move(bra));
    }
    return QuantumOperation{{std::string(kNoOutcome)}, {std::move(bras)}, dims, {}};
}

ValidationReport validate_operation(const QuantumOperation& op, double eps) {
    ValidationReport report;
    if (op.outcomes.empty() || op.outcomes.size() != op.kraus.size()) {
        report.shapes_ok = false;
        report.message = "outcome set and Kraus families disagree";
        return report;
    }
    const auto din = static_cast<Eigen::Index>(op.in_dim());
    const auto dout = static_cast<Eigen::Index>(op.out_dim());
    Matrix sum = Matrix::Zero(din, din);
    for (const auto& family : op.kraus) {
        for (const Matrix& k : family) {
            if (k.rows() != dout || k.cols() != din) {
                report.shapes_ok = false;
                report.message = "Kraus matrix has wrong shape";
                return report;
            }
            sum.noalias() += k.adjoint() * k;
        }
    }
    report.max_deviation = (sum - Matrix::Identity(din, din)).cwiseAbs().maxCoeff();
    report.trace_preserving = report.max_deviation <= eps;
    report.message = report.trace_preserving ? "trace preserving; completely positive by Kraus form"
                                             : "sum of K^dagger K deviates from identity by " +
                                                   std::to_string(report.max_deviation);
    return report;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b) {
    DensityMatrix out;
    out.space = RegisterSpace(concat(a.space.registers(), b.space.registers()));
    out.rho = kron(a.rho, b.rho);
    return out;
}

DensityMatrix reorder(const DensityMatrix& state, std::span<const std::uint64_t> order) {
    if (order.size() != state.space.size()) fail(ErrorCode::ShapeError, "reorder must list every register once");
    std::vector<Register> regs;
    regs.reserve(order.size());
    for (std::uint64_t id : order) regs.push_back(state.space.at(id));
    RegisterSpace target(std::move(regs));
    if (target == state.space) return state;
    const auto map = index_map(state.space, target);
    DensityMatrix out;
    out.rho = state.rho(map, map);
    out.space = std::move(target);
    return out;
}

DensityMatrix partial_trace(const DensityMatrix& state, std::span<const std::uint64_t> discard_ids) {
    std::unordered_set<std::uint64_t> drop;
    for (std::uint64_t id : discard_ids) {
        state.space.position(id);
        drop.insert(id);
    }
    std::vector<Register> keep;
    std::vector<Register> gone;
    for (const Register& r : state.space.registers()) (drop.contains(r.id) ? gone : keep).push_back(r);
    const auto order = ids_of(concat(keep, gone));
    const DensityMatrix arranged = reorder(state, order);
    RegisterSpace kept(keep);
    const auto dk = static_cast<Eigen::Index>(kept.total_dim());
    const auto dd = static_cast<Eigen::Index>(RegisterSpace(gone).total_dim());
    DensityMatrix out;
    out.space = std::move(kept);
    out.rho = Matrix::Zero(dk, dk);
    for (Eigen::Index i = 0; i < dk; ++i)
        for (Eigen::Index j = 0; j < dk; ++j) {
            Complex acc = 0.0;
            for (Eigen::Index k = 0; k < dd; ++k) acc += arranged.rho(i * dd + k, j * dd + k);
            out.rho(i, j) = acc;
        }
    return out;
}

DensityMatrix apply_outcome(const DensityMatrix& state, const QuantumOperation& op, const RegisterMap& map,
                            std::string_view outcome) {
    const auto index = op.outcome_index(outcome);
    if (!index) fail(ErrorCode::BadOutcome, "outcome '" + std::string(outcome) + "' not in operation's outcome set");
    Placement p = place(state, op, map);
    const DensityMatrix arranged = reorder(state, ids_of(concat(p.rest, p.inputs)));
    const std::size_t rest_dim = RegisterSpace(p.rest).total_dim();

    DensityMatrix out;
    out.space = RegisterSpace(concat(p.rest, p.outputs));
    out.rho = conjugate_blocks(arranged.rho, rest_dim, op.kraus[*index], op.in_dim(), op.out_dim());
    if (p.in_place) return reorder(out, state.space.ids());
    return out;
}

std::vector<double> outcome_weights(const DensityMatrix& state, const QuantumOperation& op, const RegisterMap& map) {
    Placement p = place(state, op, map);
    // Only the reduced state on the inputs matters for the weights.
    const DensityMatrix reduced = reorder(partial_trace(state, ids_of(p.rest)), ids_of(p.inputs));
    std::vector<double> weights;
    weights.reserve(op.outcomes.size());
    for (const auto& family : op.kraus) {
        double w = 0.0;
        for (const Matrix& k : family) w += (k * reduced.rho * k.adjoint()).trace().real();
        weights.push_back(std::max(w, 0.0));
    }
    return weights;
}

SampledOutcome sample_outcome(const DensityMatrix& state, const QuantumOperation& op, const RegisterMap& map,
                              std::mt19937_64& rng) {
    if (state.trace() <= tol::zero_probability)
        fail(ErrorCode::ZeroProbabilityHistory, "cannot sample from a zero-trace state");
    if (op.outcomes.size() == 1) {
        const double u = uniform01(rng);
        (void)u;  // consumed so every sample advances the generator identically
        return {op.outcomes.front(), apply_outcome(state, op, map, op.outcomes.front())};
    }
    const auto weights = outcome_weights(state, op, map);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= tol::zero_probability)
        fail(ErrorCode::ZeroProbabilityHistory, "every outcome has zero probability");
    const double u = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = weights.size();
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0.0) continue;
        acc += weights[k];
        pick = k;
        if (u < acc) break;
    }
    return {op.outcomes[pick], apply_outcome(state, op, map, op.outcomes[pick])};
}

DensityMatrix canonical_form(const DensityMatrix& state) {
    auto ids = state.space.ids();
    std::sort(ids.begin(), ids.end());
    return reorder(state, ids);
}

double max_entry_difference(const DensityMatrix& a, const DensityMatrix& b) {
    const DensityMatrix ca = canonical_form(a);
    const DensityMatrix cb = canonical_form(b);
    if (!(ca.space == cb.space)) return std::numeric_limits<double>::infinity();
    return (ca.rho - cb.rho).cwiseAbs().maxCoeff();
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace qdsim
