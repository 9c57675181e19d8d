#pragma once

// Dense density-matrix algebra over a dynamically labeled tensor-product
// register space.
//
// Index convention: a row/column index of a state over registers
// (r_0, r_1, ..., r_{k-1}) decomposes big-endian, i.e. r_{k-1} is the
// fastest-varying digit. Every function here is pure.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qdsim {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Outcome label of an operation that performs no measurement.
inline constexpr std::string_view kNoOutcome = "⊥";

namespace tol {
inline constexpr double validation = 1e-9;
inline constexpr double algebraic = 1e-12;
/// Below this a history trace counts as impossible.
inline constexpr double zero_probability = 1e-15;
}  // namespace tol

/// Upper bound on RegisterSpace::total_dim(). Defaults to 4096, or the value of
/// the QGO_DIM_CAP environment variable when set.
std::size_t dimension_cap();
/// Overrides the cap for this process; 0 restores the default.
void set_dimension_cap(std::size_t cap);

struct Register {
    std::uint64_t id = 0;
    int dim = 2;

    friend bool operator==(const Register&, const Register&) = default;
};

class RegisterSpace {
public:
    RegisterSpace() = default;
    /// Throws IdCollision on duplicate ids, ShapeError on dim < 1 and
    /// CapacityError when the product of dims exceeds dimension_cap().
    explicit RegisterSpace(std::vector<Register> registers);

    const std::vector<Register>& registers() const { return registers_; }
    std::size_t size() const { return registers_.size(); }
    std::size_t total_dim() const { return total_dim_; }
    bool contains(std::uint64_t id) const;
    /// Position of the register in list order; throws UnknownRegister.
    std::size_t position(std::uint64_t id) const;
    const Register& at(std::uint64_t id) const;
    std::vector<std::uint64_t> ids() const;

    friend bool operator==(const RegisterSpace&, const RegisterSpace&) = default;

private:
    std::vector<Register> registers_;
    std::size_t total_dim_ = 1;
};

/// Subnormalized density matrix; its trace is the probability of the outcome
/// history that produced it.
struct DensityMatrix {
    RegisterSpace space;
    Matrix rho = Matrix::Ones(1, 1);

    double trace() const { return rho.trace().real(); }

    /// The 1x1 state over no registers with the given weight.
    static DensityMatrix scalar(double weight = 1.0);
    static DensityMatrix pure(RegisterSpace space, const Vector& amplitudes);
    static DensityMatrix basis(RegisterSpace space, std::size_t index);
};

struct StateReport {
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
    double trace = 0.0;
    bool hermitian = true;
    bool positive = true;
    bool trace_in_range = true;

    bool ok() const { return hermitian && positive && trace_in_range; }
};

StateReport check_state(const DensityMatrix& state, double eps = tol::validation);

/// Finite family of completely positive maps {Λ^r}, each in Kraus form.
/// kraus[k] lists the Kraus matrices of outcomes[k]; each matrix is
/// out_dim() x in_dim().
struct QuantumOperation {
    std::vector<std::string> outcomes;
    std::vector<std::vector<Matrix>> kraus;
    std::vector<int> in_dims;
    std::vector<int> out_dims;

    std::size_t in_dim() const;
    std::size_t out_dim() const;
    std::optional<std::size_t> outcome_index(std::string_view outcome) const;
};

QuantumOperation identity_operation(std::vector<int> dims);
QuantumOperation unitary_operation(const Matrix& unitary, std::vector<int> dims,
                                   std::string outcome = std::string(kNoOutcome));
/// Standard-basis measurement; outcome labels are the digit strings of the
/// basis index, one digit per register (e.g. "01").
QuantumOperation basis_measurement(std::vector<int> dims);
/// Creates fresh registers in the given pure state (no input registers).
QuantumOperation preparation(const Vector& state, std::vector<int> dims);
/// Traces out the input registers (no output registers).
QuantumOperation discard(std::vector<int> dims);

struct ValidationReport {
    bool shapes_ok = true;
    bool trace_preserving = true;
    /// Always true for an operation in Kraus form.
    bool completely_positive = true;
    double max_deviation = 0.0;
    std::string message;

    bool ok() const { return shapes_ok && trace_preserving && completely_positive; }
};

/// Checks sum_r sum_k K^dagger K = I within eps.
ValidationReport validate_operation(const QuantumOperation& op, double eps = tol::validation);

/// Where the slots of an operation live. When `outputs` is empty the output
/// registers take over the input ids in place (dims must then be unchanged);
/// otherwise the outputs are appended after the untouched registers. An
/// operation with no output dims simply removes its inputs.
struct RegisterMap {
    std::vector<std::uint64_t> inputs;
    std::vector<Register> outputs;
};

Matrix kron(const Matrix& a, const Matrix& b);

/// Result space is a's registers followed by b's.
DensityMatrix tensor_product(const DensityMatrix& a, const DensityMatrix& b);

DensityMatrix partial_trace(const DensityMatrix& state, std::span<const std::uint64_t> discard);

/// Permutes the register order of the state; `order` must list every
/// register exactly once.
DensityMatrix reorder(const DensityMatrix& state, std::span<const std::uint64_t> order);

/// (Λ^r ⊗ id)(ρ), not renormalized.
DensityMatrix apply_outcome(const DensityMatrix& state, const QuantumOperation& op,
                            const RegisterMap& map, std::string_view outcome);

/// trace(Λ^r(ρ)) for every outcome, in outcome order.
std::vector<double> outcome_weights(const DensityMatrix& state, const QuantumOperation& op,
                                    const RegisterMap& map);

struct SampledOutcome {
    std::string outcome;
    DensityMatrix state;
};

/// Draws r with probability trace(Λ^r ρ)/trace(ρ). Throws
/// ZeroProbabilityHistory when trace(ρ) is zero.
SampledOutcome sample_outcome(const DensityMatrix& state, const QuantumOperation& op,
                              const RegisterMap& map, std::mt19937_64& rng);

/// Registers sorted by id, entries permuted to match.
DensityMatrix canonical_form(const DensityMatrix& state);

/// Largest entry-wise difference of the canonical forms; +inf when the
/// register spaces differ.
double max_entry_difference(const DensityMatrix& a, const DensityMatrix& b);

/// Platform-independent uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng);

}  // namespace qdsim
