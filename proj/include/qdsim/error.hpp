#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qdsim {

enum class ErrorCode {
    // qcore
    IdCollision,
    UnknownRegister,
    BadOutcome,
    ShapeError,
    ZeroProbabilityHistory,
    CapacityError,
    // sysmodel
    OwnershipViolation,
    DuplicateMessage,
    EmptyChannel,
    NotRecipient,
    LocalityViolation,
    // exec
    ReplayError,
    ConcatMismatch,
    // causality
    NotComparable,
    CausalDependency,
    LemmaViolation,
    SubstitutionMismatch,
    // qgo
    ConcurrentInvocation,
    AlreadyActive,
    UnknownGlobalOp,
    // specmachine
    SpecViolation,
    // verifier
    HypothesisViolation,
    ProtocolIncomplete,
    ClaimViolation,
    // harness
    UnknownScenario,
    ParseError,
    InvalidArgument,
    EventBudgetExceeded,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<std::size_t> index = std::nullopt);

    ErrorCode code() const noexcept { return code_; }
    /// Event index for replay/validation failures, when one applies.
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace qdsim
