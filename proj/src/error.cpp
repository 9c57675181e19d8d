#include "qdsim/error.hpp"

namespace qdsim {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::IdCollision: return "IdCollision";
        case ErrorCode::UnknownRegister: return "UnknownRegister";
        case ErrorCode::BadOutcome: return "BadOutcome";
        case ErrorCode::ShapeError: return "ShapeError";
        case ErrorCode::ZeroProbabilityHistory: return "ZeroProbabilityHistory";
        case ErrorCode::CapacityError: return "CapacityError";
        case ErrorCode::OwnershipViolation: return "OwnershipViolation";
        case ErrorCode::DuplicateMessage: return "DuplicateMessage";
        case ErrorCode::EmptyChannel: return "EmptyChannel";
        case ErrorCode::NotRecipient: return "NotRecipient";
        case ErrorCode::LocalityViolation: return "LocalityViolation";
        case ErrorCode::ReplayError: return "ReplayError";
        case ErrorCode::ConcatMismatch: return "ConcatMismatch";
        case ErrorCode::NotComparable: return "NotComparable";
        case ErrorCode::CausalDependency: return "CausalDependency";
        case ErrorCode::LemmaViolation: return "LemmaViolation";
        case ErrorCode::SubstitutionMismatch: return "SubstitutionMismatch";
        case ErrorCode::ConcurrentInvocation: return "ConcurrentInvocation";
        case ErrorCode::AlreadyActive: return "AlreadyActive";
        case ErrorCode::UnknownGlobalOp: return "UnknownGlobalOp";
        case ErrorCode::SpecViolation: return "SpecViolation";
        case ErrorCode::HypothesisViolation: return "HypothesisViolation";
        case ErrorCode::ProtocolIncomplete: return "ProtocolIncomplete";
        case ErrorCode::ClaimViolation: return "ClaimViolation";
        case ErrorCode::UnknownScenario: return "UnknownScenario";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::EventBudgetExceeded: return "EventBudgetExceeded";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what, std::optional<std::size_t> index)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), index_(index) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace qdsim
