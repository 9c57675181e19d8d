#pragma once

// Builtin decomposable global operations.
//
//   snapshot-measure  measures every register in the standard basis; the
//                     outcome is {"c": classical part, "q": digits}.
//   global-encrypt    Pauli one-time pad on every qubit; the outcome is the
//                     key, one letter of IXYZ per qubit in register order.
//   record-only       identity; the outcome is the classical part, dumped.

#include "qdsim/qgo.hpp"

#include <memory>
#include <string>
#include <vector>

namespace qdsim {

inline constexpr const char* kSnapshotMeasure = "snapshot-measure";
inline constexpr const char* kGlobalEncrypt = "global-encrypt";
inline constexpr const char* kRecordOnly = "record-only";

/// Most qubits a single encryption component handles.
inline constexpr std::size_t kMaxEncryptQubits = 5;

std::vector<std::string> builtin_global_op_names();

/// Throws UnknownGlobalOp for a name outside builtin_global_op_names().
DecomposableGlobalOp make_global_op(const std::string& gid);

std::shared_ptr<const GlobalOpLibrary> make_library(const std::vector<std::string>& gids);

/// ⊗_k P_{key[k]} for a key such as "XZ"; the identity for ⊥ or "".
Matrix pauli_key_unitary(const std::string& key);

}  // namespace qdsim
