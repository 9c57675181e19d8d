#pragma once

// Builtin base algorithms.
//
//   empty       no steps at all.
//   token-ring  a token circulates p0 -> p1 -> ... for a number of rounds;
//               the holder ticks once before passing it on. With
//               quantum_token the token carries a qubit that each tick
//               rotates. Optional pings add background traffic.
//   teleport    p0 teleports one qubit to each of p1..p{n-1}: it ships one
//               half of an EPR pair, Bell-measures, and sends the two
//               correction bits; the receiver corrects with X and Z.
//   chatter     scripted random local operations and messages, generated
//               from a seed; used to produce arbitrary executions.

#include "qdsim/exec.hpp"

#include <memory>
#include <string>

namespace qdsim {

/// A base algorithm together with the initial state it expects.
struct BaseScenario {
    std::shared_ptr<const BaseAlgorithm> algorithm;
    /// Initial quantum state descriptor (see make_initial_state).
    nlohmann::json initial_state = nlohmann::json::object();
    std::map<ProcessorId, ClassicalState> classical;
};

/// "p<k>" for k = 0..n-1.
std::vector<ProcessorId> processor_names(std::size_t n);
/// k for "p<k>"; throws InvalidArgument otherwise.
std::size_t processor_index(const ProcessorId& p);

/// Throws UnknownScenario for an unknown name, InvalidArgument for bad
/// parameters.
BaseScenario make_base_algorithm(const std::string& name, std::size_t processors, const nlohmann::json& params);

/// Builds Ψ⁰ from a descriptor
///   {"registers": [{"owner": p, "state": "0"|"1"|"+"|"-"|"psi:θ,φ"}],
///    "epr_pairs": [[p, q], ...]}
/// Registers are numbered from 1 in that order, each EPR pair taking two
/// consecutive ids. Every τ starts idle.
SystemState make_initial_state(const std::vector<ProcessorId>& processors, const nlohmann::json& descriptor,
                               const std::map<ProcessorId, ClassicalState>& classical);

/// cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩.
Vector qubit_state(double theta, double phi);

/// Haar-distributed unitary of the given size from a seeded generator.
Matrix random_unitary(std::size_t dim, std::mt19937_64& rng);

}  // namespace qdsim
