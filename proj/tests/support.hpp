#pragma once

// Builders and independent oracles shared by the test binaries.

#include "qdsim/causality.hpp"
#include "qdsim/harness.hpp"
#include "qdsim/trace.hpp"
#include "qdsim/verifier.hpp"

#include <random>

namespace qdsim::testing {

/// Random full-rank density matrix G G† / tr over the given registers.
DensityMatrix random_density(const std::vector<Register>& regs, std::mt19937_64& rng);

/// Random quantum operation with `outcomes` outcomes built from a random
/// isometry: K_r is the r-th block of V, so Σ K†K = V†V = I.
QuantumOperation random_operation(const std::vector<int>& dims, std::size_t outcomes, std::mt19937_64& rng);

/// (|00⟩ + |11⟩)/√2 over registers 1 and 2.
DensityMatrix epr_density();

/// Two processors p0, p1 sharing an EPR pair: register 1 at p0, 2 at p1.
SystemState epr_system();

/// Index-loop partial trace, written directly from the definition.
Matrix partial_trace_oracle(const Matrix& rho, const std::vector<int>& dims, std::size_t discarded);

/// Transitive closure of A1 ∪ A2 by Floyd–Warshall over positions.
std::vector<std::vector<bool>> closure_oracle(const std::vector<Event>& events);

/// A base-mode execution of the chatter algorithm, cut after `max_events`.
Execution chatter_execution(std::uint64_t seed, std::size_t processors, int steps, std::size_t max_events);

/// A random reordering of x reached by `swaps` random admissible adjacent
/// swaps (pairs not directly ordered), performed on the event list only.
std::vector<Event> random_equicausal_order(const std::vector<Event>& events, std::size_t swaps, std::mt19937_64& rng);

/// Config for a QGO run: `invocations` sequential invocations of `gid`.
ScenarioConfig qgo_config(const std::string& base, std::size_t processors, const std::string& gid,
                          std::size_t invocations, std::uint64_t seed);

/// Normalized canonical quantum part.
Matrix normalized_quantum(const SystemState& s);

}  // namespace qdsim::testing
