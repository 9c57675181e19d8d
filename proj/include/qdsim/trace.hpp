#pragma once

// Trace files: JSON lines.
//
//   {"format": "qdsim-trace", "version": 1, "config": {...}, "seed": n}
//   {"initial": state}
//   {"event": {...}}            one per event, in execution order
//   {"certificate": {...}}      optional, appended by the verifier
//
// Matrix entries are written as "re,im" with 17 significant digits, so a
// trace read back and written again is byte-identical.

#include "qdsim/harness.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace qdsim {

inline constexpr const char* kTraceFormat = "qdsim-trace";
inline constexpr int kTraceVersion = 1;

struct Trace {
    ScenarioConfig config;
    std::uint64_t seed = 0;
    SystemState initial;
    std::vector<Event> events;
    std::optional<nlohmann::json> certificate;
};

nlohmann::json state_to_json(const SystemState& state);
/// Throws ParseError.
SystemState state_from_json(const nlohmann::json& j);

std::string format_complex(Complex z);
Complex parse_complex(const std::string& text);

void write_trace(std::ostream& out, const Trace& trace);
std::string trace_to_string(const Trace& trace);
void save_trace(const std::filesystem::path& path, const Trace& trace);

/// Throws ParseError whose index() is the one-based line number.
Trace read_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);

/// The scenario the trace was recorded from, with the recorded initial state.
Scenario trace_scenario(const Trace& trace);
/// The recorded events under the scenario's program.
Execution trace_execution(const Trace& trace);

Trace make_trace(const Scenario& scenario, std::uint64_t seed, const Execution& x);

}  // namespace qdsim
