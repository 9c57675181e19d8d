#include "qdsim/trace.hpp"

#include "qdsim/error.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace qdsim {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what, line);
}

json owner_to_json(const Owner& o) {
    if (o.kind == Owner::Kind::Processor) return json{{"processor", o.processor}};
    return json{{"message", o.message}};
}

Owner owner_from_json(const json& j) {
    if (j.contains("processor")) return Owner::of_processor(j.at("processor").get<std::string>());
    return Owner::of_message(j.at("message").get<MessageId>());
}

}  // namespace

std::string format_complex(Complex z) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", z.real(), z.imag());
    return buf;
}

Complex parse_complex(const std::string& text) {
    const char* s = text.c_str();
    char* end = nullptr;
    const double re = std::strtod(s, &end);
    if (end == s || *end != ',') fail(ErrorCode::ParseError, "bad complex number '" + text + "'");
    const char* rest = end + 1;
    const double im = std::strtod(rest, &end);
    if (end == rest || *end != '\0') fail(ErrorCode::ParseError, "bad complex number '" + text + "'");
    return {re, im};
}

json state_to_json(const SystemState& state) {
    json j;
    j["processors"] = state.processors;
    j["classical"] = state.classical;
    j["ext"] = state.ext;
    json channels = json::object();
    for (const auto& [chan, contents] : state.channels) {
        json list = json::array();
        for (const MessageInstance& m : contents) list.push_back(to_json(m));
        channels[chan.str()] = std::move(list);
    }
    j["channels"] = std::move(channels);
    json owners = json::object();
    for (const auto& [reg, owner] : state.ownership) owners[std::to_string(reg)] = owner_to_json(owner);
    j["ownership"] = std::move(owners);
    j["sent_ids"] = state.sent_ids;
    json regs = json::array();
    for (const Register& r : state.quantum.space.registers()) regs.push_back({r.id, r.dim});
    json rho = json::array();
    const Matrix& m = state.quantum.rho;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) rho.push_back(format_complex(m(r, c)));
    j["quantum"] = json{{"registers", std::move(regs)}, {"rho", std::move(rho)}};
    return j;
}

SystemState state_from_json(const json& j) {
    try {
        SystemState s;
        s.processors = j.at("processors").get<std::vector<ProcessorId>>();
        s.classical = j.at("classical").get<std::map<ProcessorId, ClassicalState>>();
        s.ext = j.at("ext").get<std::map<ProcessorId, ClassicalState>>();
        for (const auto& [name, list] : j.at("channels").items()) {
            std::vector<MessageInstance> contents;
            for (const json& m : list) contents.push_back(message_from_json(m));
            s.channels[ChannelId::parse(name)] = std::move(contents);
        }
        for (const auto& [reg, owner] : j.at("ownership").items())
            s.ownership[std::stoull(reg)] = owner_from_json(owner);
        s.sent_ids = j.at("sent_ids").get<std::set<MessageId>>();
        std::vector<Register> regs;
        for (const json& r : j.at("quantum").at("registers"))
            regs.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<int>()});
        s.quantum.space = RegisterSpace(std::move(regs));
        const auto d = static_cast<Eigen::Index>(s.quantum.space.total_dim());
        const json& rho = j.at("quantum").at("rho");
        if (rho.size() != static_cast<std::size_t>(d * d)) fail(ErrorCode::ParseError, "density matrix has wrong size");
        s.quantum.rho.resize(d, d);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = 0; c < d; ++c)
                s.quantum.rho(r, c) = parse_complex(rho.at(static_cast<std::size_t>(r * d + c)).get<std::string>());
        for (const auto& p : s.processors)
            if (!s.classical.contains(p) || !s.ext.contains(p))
                fail(ErrorCode::ParseError, "processor " + p + " has no local state");
        if (auto problem = ownership_problem(s)) fail(ErrorCode::ParseError, *problem);
        return s;
    } catch (const json::exception& err) {
        fail(ErrorCode::ParseError, std::string("malformed state: ") + err.what());
    } catch (const std::logic_error& err) {
        fail(ErrorCode::ParseError, std::string("malformed state: ") + err.what());
    }
}

void write_trace(std::ostream& out, const Trace& t) {
    out << json{{"format", kTraceFormat}, {"version", kTraceVersion}, {"config", t.config.to_json()}, {"seed", t.seed}}
               .dump()
        << '\n';
    out << json{{"initial", state_to_json(t.initial)}}.dump() << '\n';
    for (const Event& e : t.events) out << json{{"event", to_json(e)}}.dump() << '\n';
    if (t.certificate) out << json{{"certificate", *t.certificate}}.dump() << '\n';
}

std::string trace_to_string(const Trace& t) {
    std::ostringstream out;
    write_trace(out, t);
    return out.str();
}

void save_trace(const std::filesystem::path& path, const Trace& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + path.string());
    write_trace(out, t);
}

Trace read_trace(std::istream& in) {
    Trace t;
    std::string text;
    std::size_t line = 0;
    bool header = false, initial = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& err) {
            parse_fail(line, std::string("not JSON: ") + err.what());
        }
        if (!j.is_object() || j.empty()) parse_fail(line, "expected a JSON object");
        try {
            if (!header) {
                if (j.value("format", std::string()) != kTraceFormat) parse_fail(line, "not a qdsim trace");
                if (j.value("version", 0) != kTraceVersion) parse_fail(line, "unsupported trace version");
                t.config = ScenarioConfig::from_json(j.at("config"));
                t.seed = j.value("seed", t.config.seed);
                header = true;
            } else if (!initial) {
                if (!j.contains("initial")) parse_fail(line, "expected the initial state");
                t.initial = state_from_json(j.at("initial"));
                initial = true;
            } else if (j.contains("event")) {
                if (t.certificate) parse_fail(line, "event after the certificate");
                t.events.push_back(event_from_json(j.at("event")));
            } else if (j.contains("certificate")) {
                if (t.certificate) parse_fail(line, "second certificate");
                t.certificate = j.at("certificate");
            } else {
                parse_fail(line, "unknown record");
            }
        } catch (const Error& err) {
            if (err.code() == ErrorCode::ParseError && err.index()) throw;
            parse_fail(line, err.what());
        } catch (const json::exception& err) {
            parse_fail(line, err.what());
        }
    }
    if (!header) parse_fail(line + 1, "missing trace header");
    if (!initial) parse_fail(line + 1, "missing initial state");
    return t;
}

Trace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::ParseError, "cannot open " + path.string());
    return read_trace(in);
}

Scenario trace_scenario(const Trace& t) {
    Scenario s = build_scenario(t.config);
    s.initial = t.initial;
    return s;
}

Execution trace_execution(const Trace& t) {
    const Scenario s = trace_scenario(t);
    return Execution{s.program, t.initial, t.events};
}

Trace make_trace(const Scenario& s, std::uint64_t seed, const Execution& x) {
    Trace t;
    t.config = s.config;
    t.seed = seed;
    t.initial = x.initial;
    t.events = x.events;
    return t;
}

}  // namespace qdsim
