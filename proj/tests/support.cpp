#include "support.hpp"

#include <algorithm>
#include <cmath>

namespace qdsim::testing {

namespace {

Complex gaussian(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2)};
}

}  // namespace

DensityMatrix random_density(const std::vector<Register>& regs, std::mt19937_64& rng) {
    DensityMatrix d;
    d.space = RegisterSpace(regs);
    const auto n = static_cast<Eigen::Index>(d.space.total_dim());
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = gaussian(rng);
    d.rho = g * g.adjoint();
    d.rho /= d.rho.trace().real();
    return d;
}

QuantumOperation random_operation(const std::vector<int>& dims, std::size_t outcomes, std::mt19937_64& rng) {
    std::size_t d = 1;
    for (int x : dims) d *= static_cast<std::size_t>(x);
    const Matrix u = random_unitary(d * outcomes, rng);
    QuantumOperation op;
    op.in_dims = op.out_dims = dims;
    const auto dd = static_cast<Eigen::Index>(d);
    for (std::size_t r = 0; r < outcomes; ++r) {
        op.outcomes.push_back("r" + std::to_string(r));
        op.kraus.push_back({u.block(static_cast<Eigen::Index>(r) * dd, 0, dd, dd)});
    }
    return op;
}

DensityMatrix epr_density() {
    Vector v = Vector::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    return DensityMatrix::pure(RegisterSpace({{1, 2}, {2, 2}}), v);
}

SystemState epr_system() {
    return make_initial_state({"p0", "p1"}, nlohmann::json{{"epr_pairs", nlohmann::json::array({nlohmann::json::array({"p0", "p1"})})}}, {});
}

Matrix partial_trace_oracle(const Matrix& rho, const std::vector<int>& dims, std::size_t discarded) {
    // Row index digits are big-endian over dims.
    std::size_t total = 1;
    for (int x : dims) total *= static_cast<std::size_t>(x);
    const std::size_t keep_dim = total / static_cast<std::size_t>(dims[discarded]);
    auto digits = [&](std::size_t index) {
        std::vector<std::size_t> out(dims.size());
        for (std::size_t k = dims.size(); k-- > 0;) {
            out[k] = index % static_cast<std::size_t>(dims[k]);
            index /= static_cast<std::size_t>(dims[k]);
        }
        return out;
    };
    auto reduced_index = [&](const std::vector<std::size_t>& dg) {
        std::size_t idx = 0;
        for (std::size_t k = 0; k < dims.size(); ++k)
            if (k != discarded) idx = idx * static_cast<std::size_t>(dims[k]) + dg[k];
        return idx;
    };
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(keep_dim), static_cast<Eigen::Index>(keep_dim));
    for (std::size_t r = 0; r < total; ++r)
        for (std::size_t c = 0; c < total; ++c) {
            const auto dr = digits(r), dc = digits(c);
            if (dr[discarded] != dc[discarded]) continue;
            out(static_cast<Eigen::Index>(reduced_index(dr)), static_cast<Eigen::Index>(reduced_index(dc))) +=
                rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    return out;
}

std::vector<std::vector<bool>> closure_oracle(const std::vector<Event>& events) {
    const std::size_t n = events.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const Event& x = events[a];
            const Event& y = events[b];
            const bool same = x.label == y.label;
            const bool message = x.kind == EventKind::Send && y.kind == EventKind::Receive && x.msg == y.msg;
            reach[a][b] = same || message;
        }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (reach[a][k] && reach[k][b]) reach[a][b] = true;
    return reach;
}

Execution chatter_execution(std::uint64_t seed, std::size_t processors, int steps, std::size_t max_events) {
    ScenarioConfig c;
    c.processors = processors;
    c.base = "chatter";
    c.base_params = {{"seed", seed * 7919 + 1}, {"steps", steps}, {"qubits", 1}, {"max_qubits", 4}};
    c.mode = RunMode::Base;
    c.seed = seed;
    const Scenario s = build_scenario(c);
    Execution x = run_simulation(s, seed);
    if (x.events.size() > max_events) x.events.resize(max_events);
    return x;
}

std::vector<Event> random_equicausal_order(const std::vector<Event>& events, std::size_t swaps,
                                           std::mt19937_64& rng) {
    std::vector<Event> out = events;
    for (std::size_t s = 0; s < swaps && out.size() > 1; ++s) {
        std::vector<std::size_t> options;
        for (std::size_t i = 0; i + 1 < out.size(); ++i)
            if (!directly_ordered(out[i], out[i + 1])) options.push_back(i);
        if (options.empty()) break;
        const std::size_t i = options[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(options.size()))];
        std::swap(out[i], out[i + 1]);
    }
    return out;
}

ScenarioConfig qgo_config(const std::string& base, std::size_t processors, const std::string& gid,
                          std::size_t invocations, std::uint64_t seed) {
    ScenarioConfig c;
    c.processors = processors;
    c.base = base;
    if (base == "token-ring") c.base_params = {{"rounds", 2}, {"pings", 1}};
    c.global_ops = builtin_global_op_names();
    for (std::size_t k = 0; k < invocations; ++k)
        c.invocations.push_back({3 + 5 * k + seed % 4, gid, "p" + std::to_string((seed + k) % processors)});
    c.scheduler.fairness = 12;
    c.seed = seed;
    return c;
}

Matrix normalized_quantum(const SystemState& s) {
    const DensityMatrix c = canonical_form(s.quantum);
    return c.rho / c.trace();
}

}  // namespace qdsim::testing
