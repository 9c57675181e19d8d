#include "qdsim/verifier.hpp"

#include "qdsim/error.hpp"

#include <algorithm>
#include <set>

namespace qdsim {

using nlohmann::json;

std::vector<MainFragment> decompose(const Execution& x) {
    for (const auto& p : x.initial.processors)
        if (!x.initial.ext.at(p).is_null())
            fail(ErrorCode::HypothesisViolation, "initial state has a global operation underway at " + p);
    const std::size_t n = x.initial.processors.size();
    std::vector<MainFragment> out;
    std::optional<MainFragment> open;
    std::size_t responses = 0;
    for (std::size_t k = 1; k <= x.events.size(); ++k) {
        const Event& e = x.events[k - 1];
        if (e.kind == EventKind::Invoke) {
            if (open) fail(ErrorCode::HypothesisViolation, "concurrent invocations at event " + std::to_string(k));
            open = MainFragment{k, 0, e.label, e.action};
            responses = 0;
        } else if (e.kind == EventKind::Respond) {
            if (!open) fail(ErrorCode::HypothesisViolation, "response outside any invocation at event " + std::to_string(k));
            if (++responses == n) {
                open->end = k;
                out.push_back(*open);
                open.reset();
            }
        } else if (!open && qgo::is_protocol_event(e)) {
            fail(ErrorCode::HypothesisViolation, "protocol event outside any invocation: " + describe(e));
        }
    }
    if (open) fail(ErrorCode::HypothesisViolation, "global operation " + open->gid + " is still pending");
    return out;
}

std::size_t Tripartition::count(Part p) const {
    return static_cast<std::size_t>(std::count_if(part.begin(), part.end(), [&](const auto& kv) { return kv.second == p; }));
}

Tripartition tripartition(const Execution& x, const MainFragment& f) {
    const auto& procs = x.initial.processors;
    const std::size_t n = procs.size();
    Tripartition t;
    std::map<ProcessorId, std::pair<std::size_t, std::size_t>> block;  // first, last position
    for (const ProcessorId& p : procs) {
        std::vector<std::size_t> at;
        for (std::size_t k = f.begin; k <= f.end; ++k) {
            const Event& e = x.events[k - 1];
            if (e.label == p && e.kind == EventKind::Apply && e.action == qgo::kApplyOp) at.push_back(k);
        }
        if (at.empty()) fail(ErrorCode::ProtocolIncomplete, p + " never applied its component of " + f.gid);
        if (at.size() > 1) fail(ErrorCode::ClaimViolation, p + " applied its component of " + f.gid + " twice");
        const std::size_t a = at.front();
        if (a < f.begin + 1) fail(ErrorCode::ClaimViolation, "component application at " + p + " has no trigger");
        const Event& trigger = x.events[a - 2];
        const bool trigger_ok = trigger.label == p && ((p == f.leader && trigger.kind == EventKind::Invoke) ||
                                                       (trigger.kind == EventKind::Receive && trigger.action == qgo::kMarker));
        if (!trigger_ok)
            fail(ErrorCode::ClaimViolation, "component application at " + p + " does not follow its trigger");
        if (a + n > f.end) fail(ErrorCode::ClaimViolation, "marker broadcast at " + p + " is cut short");
        for (std::size_t k = a + 1; k <= a + n; ++k) {
            const Event& e = x.events[k - 1];
            if (e.label != p || e.kind != EventKind::Send || e.action != qgo::kMarker)
                fail(ErrorCode::ClaimViolation, "marker broadcast at " + p + " is not contiguous");
        }
        block[p] = {a - 1, a + n};
        for (std::size_t k = a - 1; k <= a + n; ++k) t.star[p].push_back(x.events[k - 1].id);
    }
    for (std::size_t k = f.begin; k <= f.end; ++k) {
        const Event& e = x.events[k - 1];
        const auto it = block.find(e.label);
        if (it == block.end()) fail(ErrorCode::ClaimViolation, "event of an unknown component: " + describe(e));
        const auto [first, last] = it->second;
        t.part[e.id] = k < first ? Part::Pre : (k <= last ? Part::Op : Part::Post);
    }
    return t;
}

std::vector<SwapRecord> eliminate_inversions(CheckedExecution& c, const MainFragment& f, const Tripartition& t) {
    std::vector<SwapRecord> log;
    auto rank = [&](std::size_t k) { return static_cast<int>(t.part.at(c.events()[k - 1].id)); };
    std::size_t k = f.begin;
    while (k < f.end) {
        if (rank(k) <= rank(k + 1)) {
            ++k;
            continue;
        }
        const Event& a = c.events()[k - 1];
        const Event& b = c.events()[k];
        SwapRecord rec{"inversion", a.id, b.id};
        try {
            c.swap(k);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::CausalDependency) throw;
            fail(ErrorCode::ClaimViolation, std::string("inversion cannot be removed: ") + err.what());
        }
        log.push_back(rec);
        k = k > f.begin ? k - 1 : f.begin;
    }
    return log;
}

std::vector<MessageId> reorder_message_ops(CheckedExecution& c, const MainFragment& f, const Tripartition& t,
                                           std::vector<SwapRecord>& log) {
    const std::size_t op_end = f.begin + t.count(Part::Pre) + t.count(Part::Op) - 1;
    std::vector<std::uint64_t> ops;
    for (std::size_t k = op_end + 1; k <= f.end; ++k) {
        const Event& e = c.events()[k - 1];
        if (e.kind == EventKind::Apply && e.action == qgo::kApplyMessage && !is_message_label(e.label))
            ops.push_back(e.id);
    }
    std::vector<MessageId> order;
    for (std::size_t m = 0; m < ops.size(); ++m) {
        const std::size_t a = c.position(ops[m]);
        const Event apply = c.events()[a - 1];
        const Event reception = c.events()[a - 2];
        if (reception.kind != EventKind::Receive || reception.label != apply.label || reception.msg != apply.msg)
            fail(ErrorCode::ClaimViolation, "message operation " + describe(apply) + " does not follow its reception");

        const SystemState after = c.state(a);
        const SystemState final_before = c.final_state();
        Event moved = apply;
        moved.label = message_label(apply.msg);
        std::vector<Event> suffix{moved, reception};
        suffix.insert(suffix.end(), c.events().begin() + static_cast<long>(a), c.events().end());
        try {
            c.replace_suffix(a - 1, std::move(suffix));
        } catch (const Error& err) {
            fail(ErrorCode::ClaimViolation, std::string("reception swap is ill formed: ") + err.what());
        }
        if (!states_equal(c.state(a), after, tol::algebraic) || !states_equal(c.final_state(), final_before, tol::algebraic))
            fail(ErrorCode::ClaimViolation, "reception swap changed the state for message " + std::to_string(apply.msg));
        log.push_back({"reception", moved.id, reception.id});

        const std::size_t target = op_end + 1 + m;
        std::vector<std::uint64_t> passed;
        for (std::size_t k = target; k < a - 1; ++k) passed.push_back(c.events()[k - 1].id);
        c.move_back(a - 1, target);
        for (auto it = passed.rbegin(); it != passed.rend(); ++it) log.push_back({"bubble", *it, moved.id});
        order.push_back(apply.msg);
    }
    return order;
}

bool corresponds(const Event& a, const Event& b) {
    return a.kind == b.kind && a.label == b.label && a.action == b.action && a.outcome == b.outcome &&
           a.msg == b.msg && a.peer == b.peer && a.fresh == b.fresh && a.payload == b.payload;
}

bool histories_correspond(const std::vector<Event>& a, const std::vector<Event>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!corresponds(a[k], b[k])) return false;
    return true;
}

const Verdict* Certificate::verdict(const std::string& name) const {
    for (const Verdict& v : verdicts)
        if (v.name == name) return &v;
    return nullptr;
}

Execution build_spec_execution(const Execution& z, const std::vector<MainFragment>& fragments,
                               const std::vector<Tripartition>& parts,
                               const std::vector<std::vector<MessageId>>& recorded,
                               std::shared_ptr<const SpecProgram> spec, std::vector<std::size_t>* atomic_positions) {
    std::uint64_t next_id = 0;
    for (const Event& e : z.events) next_id = std::max(next_id, e.id + 1);

    std::map<std::size_t, std::size_t> atomic_after;  // position in z -> fragment
    for (std::size_t i = 0; i < fragments.size(); ++i) {
        const MainFragment& f = fragments[i];
        atomic_after[f.begin + parts[i].count(Part::Pre) + parts[i].count(Part::Op) - 1 + recorded[i].size()] = i;
    }

    Execution out{spec, z.initial, {}};
    for (std::size_t k = 1; k <= z.events.size(); ++k) {
        const Event& e = z.events[k - 1];
        if (!qgo::is_protocol_event(e) && e.kind != EventKind::AtomicExecute) out.events.push_back(e);
        const auto it = atomic_after.find(k);
        if (it == atomic_after.end()) continue;
        const MainFragment& f = fragments[it->second];
        json procs = json::object();
        json msgs = json::object();
        for (std::size_t j = f.begin; j <= f.end; ++j) {
            const Event& g = z.events[j - 1];
            if (g.kind != EventKind::Apply) continue;
            if (g.action == qgo::kApplyOp) procs[g.label] = g.outcome;
            if (g.action == qgo::kApplyMessage && is_message_label(g.label)) msgs[std::to_string(g.msg)] = g.outcome;
        }
        Event atomic;
        atomic.id = next_id++;
        atomic.kind = EventKind::AtomicExecute;
        atomic.label = f.leader;
        atomic.action = f.gid;
        atomic.payload = json{{"processors", procs}, {"messages", msgs}};
        out.events.push_back(std::move(atomic));
        if (atomic_positions) atomic_positions->push_back(out.events.size());
    }
    return out;
}

namespace {

template <typename F>
Verdict check(const std::string& name, F&& f) {
    Verdict v{name, false, {}};
    try {
        v.ok = f(v.detail);
    } catch (const Error& err) {
        v.detail = err.what();
    } catch (const nlohmann::json::exception& err) {
        v.detail = err.what();
    }
    return v;
}

std::optional<SystemState> try_final(const Execution& x, std::string& error) {
    try {
        return final_state(x);
    } catch (const Error& err) {
        error = err.what();
        return std::nullopt;
    }
}

bool relabels_only_message_ops(const Execution& y, const Execution& z, std::string& detail) {
    if (y.events.size() != z.events.size()) {
        detail = "event counts differ";
        return false;
    }
    std::map<std::uint64_t, const Event*> by_id;
    for (const Event& e : y.events) by_id[e.id] = &e;
    for (const Event& e : z.events) {
        const auto it = by_id.find(e.id);
        if (it == by_id.end()) {
            detail = "event " + std::to_string(e.id) + " not in Y";
            return false;
        }
        Event original = *it->second;
        if (original == e) continue;
        original.label = message_label(original.msg);
        if (original != e || it->second->action != qgo::kApplyMessage) {
            detail = "event " + std::to_string(e.id) + " changed beyond relabelling";
            return false;
        }
    }
    return true;
}

std::vector<Verdict> check_claims(const Execution& x, const Execution& y, const Execution& z, const Execution& yhat) {
    std::vector<Verdict> out;
    std::string ex, ey, ez, eh;
    const auto fx = try_final(x, ex);
    const auto fy = try_final(y, ey);
    const auto fz = try_final(z, ez);
    const auto fh = try_final(yhat, eh);
    auto finals_equal = [](const std::optional<SystemState>& a, const std::optional<SystemState>& b,
                           const std::string& ea, const std::string& eb, std::string& detail) {
        if (!a || !b) {
            detail = !a ? ea : eb;
            return false;
        }
        return states_equal(*a, *b, tol::validation);
    };

    out.push_back(check("valid(X)", [&](std::string& d) {
        const auto v = validate(x);
        d = v.reason;
        return v.ok;
    }));
    out.push_back(check("equicausal(X,Y)", [&](std::string&) { return equicausal(x, y); }));
    out.push_back(check("valid(Y)", [&](std::string& d) {
        const auto v = validate(y);
        d = v.reason;
        return v.ok;
    }));
    out.push_back(check("final(X)=final(Y)", [&](std::string& d) { return finals_equal(fx, fy, ex, ey, d); }));
    out.push_back(check("Z relabels Y", [&](std::string& d) { return relabels_only_message_ops(y, z, d); }));
    out.push_back(check("final(Y)=final(Z)", [&](std::string& d) { return finals_equal(fy, fz, ey, ez, d); }));
    out.push_back(check("history(Z)=history(Y)", [&](std::string&) { return history(z) == history(y); }));
    out.push_back(check("valid(Yhat)", [&](std::string& d) {
        const auto* spec = dynamic_cast<const SpecProgram*>(yhat.program.get());
        if (!spec) {
            d = "Yhat is not a specification execution";
            return false;
        }
        const auto v = validate_spec_execution(*spec, yhat);
        d = v.reason;
        return v.ok;
    }));
    out.push_back(check("|history(Yhat)|=|history(Z)|",
                        [&](std::string&) { return history(yhat).size() == history(z).size(); }));
    out.push_back(check("history(Yhat)~history(Z)",
                        [&](std::string&) { return histories_correspond(history(yhat), history(z)); }));
    out.push_back(check("final(Z)=final(Yhat)", [&](std::string& d) { return finals_equal(fz, fh, ez, eh, d); }));
    return out;
}

}  // namespace

Certificate verify(const Execution& x) {
    Certificate cert;
    std::string step = "hypotheses";
    try {
        const auto* qgo_program = dynamic_cast<const QgoProgram*>(x.program.get());
        if (!qgo_program) fail(ErrorCode::HypothesisViolation, "execution is not of an augmented algorithm");
        const auto valid = validate(x);
        if (!valid.ok) fail(ErrorCode::HypothesisViolation, "execution is not valid: " + valid.reason);
        cert.fragments = decompose(x);

        step = "tripartition";
        std::vector<Tripartition> parts;
        for (const MainFragment& f : cert.fragments) parts.push_back(tripartition(x, f));

        step = "eliminate_inversions";
        CheckedExecution c(x);
        for (std::size_t i = 0; i < cert.fragments.size(); ++i) {
            auto swaps = eliminate_inversions(c, cert.fragments[i], parts[i]);
            cert.swaps.insert(cert.swaps.end(), swaps.begin(), swaps.end());
        }
        cert.y = c.execution();

        step = "reorder_message_ops";
        for (std::size_t i = 0; i < cert.fragments.size(); ++i)
            cert.recorded.push_back(reorder_message_ops(c, cert.fragments[i], parts[i], cert.swaps));
        cert.z = c.execution();

        step = "build_spec_execution";
        auto spec = std::make_shared<const SpecProgram>(qgo_program->base_ptr(), qgo_program->library_ptr());
        cert.spec = build_spec_execution(cert.z, cert.fragments, parts, cert.recorded, spec, &cert.atomic_positions);

        step = "claims";
        cert.verdicts = check_claims(x, cert.y, cert.z, cert.spec);
    } catch (const Error& err) {
        cert.accepted = false;
        cert.failed_step = step;
        cert.reason = err.what();
        return cert;
    } catch (const nlohmann::json::exception& err) {
        cert.accepted = false;
        cert.failed_step = step;
        cert.reason = err.what();
        return cert;
    }
    cert.accepted = true;
    for (const Verdict& v : cert.verdicts)
        if (!v.ok) {
            cert.accepted = false;
            cert.failed_step = v.name;
            cert.reason = v.detail;
            break;
        }
    return cert;
}

std::vector<Verdict> recheck(const Execution& x, const Certificate& cert) {
    return check_claims(x, cert.y, cert.z, cert.spec);
}

namespace {

json events_json(const Execution& x) {
    json out = json::array();
    for (const Event& e : x.events) out.push_back(to_json(e));
    return out;
}

json order_json(const Execution& x) {
    json out = json::array();
    for (const Event& e : x.events) out.push_back(e.id);
    return out;
}

}  // namespace

json to_json(const Certificate& cert) {
    json j;
    j["accepted"] = cert.accepted;
    j["failed_step"] = cert.failed_step.empty() ? json() : json(cert.failed_step);
    j["reason"] = cert.reason.empty() ? json() : json(cert.reason);
    j["fragments"] = json::array();
    for (std::size_t i = 0; i < cert.fragments.size(); ++i) {
        const MainFragment& f = cert.fragments[i];
        json fj{{"begin", f.begin}, {"end", f.end}, {"leader", f.leader}, {"gid", f.gid}};
        if (i < cert.recorded.size()) fj["recorded_messages"] = cert.recorded[i];
        j["fragments"].push_back(std::move(fj));
    }
    j["verdicts"] = json::array();
    for (const Verdict& v : cert.verdicts) {
        json vj{{"name", v.name}, {"ok", v.ok}};
        if (!v.detail.empty()) vj["detail"] = v.detail;
        j["verdicts"].push_back(std::move(vj));
    }
    std::map<std::string, std::size_t> counts;
    j["swaps"] = json::array();
    for (const SwapRecord& s : cert.swaps) {
        ++counts[s.kind];
        j["swaps"].push_back(json::array({s.kind, s.first, s.second}));
    }
    j["swap_counts"] = counts;
    if (cert.y.program) j["y_order"] = order_json(cert.y);
    if (cert.z.program) j["z_order"] = order_json(cert.z);
    if (cert.spec.program) {
        j["spec_events"] = events_json(cert.spec);
        j["atomic_positions"] = cert.atomic_positions;
    }
    return j;
}

}  // namespace qdsim
