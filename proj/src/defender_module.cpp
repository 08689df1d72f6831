#include "secgame/defender_module.hpp"

#include <cmath>
#include <memory>

#include "secgame/errors.hpp"

namespace secgame {

bool operator==(const DynamicsParams& a, const DynamicsParams& b) {
    return a.h == b.h && a.tau_I == b.tau_I && a.eps_dev == b.eps_dev &&
           a.stability_window == b.stability_window;
}

std::string to_string(Mode m) {
    switch (m) {
    case Mode::Startup: return "startup";
    case Mode::Normal: return "normal";
    case Mode::Alternate: return "alternate";
    case Mode::Fail: return "fail";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "startup") return Mode::Startup;
    if (s == "normal") return Mode::Normal;
    if (s == "alternate") return Mode::Alternate;
    if (s == "fail") return Mode::Fail;
    throw ValidationError("UnknownMode", "no mode named '" + s + "'");
}

std::string to_string(EventKind k) {
    switch (k) {
    case EventKind::None: return "none";
    case EventKind::TimerElapsed: return "timer_elapsed";
    case EventKind::DeviationDetected: return "deviation_detected";
    case EventKind::StabilityReached: return "stability_reached";
    case EventKind::FailTriggered: return "fail_triggered";
    }
    return "?";
}

std::vector<std::string> opponent_ids(const GameSpec& game, const std::string& id) {
    game.defender_index(id); // validates the id
    std::vector<std::string> out;
    for (const Defender& d : game.defenders)
        if (d.id != id)
            out.push_back(d.id);
    return out;
}

namespace {

void require_mode(const ModuleState& s, Mode expected, const char* op) {
    if (s.mode != expected)
        throw ValidationError("WrongMode", std::string(op) + " applied in mode " +
                                               to_string(s.mode));
}

// The investment the module publishes: zero while no incident is reported.
Eigen::VectorXd reported_x(const Eigen::VectorXd& x, double attack_risk) {
    if (attack_risk == 0.0)
        return Eigen::VectorXd::Zero(x.size());
    return x;
}

// Per-edge success probabilities p0 * exp(-total), total = own share plus the
// observed opponents' investments on edges they also control.
Eigen::VectorXd edge_probabilities(const GameSpec& game, const std::string& id,
                                   const Eigen::VectorXd& p0,
                                   const Eigen::VectorXd& own,
                                   const JointProfile& others) {
    const Defender& d = game.defender(id);
    if (own.size() != static_cast<Eigen::Index>(d.edges.size()) ||
        p0.size() != own.size())
        throw ValidationError("DimensionMismatch",
                              "investment vector does not match the edge count of '" +
                                  id + "'");
    Eigen::VectorXd p(own.size());
    for (std::size_t i = 0; i < d.edges.size(); ++i) {
        double total = own[static_cast<Eigen::Index>(i)];
        for (const Defender& other : game.defenders) {
            if (other.id == id)
                continue;
            auto it = others.find(other.id);
            if (it == others.end())
                continue;
            for (std::size_t k = 0; k < other.edges.size(); ++k) {
                if (other.edges[k] != d.edges[i])
                    continue;
                if (it->second.size() != static_cast<Eigen::Index>(other.edges.size()))
                    throw ValidationError("DimensionMismatch",
                                          "observed investments for '" + other.id +
                                              "' have the wrong length");
                total += it->second[static_cast<Eigen::Index>(k)];
            }
        }
        // Not edge_probability: an uncalibrated baseline of 0 is legal here
        // and must annihilate the report rather than be rejected.
        p[static_cast<Eigen::Index>(i)] =
            p0[static_cast<Eigen::Index>(i)] * std::exp(-total);
    }
    return p;
}

// True when the sample departs from what the module saw last: some opponent
// moved more than eps_dev in the infinity norm, or the incident level changed.
bool deviates(const ModuleState& s, const InputRecord& inp, double eps_dev) {
    if (inp.attack_risk != s.risk_prev)
        return true;
    for (const auto& [j, prev] : s.others_prev) {
        auto it = inp.x_others.find(j);
        if (it == inp.x_others.end()) {
            if (prev.size() > 0 && prev.lpNorm<Eigen::Infinity>() > eps_dev)
                return true;
            continue;
        }
        if (it->second.size() != prev.size())
            throw ValidationError("DimensionMismatch",
                                  "observed investments for '" + j +
                                      "' changed length");
        if (prev.size() > 0 &&
            (it->second - prev).lpNorm<Eigen::Infinity>() > eps_dev)
            return true;
    }
    for (const auto& [j, cur] : inp.x_others)
        if (!s.others_prev.count(j) && cur.size() > 0 &&
            cur.lpNorm<Eigen::Infinity>() > eps_dev)
            return true;
    return false;
}

Eigen::VectorXd baseline_p0(const GameSpec& game, const std::string& id) {
    const Defender& d = game.defender(id);
    Eigen::VectorXd p0(static_cast<Eigen::Index>(d.edges.size()));
    for (std::size_t i = 0; i < d.edges.size(); ++i)
        p0[static_cast<Eigen::Index>(i)] = game.graph.find_edge(d.edges[i])->p0;
    return p0;
}

} // namespace

ModuleState initial_module_state(const GameSpec& game, const std::string& id) {
    const Defender& d = game.defender(id);
    const auto n = static_cast<Eigen::Index>(d.edges.size());
    ModuleState s;
    s.mode = Mode::Startup;
    s.x = Eigen::VectorXd::Zero(n);
    s.x_prev = Eigen::VectorXd::Zero(n);
    // Boot-time singleton: probabilities stay dark until calibration installs
    // the graph baseline on the way out of startup.
    s.p0 = Eigen::VectorXd::Zero(n);
    s.p = Eigen::VectorXd::Zero(n);
    for (const Defender& other : game.defenders)
        if (other.id != id)
            s.others_prev.emplace(other.id, Eigen::VectorXd::Zero(static_cast<
                                                Eigen::Index>(other.edges.size())));
    return s;
}

ModuleState startup_update(const ModuleState& s, const DynamicsParams& params) {
    require_mode(s, Mode::Startup, "startup update");
    ModuleState out = s;
    out.p = (s.p.array() + s.p.array().square()).cwiseMin(1.0).cwiseMax(0.0);
    out.tau = s.tau + params.h;
    return out;
}

ModuleState normal_update(const ModuleState& s, const InputRecord& inp,
                          const GameSpec& game, const std::string& id,
                          const DynamicsParams& params, const SolverConfig& solver) {
    if (s.mode != Mode::Normal && s.mode != Mode::Alternate)
        throw ValidationError("WrongMode",
                              "decision update applied in mode " + to_string(s.mode));
    bool quiet = !deviates(s, inp, params.eps_dev);
    BestResponseResult br = best_response(game, id, inp.x_others, solver);

    ModuleState out = s;
    // The averaging law reaches one sample back: the buffer holds the
    // investment from two decisions ago until it shifts here.
    out.x = 0.5 * (s.x_prev + br.x);
    out.x_prev = s.x;
    out.tau = 0.0;
    out.solver_ok = br.converged;
    out.others_prev = inp.x_others;
    out.risk_prev = inp.attack_risk;
    out.stability_counter = quiet ? s.stability_counter + 1 : 0;
    out.p = edge_probabilities(game, id, s.p0, reported_x(out.x, inp.attack_risk),
                               inp.x_others);
    return out;
}

ModuleState fail_update(const ModuleState& s) {
    require_mode(s, Mode::Fail, "failure update");
    ModuleState out = s;
    out.p.setOnes();
    out.tau = 0.0;
    return out;
}

ModuleOutputs valuation(const ModuleState& s, const InputRecord& inp,
                        const GameSpec& game, const std::string& id) {
    ModuleOutputs out;
    out.x = reported_x(s.x, inp.attack_risk);
    if (s.mode == Mode::Fail)
        out.p = s.p;
    else
        out.p = edge_probabilities(game, id, s.p0, out.x, inp.x_others);
    return out;
}

EventKind transition_event(const ModuleState& s, const InputRecord& inp,
                           const DynamicsParams& params) {
    switch (s.mode) {
    case Mode::Startup:
        return s.tau >= params.tau_I ? EventKind::TimerElapsed : EventKind::None;
    case Mode::Normal:
        if (inp.fail_event)
            return EventKind::FailTriggered;
        if (deviates(s, inp, params.eps_dev))
            return EventKind::DeviationDetected;
        return EventKind::None;
    case Mode::Alternate:
        if (inp.fail_event)
            return EventKind::FailTriggered;
        if (deviates(s, inp, params.eps_dev))
            return EventKind::DeviationDetected;
        if (s.stability_counter >= params.stability_window - 1)
            return EventKind::StabilityReached;
        return EventKind::None;
    case Mode::Fail:
        return EventKind::None;
    }
    return EventKind::None;
}

Valuation to_valuation(const ModuleState& s, const std::string& id,
                       const std::vector<std::string>& opponents) {
    Valuation v;
    v.emplace("x_" + id, s.x);
    v.emplace("p_" + id, s.p);
    v.emplace("tau_" + id, s.tau);
    v.emplace("x_prev_" + id, s.x_prev);
    v.emplace("p0_" + id, s.p0);
    v.emplace("risk_prev_" + id, s.risk_prev);
    v.emplace("stab_" + id, static_cast<double>(s.stability_counter));
    v.emplace("solver_ok_" + id, s.solver_ok);
    for (const std::string& j : opponents) {
        auto it = s.others_prev.find(j);
        if (it == s.others_prev.end())
            throw ValidationError("UnknownDefender",
                                  "module state lacks an observation slot for '" +
                                      j + "'");
        v.emplace("last_x_" + j + "_" + id, it->second);
    }
    return v;
}

ModuleState module_state_from_valuation(Mode mode, const Valuation& v,
                                        const std::string& id,
                                        const std::vector<std::string>& opponents) {
    ModuleState s;
    s.mode = mode;
    s.x = get_vector(v, "x_" + id);
    s.p = get_vector(v, "p_" + id);
    s.tau = get_real(v, "tau_" + id);
    s.x_prev = get_vector(v, "x_prev_" + id);
    s.p0 = get_vector(v, "p0_" + id);
    s.risk_prev = get_real(v, "risk_prev_" + id);
    s.stability_counter = static_cast<int>(std::llround(get_real(v, "stab_" + id)));
    s.solver_ok = get_bool(v, "solver_ok_" + id);
    for (const std::string& j : opponents)
        s.others_prev.emplace(j, get_vector(v, "last_x_" + j + "_" + id));
    return s;
}

namespace {

InputRecord input_record_from(const Valuation& inputs, const std::string& id,
                              const std::vector<std::string>& opponents) {
    InputRecord rec;
    rec.attack_risk = get_real(inputs, "Attack_Risk_" + id);
    rec.fail_event = get_bool(inputs, "Fail_Event_" + id);
    for (const std::string& j : opponents)
        rec.x_others.emplace(j, get_vector(inputs, "x_" + j));
    return rec;
}

} // namespace

HioaSignature make_defender_module(const GameSpec& game, const std::string& id,
                                   const DynamicsParams& params,
                                   const SolverConfig& solver) {
    const Defender& d = game.defender(id);
    const int n = static_cast<int>(d.edges.size());
    const std::vector<std::string> opponents = opponent_ids(game, id);
    auto g = std::make_shared<const GameSpec>(game);

    HioaSignature sig;
    sig.name = "defender_" + id;
    sig.modes = {"startup", "normal", "alternate", "fail"};

    using K = VariableDecl::Kind;
    using T = VariableDecl::Type;
    sig.variables.push_back({"Attack_Risk_" + id, K::Input, T::Real, 1, false});
    sig.variables.push_back({"Fail_Event_" + id, K::Input, T::Boolean, 1, false});
    for (const std::string& j : opponents) {
        int nj = static_cast<int>(game.defender(j).edges.size());
        sig.variables.push_back({"x_" + j, K::Input, T::RealVector, nj, false});
    }
    sig.variables.push_back({"x_" + id, K::Output, T::RealVector, n, false});
    sig.variables.push_back({"p_" + id, K::Output, T::RealVector, n, true});
    sig.variables.push_back({"tau_" + id, K::Internal, T::Timer, 1, false});
    sig.variables.push_back({"x_prev_" + id, K::Internal, T::RealVector, n, false});
    sig.variables.push_back({"p0_" + id, K::Internal, T::RealVector, n, false});
    sig.variables.push_back({"risk_prev_" + id, K::Internal, T::Real, 1, false});
    sig.variables.push_back({"stab_" + id, K::Internal, T::Real, 1, false});
    sig.variables.push_back({"solver_ok_" + id, K::Internal, T::Boolean, 1, false});
    // Observation slots carry the owner's id too: two modules watching the
    // same third defender must not share state.
    for (const std::string& j : opponents) {
        int nj = static_cast<int>(game.defender(j).edges.size());
        sig.variables.push_back(
            {"last_x_" + j + "_" + id, K::Internal, T::RealVector, nj, false});
    }

    std::vector<Guard> dev;
    for (const std::string& j : opponents)
        dev.push_back(Guard::vector_gap_exceeds("x_" + j, "last_x_" + j + "_" + id,
                                                params.eps_dev));
    dev.push_back(Guard::scalar_differs("Attack_Risk_" + id, "risk_prev_" + id));
    Guard deviation = Guard::any_of(dev);
    Guard fail_guard = Guard::is_true("Fail_Event_" + id);
    Guard timer_guard =
        Guard::compare("tau_" + id, Guard::Cmp::Ge, params.tau_I);
    Guard stability = Guard::all_of(
        {Guard::negate(deviation),
         Guard::compare("stab_" + id, Guard::Cmp::Ge,
                        static_cast<double>(params.stability_window - 1))});

    sig.transitions.push_back({"startup", timer_guard, "calibrate", "normal"});
    sig.transitions.push_back({"normal", fail_guard, "fail_now", "fail"});
    sig.transitions.push_back({"normal", deviation, "decide_alternate", "alternate"});
    sig.transitions.push_back({"alternate", fail_guard, "fail_now", "fail"});
    sig.transitions.push_back({"alternate", stability, "decide_normal", "normal"});

    auto warmup = [params, id, opponents](const Valuation& st, const Valuation&) {
        ModuleState s = module_state_from_valuation(Mode::Startup, st, id, opponents);
        return to_valuation(startup_update(s, params), id, opponents);
    };
    auto decide_in = [g, id, params, solver, opponents](Mode mode) {
        return UpdateFn([=](const Valuation& st, const Valuation& in) {
            ModuleState s = module_state_from_valuation(mode, st, id, opponents);
            InputRecord rec = input_record_from(in, id, opponents);
            return to_valuation(normal_update(s, rec, *g, id, params, solver), id,
                                opponents);
        });
    };
    auto failed = [id, opponents](const Valuation& st, const Valuation&) {
        ModuleState s = module_state_from_valuation(Mode::Fail, st, id, opponents);
        return to_valuation(fail_update(s), id, opponents);
    };

    sig.updates.emplace("warmup", warmup);
    sig.updates.emplace("decide_normal", decide_in(Mode::Normal));
    sig.updates.emplace("decide_alternate", decide_in(Mode::Alternate));
    sig.updates.emplace("failed", failed);
    sig.mode_update = {{"startup", "warmup"},
                       {"normal", "decide_normal"},
                       {"alternate", "decide_alternate"},
                       {"fail", "failed"}};

    // The mode change on a decision transition rides on the same update law,
    // so investments keep evolving through the switch.
    sig.resets.emplace("decide_alternate", decide_in(Mode::Normal));
    sig.resets.emplace("decide_normal", decide_in(Mode::Alternate));
    sig.resets.emplace("calibrate",
                       [g, id, opponents](const Valuation& st, const Valuation& in) {
                           ModuleState s = module_state_from_valuation(
                               Mode::Startup, st, id, opponents);
                           InputRecord rec = input_record_from(in, id, opponents);
                           ModuleState out = s;
                           out.mode = Mode::Normal;
                           out.tau = 0.0;
                           out.x.setZero();
                           out.x_prev.setZero();
                           out.p0 = baseline_p0(*g, id); // calibration
                           out.risk_prev = rec.attack_risk;
                           out.others_prev = rec.x_others;
                           out.stability_counter = 0;
                           out.solver_ok = true;
                           out.p = edge_probabilities(*g, id, out.p0, out.x,
                                                      rec.x_others);
                           return to_valuation(out, id, opponents);
                       });
    sig.resets.emplace("fail_now",
                       [id, opponents](const Valuation& st, const Valuation&) {
                           ModuleState s = module_state_from_valuation(
                               Mode::Fail, st, id, opponents);
                           s.p.setOnes();
                           s.tau = 0.0;
                           return to_valuation(s, id, opponents);
                       });

    sig.initials.emplace_back(
        "startup", to_valuation(initial_module_state(game, id), id, opponents));

    sig.output_fn = [g, id, opponents](const std::string& mode, const Valuation& st,
                                       const Valuation& in) {
        ModuleState s =
            module_state_from_valuation(mode_from_string(mode), st, id, opponents);
        InputRecord rec = input_record_from(in, id, opponents);
        ModuleOutputs o = valuation(s, rec, *g, id);
        Valuation out;
        out.emplace("x_" + id, o.x);
        out.emplace("p_" + id, o.p);
        return out;
    };

    validate_signature(sig);
    return sig;
}

} // namespace secgame
