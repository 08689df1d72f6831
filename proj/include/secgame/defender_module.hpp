#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "secgame/hioa.hpp"
#include "secgame/security_game.hpp"

namespace secgame {

// Sampled-time dynamics parameters shared by every defender module in a run.
struct DynamicsParams {
    double h = 1.0;            // sample period
    double tau_I = 3.0;        // startup duration
    double eps_dev = 1e-3;     // opponent-deviation threshold (inf-norm)
    int stability_window = 3;  // quiet samples required to leave alternate
};

bool operator==(const DynamicsParams& a, const DynamicsParams& b);

enum class Mode { Startup, Normal, Alternate, Fail };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s); // ValidationError "UnknownMode"

// One sampled input record for a module: the incident level on its
// subnetwork, the failure flag, and the investments it observed from the
// other defenders (one tick old under the engine's snapshot semantics).
struct InputRecord {
    double attack_risk = 0.0; // 0 = no incident
    bool fail_event = false;
    JointProfile x_others;
};

// Full state of one defender module between samples.
struct ModuleState {
    Mode mode = Mode::Startup;
    Eigen::VectorXd x;       // current investment over the controlled edges
    double tau = 0.0;        // startup timer
    Eigen::VectorXd p0;      // per-edge baseline success probabilities
    Eigen::VectorXd p;       // per-edge current success probabilities
    Eigen::VectorXd x_prev;  // previous investment (the averaging buffer)
    JointProfile others_prev; // last observed opponents' investments
    double risk_prev = 0.0;   // last observed attack risk
    int stability_counter = 0; // consecutive quiet samples
    bool solver_ok = true;     // last best-response solve converged
};

// startup mode with zeroed vectors sized for the defender's edge count.
ModuleState initial_module_state(const GameSpec& game, const std::string& id);

// Startup flow sampled at h: p <- clamp(p + p^2, 0, 1), tau <- tau + h.
// Throws ValidationError "WrongMode" unless s.mode is startup.
ModuleState startup_update(const ModuleState& s, const DynamicsParams& params);

// Decision step shared by normal and alternate: solve the best response
// against the observed opponents, average x <- (x_prev + x*) / 2, shift the
// averaging buffer, zero the timer, recompute p, and maintain the
// deviation/stability bookkeeping. Throws ValidationError "WrongMode".
ModuleState normal_update(const ModuleState& s, const InputRecord& inp,
                          const GameSpec& game, const std::string& id,
                          const DynamicsParams& params, const SolverConfig& solver);

// Failure flow: p <- all-ones, tau <- 0, investments frozen. Throws
// ValidationError "WrongMode" unless s.mode is fail.
ModuleState fail_update(const ModuleState& s);

struct ModuleOutputs {
    Eigen::VectorXd p;
    Eigen::VectorXd x;
};

// Reported outputs: the investment is zero while attack_risk is 0, otherwise
// the vector held in state; p is p0 times exp(-total investment on each edge,
// the reported own share plus the other defenders' contributions on shared
// edges). In fail mode p reports the state vector (pinned to all-ones).
ModuleOutputs valuation(const ModuleState& s, const InputRecord& inp,
                        const GameSpec& game, const std::string& id);

enum class EventKind {
    None,
    TimerElapsed,
    DeviationDetected,
    StabilityReached,
    FailTriggered,
};

std::string to_string(EventKind k);

// Classifies what the current sample means for the module's mode graph:
// fail_triggered beats deviation beats stability; startup only times out.
// Deviation means some opponent moved more than eps_dev (inf-norm) or the
// attack risk changed since the last sample; stability means the current
// sample is quiet and completes the stability window.
EventKind transition_event(const ModuleState& s, const InputRecord& inp,
                           const DynamicsParams& params);

// The four-mode defender automaton for defender `id`:
//   startup -> normal      when tau >= tau_I (calibrates p0, zeroes x)
//   normal  -> fail        on Fail_Event
//   normal  -> alternate   on deviation
//   alternate -> fail      on Fail_Event
//   alternate -> normal    on stability
// fail is absorbing and startup never fails. Inputs are Attack_Risk_<id>,
// Fail_Event_<id> and x_<j> for every other defender j; outputs are x_<id>
// (wired) and p_<id> (monitor-only).
HioaSignature make_defender_module(const GameSpec& game, const std::string& id,
                                   const DynamicsParams& params,
                                   const SolverConfig& solver);

// Bridges between the typed state and the automaton's valuation. `opponents`
// is the ordered list of the other defenders' ids.
Valuation to_valuation(const ModuleState& s, const std::string& id,
                       const std::vector<std::string>& opponents);
ModuleState module_state_from_valuation(Mode mode, const Valuation& v,
                                        const std::string& id,
                                        const std::vector<std::string>& opponents);

// The other defenders' ids in game declaration order.
std::vector<std::string> opponent_ids(const GameSpec& game, const std::string& id);

} // namespace secgame
