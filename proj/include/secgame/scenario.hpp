#pragma once

#include <set>
#include <string>
#include <vector>

#include "secgame/attack_graph.hpp"
#include "secgame/defender_module.hpp"
#include "secgame/security_game.hpp"
#include "secgame/sim_engine.hpp"

namespace secgame {

// Everything one simulation needs, loadable from a single JSON file.
struct Scenario {
    std::set<NodeId> nodes;
    std::vector<Edge> edges;
    NodeId source;
    std::vector<Defender> defenders;
    DynamicsParams params;
    SolverConfig solver;
    EventSchedule events;
    long steps = 100;
};

bool operator==(const Scenario& a, const Scenario& b);

// JSON decoding plus full validation (graph builds, defenders resolve, params
// positive, schedule sorted). Structural problems (missing/mistyped fields,
// malformed JSON, unreadable file) throw ParseError; semantic problems throw
// ValidationError naming the offending entity.
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& json_text);

// Canonical JSON with every field explicit; parse_scenario_text of the result
// reproduces the scenario exactly.
std::string serialize_scenario(const Scenario& s);
void write_scenario(const Scenario& s, const std::string& path); // Error "IoError"

// The built-in two-defender distributed-energy scenario: an EV chain and a PV
// chain from a common intrusion source, a cross edge through the first
// defender's HMI, per-chain critical assets plus one shared asset, uniform
// edge baseline 0.8, budgets of 2, and a baseline attack risk of 1 on both
// modules from t = 0.
Scenario build_der1();

GameSpec game_from(const Scenario& s);
std::vector<HioaSignature> modules_from(const Scenario& s);

// Convenience wrapper: build the game and modules, then run the engine with
// the scenario's schedule, params and step count.
SimRun run_scenario(const Scenario& s);

// Trace file I/O in the trace_to_csv format. export_trace throws Error
// "IoError"; import_trace throws ParseError on malformed content and
// round-trips export_trace exactly.
void export_trace(const Trace& trace, const std::string& path);
Trace import_trace(const std::string& path);

} // namespace secgame
