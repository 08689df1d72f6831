#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "secgame/defender_module.hpp"
#include "secgame/hioa.hpp"

namespace secgame {

// One scheduled input change. Events persist: a value stays applied until a
// later event overwrites it.
struct SimEvent {
    enum class Kind { SetAttackRisk, SetFail };

    double time = 0.0;
    std::string module;
    Kind kind = Kind::SetAttackRisk;
    double risk_value = 0.0; // SetAttackRisk payload
    bool fail_value = false; // SetFail payload
};

bool operator==(const SimEvent& a, const SimEvent& b);

// Ascending by time; ties ordered by module declaration order, then by
// position in the schedule.
using EventSchedule = std::vector<SimEvent>;

// Rejects negative times, unknown modules, negative risk values, and any
// ordering violation. `module_order` is the declaration order ids.
void validate_schedule(const EventSchedule& schedule,
                       const std::vector<std::string>& module_order);

using TraceValue = std::variant<double, bool>;

// Post-step snapshot of one module at one sample instant: the state variables
// in declaration order (vectors flattened to name[i] rows) followed by the
// outputs under "out_" names.
struct TraceRecord {
    long step = 0;
    double time = 0.0;
    std::string module;
    std::string mode;
    std::vector<std::pair<std::string, TraceValue>> values;
};

bool operator==(const TraceRecord& a, const TraceRecord& b);

struct Trace {
    std::vector<TraceRecord> records;
};

bool operator==(const Trace& a, const Trace& b);

struct SimRun {
    DynamicsParams params;
    long steps = 0;
    Trace trace;
    std::optional<long> equilibrium_step; // filled by detect_equilibrium
};

// Deterministic synchronous execution of the composed modules at t = m * h:
// each step applies the schedule events due at or before t, snapshots every
// module's outputs, steps every module against that snapshot, and appends the
// post-step records. Modules must be pairwise compatible; the schedule must
// validate. Unwired inputs read zero / false.
SimRun run(const std::vector<HioaSignature>& modules,
           const EventSchedule& schedule, const DynamicsParams& params,
           long steps);

// Earliest step m >= 1 at which every module is either failed or moved its
// investment vector by less than tol (inf-norm) since m-1, and stays that way
// for the rest of the trace. Modules without an investment vector are
// ignored.
std::optional<long> detect_equilibrium(const SimRun& run, double tol);

// Runs the scenario twice and compares the serialized traces byte for byte.
// Returns true when identical; throws Error "NonDeterministic" naming the
// first diverging line otherwise.
bool replay_check(const std::vector<HioaSignature>& modules,
                  const EventSchedule& schedule, const DynamicsParams& params,
                  long steps);

// The exact CSV serialization used for export and replay comparison:
// header "step,time,module,mode,variable,value", shortest round-trip floats.
std::string trace_to_csv(const Trace& trace);

} // namespace secgame
