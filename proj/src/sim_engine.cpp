#include "secgame/sim_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "secgame/errors.hpp"

namespace secgame {

bool operator==(const SimEvent& a, const SimEvent& b) {
    return a.time == b.time && a.module == b.module && a.kind == b.kind &&
           a.risk_value == b.risk_value && a.fail_value == b.fail_value;
}

bool operator==(const TraceRecord& a, const TraceRecord& b) {
    return a.step == b.step && a.time == b.time && a.module == b.module &&
           a.mode == b.mode && a.values == b.values;
}

bool operator==(const Trace& a, const Trace& b) { return a.records == b.records; }

namespace {

// A module's id is the suffix of its Attack_Risk_<id> input; modules without
// one go by their signature name.
std::string module_id(const HioaSignature& sig) {
    constexpr const char* prefix = "Attack_Risk_";
    for (const auto* v : sig.input_variables())
        if (v->name.rfind(prefix, 0) == 0)
            return v->name.substr(12);
    return sig.name;
}

Value zero_of(const VariableDecl& decl) {
    switch (decl.type) {
    case VariableDecl::Type::Real:
    case VariableDecl::Type::Timer:
        return 0.0;
    case VariableDecl::Type::Boolean:
        return false;
    case VariableDecl::Type::RealVector:
        return Eigen::VectorXd(Eigen::VectorXd::Zero(decl.dim));
    }
    return 0.0;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void flatten_into(std::vector<std::pair<std::string, TraceValue>>& rows,
                  const std::string& name, const Value& value) {
    if (std::holds_alternative<double>(value)) {
        rows.emplace_back(name, std::get<double>(value));
    } else if (std::holds_alternative<bool>(value)) {
        rows.emplace_back(name, std::get<bool>(value));
    } else {
        const auto& vec = std::get<Eigen::VectorXd>(value);
        for (Eigen::Index i = 0; i < vec.size(); ++i)
            rows.emplace_back(name + "[" + std::to_string(i) + "]", vec[i]);
    }
}

} // namespace

void validate_schedule(const EventSchedule& schedule,
                       const std::vector<std::string>& module_order) {
    auto index_of = [&](const std::string& id) {
        auto it = std::find(module_order.begin(), module_order.end(), id);
        if (it == module_order.end())
            throw ValidationError("UnknownModule",
                                  "event targets unknown module '" + id + "'");
        return it - module_order.begin();
    };
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const SimEvent& e = schedule[i];
        if (e.time < 0.0)
            throw ValidationError("InvalidEventTime",
                                  "event time " + format_double(e.time) +
                                      " is negative");
        index_of(e.module);
        if (e.kind == SimEvent::Kind::SetAttackRisk && e.risk_value < 0.0)
            throw ValidationError("NegativeRisk",
                                  "attack risk " + format_double(e.risk_value) +
                                      " is negative");
        if (i > 0) {
            const SimEvent& prev = schedule[i - 1];
            bool ordered = prev.time < e.time ||
                           (prev.time == e.time &&
                            index_of(prev.module) <= index_of(e.module));
            if (!ordered)
                throw ValidationError("UnsortedSchedule",
                                      "event " + std::to_string(i) +
                                          " is out of order");
        }
    }
}

SimRun run(const std::vector<HioaSignature>& modules, const EventSchedule& schedule,
           const DynamicsParams& params, long steps) {
    if (steps < 1)
        throw ValidationError("InvalidStepCount", "step count must be >= 1");
    for (std::size_t i = 0; i < modules.size(); ++i)
        for (std::size_t j = i + 1; j < modules.size(); ++j) {
            CompatibilityVerdict v = check_compatibility(modules[i], modules[j]);
            if (!v.compatible) {
                std::string detail =
                    modules[i].name + " / " + modules[j].name + ":";
                for (const std::string& s : v.violations)
                    detail += " " + s + ";";
                throw Error("Incompatible", detail);
            }
        }

    std::vector<std::string> ids;
    for (const HioaSignature& m : modules)
        ids.push_back(module_id(m));
    validate_schedule(schedule, ids);

    // Which module produces each (non-monitor) output variable.
    std::map<std::string, std::size_t> output_owner;
    for (std::size_t k = 0; k < modules.size(); ++k)
        for (const auto* v : modules[k].output_variables())
            if (!v->monitor)
                output_owner.emplace(v->name, k);

    std::vector<std::string> mode(modules.size());
    std::vector<Valuation> state(modules.size());
    std::vector<Valuation> last_outputs(modules.size());
    for (std::size_t k = 0; k < modules.size(); ++k) {
        if (modules[k].initials.empty())
            throw ValidationError("InvalidSignature",
                                  modules[k].name + ": no initial state");
        mode[k] = modules[k].initials.front().first;
        state[k] = modules[k].initials.front().second;
        for (const auto* v : modules[k].output_variables())
            last_outputs[k].emplace(v->name, zero_of(*v));
    }

    Valuation env; // externally driven inputs, persisted between events
    std::size_t next_event = 0;

    SimRun out;
    out.params = params;
    out.steps = steps;

    for (long m = 0; m < steps; ++m) {
        double t = static_cast<double>(m) * params.h;
        while (next_event < schedule.size() && schedule[next_event].time <= t) {
            const SimEvent& e = schedule[next_event];
            if (e.kind == SimEvent::Kind::SetAttackRisk)
                env["Attack_Risk_" + e.module] = e.risk_value;
            else
                env["Fail_Event_" + e.module] = e.fail_value;
            ++next_event;
        }

        // Everyone reads the same snapshot: the previous step's outputs.
        std::vector<Valuation> inputs(modules.size());
        for (std::size_t k = 0; k < modules.size(); ++k) {
            for (const auto* v : modules[k].input_variables()) {
                auto ev = env.find(v->name);
                if (ev != env.end()) {
                    inputs[k].emplace(v->name, ev->second);
                    continue;
                }
                auto owner = output_owner.find(v->name);
                if (owner != output_owner.end()) {
                    inputs[k].emplace(v->name,
                                      last_outputs[owner->second].at(v->name));
                    continue;
                }
                inputs[k].emplace(v->name, zero_of(*v));
            }
        }

        for (std::size_t k = 0; k < modules.size(); ++k) {
            StepResult r = step(modules[k], mode[k], state[k], inputs[k]);
            mode[k] = r.mode;
            state[k] = std::move(r.state);
            last_outputs[k] = std::move(r.outputs);

            TraceRecord rec;
            rec.step = m;
            rec.time = t;
            rec.module = ids[k];
            rec.mode = mode[k];
            for (const VariableDecl& decl : modules[k].variables) {
                if (!decl.is_state())
                    continue;
                flatten_into(rec.values, decl.name, state[k].at(decl.name));
            }
            for (const auto& [name, value] : last_outputs[k])
                flatten_into(rec.values, "out_" + name, value);
            out.trace.records.push_back(std::move(rec));
        }
    }
    return out;
}

std::optional<long> detect_equilibrium(const SimRun& run, double tol) {
    struct Row {
        std::string mode;
        Eigen::VectorXd x;
    };
    std::map<std::string, std::vector<Row>> per_module;
    for (const TraceRecord& rec : run.trace.records) {
        std::string prefix = "x_" + rec.module + "[";
        std::vector<double> coords;
        for (const auto& [name, value] : rec.values)
            if (name.rfind(prefix, 0) == 0 && std::holds_alternative<double>(value))
                coords.push_back(std::get<double>(value));
        Row row;
        row.mode = rec.mode;
        row.x = Eigen::Map<const Eigen::VectorXd>(coords.data(),
                                                  static_cast<Eigen::Index>(
                                                      coords.size()));
        per_module[rec.module].push_back(std::move(row));
    }
    if (per_module.empty())
        return std::nullopt;

    long steps = 0;
    for (const auto& [id, rows] : per_module)
        steps = std::max(steps, static_cast<long>(rows.size()));
    if (steps < 2)
        return std::nullopt;

    auto settled_at = [&](const std::vector<Row>& rows, long m) {
        if (m >= static_cast<long>(rows.size()))
            return true;
        const Row& cur = rows[static_cast<std::size_t>(m)];
        if (cur.mode == "fail")
            return true;
        const Row& prev = rows[static_cast<std::size_t>(m - 1)];
        if (cur.x.size() != prev.x.size())
            return false;
        if (cur.x.size() == 0)
            return true;
        return (cur.x - prev.x).lpNorm<Eigen::Infinity>() < tol;
    };

    std::optional<long> earliest;
    for (long m = steps - 1; m >= 1; --m) {
        bool all_settled = true;
        for (const auto& [id, rows] : per_module)
            if (!settled_at(rows, m)) {
                all_settled = false;
                break;
            }
        if (all_settled)
            earliest = m;
        else
            break;
    }
    return earliest;
}

bool replay_check(const std::vector<HioaSignature>& modules,
                  const EventSchedule& schedule, const DynamicsParams& params,
                  long steps) {
    std::string first = trace_to_csv(run(modules, schedule, params, steps).trace);
    std::string second = trace_to_csv(run(modules, schedule, params, steps).trace);
    if (first == second)
        return true;

    std::istringstream sa(first), sb(second);
    std::string la, lb;
    long line = 1;
    while (true) {
        bool ga = static_cast<bool>(std::getline(sa, la));
        bool gb = static_cast<bool>(std::getline(sb, lb));
        if (!ga && !gb)
            break;
        if (!ga || !gb || la != lb)
            throw Error("NonDeterministic",
                        "replay diverges at line " + std::to_string(line) + ": '" +
                            (ga ? la : std::string("<eof>")) + "' vs '" +
                            (gb ? lb : std::string("<eof>")) + "'");
        ++line;
    }
    throw Error("NonDeterministic", "replay traces differ in length");
}

std::string trace_to_csv(const Trace& trace) {
    std::string out = "step,time,module,mode,variable,value\n";
    for (const TraceRecord& rec : trace.records) {
        std::string head = std::to_string(rec.step) + "," + format_double(rec.time) +
                           "," + rec.module + "," + rec.mode + ",";
        for (const auto& [name, value] : rec.values) {
            out += head;
            out += name;
            out += ',';
            if (std::holds_alternative<double>(value))
                out += format_double(std::get<double>(value));
            else
                out += std::get<bool>(value) ? "true" : "false";
            out += '\n';
        }
    }
    return out;
}

} // namespace secgame
