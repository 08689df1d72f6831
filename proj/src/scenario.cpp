#include "secgame/scenario.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "secgame/errors.hpp"

namespace secgame {

using json = nlohmann::ordered_json;

bool operator==(const Scenario& a, const Scenario& b) {
    return a.nodes == b.nodes && a.edges == b.edges && a.source == b.source &&
           a.defenders == b.defenders && a.params == b.params &&
           a.solver == b.solver && a.events == b.events && a.steps == b.steps;
}

namespace {

[[noreturn]] void malformed(const std::string& what) {
    throw ParseError("MalformedScenario", what);
}

const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object())
        malformed(where + " must be an object");
    auto it = obj.find(key);
    if (it == obj.end())
        malformed(where + " is missing field '" + std::string(key) + "'");
    return *it;
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number())
        malformed(where + " must be a number");
    return v.get<double>();
}

long as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer())
        malformed(where + " must be an integer");
    return v.get<long>();
}

std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string())
        malformed(where + " must be a string");
    return v.get<std::string>();
}

bool as_boolean(const json& v, const std::string& where) {
    if (!v.is_boolean())
        malformed(where + " must be true or false");
    return v.get<bool>();
}

const json& as_array(const json& v, const std::string& where) {
    if (!v.is_array())
        malformed(where + " must be an array");
    return v;
}

EdgeKey as_edge_key(const json& v, const std::string& where) {
    const json& pair = as_array(v, where);
    if (pair.size() != 2)
        malformed(where + " must be a [from, to] pair");
    return {as_string(pair[0], where + "[0]"), as_string(pair[1], where + "[1]")};
}

Scenario decode(const json& j) {
    if (!j.is_object())
        malformed("scenario root must be an object");
    Scenario s;

    for (const json& n : as_array(field(j, "nodes", "scenario"), "nodes"))
        s.nodes.insert(as_string(n, "node"));

    std::size_t i = 0;
    for (const json& ej : as_array(field(j, "edges", "scenario"), "edges")) {
        std::string where = "edges[" + std::to_string(i++) + "]";
        Edge e;
        e.from = as_string(field(ej, "from", where), where + ".from");
        e.to = as_string(field(ej, "to", where), where + ".to");
        e.p0 = ej.is_object() && ej.contains("p0")
                   ? as_number(ej.at("p0"), where + ".p0")
                   : 1.0;
        s.edges.push_back(std::move(e));
    }

    s.source = as_string(field(j, "source", "scenario"), "source");

    i = 0;
    for (const json& dj : as_array(field(j, "defenders", "scenario"), "defenders")) {
        std::string where = "defenders[" + std::to_string(i++) + "]";
        Defender d;
        d.id = as_string(field(dj, "id", where), where + ".id");
        for (const json& aj :
             as_array(field(dj, "assets", where), where + ".assets")) {
            std::string aw = where + ".assets";
            d.assets.emplace_back(as_string(field(aj, "node", aw), aw + ".node"),
                                  as_number(field(aj, "loss", aw), aw + ".loss"));
        }
        for (const json& ek : as_array(field(dj, "edges", where), where + ".edges"))
            d.edges.push_back(as_edge_key(ek, where + ".edges"));
        d.budget = as_number(field(dj, "budget", where), where + ".budget");
        s.defenders.push_back(std::move(d));
    }

    if (j.contains("params")) {
        const json& p = j.at("params");
        if (!p.is_object())
            malformed("params must be an object");
        if (p.contains("h"))
            s.params.h = as_number(p.at("h"), "params.h");
        if (p.contains("tau_I"))
            s.params.tau_I = as_number(p.at("tau_I"), "params.tau_I");
        if (p.contains("eps_dev"))
            s.params.eps_dev = as_number(p.at("eps_dev"), "params.eps_dev");
        if (p.contains("stability_window"))
            s.params.stability_window = static_cast<int>(
                as_integer(p.at("stability_window"), "params.stability_window"));
    }

    if (j.contains("solver")) {
        const json& c = j.at("solver");
        if (!c.is_object())
            malformed("solver must be an object");
        if (c.contains("max_iterations"))
            s.solver.max_iterations = static_cast<int>(
                as_integer(c.at("max_iterations"), "solver.max_iterations"));
        if (c.contains("tolerance"))
            s.solver.tolerance = as_number(c.at("tolerance"), "solver.tolerance");
        if (c.contains("step0"))
            s.solver.step0 = as_number(c.at("step0"), "solver.step0");
        if (c.contains("smoothing"))
            s.solver.smoothing = as_number(c.at("smoothing"), "solver.smoothing");
    }

    if (j.contains("events")) {
        i = 0;
        for (const json& ej : as_array(j.at("events"), "events")) {
            std::string where = "events[" + std::to_string(i++) + "]";
            SimEvent e;
            e.time = as_number(field(ej, "time", where), where + ".time");
            e.module = as_string(field(ej, "module", where), where + ".module");
            std::string kind = as_string(field(ej, "kind", where), where + ".kind");
            if (kind == "set_attack_risk") {
                e.kind = SimEvent::Kind::SetAttackRisk;
                e.risk_value = as_number(field(ej, "value", where), where + ".value");
            } else if (kind == "set_fail") {
                e.kind = SimEvent::Kind::SetFail;
                e.fail_value = as_boolean(field(ej, "value", where), where + ".value");
            } else {
                malformed(where + ".kind '" + kind + "' is not an event kind");
            }
            s.events.push_back(std::move(e));
        }
    }

    if (j.contains("steps"))
        s.steps = as_integer(j.at("steps"), "steps");

    return s;
}

void validate(const Scenario& s) {
    GameSpec game = game_from(s); // graph + defender semantics
    if (s.params.h <= 0.0)
        throw ValidationError("InvalidParams", "sample period h must be positive");
    if (s.params.tau_I < 0.0)
        throw ValidationError("InvalidParams", "tau_I must be nonnegative");
    if (s.params.eps_dev < 0.0)
        throw ValidationError("InvalidParams", "eps_dev must be nonnegative");
    if (s.params.stability_window < 1)
        throw ValidationError("InvalidParams",
                              "stability_window must be at least 1");
    if (s.solver.max_iterations < 1)
        throw ValidationError("InvalidSolverConfig",
                              "max_iterations must be at least 1");
    if (s.solver.tolerance <= 0.0)
        throw ValidationError("InvalidSolverConfig", "tolerance must be positive");
    if (s.solver.step0 < 0.0)
        throw ValidationError("InvalidSolverConfig", "step0 must be nonnegative");
    if (s.solver.smoothing < 0.0)
        throw ValidationError("InvalidSolverConfig", "smoothing must be nonnegative");
    if (s.steps < 0)
        throw ValidationError("InvalidStepCount", "steps must be nonnegative");
    std::vector<std::string> ids;
    for (const Defender& d : game.defenders)
        ids.push_back(d.id);
    validate_schedule(s.events, ids);
}

} // namespace

Scenario parse_scenario_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError("MalformedJson", e.what());
    }
    Scenario s = decode(j);
    validate(s);
    return s;
}

Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("IoError", "cannot read scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
    json j;
    j["nodes"] = json::array();
    for (const NodeId& n : s.nodes)
        j["nodes"].push_back(n);
    j["edges"] = json::array();
    for (const Edge& e : s.edges)
        j["edges"].push_back({{"from", e.from}, {"to", e.to}, {"p0", e.p0}});
    j["source"] = s.source;
    j["defenders"] = json::array();
    for (const Defender& d : s.defenders) {
        json dj;
        dj["id"] = d.id;
        dj["assets"] = json::array();
        for (const auto& [node, loss] : d.assets)
            dj["assets"].push_back({{"node", node}, {"loss", loss}});
        dj["edges"] = json::array();
        for (const EdgeKey& k : d.edges)
            dj["edges"].push_back({k.first, k.second});
        dj["budget"] = d.budget;
        j["defenders"].push_back(std::move(dj));
    }
    j["params"] = {{"h", s.params.h},
                   {"tau_I", s.params.tau_I},
                   {"eps_dev", s.params.eps_dev},
                   {"stability_window", s.params.stability_window}};
    j["solver"] = {{"max_iterations", s.solver.max_iterations},
                   {"tolerance", s.solver.tolerance},
                   {"step0", s.solver.step0},
                   {"smoothing", s.solver.smoothing}};
    j["events"] = json::array();
    for (const SimEvent& e : s.events) {
        json ej;
        ej["time"] = e.time;
        ej["module"] = e.module;
        if (e.kind == SimEvent::Kind::SetAttackRisk) {
            ej["kind"] = "set_attack_risk";
            ej["value"] = e.risk_value;
        } else {
            ej["kind"] = "set_fail";
            ej["value"] = e.fail_value;
        }
        j["events"].push_back(std::move(ej));
    }
    j["steps"] = s.steps;
    return j.dump(2) + "\n";
}

void write_scenario(const Scenario& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("IoError", "cannot open '" + path + "' for writing");
    out << serialize_scenario(s);
    if (!out)
        throw Error("IoError", "failed writing '" + path + "'");
}

Scenario build_der1() {
    Scenario s;
    s.nodes = {"v_s", "w1", "w2", "ev", "pv", "G0", "G1", "G"};
    // One stepping-stone chain per defender, attacker entry at v_s, plus the
    // cross edge through w1: that HMI reaches both equipment stages.
    s.edges = {
        {"v_s", "w1", 0.8}, {"w1", "ev", 0.8}, {"ev", "G1", 0.8},
        {"G1", "G", 0.8},   {"w1", "pv", 0.8}, {"v_s", "w2", 0.8},
        {"w2", "pv", 0.8},  {"pv", "G0", 0.8}, {"G0", "G", 0.8},
    };
    s.source = "v_s";

    Defender d1;
    d1.id = "1"; // EV subnetwork
    d1.assets = {{"G1", 100.0}, {"G", 50.0}};
    d1.edges = {{"v_s", "w1"}, {"w1", "ev"}, {"ev", "G1"}, {"G1", "G"},
                {"w1", "pv"}};
    d1.budget = 2.0;

    Defender d2;
    d2.id = "2"; // PV subnetwork
    d2.assets = {{"G0", 100.0}, {"G", 50.0}};
    d2.edges = {{"v_s", "w2"}, {"w2", "pv"}, {"pv", "G0"}, {"G0", "G"}};
    d2.budget = 2.0;

    s.defenders = {d1, d2};

    // A standing incident on both subnetworks from the start, so each module
    // publishes its true investments and can react to the other's.
    SimEvent r1;
    r1.time = 0.0;
    r1.module = "1";
    r1.kind = SimEvent::Kind::SetAttackRisk;
    r1.risk_value = 1.0;
    SimEvent r2 = r1;
    r2.module = "2";
    s.events = {r1, r2};
    s.steps = 200;
    // Equilibrium detection at 1e-4 needs best responses resolved finer than
    // that; the default temperature leaves the argmin dithering near path
    // ties at about the smoothing width.
    s.solver.smoothing = 1e-5;
    return s;
}

GameSpec game_from(const Scenario& s) {
    AttackGraph graph = AttackGraph::build(s.nodes, s.edges, s.source);
    return make_game(std::move(graph), s.defenders);
}

std::vector<HioaSignature> modules_from(const Scenario& s) {
    GameSpec game = game_from(s);
    std::vector<HioaSignature> modules;
    for (const Defender& d : game.defenders)
        modules.push_back(make_defender_module(game, d.id, s.params, s.solver));
    return modules;
}

SimRun run_scenario(const Scenario& s) {
    return run(modules_from(s), s.events, s.params, s.steps);
}

void export_trace(const Trace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("IoError", "cannot open '" + path + "' for writing");
    out << trace_to_csv(trace);
    if (!out)
        throw Error("IoError", "failed writing '" + path + "'");
}

namespace {

[[noreturn]] void bad_trace(std::size_t line, const std::string& what) {
    throw ParseError("MalformedTrace",
                     "line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& text, std::size_t line,
                    const std::string& what) {
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        bad_trace(line, what + " '" + text + "' is not a number");
    return value;
}

} // namespace

Trace import_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("IoError", "cannot read trace file '" + path + "'");

    Trace trace;
    std::string line;
    std::size_t lineno = 0;
    bool have_record = false;
    TraceRecord current;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != "step,time,module,mode,variable,value")
                bad_trace(lineno, "unexpected header '" + line + "'");
            continue;
        }
        if (line.empty())
            bad_trace(lineno, "empty row");
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (fields.size() != 6)
            bad_trace(lineno, "expected 6 fields, got " +
                                  std::to_string(fields.size()));

        long step = 0;
        auto res = std::from_chars(fields[0].data(),
                                   fields[0].data() + fields[0].size(), step);
        if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size())
            bad_trace(lineno, "step '" + fields[0] + "' is not an integer");
        double time = parse_double(fields[1], lineno, "time");

        TraceValue value;
        if (fields[5] == "true")
            value = true;
        else if (fields[5] == "false")
            value = false;
        else
            value = parse_double(fields[5], lineno, "value");

        bool same_record = have_record && current.step == step &&
                           current.time == time && current.module == fields[2] &&
                           current.mode == fields[3];
        if (!same_record) {
            if (have_record)
                trace.records.push_back(std::move(current));
            current = TraceRecord{};
            current.step = step;
            current.time = time;
            current.module = fields[2];
            current.mode = fields[3];
            have_record = true;
        }
        current.values.emplace_back(fields[4], value);
    }
    if (have_record)
        trace.records.push_back(std::move(current));
    return trace;
}

} // namespace secgame
