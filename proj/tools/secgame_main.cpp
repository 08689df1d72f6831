#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "secgame/errors.hpp"
#include "secgame/scenario.hpp"

namespace {

using namespace secgame;

void print_vector(const std::string& label, const Defender& d,
                  const Eigen::VectorXd& x) {
    std::cout << label << ":\n";
    for (std::size_t i = 0; i < d.edges.size(); ++i)
        std::cout << "  " << d.edges[i].first << " -> " << d.edges[i].second
                  << "  " << x[static_cast<Eigen::Index>(i)] << "\n";
}

JointProfile profile_from_file(const std::string& path, const GameSpec& game) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("IoError", "cannot read profile file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("MalformedJson", e.what());
    }
    if (!j.is_object())
        throw ParseError("MalformedScenario",
                         "profile root must map defender ids to vectors");
    JointProfile profile;
    for (const auto& [id, arr] : j.items()) {
        game.defender(id); // UnknownDefender on bad keys
        if (!arr.is_array())
            throw ParseError("MalformedScenario",
                             "profile entry '" + id + "' must be an array");
        Eigen::VectorXd x(arr.size());
        Eigen::Index i = 0;
        for (const auto& v : arr) {
            if (!v.is_number())
                throw ParseError("MalformedScenario",
                                 "profile entry '" + id + "' holds a non-number");
            x[i++] = v.get<double>();
        }
        profile.emplace(id, std::move(x));
    }
    return profile;
}

int do_check(const std::string& path) {
    Scenario s = parse_scenario(path);
    GameSpec game = game_from(s);
    std::cout << "scenario: " << path << "\n"
              << "graph: " << game.graph.nodes().size() << " nodes, "
              << game.graph.edges().size() << " edges, acyclic, source "
              << game.graph.source() << "\n";
    for (const Defender& d : game.defenders)
        std::cout << "defender " << d.id << ": " << d.edges.size() << " edges, "
                  << d.assets.size() << " assets, budget " << d.budget << "\n";

    auto modules = modules_from(s);
    bool all_compatible = true;
    for (std::size_t i = 0; i < modules.size(); ++i)
        for (std::size_t j = i + 1; j < modules.size(); ++j) {
            CompatibilityVerdict v = check_compatibility(modules[i], modules[j]);
            std::cout << "compatibility " << modules[i].name << " / "
                      << modules[j].name << ": "
                      << (v.compatible ? "ok" : "violated") << "\n";
            for (const std::string& violation : v.violations)
                std::cout << "  " << violation << "\n";
            all_compatible = all_compatible && v.compatible;
        }
    for (const HioaSignature& m : modules) {
        std::vector<std::string> events;
        for (const auto* v : m.input_variables())
            events.push_back(v->name);
        E1Verdict verdict = check_input_transition_enabled(m, events);
        std::cout << "input-enabled " << m.name << ": "
                  << (verdict.enabled ? "ok" : "violated") << " ("
                  << verdict.gaps.size() << " stutter-covered pairs)\n";
        if (!verdict.enabled)
            all_compatible = false;
    }
    if (!all_compatible) {
        std::cerr << "check failed\n";
        return 2;
    }
    std::cout << "check passed\n";
    return 0;
}

int do_simulate(const std::string& path, long steps_override, bool has_steps,
                const std::string& out, bool strict) {
    Scenario s = parse_scenario(path);
    if (has_steps) {
        if (steps_override < 0)
            throw ValidationError("InvalidStepCount", "steps must be nonnegative");
        s.steps = steps_override;
    }
    SimRun result = run_scenario(s);
    if (!out.empty())
        export_trace(result.trace, out);

    long solver_failures = 0;
    for (const TraceRecord& rec : result.trace.records)
        for (const auto& [name, value] : rec.values)
            if (name == "solver_ok_" + rec.module &&
                std::holds_alternative<bool>(value) && !std::get<bool>(value))
                ++solver_failures;

    std::cout << "simulated " << result.steps << " steps, "
              << result.trace.records.size() << " records\n";
    if (!out.empty())
        std::cout << "trace written to " << out << "\n";
    if (solver_failures > 0) {
        std::cout << "solver failed to converge on " << solver_failures
                  << " record(s)\n";
        if (strict) {
            std::cerr << "strict mode: treating nonconvergence as failure\n";
            return 3;
        }
    }
    return 0;
}

int do_best_response(const std::string& path, const std::string& id,
                     const std::string& opponents_path, bool oracle,
                     double grid_step) {
    Scenario s = parse_scenario(path);
    GameSpec game = game_from(s);
    const Defender& d = game.defender(id);
    JointProfile others;
    if (!opponents_path.empty())
        others = profile_from_file(opponents_path, game);

    BestResponseResult r;
    if (oracle) {
        r = best_response_oracle(game, id, others, grid_step);
        print_vector("oracle best response for defender " + id, d, r.x);
    } else {
        r = best_response(game, id, others, s.solver);
        print_vector("best response for defender " + id, d, r.x);
        std::cout << "converged: " << (r.converged ? "true" : "false")
                  << " after " << r.iterations << " iterations\n";
    }
    std::cout << "cost: " << r.cost << "\n";
    return 0;
}

int do_der1(const std::string& out) {
    Scenario s = build_der1();
    if (out.empty()) {
        std::cout << serialize_scenario(s);
    } else {
        write_scenario(s, out);
        std::cout << "scenario written to " << out << "\n";
    }
    return 0;
}

int do_equilibrium(const std::string& path, double tol) {
    Scenario s = parse_scenario(path);
    SimRun result = run_scenario(s);
    result.equilibrium_step = detect_equilibrium(result, tol);
    if (result.equilibrium_step)
        std::cout << "equilibrium at step " << *result.equilibrium_step
                  << " (tol " << tol << ")\n";
    else
        std::cout << "no equilibrium within " << result.steps << " steps (tol "
                  << tol << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"simulator and solver for interdependent subnetwork security"};
    app.require_subcommand(1);

    std::string scenario_path, out_path, defender_id, opponents_path;
    long steps = 0;
    bool strict = false, oracle = false;
    double grid_step = 0.1, tol = 1e-4;

    CLI::App* check = app.add_subcommand("check", "validate a scenario file");
    check->add_option("scenario", scenario_path)->required();

    CLI::App* simulate = app.add_subcommand("simulate", "run and export a trace");
    simulate->add_option("scenario", scenario_path)->required();
    CLI::Option* steps_opt = simulate->add_option("--steps", steps);
    simulate->add_option("--out", out_path);
    simulate->add_flag("--strict", strict);

    CLI::App* br = app.add_subcommand("best-response",
                                      "best response for one defender");
    br->add_option("scenario", scenario_path)->required();
    br->add_option("--defender", defender_id)->required();
    br->add_option("--opponents", opponents_path);
    br->add_flag("--oracle", oracle);
    br->add_option("--grid-step", grid_step);

    CLI::App* der1 = app.add_subcommand("der1", "emit the built-in scenario");
    der1->add_option("--out", out_path);

    CLI::App* equilibrium =
        app.add_subcommand("equilibrium", "run and report settlement");
    equilibrium->add_option("scenario", scenario_path)->required();
    equilibrium->add_option("--tol", tol);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (check->parsed())
            return do_check(scenario_path);
        if (simulate->parsed())
            return do_simulate(scenario_path, steps, steps_opt->count() > 0,
                               out_path, strict);
        if (br->parsed())
            return do_best_response(scenario_path, defender_id, opponents_path,
                                    oracle, grid_step);
        if (der1->parsed())
            return do_der1(out_path);
        if (equilibrium->parsed())
            return do_equilibrium(scenario_path, tol);
    } catch (const secgame::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const secgame::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const secgame::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
