#include <algorithm>
#include <functional>
#include <random>
#include <string>

#include "doctest.h"
#include "secgame/defender_module.hpp"
#include "secgame/errors.hpp"
#include "secgame/hioa.hpp"
#include "secgame/scenario.hpp"

using namespace secgame;

namespace {

std::string code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// Two-mode toy automaton: a timer that charges in "idle" and fires into
// "busy" at 2.0, plus a boolean kill switch checked first from busy.
HioaSignature toy() {
    HioaSignature sig;
    sig.name = "toy";
    sig.modes = {"idle", "busy"};
    sig.variables = {
        {"go", VariableDecl::Kind::Input, VariableDecl::Type::Boolean, 1, false},
        {"tau", VariableDecl::Kind::Internal, VariableDecl::Type::Timer, 1, false},
        {"level", VariableDecl::Kind::Output, VariableDecl::Type::Real, 1, false},
    };
    sig.transitions = {
        {"idle", Guard::compare("tau", Guard::Cmp::Ge, 2.0), "arm", "busy"},
        {"busy", Guard::is_true("go"), "rewind", "idle"},
    };
    sig.updates["tick"] = [](const Valuation& s, const Valuation&) {
        Valuation out = s;
        out["tau"] = get_real(s, "tau") + 1.0;
        return out;
    };
    sig.updates["hold"] = [](const Valuation& s, const Valuation&) { return s; };
    sig.resets["arm"] = [](const Valuation& s, const Valuation&) {
        Valuation out = s;
        out["tau"] = 0.0;
        out["level"] = get_real(s, "level") + 1.0;
        return out;
    };
    sig.resets["rewind"] = [](const Valuation& s, const Valuation&) {
        Valuation out = s;
        out["tau"] = 0.0;
        return out;
    };
    sig.mode_update = {{"idle", "tick"}, {"busy", "hold"}};
    sig.initials = {{"idle", Valuation{{"tau", 0.0}, {"level", 0.0}}}};
    return sig;
}

} // namespace

TEST_CASE("valuation lookups and equality") {
    Valuation v{{"a", 1.5}, {"b", true}, {"c", Eigen::VectorXd::Zero(2)}};
    CHECK(get_real(v, "a") == 1.5);
    CHECK(get_bool(v, "b"));
    CHECK(get_vector(v, "c").size() == 2);
    CHECK(code_of([&] { get_real(v, "b"); }) == "TypeError");
    CHECK(code_of([&] { get_real(v, "zzz"); }) == "UnknownVariable");

    Valuation w = v;
    CHECK(valuation_equal(v, w));
    w["c"] = Eigen::VectorXd::Ones(2);
    CHECK_FALSE(valuation_equal(v, w));
    CHECK_FALSE(value_equal(Value(1.0), Value(true)));
    CHECK_FALSE(value_equal(Value(Eigen::VectorXd::Zero(2)),
                            Value(Eigen::VectorXd::Zero(3))));
}

TEST_CASE("guard evaluation") {
    Valuation state{{"tau", 3.0}, {"risk", 1.0},
                    {"x", Eigen::VectorXd::Zero(2)}};
    Valuation inputs{{"flag", true}, {"risk_seen", 0.0},
                     {"x_seen", Eigen::VectorXd::Constant(2, 0.5)}};

    CHECK(Guard::always_true().evaluate(state, inputs));
    CHECK(Guard::is_true("flag").evaluate(state, inputs));
    CHECK(Guard::compare("tau", Guard::Cmp::Ge, 3.0).evaluate(state, inputs));
    CHECK_FALSE(Guard::compare("tau", Guard::Cmp::Lt, 3.0).evaluate(state, inputs));
    CHECK(Guard::approx_equal("tau", 3.0 + 1e-10, 1e-9).evaluate(state, inputs));
    CHECK(Guard::scalar_differs("risk", "risk_seen").evaluate(state, inputs));
    CHECK(Guard::vector_gap_exceeds("x", "x_seen", 0.4).evaluate(state, inputs));
    CHECK_FALSE(Guard::vector_gap_exceeds("x", "x_seen", 0.6).evaluate(state, inputs));
    CHECK(Guard::negate(Guard::is_true("flag")).evaluate(state, inputs) == false);
    CHECK(Guard::any_of({}).evaluate(state, inputs) == false);
    CHECK(Guard::all_of({}).evaluate(state, inputs));

    SUBCASE("referenced variables are collected") {
        std::set<std::string> names;
        Guard::all_of({Guard::is_true("flag"),
                       Guard::vector_gap_exceeds("x", "x_seen", 0.1)})
            .referenced_variables(names);
        CHECK(names == std::set<std::string>{"flag", "x", "x_seen"});
    }
    SUBCASE("mismatched vector sizes are a type error") {
        Valuation bad = inputs;
        bad["x_seen"] = Eigen::VectorXd::Zero(3);
        CHECK(code_of([&] {
                  Guard::vector_gap_exceeds("x", "x_seen", 0.1).evaluate(state, bad);
              }) == "TypeError");
    }
    SUBCASE("text renders something readable") {
        CHECK(Guard::compare("tau", Guard::Cmp::Ge, 3.0).text() == "tau >= 3");
        CHECK(Guard::negate(Guard::is_true("f")).text().find("f") !=
              std::string::npos);
    }
}

TEST_CASE("signature validation") {
    HioaSignature sig = toy();
    CHECK_NOTHROW(validate_signature(sig));

    SUBCASE("duplicate variable names") {
        sig.variables.push_back(sig.variables.front());
        CHECK(code_of([&] { validate_signature(sig); }) == "DuplicateVariable");
    }
    SUBCASE("transition from unknown mode") {
        sig.transitions[0].from = "limbo";
        CHECK(code_of([&] { validate_signature(sig); }) == "UnknownMode");
    }
    SUBCASE("missing reset") {
        sig.transitions[0].reset = "nope";
        CHECK(code_of([&] { validate_signature(sig); }) == "UnknownReset");
    }
    SUBCASE("guard over undeclared variable") {
        sig.transitions[0].guard = Guard::is_true("ghost");
        CHECK(code_of([&] { validate_signature(sig); }) == "UnknownVariable");
    }
    SUBCASE("initial valuation must cover the state exactly") {
        sig.initials[0].second.erase("level");
        CHECK(code_of([&] { validate_signature(sig); }) != "");
    }
    SUBCASE("outputs must be state variables, inputs must not") {
        HioaSignature bad = toy();
        bad.initials[0].second["go"] = true; // input smuggled into state
        CHECK(code_of([&] { validate_signature(bad); }) != "");
    }
}

TEST_CASE("mode invariant is the negated guard conjunction") {
    HioaSignature sig;
    sig.name = "inv";
    sig.modes = {"watch", "sink"};
    sig.variables = {
        {"Fail_Event", VariableDecl::Kind::Input, VariableDecl::Type::Boolean, 1, false},
        {"tau", VariableDecl::Kind::Internal, VariableDecl::Type::Timer, 1, false},
    };
    sig.transitions = {
        {"watch", Guard::is_true("Fail_Event"), "r", "sink"},
    };
    sig.resets["r"] = [](const Valuation& s, const Valuation&) { return s; };
    sig.updates["u"] = [](const Valuation& s, const Valuation&) { return s; };
    sig.mode_update = {{"watch", "u"}, {"sink", "u"}};
    sig.initials = {{"watch", Valuation{{"tau", 0.0}}}};
    validate_signature(sig);

    Guard inv = mode_invariant(sig, "watch");
    CHECK(inv.evaluate({{"tau", 0.0}}, {{"Fail_Event", false}}));
    CHECK_FALSE(inv.evaluate({{"tau", 0.0}}, {{"Fail_Event", true}}));

    // No outgoing transitions: constant true.
    CHECK(mode_invariant(sig, "sink").evaluate({}, {}));
    CHECK(code_of([&] { mode_invariant(sig, "limbo"); }) == "UnknownMode");

    SUBCASE("two guards negate as a pair") {
        sig.transitions.push_back(
            {"watch", Guard::compare("tau", Guard::Cmp::Ge, 2.0), "r", "sink"});
        Guard both = mode_invariant(sig, "watch");
        CHECK(both.evaluate({{"tau", 1.0}}, {{"Fail_Event", false}}));
        CHECK_FALSE(both.evaluate({{"tau", 2.0}}, {{"Fail_Event", false}}));
        CHECK_FALSE(both.evaluate({{"tau", 1.0}}, {{"Fail_Event", true}}));
    }
    SUBCASE("invariant is false exactly when some guard fires") {
        std::mt19937 rng(23);
        std::uniform_real_distribution<double> u(0.0, 4.0);
        std::bernoulli_distribution coin(0.5);
        for (int i = 0; i < 200; ++i) {
            Valuation state{{"tau", u(rng)}};
            Valuation inputs{{"Fail_Event", coin(rng)}};
            bool any_guard = false;
            for (const Transition& t : sig.transitions)
                if (t.from == "watch" && t.guard.evaluate(state, inputs))
                    any_guard = true;
            CHECK(mode_invariant(sig, "watch").evaluate(state, inputs) ==
                  !any_guard);
        }
    }
}

TEST_CASE("step semantics") {
    HioaSignature sig = toy();
    Valuation state{{"tau", 0.0}, {"level", 0.0}};
    Valuation inputs{{"go", false}};

    // Flow branch until the timer guard trips.
    StepResult r = step(sig, "idle", state, inputs);
    CHECK(r.mode == "idle");
    CHECK_FALSE(r.fired_transition.has_value());
    CHECK(get_real(r.state, "tau") == 1.0);

    r = step(sig, r.mode, r.state, inputs);
    CHECK(get_real(r.state, "tau") == 2.0);

    // Guard satisfied: the transition fires instead of the update.
    r = step(sig, r.mode, r.state, inputs);
    CHECK(r.mode == "busy");
    CHECK(r.fired_transition == std::size_t{0});
    CHECK(get_real(r.state, "tau") == 0.0);
    CHECK(get_real(r.state, "level") == 1.0);
    CHECK(get_real(r.outputs, "level") == 1.0);
    CHECK(r.outputs.count("tau") == 0); // outputs restrict to declared outputs

    SUBCASE("determinism") {
        StepResult again = step(sig, "busy", r.state, inputs);
        StepResult twice = step(sig, "busy", r.state, inputs);
        CHECK(again.mode == twice.mode);
        CHECK(valuation_equal(again.state, twice.state));
        CHECK(valuation_equal(again.outputs, twice.outputs));
    }
    SUBCASE("first declared guard wins on ties") {
        HioaSignature race = toy();
        race.transitions = {
            {"idle", Guard::compare("tau", Guard::Cmp::Ge, 0.0), "arm", "busy"},
            {"idle", Guard::compare("tau", Guard::Cmp::Ge, 0.0), "rewind", "idle"},
        };
        StepResult tie = step(race, "idle", state, inputs);
        CHECK(tie.fired_transition == std::size_t{0});
        CHECK(tie.mode == "busy");
    }
    SUBCASE("bad valuations are rejected") {
        CHECK(code_of([&] { step(sig, "limbo", state, inputs); }) == "UnknownMode");
        Valuation typo = state;
        typo["tau"] = true;
        CHECK(code_of([&] { step(sig, "idle", typo, inputs); }) == "TypeError");
        Valuation missing = state;
        missing.erase("level");
        CHECK(code_of([&] { step(sig, "idle", missing, inputs); }) != "");
    }
    SUBCASE("missing mode update is an error") {
        HioaSignature hole = toy();
        hole.mode_update.erase("idle");
        CHECK(code_of([&] { step(hole, "idle", state, inputs); }) ==
              "UndefinedUpdate");
    }
}

TEST_CASE("compatibility of the built-in defender pair") {
    Scenario scn = build_der1();
    GameSpec game = game_from(scn);
    HioaSignature d1 = make_defender_module(game, "1", scn.params, scn.solver);
    HioaSignature d2 = make_defender_module(game, "2", scn.params, scn.solver);

    CompatibilityVerdict v = check_compatibility(d1, d2);
    CHECK(v.compatible);
    CHECK(v.violations.empty());

    CompatibilityVerdict reversed = check_compatibility(d2, d1);
    CHECK(reversed.compatible == v.compatible);

    auto has_clause = [](const CompatibilityVerdict& verdict,
                         const std::string& tag) {
        return std::any_of(verdict.violations.begin(), verdict.violations.end(),
                           [&](const std::string& s) {
                               return s.find(tag) != std::string::npos;
                           });
    };

    SUBCASE("shared internal name violates the state clause") {
        HioaSignature a = d1, b = d2;
        a.variables.push_back({"tau_shared", VariableDecl::Kind::Internal,
                               VariableDecl::Type::Timer, 1, false});
        b.variables.push_back({"tau_shared", VariableDecl::Kind::Internal,
                               VariableDecl::Type::Timer, 1, false});
        CompatibilityVerdict bad = check_compatibility(a, b);
        CHECK_FALSE(bad.compatible);
        CHECK(has_clause(bad, "X1∩X2"));
        CHECK(check_compatibility(b, a).compatible == bad.compatible);
    }
    SUBCASE("unconsumed wired output violates the wiring clause") {
        HioaSignature b = d2;
        std::erase_if(b.variables, [](const VariableDecl& d) {
            return d.name == "x_1";
        });
        CompatibilityVerdict bad = check_compatibility(d1, b);
        CHECK_FALSE(bad.compatible);
        CHECK(has_clause(bad, "Y1⊆U2"));
        CHECK(has_clause(check_compatibility(b, d1), "Y2⊆U1"));
    }
    SUBCASE("duplicate wired output violates the output clause") {
        HioaSignature a = d1;
        for (VariableDecl& d : a.variables)
            if (d.name == "x_1")
                d.name = "x_2";
        CHECK(has_clause(check_compatibility(a, d2), "Y1∩Y2"));
    }
    SUBCASE("monitor outputs are exempt from wiring") {
        // p_1 and p_2 are monitor outputs no peer consumes; compatibility
        // held above, so the exemption is already exercised. Flipping the
        // flag turns them into dangling wired outputs.
        HioaSignature a = d1;
        for (VariableDecl& d : a.variables)
            if (d.name == "p_1")
                d.monitor = false;
        CHECK_FALSE(check_compatibility(a, d2).compatible);
    }
}

TEST_CASE("composition of the built-in defender pair") {
    Scenario scn = build_der1();
    GameSpec game = game_from(scn);
    HioaSignature d1 = make_defender_module(game, "1", scn.params, scn.solver);
    HioaSignature d2 = make_defender_module(game, "2", scn.params, scn.solver);
    HioaSignature both = compose(d1, d2);

    CHECK(both.modes.size() == 16); // 4 x 4 product
    CHECK_NOTHROW(validate_signature(both));

    std::vector<std::string> external;
    for (const VariableDecl* v : both.input_variables())
        external.push_back(v->name);
    std::sort(external.begin(), external.end());
    CHECK(external == std::vector<std::string>{"Attack_Risk_1", "Attack_Risk_2",
                                               "Fail_Event_1", "Fail_Event_2"});

    // Wired investment vectors become state of the product.
    CHECK(both.find_variable("x_1") != nullptr);
    CHECK(both.find_variable("x_1")->is_state());
    CHECK(both.initials.size() == 1);
    CHECK(both.initials[0].first == "startup|startup");

    SUBCASE("incompatible pairs refuse to compose") {
        CHECK(code_of([&] { compose(d1, d1); }) == "Incompatible");
    }
    SUBCASE("composed automaton steps with only external inputs") {
        Valuation inputs{{"Attack_Risk_1", 1.0}, {"Fail_Event_1", false},
                         {"Attack_Risk_2", 1.0}, {"Fail_Event_2", false}};
        StepResult r = step(both, both.initials[0].first,
                            both.initials[0].second, inputs);
        CHECK(r.mode == "startup|startup");
        CHECK(get_real(r.state, "tau_1") == 1.0);
        CHECK(get_real(r.state, "tau_2") == 1.0);
        // Warm up past tau_I, then both sides calibrate one at a time.
        for (int i = 0; i < 2; ++i)
            r = step(both, r.mode, r.state, inputs);
        r = step(both, r.mode, r.state, inputs);
        CHECK(r.mode == "normal|startup"); // interleaving: a-side fires first
        r = step(both, r.mode, r.state, inputs);
        CHECK(r.mode == "normal|normal");
    }
}

TEST_CASE("input transition enabledness") {
    Scenario scn = build_der1();
    GameSpec game = game_from(scn);
    HioaSignature d1 = make_defender_module(game, "1", scn.params, scn.solver);

    std::vector<std::string> events{"Attack_Risk_1", "Fail_Event_1", "x_2"};
    E1Verdict v = check_input_transition_enabled(d1, events);
    CHECK(v.enabled);
    // Startup ignores failures and deviations; fail ignores everything. The
    // gaps are reported even though stutter completion covers them.
    CHECK_FALSE(v.gaps.empty());

    SUBCASE("without stutter completion the gaps become failures") {
        HioaSignature strict = d1;
        strict.stutter_complete = false;
        CHECK_FALSE(check_input_transition_enabled(strict, events).enabled);
    }
    SUBCASE("empty alphabet is vacuously enabled") {
        HioaSignature strict = d1;
        strict.stutter_complete = false;
        E1Verdict empty = check_input_transition_enabled(strict, {});
        CHECK(empty.enabled);
        CHECK(empty.gaps.empty());
    }
    SUBCASE("a constructed gap names the mode and event") {
        HioaSignature sig = toy();
        sig.stutter_complete = false;
        E1Verdict gap = check_input_transition_enabled(sig, {"go"});
        CHECK_FALSE(gap.enabled);
        REQUIRE_FALSE(gap.gaps.empty());
        CHECK(gap.gaps[0] == std::pair<std::string, std::string>{"idle", "go"});
    }
}

TEST_CASE("guard and invariant complementarity under step") {
    // At any valuation, step fires a transition exactly when the pre-step
    // mode invariant is false.
    HioaSignature sig = toy();
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < 400; ++i) {
        std::string mode = coin(rng) ? "idle" : "busy";
        Valuation state{{"tau", u(rng)}, {"level", u(rng)}};
        Valuation inputs{{"go", coin(rng)}};
        bool inv = mode_invariant(sig, mode).evaluate(state, inputs);
        StepResult r = step(sig, mode, state, inputs);
        CHECK(r.fired_transition.has_value() == !inv);
    }
}
