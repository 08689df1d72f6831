#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "secgame/errors.hpp"
#include "secgame/security_game.hpp"

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

GameSpec single_edge_game(double budget = 1.0) {
    AttackGraph g = AttackGraph::build({"s", "t"}, {{"s", "t", 0.8}}, "s");
    Defender d{"d", {{"t", 100.0}}, {{"s", "t"}}, budget};
    return make_game(std::move(g), {d});
}

GameSpec two_path_game() {
    AttackGraph g = AttackGraph::build(
        {"s", "t1", "t2"}, {{"s", "t1", 0.8}, {"s", "t2", 0.8}}, "s");
    Defender d{"d", {{"t1", 100.0}, {"t2", 100.0}},
               {{"s", "t1"}, {"s", "t2"}}, 2.0};
    return make_game(std::move(g), {d});
}

GameSpec diamond_game(double budget = 3.0) {
    AttackGraph g = AttackGraph::build({"s", "a", "b", "t"},
                                       {{"s", "a", 0.9}, {"a", "t", 0.8},
                                        {"s", "b", 0.7}, {"b", "t", 0.6}},
                                       "s");
    Defender d{"d", {{"t", 50.0}},
               {{"s", "a"}, {"a", "t"}, {"s", "b"}, {"b", "t"}}, budget};
    return make_game(std::move(g), {d});
}

Eigen::VectorXd random_feasible(const Defender& d, std::mt19937& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd x(d.edges.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] = unit(rng);
    double total = x.sum();
    if (total > 0.0)
        x *= unit(rng) * d.budget / total;
    return x;
}

} // namespace

TEST_CASE("edge probability") {
    CHECK(edge_probability(0.8, 0.0) == 0.8);
    CHECK(edge_probability(0.8, std::log(2.0)) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(edge_probability(1.0, 0.0) == 1.0);
    CHECK(code_of([] { edge_probability(0.0, 0.0); }) == "InvalidProbability");
    CHECK(code_of([] { edge_probability(1.2, 0.0); }) == "InvalidProbability");
    CHECK(code_of([] { edge_probability(0.8, -0.1); }) == "NegativeInvestment");
}

TEST_CASE("game construction rejections") {
    AttackGraph g = AttackGraph::build({"s", "t"}, {{"s", "t", 0.8}}, "s");
    Defender ok{"d", {{"t", 1.0}}, {{"s", "t"}}, 1.0};
    CHECK_NOTHROW(make_game(g, {ok}));
    CHECK(code_of([&] { make_game(g, {ok}, "linear"); }) == "UnknownResponseKind");
    CHECK(code_of([&] { make_game(g, {ok, ok}); }) == "DuplicateDefender");
    Defender unnamed = ok;
    unnamed.id = "";
    CHECK(code_of([&] { make_game(g, {unnamed}); }) == "InvalidDefenderId");
    Defender broke = ok;
    broke.budget = -1.0;
    CHECK(code_of([&] { make_game(g, {broke}); }) == "NegativeBudget");
    Defender src_asset = ok;
    src_asset.assets = {{"s", 1.0}};
    CHECK(code_of([&] { make_game(g, {src_asset}); }) == "AssetIsSource");
    Defender neg_loss = ok;
    neg_loss.assets = {{"t", -2.0}};
    CHECK(code_of([&] { make_game(g, {neg_loss}); }) == "NegativeLoss");
    Defender ghost_edge = ok;
    ghost_edge.edges = {{"t", "s"}};
    CHECK(code_of([&] { make_game(g, {ghost_edge}); }) == "UnknownEdge");
    Defender ghost_asset = ok;
    ghost_asset.assets = {{"q", 1.0}};
    CHECK(code_of([&] { make_game(g, {ghost_asset}); }) == "UnknownNode");
}

TEST_CASE("total investments sum over controlling defenders") {
    AttackGraph g = AttackGraph::build({"s", "t"}, {{"s", "t", 0.8}}, "s");
    Defender d1{"d1", {{"t", 1.0}}, {{"s", "t"}}, 1.0};
    Defender d2{"d2", {{"t", 1.0}}, {{"s", "t"}}, 1.0};
    GameSpec game = make_game(std::move(g), {d1, d2});

    JointProfile profile{{"d1", Eigen::VectorXd::Constant(1, 0.25)},
                         {"d2", Eigen::VectorXd::Constant(1, 0.5)}};
    InvestmentMap total = total_investments(game, profile);
    CHECK(total.at({"s", "t"}) == doctest::Approx(0.75).epsilon(1e-15));

    SUBCASE("missing defenders contribute nothing") {
        profile.erase("d2");
        CHECK(total_investments(game, profile).at({"s", "t"}) ==
              doctest::Approx(0.25));
    }
    SUBCASE("wrong dimension is rejected") {
        profile["d1"] = Eigen::VectorXd::Zero(3);
        CHECK(code_of([&] { total_investments(game, profile); }) ==
              "DimensionMismatch");
    }
    SUBCASE("unknown ids are rejected") {
        profile["nope"] = Eigen::VectorXd::Zero(1);
        CHECK(code_of([&] { total_investments(game, profile); }) ==
              "UnknownDefender");
    }
}

TEST_CASE("defender cost") {
    AttackGraph g = AttackGraph::build({"s", "a", "t"},
                                       {{"s", "a", 0.9}, {"a", "t", 0.8}}, "s");
    Defender d{"d", {{"t", 100.0}}, {{"s", "a"}, {"a", "t"}}, 1.0};
    GameSpec game = make_game(g, {d});
    CHECK(defender_cost(game, "d", {}) == doctest::Approx(72.0).epsilon(1e-12));

    Defender free = d;
    free.assets = {{"t", 0.0}};
    GameSpec zero_game = make_game(g, {free});
    CHECK(defender_cost(zero_game, "d", {}) == 0.0);

    GameSpec single = single_edge_game();
    JointProfile profile{{"d", Eigen::VectorXd::Constant(1, 1.0)}};
    CHECK(defender_cost(single, "d", profile) ==
          doctest::Approx(100.0 * 0.8 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(code_of([&] { defender_cost(single, "nope", {}); }) ==
          "UnknownDefender");
}

TEST_CASE("feasibility check") {
    Defender d{"d", {}, {{"s", "a"}, {"s", "b"}}, 1.0};
    Eigen::VectorXd v(2);
    v << 0.5, 0.5;
    CHECK(check_feasible(v, d));
    v << 0.6, 0.6;
    CHECK_FALSE(check_feasible(v, d));
    v << -0.1, 1.1;
    CHECK_FALSE(check_feasible(v, d));
    CHECK(code_of([&] { check_feasible(Eigen::VectorXd::Zero(3), d); }) ==
          "DimensionMismatch");
}

TEST_CASE("budget projection") {
    Eigen::VectorXd interior(2);
    interior << 0.2, 0.3;
    CHECK(project_to_budget(interior, 1.0) == interior);

    Eigen::VectorXd negative(2);
    negative << -0.5, 0.25;
    Eigen::VectorXd clamped = project_to_budget(negative, 1.0);
    CHECK(clamped[0] == 0.0);
    CHECK(clamped[1] == 0.25);

    Eigen::VectorXd over(2);
    over << 2.0, 2.0;
    Eigen::VectorXd projected = project_to_budget(over, 1.0);
    CHECK(projected.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(projected[0] == doctest::Approx(0.5).epsilon(1e-12));

    Eigen::VectorXd single(1);
    single << 42.0;
    CHECK(project_to_budget(single, 1.0)[0] == 1.0); // exact clamp
}

TEST_CASE("oracle best responses") {
    GameSpec single = single_edge_game();
    BestResponseResult r = best_response_oracle(single, "d", {}, 0.1);
    REQUIRE(r.x.size() == 1);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-12));

    GameSpec twopath = two_path_game();
    r = best_response_oracle(twopath, "d", {}, 0.1);
    REQUIRE(r.x.size() == 2);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-12));

    SUBCASE("zero budget leaves the zero vector") {
        GameSpec broke = single_edge_game(0.0);
        r = best_response_oracle(broke, "d", {}, 0.1);
        CHECK(r.x[0] == 0.0);
    }
    SUBCASE("grid size guardrail") {
        GameSpec big = diamond_game(100.0);
        CHECK(code_of([&] { best_response_oracle(big, "d", {}, 1e-4); }) ==
              "GridTooLarge");
    }
    SUBCASE("oracle result is feasible") {
        GameSpec g = diamond_game();
        r = best_response_oracle(g, "d", {}, 0.25);
        CHECK(check_feasible(r.x, g.defender("d")));
    }
}

TEST_CASE("solver best responses") {
    GameSpec single = single_edge_game();
    BestResponseResult r = best_response(single, "d", {});
    REQUIRE(r.x.size() == 1);
    CHECK(std::abs(r.x[0] - 1.0) < 1e-4);
    CHECK(r.converged);

    GameSpec twopath = two_path_game();
    r = best_response(twopath, "d", {});
    CHECK(std::abs(r.x[0] - 1.0) < 1e-3);
    CHECK(std::abs(r.x[1] - 1.0) < 1e-3);

    SUBCASE("unreachable assets give the all-zero convention") {
        AttackGraph g = AttackGraph::build({"s", "t", "island"},
                                           {{"s", "t", 0.8}}, "s");
        Defender d{"d", {{"island", 100.0}}, {{"s", "t"}}, 1.0};
        GameSpec game = make_game(std::move(g), {d});
        r = best_response(game, "d", {});
        CHECK(r.x[0] == 0.0);
        CHECK(best_response_oracle(game, "d", {}, 0.1).x[0] == 0.0);
    }
    SUBCASE("solver config is validated") {
        SolverConfig bad;
        bad.tolerance = 0.0;
        CHECK(code_of([&] { best_response(single, "d", {}, bad); }) ==
              "InvalidSolverConfig");
        bad = SolverConfig{};
        bad.max_iterations = 0;
        CHECK(code_of([&] { best_response(single, "d", {}, bad); }) ==
              "InvalidSolverConfig");
    }
    SUBCASE("shared edge: opponent investment shifts the optimum down") {
        AttackGraph g = AttackGraph::build(
            {"s", "t", "u"}, {{"s", "t", 0.8}, {"s", "u", 0.8}}, "s");
        Defender d1{"d1", {{"t", 100.0}, {"u", 100.0}},
                    {{"s", "t"}, {"s", "u"}}, 2.0};
        Defender d2{"d2", {{"t", 100.0}}, {{"s", "t"}}, 1.0};
        GameSpec game = make_game(std::move(g), {d1, d2});
        JointProfile others{{"d2", Eigen::VectorXd::Constant(1, 1.0)}};
        BestResponseResult vs = best_response(game, "d1", others);
        BestResponseResult alone = best_response(game, "d1", {});
        // d2 already hardened s->t, so d1 moves weight toward s->u.
        CHECK(vs.x[0] < alone.x[0]);
        CHECK(vs.x[1] > alone.x[1]);
    }
}

TEST_CASE("cost convexity along random segments") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (GameSpec game : {single_edge_game(), two_path_game(), diamond_game()}) {
        const Defender& d = game.defender("d");
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::VectorXd a = random_feasible(d, rng);
            Eigen::VectorXd b = random_feasible(d, rng);
            double lambda = unit(rng);
            Eigen::VectorXd mid = lambda * a + (1.0 - lambda) * b;
            double ca = defender_cost(game, "d", {{"d", a}});
            double cb = defender_cost(game, "d", {{"d", b}});
            double cm = defender_cost(game, "d", {{"d", mid}});
            CHECK(cm <= lambda * ca + (1.0 - lambda) * cb + 1e-9);
        }
    }
}

TEST_CASE("solver dominates random feasible points") {
    std::mt19937 rng(13);
    for (GameSpec game : {single_edge_game(), two_path_game(), diamond_game()}) {
        const Defender& d = game.defender("d");
        BestResponseResult r = best_response(game, "d", {});
        CHECK(check_feasible(r.x, d));
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::VectorXd x = random_feasible(d, rng);
            CHECK(r.cost <= defender_cost(game, "d", {{"d", x}}) + 1e-9);
        }
    }
}

TEST_CASE("scaling losses by four scales costs exactly and keeps the argmin") {
    GameSpec game = diamond_game();
    GameSpec scaled = game;
    for (Defender& d : scaled.defenders)
        for (auto& [node, loss] : d.assets)
            loss *= 4.0;

    BestResponseResult base = best_response_oracle(game, "d", {}, 0.25);
    BestResponseResult big = best_response_oracle(scaled, "d", {}, 0.25);
    CHECK(big.x == base.x); // argmin untouched
    CHECK(big.cost == 4.0 * base.cost);

    std::mt19937 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd x = random_feasible(game.defender("d"), rng);
        CHECK(defender_cost(scaled, "d", {{"d", x}}) ==
              4.0 * defender_cost(game, "d", {{"d", x}}));
    }
}

TEST_CASE("cost never increases when investment increases") {
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> bump(0.0, 1.0);
    GameSpec game = diamond_game();
    const Defender& d = game.defender("d");
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd x = random_feasible(d, rng);
        double before = defender_cost(game, "d", {{"d", x}});
        Eigen::VectorXd more = x;
        more[static_cast<Eigen::Index>(trial % d.edges.size())] += bump(rng);
        CHECK(defender_cost(game, "d", {{"d", more}}) <= before + 1e-12);
    }
}
