#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "secgame/attack_graph.hpp"

namespace secgame {

// One defender's stake in the game: the assets it answers for, the edges it
// can harden, and the budget it may spread over them. The order of `edges`
// fixes the coordinate order of the defender's investment vector.
struct Defender {
    std::string id;
    std::vector<std::pair<NodeId, double>> assets; // (node, loss if compromised)
    std::vector<EdgeKey> edges;
    double budget = 0.0;
};

bool operator==(const Defender& a, const Defender& b);

// Investment vector over a defender's controlled edges.
using InvestmentVector = Eigen::VectorXd;
// Defender id -> that defender's investment vector.
using JointProfile = std::map<std::string, Eigen::VectorXd>;

// The full game: shared attack graph plus every defender. Immutable after
// make_game(); safe for concurrent reads.
struct GameSpec {
    AttackGraph graph;
    std::vector<Defender> defenders;
    std::string response_kind = "exponential";

    // Throws ValidationError "UnknownDefender".
    const Defender& defender(const std::string& id) const;
    int defender_index(const std::string& id) const;
};

// Validates defender ids (unique, nonempty), asset nodes (exist, not the
// source), controlled edges (exist in the graph), budgets/losses (>= 0) and
// the response kind ("exponential" is the only one shipped).
GameSpec make_game(AttackGraph graph, std::vector<Defender> defenders,
                   std::string response_kind = "exponential");

struct SolverConfig {
    int max_iterations = 5000;
    double tolerance = 1e-6; // stop when the step-to-step cost change drops below
    double step0 = 0.0;      // initial step size; 0 means budget / 10
    double smoothing = 0.01; // log-sum-exp temperature; 0 = exact subgradient
};

bool operator==(const SolverConfig& a, const SolverConfig& b);

// p0 * exp(-total_investment). Throws ValidationError "InvalidProbability"
// for p0 outside (0,1] and "NegativeInvestment" for a negative investment.
double edge_probability(double p0, double total_investment);

// Sum of every defender's investment per edge; defenders absent from the
// profile contribute nothing. Throws ValidationError "DimensionMismatch" when
// a supplied vector does not match its defender's edge count, and
// "UnknownDefender" for profile keys that are not defenders.
InvestmentMap total_investments(const GameSpec& game, const JointProfile& profile);

// Expected loss of defender `id` under the joint profile: for each of its
// assets, the loss weight times the best attack path probability.
double defender_cost(const GameSpec& game, const std::string& id,
                     const JointProfile& profile);

// True iff v is componentwise nonnegative and sums to at most the budget
// (plus 1e-9 slack). Throws ValidationError "DimensionMismatch".
bool check_feasible(const InvestmentVector& v, const Defender& d);

struct BestResponseResult {
    InvestmentVector x;
    double cost = 0.0;
    bool converged = true;
    int iterations = 0;
};

// Exhaustive grid search over multiples of grid_step that respect the budget
// (under-spending included). Ties pick the lexicographically smallest vector.
// Throws Error "GridTooLarge" beyond 1e7 grid points. The profile `others`
// holds the remaining defenders' investments; an entry for `id` is ignored.
BestResponseResult best_response_oracle(const GameSpec& game,
                                        const std::string& id,
                                        const JointProfile& others,
                                        double grid_step);

// Projected subgradient descent on {x >= 0, sum(x) <= budget} with step
// step0/sqrt(iter) and optional log-sum-exp smoothing of the per-asset path
// max. Deterministic. Returns the best iterate found; `converged` is false
// when the cost change never fell below cfg.tolerance.
BestResponseResult best_response(const GameSpec& game, const std::string& id,
                                 const JointProfile& others,
                                 const SolverConfig& cfg = {});

// Euclidean projection onto {x >= 0, sum(x) <= budget}; interior points are
// returned unchanged, otherwise the sort-based simplex projection applies.
Eigen::VectorXd project_to_budget(const Eigen::Ref<const Eigen::VectorXd>& y,
                                  double budget);

} // namespace secgame
