#include "secgame/security_game.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "secgame/errors.hpp"

namespace secgame {

bool operator==(const Defender& a, const Defender& b) {
    return a.id == b.id && a.assets == b.assets && a.edges == b.edges &&
           a.budget == b.budget;
}

bool operator==(const SolverConfig& a, const SolverConfig& b) {
    return a.max_iterations == b.max_iterations && a.tolerance == b.tolerance &&
           a.step0 == b.step0 && a.smoothing == b.smoothing;
}

const Defender& GameSpec::defender(const std::string& id) const {
    int i = defender_index(id);
    if (i < 0)
        throw ValidationError("UnknownDefender", "no defender '" + id + "'");
    return defenders[static_cast<std::size_t>(i)];
}

int GameSpec::defender_index(const std::string& id) const {
    for (std::size_t i = 0; i < defenders.size(); ++i)
        if (defenders[i].id == id)
            return static_cast<int>(i);
    return -1;
}

GameSpec make_game(AttackGraph graph, std::vector<Defender> defenders,
                   std::string response_kind) {
    if (response_kind != "exponential")
        throw ValidationError("UnknownResponseKind",
                              "unsupported response '" + response_kind + "'");
    std::set<std::string> ids;
    for (const Defender& d : defenders) {
        if (d.id.empty())
            throw ValidationError("InvalidDefenderId", "defender ids must be nonempty");
        if (!ids.insert(d.id).second)
            throw ValidationError("DuplicateDefender", "defender '" + d.id + "' repeats");
        if (d.budget < 0.0)
            throw ValidationError("NegativeBudget",
                                  "defender '" + d.id + "' has budget < 0");
        for (const auto& [node, loss] : d.assets) {
            if (!graph.has_node(node))
                throw ValidationError("UnknownNode", "defender '" + d.id +
                                                         "' asset '" + node +
                                                         "' is not a node");
            if (node == graph.source())
                throw ValidationError("AssetIsSource",
                                      "defender '" + d.id +
                                          "' lists the source as an asset");
            if (loss < 0.0)
                throw ValidationError("NegativeLoss", "defender '" + d.id +
                                                          "' asset '" + node +
                                                          "' has loss < 0");
        }
        for (const EdgeKey& e : d.edges)
            if (!graph.find_edge(e))
                throw ValidationError("UnknownEdge",
                                      "defender '" + d.id + "' controls " +
                                          e.first + "->" + e.second +
                                          " which is not a graph edge");
    }
    return GameSpec{std::move(graph), std::move(defenders),
                    std::move(response_kind)};
}

double edge_probability(double p0, double total_investment) {
    if (!(p0 > 0.0) || p0 > 1.0)
        throw ValidationError("InvalidProbability", "p0 must lie in (0,1]");
    if (total_investment < 0.0)
        throw ValidationError("NegativeInvestment", "investment must be >= 0");
    return p0 * std::exp(-total_investment);
}

InvestmentMap total_investments(const GameSpec& game, const JointProfile& profile) {
    for (const auto& [id, v] : profile) {
        const Defender& d = game.defender(id); // UnknownDefender on bad keys
        if (static_cast<std::size_t>(v.size()) != d.edges.size())
            throw ValidationError("DimensionMismatch",
                                  "profile for '" + id + "' has " +
                                      std::to_string(v.size()) + " entries, expected " +
                                      std::to_string(d.edges.size()));
    }
    InvestmentMap total;
    for (const Defender& d : game.defenders) {
        auto it = profile.find(d.id);
        if (it == profile.end())
            continue;
        for (std::size_t i = 0; i < d.edges.size(); ++i)
            total[d.edges[i]] += it->second[static_cast<Eigen::Index>(i)];
    }
    return total;
}

double defender_cost(const GameSpec& game, const std::string& id,
                     const JointProfile& profile) {
    const Defender& d = game.defender(id);
    InvestmentMap total = total_investments(game, profile);
    double cost = 0.0;
    for (const auto& [node, loss] : d.assets)
        cost += loss * max_path_probability(game.graph, node, total).probability;
    return cost;
}

bool check_feasible(const InvestmentVector& v, const Defender& d) {
    if (static_cast<std::size_t>(v.size()) != d.edges.size())
        throw ValidationError("DimensionMismatch",
                              "vector has " + std::to_string(v.size()) +
                                  " entries, defender '" + d.id + "' controls " +
                                  std::to_string(d.edges.size()) + " edges");
    if (v.size() > 0 && v.minCoeff() < 0.0)
        return false;
    return v.sum() <= d.budget + 1e-9;
}

Eigen::VectorXd project_to_budget(const Eigen::Ref<const Eigen::VectorXd>& y,
                                  double budget) {
    Eigen::VectorXd z = y.cwiseMax(0.0);
    if (z.size() == 0 || z.sum() <= budget)
        return z;
    // Sort-based projection onto the full simplex {x >= 0, sum(x) = budget}.
    Eigen::VectorXd u = z;
    std::sort(u.data(), u.data() + u.size(), std::greater<double>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        cumulative += u[j];
        double candidate = (cumulative - budget) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0)
            theta = candidate;
        else
            break;
    }
    return (z.array() - theta).cwiseMax(0.0);
}

namespace {

// Per-path data for one defender's cost: with the exponential response the
// path probability is exp(log_const - incidence . x) where incidence counts
// the defender's own edges on the path and log_const folds the baselines and
// the other defenders' (fixed) investments.
struct PathTerm {
    double log_const = 0.0;
    Eigen::VectorXd incidence;
};

struct AssetTerms {
    double loss = 0.0;
    std::vector<PathTerm> paths;
};

JointProfile drop_self(const JointProfile& others, const std::string& id) {
    JointProfile rest = others;
    rest.erase(id);
    return rest;
}

std::vector<AssetTerms> build_cost_model(const GameSpec& game, const std::string& id,
                                         const JointProfile& others) {
    const Defender& d = game.defender(id);
    InvestmentMap fixed = total_investments(game, drop_self(others, id));
    std::map<EdgeKey, Eigen::Index> own_index;
    for (std::size_t i = 0; i < d.edges.size(); ++i)
        own_index[d.edges[i]] = static_cast<Eigen::Index>(i);

    std::vector<AssetTerms> model;
    for (const auto& [node, loss] : d.assets) {
        AssetTerms terms;
        terms.loss = loss;
        for (const Path& p : game.graph.enumerate_paths(node)) {
            PathTerm t;
            t.incidence = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.edges.size()));
            for (const Edge& e : p.edges) {
                auto fit = fixed.find(e.key());
                t.log_const += std::log(e.p0) - (fit == fixed.end() ? 0.0 : fit->second);
                auto oit = own_index.find(e.key());
                if (oit != own_index.end())
                    t.incidence[oit->second] += 1.0;
            }
            terms.paths.push_back(std::move(t));
        }
        model.push_back(std::move(terms));
    }
    return model;
}

// Exact cost of the model at x, plus (optionally) the smoothed cost's
// gradient at temperature T (T = 0 gives the subgradient through the first
// argmax path of each asset).
double model_cost_and_gradient(const std::vector<AssetTerms>& model,
                               const Eigen::VectorXd& x, double temperature,
                               Eigen::VectorXd* gradient) {
    if (gradient)
        gradient->setZero(x.size());
    double cost = 0.0;
    for (const AssetTerms& asset : model) {
        if (asset.paths.empty())
            continue;
        double zmax = -std::numeric_limits<double>::infinity();
        std::size_t argmax = 0;
        std::vector<double> z(asset.paths.size());
        for (std::size_t i = 0; i < asset.paths.size(); ++i) {
            z[i] = asset.paths[i].log_const - asset.paths[i].incidence.dot(x);
            if (z[i] > zmax) {
                zmax = z[i];
                argmax = i;
            }
        }
        cost += asset.loss * std::exp(zmax);
        if (!gradient)
            continue;
        if (temperature > 0.0) {
            double denom = 0.0;
            for (double zi : z)
                denom += std::exp((zi - zmax) / temperature);
            double smoothed = asset.loss * std::exp(zmax + temperature * std::log(denom));
            for (std::size_t i = 0; i < asset.paths.size(); ++i) {
                double w = std::exp((z[i] - zmax) / temperature) / denom;
                *gradient -= smoothed * w * asset.paths[i].incidence;
            }
        } else {
            *gradient -= asset.loss * std::exp(zmax) * asset.paths[argmax].incidence;
        }
    }
    return cost;
}

} // namespace

BestResponseResult best_response_oracle(const GameSpec& game, const std::string& id,
                                        const JointProfile& others,
                                        double grid_step) {
    const Defender& d = game.defender(id);
    if (!(grid_step > 0.0))
        throw ValidationError("InvalidGridStep", "grid step must be > 0");

    const std::size_t dims = d.edges.size();
    const std::size_t max_steps =
        static_cast<std::size_t>(std::floor(d.budget / grid_step + 1e-9));

    // Grid points = compositions of at most max_steps into dims coordinates,
    // i.e. C(max_steps + dims, dims). Refuse anything past 1e7.
    double count = 1.0;
    for (std::size_t i = 1; i <= dims; ++i)
        count *= static_cast<double>(max_steps + i) / static_cast<double>(i);
    if (count > 1e7)
        throw Error("GridTooLarge", "grid enumeration would visit " +
                                        std::to_string(count) + " points");

    // Per asset: enumerate paths once and keep, per path, the fixed part of
    // the probability product and the own-edge coordinates on the path.
    InvestmentMap fixed = total_investments(game, drop_self(others, id));
    std::map<EdgeKey, std::size_t> own_index;
    for (std::size_t i = 0; i < dims; ++i)
        own_index[d.edges[i]] = i;
    struct OraclePath {
        double base = 1.0;
        std::vector<std::size_t> own_coords;
    };
    struct OracleAsset {
        double loss = 0.0;
        std::vector<OraclePath> paths;
    };
    std::vector<OracleAsset> assets;
    for (const auto& [node, loss] : d.assets) {
        OracleAsset a;
        a.loss = loss;
        for (const Path& p : game.graph.enumerate_paths(node)) {
            OraclePath op;
            for (const Edge& e : p.edges) {
                auto fit = fixed.find(e.key());
                op.base *= edge_probability(e.p0, fit == fixed.end() ? 0.0 : fit->second);
                auto oit = own_index.find(e.key());
                if (oit != own_index.end())
                    op.own_coords.push_back(oit->second);
            }
            a.paths.push_back(std::move(op));
        }
        assets.push_back(std::move(a));
    }

    // exp(-n * grid_step) per step count, shared across coordinates.
    std::vector<double> decay(max_steps + 1);
    for (std::size_t n = 0; n <= max_steps; ++n)
        decay[n] = std::exp(-static_cast<double>(n) * grid_step);

    std::vector<std::size_t> counts(dims, 0);
    Eigen::VectorXd best_x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims));
    double best_cost = std::numeric_limits<double>::infinity();

    auto evaluate = [&]() {
        double cost = 0.0;
        for (const OracleAsset& a : assets) {
            double worst = 0.0;
            for (const OraclePath& p : a.paths) {
                double prob = p.base;
                for (std::size_t c : p.own_coords)
                    prob *= decay[counts[c]];
                if (prob > worst)
                    worst = prob;
            }
            cost += a.loss * worst;
        }
        if (cost < best_cost) {
            best_cost = cost;
            for (std::size_t i = 0; i < dims; ++i)
                best_x[static_cast<Eigen::Index>(i)] =
                    static_cast<double>(counts[i]) * grid_step;
        }
    };

    // Lexicographic enumeration (first coordinate most significant), so the
    // strict improvement test keeps the lexicographically smallest argmin.
    std::function<void(std::size_t, std::size_t)> enumerate =
        [&](std::size_t coord, std::size_t used) {
            if (coord == dims) {
                evaluate();
                return;
            }
            for (std::size_t n = 0; n + used <= max_steps; ++n) {
                counts[coord] = n;
                enumerate(coord + 1, used + n);
            }
            counts[coord] = 0;
        };
    if (dims == 0) {
        evaluate();
    } else {
        enumerate(0, 0);
    }

    BestResponseResult r;
    r.x = best_x;
    r.cost = best_cost;
    r.converged = true;
    r.iterations = 0;
    return r;
}

BestResponseResult best_response(const GameSpec& game, const std::string& id,
                                 const JointProfile& others,
                                 const SolverConfig& cfg) {
    const Defender& d = game.defender(id);
    if (cfg.max_iterations < 1)
        throw ValidationError("InvalidSolverConfig", "max_iterations must be >= 1");
    if (!(cfg.tolerance > 0.0))
        throw ValidationError("InvalidSolverConfig", "tolerance must be > 0");

    const Eigen::Index dims = static_cast<Eigen::Index>(d.edges.size());
    std::vector<AssetTerms> model = build_cost_model(game, id, others);

    BestResponseResult r;
    if (dims == 0) {
        r.x = Eigen::VectorXd::Zero(0);
        r.cost = model_cost_and_gradient(model, r.x, 0.0, nullptr);
        return r;
    }

    // Uniform spread of the full budget.
    Eigen::VectorXd x = Eigen::VectorXd::Constant(dims, d.budget / static_cast<double>(dims));
    Eigen::VectorXd gradient(dims);
    double cost = model_cost_and_gradient(model, x, cfg.smoothing, &gradient);

    // Constant objective (no asset reachable through any controlled edge):
    // return the cheapest representative of the optimal set.
    if (gradient.lpNorm<Eigen::Infinity>() == 0.0) {
        r.x = Eigen::VectorXd::Zero(dims);
        r.cost = model_cost_and_gradient(model, r.x, 0.0, nullptr);
        return r;
    }

    double step0 = cfg.step0 > 0.0 ? cfg.step0 : d.budget / 10.0;
    // Once a round of the sqrt-decay schedule plateaus, restart it with a
    // quarter of the initial step; stop for good when the trial step is
    // negligible. The restarts pin the argmin down far tighter than a single
    // pass of the schedule can.
    const double step_floor = 1e-7 * std::max(1.0, d.budget);
    // The smoothed objective drives the iteration; the best iterate is ranked
    // by the exact cost so the reported optimum matches defender_cost.
    auto exact_cost = [&](const Eigen::VectorXd& v) {
        return model_cost_and_gradient(model, v, 0.0, nullptr);
    };
    Eigen::VectorXd best_x = x;
    double best_cost = exact_cost(x);
    bool converged = false;
    int iterations = 0;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        iterations = iter;
        double norm = gradient.norm();
        if (norm == 0.0) { // stationary on the smoothed objective
            converged = true;
            break;
        }
        // Normalized direction: the schedule controls the trial distance, so
        // loss scaling cannot blow up or stall the iteration.
        double step = step0 / std::sqrt(static_cast<double>(iter));
        x = project_to_budget(x - (step / norm) * gradient, d.budget);
        double next_cost = model_cost_and_gradient(model, x, cfg.smoothing, &gradient);
        double next_exact = exact_cost(x);
        if (next_exact < best_cost) {
            best_cost = next_exact;
            best_x = x;
        }
        if (std::abs(next_cost - cost) < cfg.tolerance) {
            if (step <= step_floor) {
                converged = true;
                break;
            }
            step0 *= 0.25;
            x = best_x; // restart the decayed schedule from the incumbent
            next_cost = model_cost_and_gradient(model, x, cfg.smoothing, &gradient);
        }
        cost = next_cost;
    }

    r.x = best_x;
    r.cost = best_cost;
    r.converged = converged;
    r.iterations = iterations;
    return r;
}

} // namespace secgame
