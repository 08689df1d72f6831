#include "secgame/attack_graph.hpp"

#include <algorithm>
#include <deque>

#include "secgame/errors.hpp"
#include "secgame/security_game.hpp"

namespace secgame {

AttackGraph AttackGraph::build(std::set<NodeId> nodes, std::vector<Edge> edges,
                               NodeId source, std::size_t max_paths_per_target) {
    for (const NodeId& n : nodes) {
        if (n.empty())
            throw ValidationError("InvalidNodeId", "node labels must be nonempty");
    }
    if (!nodes.count(source))
        throw ValidationError("UnknownNode", "source '" + source + "' is not a node");

    std::set<EdgeKey> seen;
    for (const Edge& e : edges) {
        if (!nodes.count(e.from) || !nodes.count(e.to))
            throw ValidationError("DanglingEndpoint",
                                  "edge " + e.from + "->" + e.to +
                                      " references an undeclared node");
        if (e.from == e.to)
            throw ValidationError("CycleDetected", "self-loop on '" + e.from + "'");
        if (!(e.p0 > 0.0) || e.p0 > 1.0)
            throw ValidationError("InvalidProbability",
                                  "edge " + e.from + "->" + e.to +
                                      " has p0 outside (0,1]");
        if (!seen.insert(e.key()).second)
            throw ValidationError("DuplicateEdge",
                                  "edge " + e.from + "->" + e.to + " repeats");
    }

    AttackGraph g;
    g.nodes_ = std::move(nodes);
    g.edges_ = std::move(edges);
    g.source_ = std::move(source);

    for (const Edge& e : g.edges_)
        g.adjacency_[e.from].push_back(e);
    for (auto& [from, outs] : g.adjacency_)
        std::sort(outs.begin(), outs.end(),
                  [](const Edge& a, const Edge& b) { return a.to < b.to; });

    // Kahn's algorithm; any leftover node sits on a cycle.
    std::map<NodeId, int> indegree;
    for (const NodeId& n : g.nodes_)
        indegree[n] = 0;
    for (const Edge& e : g.edges_)
        indegree[e.to]++;
    std::deque<NodeId> ready;
    for (const auto& [n, d] : indegree)
        if (d == 0)
            ready.push_back(n);
    while (!ready.empty()) {
        NodeId n = ready.front();
        ready.pop_front();
        g.topo_.push_back(n);
        auto it = g.adjacency_.find(n);
        if (it == g.adjacency_.end())
            continue;
        for (const Edge& e : it->second)
            if (--indegree[e.to] == 0)
                ready.push_back(e.to);
    }
    if (g.topo_.size() != g.nodes_.size())
        throw ValidationError("CycleDetected", "the edge set contains a cycle");

    // Count simple source->v paths along the topological order. In a DAG the
    // count is a plain sum over predecessors, so the guardrail is exact.
    std::map<NodeId, std::size_t> path_count;
    path_count[g.source_] = 1;
    for (const NodeId& n : g.topo_) {
        auto cit = path_count.find(n);
        if (cit == path_count.end() || cit->second == 0)
            continue;
        auto it = g.adjacency_.find(n);
        if (it == g.adjacency_.end())
            continue;
        for (const Edge& e : it->second) {
            std::size_t& c = path_count[e.to];
            c += cit->second;
            if (c > max_paths_per_target)
                throw ValidationError(
                    "PathCountExceeded",
                    "more than " + std::to_string(max_paths_per_target) +
                        " source->" + e.to + " paths");
        }
    }
    return g;
}

const Edge* AttackGraph::find_edge(const EdgeKey& key) const {
    auto it = adjacency_.find(key.first);
    if (it == adjacency_.end())
        return nullptr;
    for (const Edge& e : it->second)
        if (e.to == key.second)
            return &e;
    return nullptr;
}

namespace {

void dfs_paths(const std::map<NodeId, std::vector<Edge>>& adjacency,
               const NodeId& at, const NodeId& target, std::vector<Edge>& stack,
               std::set<NodeId>& on_stack, std::vector<Path>& out) {
    if (at == target && !stack.empty()) {
        out.push_back(Path{stack});
        return; // simple paths in a DAG cannot revisit the target
    }
    auto it = adjacency.find(at);
    if (it == adjacency.end())
        return;
    for (const Edge& e : it->second) {
        if (on_stack.count(e.to))
            continue;
        stack.push_back(e);
        on_stack.insert(e.to);
        dfs_paths(adjacency, e.to, target, stack, on_stack, out);
        on_stack.erase(e.to);
        stack.pop_back();
    }
}

} // namespace

std::vector<Path> AttackGraph::enumerate_paths(const NodeId& target) const {
    if (!has_node(target))
        throw ValidationError("UnknownNode", "target '" + target + "' is not a node");
    std::vector<Path> out;
    if (target == source_)
        return out;
    std::vector<Edge> stack;
    std::set<NodeId> on_stack{source_};
    dfs_paths(adjacency_, source_, target, stack, on_stack, out);
    return out;
}

double path_success_probability(const AttackGraph& graph, const Path& path,
                                const InvestmentMap& investments) {
    (void)graph;
    double prob = 1.0;
    for (const Edge& e : path.edges) {
        auto it = investments.find(e.key());
        double x = it == investments.end() ? 0.0 : it->second;
        prob *= edge_probability(e.p0, x);
    }
    return prob;
}

MaxPathResult max_path_probability(const AttackGraph& graph, const NodeId& target,
                                   const InvestmentMap& investments) {
    MaxPathResult best;
    for (const Path& p : graph.enumerate_paths(target)) {
        double prob = path_success_probability(graph, p, investments);
        if (!best.path || prob > best.probability) {
            best.probability = prob;
            best.path = p;
        }
    }
    return best;
}

} // namespace secgame
