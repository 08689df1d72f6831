#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace secgame {

using NodeId = std::string;
using EdgeKey = std::pair<NodeId, NodeId>;

// One attack step: compromising `to` from an already-compromised `from`
// succeeds with probability p0 when nothing is invested on the edge.
struct Edge {
    NodeId from;
    NodeId to;
    double p0 = 1.0; // in (0, 1]

    EdgeKey key() const { return {from, to}; }
};

inline bool operator==(const Edge& a, const Edge& b) {
    return a.from == b.from && a.to == b.to && a.p0 == b.p0;
}

// Total security investment per edge; edges absent from the map carry zero.
using InvestmentMap = std::map<EdgeKey, double>;

// A simple source-to-target path, as the ordered list of traversed edges.
struct Path {
    std::vector<Edge> edges;
};

// Directed acyclic attack graph with a designated source. Immutable after
// build(); all accessors are safe for concurrent reads.
class AttackGraph {
public:
    // Validates and indexes the graph. Throws ValidationError with code
    //   InvalidNodeId      empty node label
    //   DanglingEndpoint   edge endpoint not in the node set
    //   InvalidProbability p0 outside (0, 1]
    //   DuplicateEdge      repeated (from, to) pair
    //   CycleDetected      not a DAG (self-loops included)
    //   UnknownNode        source not in the node set
    //   PathCountExceeded  more than max_paths_per_target simple paths from
    //                      the source to some node
    static AttackGraph build(std::set<NodeId> nodes, std::vector<Edge> edges,
                             NodeId source,
                             std::size_t max_paths_per_target = 1000000);

    const std::set<NodeId>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const NodeId& source() const { return source_; }

    bool has_node(const NodeId& n) const { return nodes_.count(n) > 0; }
    // nullptr when the edge does not exist.
    const Edge* find_edge(const EdgeKey& key) const;
    // Every node exactly once, sources before targets.
    const std::vector<NodeId>& topological_order() const { return topo_; }

    // All simple paths source -> target, ordered lexicographically by the
    // visited node labels. Empty when target is unreachable or equals the
    // source (zero-length paths are excluded). Throws ValidationError
    // "UnknownNode" for an undeclared target.
    std::vector<Path> enumerate_paths(const NodeId& target) const;

private:
    AttackGraph() = default;

    std::set<NodeId> nodes_;
    std::vector<Edge> edges_;
    NodeId source_;
    std::vector<NodeId> topo_;
    // Out-edges sorted by target label, so DFS emits paths in lexicographic
    // order without re-sorting.
    std::map<NodeId, std::vector<Edge>> adjacency_;
};

// Product over the path's edges of the invested edge probability
// p0 * exp(-investment). Edges missing from the map count as zero investment.
double path_success_probability(const AttackGraph& graph, const Path& path,
                                const InvestmentMap& investments);

struct MaxPathResult {
    double probability = 0.0;       // 0 when the target is unreachable
    std::optional<Path> path;       // none when unreachable
};

// Maximum success probability over all source->target paths; ties keep the
// first path in enumeration order.
MaxPathResult max_path_probability(const AttackGraph& graph,
                                   const NodeId& target,
                                   const InvestmentMap& investments);

} // namespace secgame
