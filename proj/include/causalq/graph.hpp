#ifndef CAUSALQ_GRAPH_HPP
#define CAUSALQ_GRAPH_HPP

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "causalq/error.hpp"

namespace causalq {

// One event in an activity. `label` is the canonical surface form; the
// instances are crowd-written paraphrases used when a dataset is expanded to
// instance level.
struct EventNode {
    std::string id;
    std::string label;
    std::vector<std::string> instances;
};

// A directed acyclic event graph over string node ids. Nodes keep their
// construction order and are addressed internally by dense index; all hot
// paths work on indices and the string overloads are thin wrappers.
//
// `start`/`end` mark the activity entry and exit events. An observational
// graph must have them and must put every node on a start->end walk; a
// causal graph shares the node set but is free to leave nodes unwired (its
// whole point is that some events do not causally interact), so it carries
// no start/end and is only checked for acyclicity. See validate() /
// validate_structure().
class Dag {
public:
    Dag() = default;
    Dag(std::vector<EventNode> nodes,
        std::vector<std::pair<std::string, std::string>> edges,
        std::string start = "", std::string end = "");

    int size() const { return int(nodes_.size()); }
    bool contains(const std::string& id) const { return index_.count(id) > 0; }
    // Throws ValidationError when the id is unknown.
    int index_of(const std::string& id) const;
    const EventNode& node(int idx) const { return nodes_[size_t(idx)]; }
    const std::vector<EventNode>& nodes() const { return nodes_; }
    const std::vector<int>& successors(int idx) const { return succ_[size_t(idx)]; }
    const std::vector<int>& predecessors(int idx) const { return pred_[size_t(idx)]; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    int start_index() const { return start_; }  // -1 when unset
    int end_index() const { return end_; }      // -1 when unset
    const std::string& start_id() const;
    const std::string& end_id() const;

private:
    std::vector<EventNode> nodes_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::vector<int>> succ_;
    std::vector<std::vector<int>> pred_;
    std::vector<std::pair<int, int>> edges_;
    int start_ = -1;
    int end_ = -1;
};

// The paired graphs for one activity: what people write (observational) and
// what actually forces what (causal). Same node ids in both.
struct ActivityGraphs {
    std::string activity;
    Dag observational;
    Dag causal;
};

// One broken invariant, reported as data so callers can show all problems at
// once instead of dying on the first.
struct Violation {
    std::string code;     // stable machine name, e.g. "cycle", "unreachable"
    std::string subject;  // offending node id or edge "a->b"
    std::string detail;   // human-readable sentence
};

// Full observational-graph validation: acyclic, has start/end, start has no
// predecessors, end has no successors, every node lies on a start->end walk,
// node labels/instances well formed.
std::vector<Violation> validate(const Dag& g);

// Structural validation only (acyclicity and well-formed nodes); used for
// causal graphs where isolated nodes are legitimate.
std::vector<Violation> validate_structure(const Dag& g);

// Both graphs plus the pairing contract (identical node-id sets).
std::vector<Violation> validate_activity(const ActivityGraphs& graphs);

// Topological order with ties broken by lexicographic node id, so every run
// and every implementation agrees on ranks. rank[idx] is the position of
// node idx in `order`.
struct TopoOrder {
    std::vector<int> order;
    std::vector<int> rank;
};

// Throws ValidationError when the graph has a cycle.
TopoOrder topological_order(const Dag& g);

// True when a directed path x -> ... -> y exists. Irreflexive: a node is not
// its own ancestor.
bool is_ancestor(const Dag& g, int x, int y);
bool is_ancestor(const Dag& g, const std::string& x, const std::string& y);

// d-separation of x and y given conditioning set z, by Bayes-ball
// reachability. Throws ValidationError when ids are unknown, x == y, or x/y
// appear in z.
bool d_separated(const Dag& g, int x, int y, const std::vector<int>& z);
bool d_separated(const Dag& g, const std::string& x, const std::string& y,
                 const std::vector<std::string>& z);
bool d_connected(const Dag& g, int x, int y, const std::vector<int>& z);
bool d_connected(const Dag& g, const std::string& x, const std::string& y,
                 const std::vector<std::string>& z);

} // namespace causalq

#endif
