#include "causalq/graph.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <set>

namespace causalq {

namespace {

std::string trimmed(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

Dag::Dag(std::vector<EventNode> nodes,
         std::vector<std::pair<std::string, std::string>> edges,
         std::string start, std::string end)
    : nodes_(std::move(nodes)) {
    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].id.empty())
            throw ValidationError("node with empty id at position " + std::to_string(i));
        if (!index_.emplace(nodes_[i].id, int(i)).second)
            throw ValidationError("duplicate node id '" + nodes_[i].id + "'");
    }
    succ_.resize(nodes_.size());
    pred_.resize(nodes_.size());
    std::set<std::pair<int, int>> seen;
    for (const auto& [from, to] : edges) {
        int a = index_of(from);
        int b = index_of(to);
        if (a == b) throw ValidationError("self edge on '" + from + "'");
        if (!seen.insert({a, b}).second)
            throw ValidationError("duplicate edge '" + from + "->" + to + "'");
        succ_[size_t(a)].push_back(b);
        pred_[size_t(b)].push_back(a);
        edges_.push_back({a, b});
    }
    if (!start.empty()) start_ = index_of(start);
    if (!end.empty()) end_ = index_of(end);
}

int Dag::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("unknown node id '" + id + "'");
    return it->second;
}

const std::string& Dag::start_id() const {
    if (start_ < 0) throw ValidationError("graph has no start node");
    return nodes_[size_t(start_)].id;
}

const std::string& Dag::end_id() const {
    if (end_ < 0) throw ValidationError("graph has no end node");
    return nodes_[size_t(end_)].id;
}

namespace {

// Kahn's algorithm; returns false when a cycle prevents a full ordering.
bool try_topological_order(const Dag& g, std::vector<int>* order) {
    int n = g.size();
    std::vector<int> indeg(size_t(n), 0);
    for (int v = 0; v < n; ++v)
        for (int s : g.successors(v)) ++indeg[size_t(s)];
    auto by_id = [&g](int a, int b) { return g.node(a).id > g.node(b).id; };
    std::priority_queue<int, std::vector<int>, decltype(by_id)> ready(by_id);
    for (int v = 0; v < n; ++v)
        if (indeg[size_t(v)] == 0) ready.push(v);
    order->clear();
    order->reserve(size_t(n));
    while (!ready.empty()) {
        int v = ready.top();
        ready.pop();
        order->push_back(v);
        for (int s : g.successors(v))
            if (--indeg[size_t(s)] == 0) ready.push(s);
    }
    return int(order->size()) == n;
}

void check_nodes(const Dag& g, std::vector<Violation>* out) {
    for (const auto& node : g.nodes()) {
        if (trimmed(node.label).empty())
            out->push_back({"empty_label", node.id, "node '" + node.id + "' has a blank label"});
        for (const auto& inst : node.instances) {
            if (trimmed(inst).empty()) {
                out->push_back({"blank_instance", node.id,
                                "node '" + node.id + "' has a whitespace-only instance"});
                break;
            }
        }
    }
}

} // namespace

std::vector<Violation> validate_structure(const Dag& g) {
    std::vector<Violation> out;
    check_nodes(g, &out);
    std::vector<int> order;
    if (!try_topological_order(g, &order))
        out.push_back({"cycle", "", "graph contains a directed cycle"});
    return out;
}

std::vector<Violation> validate(const Dag& g) {
    std::vector<Violation> out = validate_structure(g);
    if (g.start_index() < 0) {
        out.push_back({"missing_start", "", "graph has no start node"});
        return out;
    }
    if (g.end_index() < 0) {
        out.push_back({"missing_end", "", "graph has no end node"});
        return out;
    }
    int start = g.start_index(), end = g.end_index();
    if (!g.predecessors(start).empty())
        out.push_back({"start_has_predecessors", g.node(start).id,
                       "start node '" + g.node(start).id + "' has incoming edges"});
    if (!g.successors(end).empty())
        out.push_back({"end_has_successors", g.node(end).id,
                       "end node '" + g.node(end).id + "' has outgoing edges"});

    // A node belongs to the activity only if some start->end walk visits it.
    int n = g.size();
    std::vector<char> from_start(size_t(n), 0), to_end(size_t(n), 0);
    std::deque<int> queue{start};
    from_start[size_t(start)] = 1;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int s : g.successors(v))
            if (!from_start[size_t(s)]) from_start[size_t(s)] = 1, queue.push_back(s);
    }
    queue = {end};
    to_end[size_t(end)] = 1;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int p : g.predecessors(v))
            if (!to_end[size_t(p)]) to_end[size_t(p)] = 1, queue.push_back(p);
    }
    for (int v = 0; v < n; ++v) {
        if (!from_start[size_t(v)] || !to_end[size_t(v)])
            out.push_back({"off_path", g.node(v).id,
                           "node '" + g.node(v).id + "' is on no start->end walk"});
    }
    return out;
}

std::vector<Violation> validate_activity(const ActivityGraphs& graphs) {
    std::vector<Violation> out = validate(graphs.observational);
    for (auto v : validate_structure(graphs.causal)) {
        v.detail = "causal graph: " + v.detail;
        out.push_back(std::move(v));
    }
    std::set<std::string> obs_ids, cau_ids;
    for (const auto& node : graphs.observational.nodes()) obs_ids.insert(node.id);
    for (const auto& node : graphs.causal.nodes()) cau_ids.insert(node.id);
    for (const auto& id : obs_ids)
        if (!cau_ids.count(id))
            out.push_back({"node_set_mismatch", id,
                           "node '" + id + "' is observational-only"});
    for (const auto& id : cau_ids)
        if (!obs_ids.count(id))
            out.push_back({"node_set_mismatch", id, "node '" + id + "' is causal-only"});
    return out;
}

TopoOrder topological_order(const Dag& g) {
    TopoOrder topo;
    if (!try_topological_order(g, &topo.order))
        throw ValidationError("graph contains a directed cycle");
    topo.rank.assign(size_t(g.size()), -1);
    for (size_t pos = 0; pos < topo.order.size(); ++pos)
        topo.rank[size_t(topo.order[pos])] = int(pos);
    return topo;
}

namespace {

void check_index(const Dag& g, int idx) {
    if (idx < 0 || idx >= g.size())
        throw ValidationError("node index " + std::to_string(idx) + " out of range");
}

} // namespace

bool is_ancestor(const Dag& g, int x, int y) {
    check_index(g, x);
    check_index(g, y);
    if (x == y) return false;
    std::vector<char> seen(size_t(g.size()), 0);
    std::deque<int> queue{x};
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int s : g.successors(v)) {
            if (s == y) return true;
            if (!seen[size_t(s)]) seen[size_t(s)] = 1, queue.push_back(s);
        }
    }
    return false;
}

bool is_ancestor(const Dag& g, const std::string& x, const std::string& y) {
    return is_ancestor(g, g.index_of(x), g.index_of(y));
}

bool d_separated(const Dag& g, int x, int y, const std::vector<int>& z) {
    check_index(g, x);
    check_index(g, y);
    if (x == y) throw ValidationError("d-separation query needs two distinct nodes");
    std::vector<char> in_z(size_t(g.size()), 0);
    for (int c : z) {
        check_index(g, c);
        if (c == x || c == y)
            throw ValidationError("conditioning set contains a query node");
        in_z[size_t(c)] = 1;
    }

    // Bayes-ball. A visit records the direction the ball entered from:
    // from a child (travelling up) or from a parent (travelling down).
    //  - up-visit at v not in z: pass to parents (up) and children (down);
    //    in z: blocked (chain/fork rule).
    //  - down-visit at v in z: bounce to parents (collider opened by
    //    conditioning); not in z: continue to children. The
    //    descendant-of-a-collider rule falls out of the bounce, because the
    //    ball first travels down to the conditioned descendant.
    int n = g.size();
    std::vector<char> seen_up(size_t(n), 0), seen_down(size_t(n), 0);
    std::deque<std::pair<int, bool>> queue; // (node, entered_from_child)
    queue.push_back({x, true});
    while (!queue.empty()) {
        auto [v, from_child] = queue.front();
        queue.pop_front();
        auto& seen = from_child ? seen_up : seen_down;
        if (seen[size_t(v)]) continue;
        seen[size_t(v)] = 1;
        if (v == y) return false;
        if (from_child) {
            if (!in_z[size_t(v)]) {
                for (int p : g.predecessors(v)) queue.push_back({p, true});
                for (int s : g.successors(v)) queue.push_back({s, false});
            }
        } else {
            if (in_z[size_t(v)]) {
                for (int p : g.predecessors(v)) queue.push_back({p, true});
            } else {
                for (int s : g.successors(v)) queue.push_back({s, false});
            }
        }
    }
    return true;
}

bool d_separated(const Dag& g, const std::string& x, const std::string& y,
                 const std::vector<std::string>& z) {
    std::vector<int> zi;
    zi.reserve(z.size());
    for (const auto& id : z) zi.push_back(g.index_of(id));
    return d_separated(g, g.index_of(x), g.index_of(y), zi);
}

bool d_connected(const Dag& g, int x, int y, const std::vector<int>& z) {
    return !d_separated(g, x, y, z);
}

bool d_connected(const Dag& g, const std::string& x, const std::string& y,
                 const std::vector<std::string>& z) {
    return !d_separated(g, x, y, z);
}

} // namespace causalq
