#include "causalq/trajectory.hpp"

#include <algorithm>
#include <map>

namespace causalq {

std::string to_string(TransitionScheme s) {
    return s == TransitionScheme::node_uniform ? "node_uniform" : "trajectory_uniform";
}

namespace {

// ways[v] = number of (instance-weighted) paths from v to `to`, by DP in
// reverse topological order. weight(v) = 1 gives plain path counts.
std::vector<BigInt> paths_to(const Dag& g, int to, bool weighted) {
    TopoOrder topo = topological_order(g);
    std::vector<BigInt> ways(size_t(g.size()), 0);
    auto weight = [&](int v) -> BigInt {
        return weighted ? BigInt(g.node(v).instances.size()) : BigInt(1);
    };
    ways[size_t(to)] = weight(to);
    for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
        int v = *it;
        if (v == to) continue;
        BigInt below = 0;
        for (int s : g.successors(v)) below += ways[size_t(s)];
        if (below != 0) ways[size_t(v)] = weight(v) * below;
    }
    return ways;
}

} // namespace

BigInt count_paths(const Dag& g, int from, int to) {
    return paths_to(g, to, false)[size_t(from)];
}

BigInt count_weighted_paths(const Dag& g, int from, int to) {
    return paths_to(g, to, true)[size_t(from)];
}

TrajectoryCount count_trajectories(const Dag& g, const std::string& from,
                                   const std::string& to, CountLevel level) {
    int a = g.index_of(from);
    int b = g.index_of(to);
    TrajectoryCount out;
    out.level = level;
    out.value = level == CountLevel::compact ? count_paths(g, a, b)
                                             : count_weighted_paths(g, a, b);
    return out;
}

int TransitionMatrix::index_of(const std::string& id) const {
    for (size_t i = 0; i < node_ids.size(); ++i)
        if (node_ids[i] == id) return int(i);
    throw ValidationError("unknown node id '" + id + "'");
}

TransitionMatrix build_transition_node_uniform(const Dag& g_o) {
    TransitionMatrix t;
    t.scheme = TransitionScheme::node_uniform;
    t.probs = Matrix(g_o.size());
    for (const auto& node : g_o.nodes()) t.node_ids.push_back(node.id);
    for (int v = 0; v < g_o.size(); ++v) {
        const auto& succ = g_o.successors(v);
        if (succ.empty()) continue;
        double p = 1.0 / double(succ.size());
        for (int s : succ) t.probs.at(v, s) = p;
    }
    return t;
}

TransitionMatrix build_transition_trajectory_uniform(const Dag& g_o) {
    if (g_o.end_index() < 0)
        throw ValidationError("trajectory-uniform transitions need an end node");
    TransitionMatrix t;
    t.scheme = TransitionScheme::trajectory_uniform;
    t.probs = Matrix(g_o.size());
    for (const auto& node : g_o.nodes()) t.node_ids.push_back(node.id);
    // Weighting each edge by the ratio of end-reaching path counts
    // telescopes along any full trajectory to 1 / paths(start, end).
    std::vector<BigInt> ways = paths_to(g_o, g_o.end_index(), false);
    for (int v = 0; v < g_o.size(); ++v) {
        if (g_o.successors(v).empty()) continue;
        if (ways[size_t(v)] == 0)
            throw ValidationError("node '" + g_o.node(v).id + "' cannot reach end");
        double denom = ways[size_t(v)].convert_to<double>();
        for (int s : g_o.successors(v))
            t.probs.at(v, s) = ways[size_t(s)].convert_to<double>() / denom;
    }
    return t;
}

TransitionMatrix build_transition(const Dag& g_o, TransitionScheme scheme) {
    return scheme == TransitionScheme::node_uniform
               ? build_transition_node_uniform(g_o)
               : build_transition_trajectory_uniform(g_o);
}

namespace {

// C = A * B with the row loop optionally parallel. The inner accumulation
// order is identical in both modes, so results are bit-identical.
Matrix matmul(const Matrix& lhs, const Matrix& rhs, bool parallel) {
    Matrix out(lhs.n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (int i = 0; i < lhs.n; ++i) {
        for (int k = 0; k < lhs.n; ++k) {
            double v = lhs.at(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < lhs.n; ++j) out.at(i, j) += v * rhs.at(k, j);
        }
    }
    (void)parallel;
    return out;
}

Matrix reach_impl(const Matrix& transition, bool parallel) {
    Matrix sum = transition;
    Matrix power = transition;
    // T^k vanishes past the longest path, so n terms are exhaustive.
    for (int k = 2; k <= transition.n; ++k) {
        power = matmul(power, transition, parallel);
        for (size_t idx = 0; idx < sum.a.size(); ++idx) sum.a[idx] += power.a[idx];
    }
    return sum;
}

} // namespace

Matrix reach_matrix(const Matrix& transition) { return reach_impl(transition, true); }

Matrix reach_matrix_serial(const Matrix& transition) {
    return reach_impl(transition, false);
}

Matrix reach_avoiding_matrix(const Matrix& transition, int avoid) {
    Matrix masked = transition;
    for (int v = 0; v < masked.n; ++v) {
        masked.at(avoid, v) = 0.0;
        masked.at(v, avoid) = 0.0;
    }
    return reach_matrix(masked);
}

double prob_reach(const TransitionMatrix& t, const std::string& e1,
                  const std::string& e2) {
    int a = t.index_of(e1);
    int b = t.index_of(e2);
    if (a == b) throw ValidationError("prob_reach needs two distinct nodes");
    return reach_matrix(t.probs).at(a, b);
}

double prob_reach_avoiding(const TransitionMatrix& t, const std::string& from,
                           const std::string& e2, const std::string& avoid) {
    int a = t.index_of(from);
    int b = t.index_of(e2);
    int v = t.index_of(avoid);
    if (a == v) throw ValidationError("prob_reach_avoiding: from equals avoid");
    return reach_avoiding_matrix(t.probs, v).at(a, b);
}

double trajectory_prob(const TransitionMatrix& t, const Trajectory& walk) {
    if (walk.empty()) throw ValidationError("empty trajectory");
    double p = 1.0;
    for (size_t i = 0; i + 1 < walk.size(); ++i) {
        double step = t.probs.at(t.index_of(walk[i]), t.index_of(walk[i + 1]));
        if (step == 0.0)
            throw ValidationError("'" + walk[i] + "' -> '" + walk[i + 1] +
                                  "' is not an edge");
        p *= step;
    }
    return p;
}

DeltaGraphEvaluator::DeltaGraphEvaluator(const Dag& g_o, TransitionScheme scheme)
    : g_o_(g_o), scheme_(scheme) {
    if (g_o_.start_index() < 0)
        throw ValidationError("delta_graph needs a start node");
    topo_ = topological_order(g_o_);
    t_ = build_transition(g_o_, scheme);
    reach_ = reach_matrix(t_.probs);
}

DeltaEstimate DeltaGraphEvaluator::operator()(const std::string& id1,
                                              const std::string& id2) {
    int e1 = g_o_.index_of(id1);
    int e2 = g_o_.index_of(id2);
    if (e1 == e2) throw ValidationError("delta_graph needs two distinct nodes");
    if (topo_.rank[size_t(e1)] >= topo_.rank[size_t(e2)])
        throw ValidationError("'" + id2 + "' does not follow '" + id1 +
                              "' in topological order");

    double treat_rate = reach_.at(e1, e2);
    int start = g_o_.start_index();
    double treatment, control;
    if (e1 == start) {
        // The only trajectory reaching e1 is the empty one, with weight 1;
        // it has no pre-e1 node to re-route from, so the control term is 0.
        treatment = treat_rate;
        control = 0.0;
    } else {
        auto avoid_it = avoiding_.find(e1);
        if (avoid_it == avoiding_.end())
            avoid_it = avoiding_.emplace(e1, reach_avoiding_matrix(t_.probs, e1)).first;
        const Matrix& avoid = avoid_it->second;

        treatment = 0.0;
        control = 0.0;
        for (int par : g_o_.predecessors(e1)) {
            // Path-sum from start to the parent, empty path included, times
            // the final hop: the probability that a rollout enters e1
            // through this parent. Summed over parents this is P(visit e1).
            double to_par = (par == start ? 1.0 : 0.0) + reach_.at(start, par);
            double weight = to_par * t_.probs.at(par, e1);
            treatment += weight * treat_rate;
            control += weight * avoid.at(par, e2);
        }
    }
    DeltaEstimate est;
    // Exact arithmetic keeps Δ in [-1,1]; floating point may overshoot by
    // an ulp or two.
    est.value = std::clamp(treatment - control, -1.0, 1.0);
    est.scheme = to_string(scheme_);
    est.e1 = id1;
    est.e2 = id2;
    return est;
}

DeltaEstimate delta_graph(const Dag& g_o, const std::string& e1,
                          const std::string& e2, TransitionScheme scheme) {
    DeltaGraphEvaluator eval(g_o, scheme);
    return eval(e1, e2);
}

std::vector<DeltaEstimate> delta_graph_batch(
    const Dag& g_o, const std::vector<std::pair<std::string, std::string>>& pairs,
    TransitionScheme scheme) {
    DeltaGraphEvaluator eval(g_o, scheme);
    std::vector<DeltaEstimate> out;
    out.reserve(pairs.size());
    for (const auto& [id1, id2] : pairs)
        out.push_back(eval(id1, id2));
    return out;
}

std::vector<Violation> validate_corpus(const EsdCorpus& corpus, const Dag& g_o) {
    std::vector<Violation> out;
    TopoOrder topo = topological_order(g_o);
    for (size_t i = 0; i < corpus.esds.size(); ++i) {
        const auto& esd = corpus.esds[i];
        std::string subject = "esd[" + std::to_string(i) + "]";
        if (esd.empty()) {
            out.push_back({"empty_esd", subject, "empty event sequence"});
            continue;
        }
        int prev_rank = -1;
        for (const auto& id : esd) {
            if (!g_o.contains(id)) {
                out.push_back({"unknown_node", subject,
                               subject + " references unknown node '" + id + "'"});
                prev_rank = -1;
                continue;
            }
            int rank = topo.rank[size_t(g_o.index_of(id))];
            if (prev_rank >= 0 && rank <= prev_rank)
                out.push_back({"order_violation", subject,
                               subject + ": '" + id + "' breaks topological order"});
            prev_rank = rank;
        }
    }
    return out;
}

DeltaEstimate delta_original(const EsdCorpus& corpus, const Dag& g_o,
                             const std::string& e1, const std::string& e2) {
    if (corpus.esds.empty()) throw ValidationError("empty ESD corpus");
    int v1 = g_o.index_of(e1);
    int v2 = g_o.index_of(e2);
    if (v1 == v2) throw ValidationError("delta_original needs two distinct nodes");
    TopoOrder topo = topological_order(g_o);
    int r1 = topo.rank[size_t(v1)];

    // Stratum = the ESD elements ranked before e1 (a contiguous prefix,
    // because valid ESDs are rank-increasing). For ESDs containing e1 this
    // is exactly the part before e1's position.
    struct Cells {
        uint64_t members = 0;
        uint64_t treated = 0, treated_e2 = 0;
        uint64_t control = 0, control_e2 = 0;
    };
    std::map<std::vector<int>, Cells> strata;
    for (const auto& esd : corpus.esds) {
        std::vector<int> prefix;
        bool has_e1 = false, has_e2 = false;
        for (const auto& id : esd) {
            int v = g_o.index_of(id);
            if (v == v1) has_e1 = true;
            if (v == v2) has_e2 = true;
            if (topo.rank[size_t(v)] < r1) prefix.push_back(v);
        }
        Cells& cell = strata[prefix];
        cell.members += 1;
        if (has_e1) {
            cell.treated += 1;
            cell.treated_e2 += has_e2 ? 1 : 0;
        } else {
            cell.control += 1;
            cell.control_e2 += has_e2 ? 1 : 0;
        }
    }

    DeltaEstimate est;
    est.scheme = "original";
    est.e1 = e1;
    est.e2 = e2;
    double total = double(corpus.esds.size());
    double delta = 0.0;
    for (const auto& [prefix, cell] : strata) {
        double p_z = double(cell.members) / total;
        double treated_rate = 0.0, control_rate = 0.0;
        if (cell.treated == 0)
            est.empty_strata += 1;
        else
            treated_rate = double(cell.treated_e2) / double(cell.treated);
        if (cell.control == 0)
            est.empty_strata += 1;
        else
            control_rate = double(cell.control_e2) / double(cell.control);
        delta += p_z * (treated_rate - control_rate);
    }
    est.value = std::clamp(delta, -1.0, 1.0);
    return est;
}

} // namespace causalq
