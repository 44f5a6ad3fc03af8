#ifndef CAUSALQ_TRAJECTORY_HPP
#define CAUSALQ_TRAJECTORY_HPP

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "causalq/graph.hpp"

namespace causalq {

using BigInt = boost::multiprecision::cpp_int;

// An ordered walk of node ids. ESD corpora use the loose form (consecutive
// elements need not be adjacent, only ordered); transition-matrix walks are
// edge paths. The operations state which form they take.
using Trajectory = std::vector<std::string>;

enum class CountLevel { compact, total };
enum class TransitionScheme { node_uniform, trajectory_uniform };

std::string to_string(TransitionScheme s);

// Exact path-count DP over topological order; big integers because the
// full activity graphs overflow 64 bits by a wide margin (counts reach
// ~1e27 once instance weights multiply in).
struct TrajectoryCount {
    BigInt value;
    CountLevel level = CountLevel::compact;
};

// compact: number of directed from->to paths. total: each path counts the
// product of its nodes' instance-list sizes (both endpoints included).
TrajectoryCount count_trajectories(const Dag& g, const std::string& from,
                                   const std::string& to, CountLevel level);
BigInt count_paths(const Dag& g, int from, int to);
BigInt count_weighted_paths(const Dag& g, int from, int to);

// Dense row-major square matrix sized to the graph.
struct Matrix {
    int n = 0;
    std::vector<double> a;

    Matrix() = default;
    explicit Matrix(int size) : n(size), a(size_t(size) * size_t(size), 0.0) {}
    double& at(int i, int j) { return a[size_t(i) * size_t(n) + size_t(j)]; }
    double at(int i, int j) const { return a[size_t(i) * size_t(n) + size_t(j)]; }
};

// One-step transition probabilities over G_o's edges. Carries the node-id
// mapping so estimand code can work in ids without dragging the Dag along.
struct TransitionMatrix {
    TransitionScheme scheme = TransitionScheme::node_uniform;
    Matrix probs;
    std::vector<std::string> node_ids; // index-aligned with probs

    int index_of(const std::string& id) const;
};

// T_n: from each node, every outgoing edge is equally likely.
TransitionMatrix build_transition_node_uniform(const Dag& g_o);
// T_t: edge weights are ratios of end-reaching path counts, which makes
// every full start->end trajectory equally likely.
TransitionMatrix build_transition_trajectory_uniform(const Dag& g_o);
TransitionMatrix build_transition(const Dag& g_o, TransitionScheme scheme);

// Sum of T^k for k = 1..n: entry (i,j) is the probability that a random
// walk started at i ever visits j, i.e. the path-product sum over all i->j
// paths. n bounds the longest path, so the sum is exact. The default runs
// rows in parallel; the serial variant is the reference implementation and
// produces bit-identical results (each entry is the same dot-product
// sequence either way).
Matrix reach_matrix(const Matrix& transition);
Matrix reach_matrix_serial(const Matrix& transition);

// reach_matrix over a copy of T with `avoid`'s row and column zeroed:
// path-product sums restricted to paths that never touch `avoid`.
Matrix reach_avoiding_matrix(const Matrix& transition, int avoid);

// Per-pair wrappers over the matrices above.
double prob_reach(const TransitionMatrix& t, const std::string& e1,
                  const std::string& e2);
double prob_reach_avoiding(const TransitionMatrix& t, const std::string& from,
                           const std::string& e2, const std::string& avoid);

// Product of one-step transition probabilities along an edge path.
// Throws ValidationError when a consecutive pair is not a G_o edge.
double trajectory_prob(const TransitionMatrix& t, const Trajectory& walk);

// A causal-strength estimate Δ = P(E2|do(E1)) - P(E2|do(¬E1)) plus the
// bookkeeping the reports need.
struct DeltaEstimate {
    double value = 0.0;
    std::string scheme;
    std::string e1;
    std::string e2;
    std::optional<uint64_t> trajectory_sample_size;
    int empty_strata = 0; // delta_original only: zero-count cells hit
};

// Backdoor adjustment computed exactly from the graph. The treatment term
// is prob_reach(e1,e2) weighted by the total probability of reaching e1;
// the control term re-routes each trajectory from its last pre-e1 node
// around e1. Trajectory weights include the final hop into e1, so they form
// a true (sub-)distribution and Δ stays in [-1, 1]; see the chain example
// in the tests. Requires rank(e1) < rank(e2) in topological order.
DeltaEstimate delta_graph(const Dag& g_o, const std::string& e1,
                          const std::string& e2, TransitionScheme scheme);

// Batch form reusing the reach matrices across pairs (grouped by e1).
std::vector<DeltaEstimate> delta_graph_batch(
    const Dag& g_o, const std::vector<std::pair<std::string, std::string>>& pairs,
    TransitionScheme scheme);

// Reusable form for callers that stream pairs one at a time (the eval
// harness): builds the transition and reach matrices once, grows the
// per-e1 avoiding cache on demand. Holds its own copy of the graph.
class DeltaGraphEvaluator {
public:
    DeltaGraphEvaluator(const Dag& g_o, TransitionScheme scheme);
    DeltaEstimate operator()(const std::string& e1, const std::string& e2);
    const TopoOrder& topo() const { return topo_; }

private:
    Dag g_o_;
    TransitionScheme scheme_;
    TopoOrder topo_;
    TransitionMatrix t_;
    Matrix reach_;
    std::map<int, Matrix> avoiding_; // keyed by avoided node
};

// Crowd-written event sequences mapped onto G_o's node ids.
struct EsdCorpus {
    std::string activity;
    std::vector<Trajectory> esds;
};

// Unknown ids, rank-order violations, empty sequences.
std::vector<Violation> validate_corpus(const EsdCorpus& corpus, const Dag& g_o);

// Empirical plug-in of the backdoor sum over the raw ESDs: ESDs are
// stratified by their pre-e1 prefix (the elements ranked before e1), each
// stratum contributes its frequency times the difference of the e2 rates
// among treated (contains e1) and control (lacks e1) members. A zero-count
// cell contributes 0 and increments empty_strata.
DeltaEstimate delta_original(const EsdCorpus& corpus, const Dag& g_o,
                             const std::string& e1, const std::string& e2);

} // namespace causalq

#endif
