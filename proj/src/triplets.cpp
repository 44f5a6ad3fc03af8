#include "causalq/triplets.hpp"

#include <algorithm>
#include <set>

#include "causalq/digest.hpp"

namespace causalq {

std::string to_string(Question q) { return q == Question::cause ? "cause" : "effect"; }
std::string to_string(Variant v) {
    return v == Variant::causal ? "causal" : "causally_hard";
}
std::string to_string(Level l) { return l == Level::node ? "node" : "instance"; }

Question question_from_string(const std::string& s) {
    if (s == "cause") return Question::cause;
    if (s == "effect") return Question::effect;
    throw ValidationError("unknown question '" + s + "'");
}

Variant variant_from_string(const std::string& s) {
    if (s == "causal") return Variant::causal;
    if (s == "causally_hard") return Variant::causally_hard;
    throw ValidationError("unknown variant '" + s + "'");
}

Level level_from_string(const std::string& s) {
    if (s == "node") return Level::node;
    if (s == "instance") return Level::instance;
    throw ValidationError("unknown level '" + s + "'");
}

std::vector<std::array<int, 3>> gen_samples(const Dag& g_o) {
    TopoOrder topo = topological_order(g_o);
    int n = g_o.size();
    std::vector<std::array<int, 3>> out;
    if (n >= 3) out.reserve(size_t(n) * size_t(n - 1) * size_t(n - 2) / 6);
    for (int a = 0; a + 2 < n; ++a)
        for (int b = a + 1; b + 1 < n; ++b)
            for (int c = b + 1; c < n; ++c)
                out.push_back({topo.order[size_t(a)], topo.order[size_t(b)],
                               topo.order[size_t(c)]});
    return out;
}

namespace {

// Pairwise unconditional d-connectivity and ancestry over g, as flat n*n
// tables so the candidate loop is pure lookups. Row computations are
// independent, which is what the parallel generation path exploits.
struct PairTables {
    int n = 0;
    std::vector<char> conn; // conn[x*n+y] = d_connected(g, x, y, {})
    std::vector<char> anc;  // anc[x*n+y]  = is_ancestor(g, x, y)

    bool connected(int x, int y) const { return conn[size_t(x) * size_t(n) + size_t(y)] != 0; }
    bool ancestor(int x, int y) const { return anc[size_t(x) * size_t(n) + size_t(y)] != 0; }
};

void fill_row(const Dag& g, int x, int n, PairTables* t) {
    for (int y = 0; y < n; ++y) {
        if (y == x) continue;
        t->conn[size_t(x) * size_t(n) + size_t(y)] = d_connected(g, x, y, {}) ? 1 : 0;
    }
    std::vector<char> seen(size_t(n), 0);
    std::vector<int> stack{x};
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int s : g.successors(v)) {
            if (!seen[size_t(s)]) {
                seen[size_t(s)] = 1;
                t->anc[size_t(x) * size_t(n) + size_t(s)] = 1;
                stack.push_back(s);
            }
        }
    }
}

PairTables build_pair_tables(const Dag& g, bool parallel) {
    PairTables t;
    t.n = g.size();
    t.conn.assign(size_t(t.n) * size_t(t.n), 0);
    t.anc.assign(size_t(t.n) * size_t(t.n), 0);
#ifdef _OPENMP
    if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int x = 0; x < t.n; ++x) fill_row(g, x, t.n, &t);
        return t;
    }
#endif
    (void)parallel;
    for (int x = 0; x < t.n; ++x) fill_row(g, x, t.n, &t);
    return t;
}

// Result slots for one candidate; filled independently per candidate so the
// parallel and serial paths produce byte-identical output.
struct CandidateOut {
    bool fired = false;
    Triplet primary;
    Triplet mirror;
};

// Branch logic for one candidate (n_i, n_j, n_k). `causal` is keyed by
// causal-graph indices; `to_causal` remaps g_o indices into that space.
void evaluate_candidate(const Dag& g_o, const TopoOrder& topo,
                        const PairTables& causal, const std::vector<int>& to_causal,
                        const std::array<int, 3>& nodes, CandidateOut* out) {
    int ci = to_causal[size_t(nodes[0])];
    int cj = to_causal[size_t(nodes[1])];
    int ck = to_causal[size_t(nodes[2])];
    Triplet t;
    if (!causal.connected(ci, cj)) {
        bool c_ik = causal.connected(ci, ck);
        bool c_jk = causal.connected(cj, ck);
        if (c_ik == c_jk) return;
        // Exactly one of the earlier nodes can be the cause of n_k.
        if (!causal.ancestor(c_ik ? ci : cj, ck)) return;
        t.premise = g_o.node(nodes[2]).id;
        t.choice1 = g_o.node(nodes[0]).id;
        t.choice2 = g_o.node(nodes[1]).id;
        t.question = Question::cause;
        t.label = c_ik ? 1 : 2;
    } else if (!causal.connected(cj, ck)) {
        bool c_ij = causal.connected(ci, cj);
        bool c_ik = causal.connected(ci, ck);
        if (c_ij == c_ik) return;
        // Exactly one of the later nodes can be the effect of n_i.
        if (!causal.ancestor(ci, c_ij ? cj : ck)) return;
        t.premise = g_o.node(nodes[0]).id;
        t.choice1 = g_o.node(nodes[1]).id;
        t.choice2 = g_o.node(nodes[2]).id;
        t.question = Question::effect;
        t.label = c_ij ? 1 : 2;
    } else {
        return;
    }

    // The mirrored ancestor relation is the same ordered pair, so a stored
    // primary always admits its mirror; the check stays to document the rule.
    Triplet m = mirror_of(t, g_o, topo);
    int mp = to_causal[size_t(g_o.index_of(m.premise))];
    int ml = to_causal[size_t(g_o.index_of(m.label == 1 ? m.choice1 : m.choice2))];
    bool guard = m.question == Question::cause ? causal.ancestor(ml, mp)
                                               : causal.ancestor(mp, ml);
    if (!guard) return;
    out->fired = true;
    out->primary = t;
    out->mirror = m;
}

std::vector<Triplet> create_triplets_impl(const ActivityGraphs& graphs, bool parallel) {
    std::set<std::string> obs_ids, cau_ids;
    for (const auto& node : graphs.observational.nodes()) obs_ids.insert(node.id);
    for (const auto& node : graphs.causal.nodes()) cau_ids.insert(node.id);
    if (obs_ids != cau_ids)
        throw ValidationError("observational and causal node sets differ");

    const Dag& g_o = graphs.observational;
    TopoOrder topo = topological_order(g_o);

    // Branch conditions live on the causal graph, but candidates are indexed
    // by g_o; remap through ids once.
    std::vector<int> to_causal(size_t(g_o.size()));
    for (int v = 0; v < g_o.size(); ++v)
        to_causal[size_t(v)] = graphs.causal.index_of(g_o.node(v).id);

    PairTables causal = build_pair_tables(graphs.causal, parallel);
    std::vector<std::array<int, 3>> candidates = gen_samples(g_o);
    std::vector<CandidateOut> slots(candidates.size());

#ifdef _OPENMP
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (long c = 0; c < long(candidates.size()); ++c)
            evaluate_candidate(g_o, topo, causal, to_causal, candidates[size_t(c)],
                               &slots[size_t(c)]);
    } else
#endif
    {
        for (size_t c = 0; c < candidates.size(); ++c)
            evaluate_candidate(g_o, topo, causal, to_causal, candidates[c], &slots[c]);
    }

    std::vector<Triplet> out;
    for (const auto& slot : slots) {
        if (!slot.fired) continue;
        out.push_back(slot.primary);
        out.push_back(slot.mirror);
    }
    return out;
}

} // namespace

std::vector<Triplet> create_triplets(const ActivityGraphs& graphs) {
    return create_triplets_impl(graphs, true);
}

std::vector<Triplet> create_triplets_serial(const ActivityGraphs& graphs) {
    return create_triplets_impl(graphs, false);
}

Triplet mirror_of(const Triplet& t, const Dag& g_o, const TopoOrder& topo) {
    const std::string& right = t.label == 1 ? t.choice1 : t.choice2;
    const std::string& wrong = t.label == 1 ? t.choice2 : t.choice1;
    Triplet m;
    m.premise = right;
    m.question = t.question == Question::cause ? Question::effect : Question::cause;
    // The old premise becomes the labeled choice; slots stay sorted by rank.
    int rank_wrong = topo.rank[size_t(g_o.index_of(wrong))];
    int rank_old_premise = topo.rank[size_t(g_o.index_of(t.premise))];
    if (rank_wrong < rank_old_premise) {
        m.choice1 = wrong;
        m.choice2 = t.premise;
        m.label = 2;
    } else {
        m.choice1 = t.premise;
        m.choice2 = wrong;
        m.label = 1;
    }
    return m;
}

Triplet mirror_of(const Triplet& t, const Dag& g_o) {
    return mirror_of(t, g_o, topological_order(g_o));
}

uint64_t count_instance_triplets(const Dag& g_o, const std::vector<Triplet>& triplets) {
    uint64_t total = 0;
    for (const auto& t : triplets) {
        uint64_t p = g_o.node(g_o.index_of(t.premise)).instances.size();
        uint64_t c1 = g_o.node(g_o.index_of(t.choice1)).instances.size();
        uint64_t c2 = g_o.node(g_o.index_of(t.choice2)).instances.size();
        total += p * c1 * c2;
    }
    return total;
}

void expand_instances(const Dag& g_o, const std::vector<Triplet>& triplets,
                      const std::function<void(const InstanceTriplet&)>& sink) {
    for (const auto& t : triplets) {
        const auto& pi = g_o.node(g_o.index_of(t.premise)).instances;
        const auto& c1i = g_o.node(g_o.index_of(t.choice1)).instances;
        const auto& c2i = g_o.node(g_o.index_of(t.choice2)).instances;
        for (const auto& p : pi)
            for (const auto& c1 : c1i)
                for (const auto& c2 : c2i)
                    sink(InstanceTriplet{t, p, c1, c2});
    }
}

std::vector<Triplet> make_hard_variant(const std::vector<Triplet>& triplets,
                                       const Dag& g_o, const Dag& g_c) {
    std::vector<Triplet> out;
    for (const auto& t : triplets) {
        const std::string& labeled = t.label == 1 ? t.choice1 : t.choice2;
        int premise_o = g_o.index_of(t.premise);
        int premise_c = g_c.index_of(t.premise);
        int labeled_c = g_c.index_of(labeled);

        std::vector<std::string> candidates;
        auto consider = [&](int neighbor) {
            const std::string& id = g_o.node(neighbor).id;
            if (id == t.premise || id == labeled) return;
            int v = g_c.index_of(id);
            if (!d_separated(g_c, v, premise_c, {})) return;
            if (!d_separated(g_c, v, labeled_c, {})) return;
            candidates.push_back(id);
        };
        for (int s : g_o.successors(premise_o)) consider(s);
        for (int p : g_o.predecessors(premise_o)) consider(p);
        if (candidates.empty()) continue;

        Triplet hard = t;
        const std::string& pick = *std::min_element(candidates.begin(), candidates.end());
        (hard.label == 1 ? hard.choice2 : hard.choice1) = pick;
        out.push_back(hard);
    }
    return out;
}

std::vector<uint32_t> frozen_sample_indices(uint64_t total, uint64_t n,
                                            uint64_t seed,
                                            const std::string& content_digest) {
    if (n > total)
        throw ValidationError("sample size " + std::to_string(n) +
                              " exceeds dataset size " + std::to_string(total));
    if (total > uint64_t(UINT32_MAX))
        throw ValidationError("dataset too large to sample");
    std::vector<uint32_t> ids(static_cast<size_t>(total));
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = uint32_t(i);
    DeterministicRng rng(mix_seed(content_digest, n, seed));
    // Partial Fisher-Yates: after i swaps the prefix is a uniform
    // without-replacement draw of size i.
    for (uint64_t i = 0; i < n; ++i) {
        uint64_t j = i + rng.below(total - i);
        std::swap(ids[size_t(i)], ids[size_t(j)]);
    }
    ids.resize(size_t(n));
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<Violation> validate_triplet(const ActivityGraphs& graphs,
                                        const Triplet& t, Variant variant) {
    std::vector<Violation> out;
    const Dag& g_o = graphs.observational;
    const Dag& g_c = graphs.causal;
    auto tag = [&](const std::string& code, const std::string& detail) {
        out.push_back({code, t.premise + "/" + t.choice1 + "/" + t.choice2, detail});
    };

    if (t.label != 1 && t.label != 2) {
        tag("bad_label", "label must be 1 or 2");
        return out;
    }
    if (t.premise == t.choice1 || t.premise == t.choice2 || t.choice1 == t.choice2) {
        tag("not_distinct", "premise and choices must be pairwise distinct");
        return out;
    }
    const std::string& labeled = t.label == 1 ? t.choice1 : t.choice2;
    const std::string& wrong = t.label == 1 ? t.choice2 : t.choice1;

    int p = g_c.index_of(t.premise);
    int l = g_c.index_of(labeled);
    int w = g_c.index_of(wrong);
    if (!d_connected(g_c, l, p, {}))
        tag("labeled_separated", "labeled choice is d-separated from the premise");
    if (!d_separated(g_c, w, p, {}))
        tag("wrong_connected", "wrong choice is d-connected to the premise");
    if (!d_separated(g_c, w, l, {}))
        tag("wrong_connected", "wrong choice is d-connected to the labeled choice");
    bool guard = t.question == Question::cause ? is_ancestor(g_c, l, p)
                                               : is_ancestor(g_c, p, l);
    if (!guard) tag("ancestor_guard", "ancestor relation missing in causal graph");

    TopoOrder topo = topological_order(g_o);
    int rank_p = topo.rank[size_t(g_o.index_of(t.premise))];
    int rank_l = topo.rank[size_t(g_o.index_of(labeled))];
    bool temporal = t.question == Question::cause ? rank_l < rank_p : rank_p < rank_l;
    if (!temporal) tag("temporal_order", "cause does not precede effect in G_o");

    if (variant == Variant::causally_hard) {
        int premise_o = g_o.index_of(t.premise);
        int wrong_o = g_o.index_of(wrong);
        const auto& succ = g_o.successors(premise_o);
        const auto& pred = g_o.predecessors(premise_o);
        bool one_hop = std::find(succ.begin(), succ.end(), wrong_o) != succ.end() ||
                       std::find(pred.begin(), pred.end(), wrong_o) != pred.end();
        if (!one_hop) tag("not_one_hop", "hard wrong choice is not adjacent to the premise in G_o");
    }
    return out;
}

} // namespace causalq
