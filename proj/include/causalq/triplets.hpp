#ifndef CAUSALQ_TRIPLETS_HPP
#define CAUSALQ_TRIPLETS_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "causalq/graph.hpp"

namespace causalq {

enum class Question { cause, effect };
enum class Variant { causal, causally_hard };
enum class Level { node, instance };

std::string to_string(Question q);
std::string to_string(Variant v);
std::string to_string(Level l);
Question question_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);
Level level_from_string(const std::string& s);

// One causal multiple-choice query: given the premise event, which of the
// two choices is its cause (or effect)? `label` is the 1-based slot of the
// choice that is d-connected to the premise in the causal graph; the other
// choice is d-separated from both remaining triplet nodes.
struct Triplet {
    std::string premise;
    std::string choice1;
    std::string choice2;
    Question question = Question::cause;
    int label = 1;

    bool operator==(const Triplet&) const = default;
};

// A node-level triplet with one concrete paraphrase picked per slot.
struct InstanceTriplet {
    Triplet nodes;
    std::string premise_text;
    std::string choice1_text;
    std::string choice2_text;
};

// Header describing a dataset file. `digest` fingerprints the record bytes
// (manifest line excluded) so sampling and checkpointing can key off it.
struct DatasetManifest {
    std::string activity;
    Variant variant = Variant::causal;
    Level level = Level::node;
    uint64_t count = 0;
    std::optional<uint64_t> seed;
    std::string digest;
    std::string source_digest; // digest of the parent dataset when sampled
    int format_version = 1;
};

// One dataset line: display texts plus the node ids backing them. At node
// level the texts are node labels; at instance level one instance string
// per slot. Balancing flips swap the choice slots in place, so choice1 is
// always the text shown first (option A).
struct DatasetRecord {
    std::string premise;
    std::string choice1;
    std::string choice2;
    Question question = Question::cause;
    int label = 1;
    std::string activity;
    std::string p_id;
    std::string c1_id;
    std::string c2_id;
    Variant variant = Variant::causal;
    Level level = Level::node;

    bool operator==(const DatasetRecord&) const = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<DatasetRecord> records;
};

// All node triplets (n_i, n_j, n_k) with strictly increasing topological
// rank in g_o, enumerated rank-lexicographically. Size is C(|nodes|, 3).
std::vector<std::array<int, 3>> gen_samples(const Dag& g_o);

// The triplet construction: for every candidate, the first branch fires
// when n_i and n_j are d-separated in G_c and exactly one of them is
// d-connected to n_k (question = cause, premise = n_k); otherwise the
// second branch fires when n_j and n_k are d-separated and exactly one is
// d-connected to n_i (question = effect, premise = n_i). A firing candidate
// is kept only if the labeled choice passes the ancestor check in G_c, and
// is stored together with its mirror tuple (premise and labeled choice
// swapped, question flipped, choices re-sorted by topological rank).
// Output order is deterministic: candidate order, primary before mirror.
std::vector<Triplet> create_triplets(const ActivityGraphs& graphs);
// Plain-loop reference implementation; create_triplets must match it.
std::vector<Triplet> create_triplets_serial(const ActivityGraphs& graphs);

// The mirror tuple of `t` (see above). Self-inverse.
Triplet mirror_of(const Triplet& t, const Dag& g_o);
Triplet mirror_of(const Triplet& t, const Dag& g_o, const TopoOrder& topo);

// Number of instance triplets expand_instances would emit.
uint64_t count_instance_triplets(const Dag& g_o, const std::vector<Triplet>& triplets);

// Expands each node triplet into every combination of per-node instance
// strings (premise-major, then choice1, then choice2) and streams the
// result, so instance-level datasets never sit in memory whole.
void expand_instances(const Dag& g_o, const std::vector<Triplet>& triplets,
                      const std::function<void(const InstanceTriplet&)>& sink);

// Swaps each wrong choice for a one-hop G_o neighbor of the premise that is
// d-separated (in G_c) from both the premise and the labeled choice; drops
// triplets with no eligible neighbor. Ties broken by smallest node id.
std::vector<Triplet> make_hard_variant(const std::vector<Triplet>& triplets,
                                       const Dag& g_o, const Dag& g_c);

// Uniform sample without replacement of n indices from [0, total), returned
// ascending. Fully determined by (content_digest, n, seed).
std::vector<uint32_t> frozen_sample_indices(uint64_t total, uint64_t n,
                                            uint64_t seed,
                                            const std::string& content_digest);

// Independent post-hoc checker: re-derives every triplet invariant from the
// graphs (distinctness, d-connections, ancestor guard, temporal order, and
// the one-hop rule for the hard variant).
std::vector<Violation> validate_triplet(const ActivityGraphs& graphs,
                                        const Triplet& t, Variant variant);

} // namespace causalq

#endif
