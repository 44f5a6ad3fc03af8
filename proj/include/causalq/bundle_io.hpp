#ifndef CAUSALQ_BUNDLE_IO_HPP
#define CAUSALQ_BUNDLE_IO_HPP

#include <string>
#include <vector>

#include "causalq/eval.hpp"
#include "causalq/trajectory.hpp"
#include "causalq/triplets.hpp"

namespace causalq {

// Activity bundle: one JSON document holding both graphs.
//   {activity, nodes: [{id, label, instances: [...]}, ...],
//    observational_edges: [[src, dst], ...], causal_edges: [[src, dst], ...],
//    start, end, format_version}
// Loading runs full validation (the observational graph completely, the
// causal graph structurally, plus the shared-node-set contract) and throws
// ValidationError with every violation listed. strict additionally rejects
// unknown fields.
ActivityGraphs load_bundle(const std::string& path, bool strict = false);
void save_bundle(const std::string& path, const ActivityGraphs& graphs);

// Dataset file: first line is the manifest, every further line one record,
// newline-delimited JSON throughout. The manifest digest is the SHA-256 of
// the record bytes (each line '\n'-terminated, manifest excluded); loading
// recomputes and verifies it.
Dataset load_dataset(const std::string& path);
DatasetManifest read_manifest(const std::string& path);
// Writes manifest + records, filling manifest.count and manifest.digest.
void save_dataset(const std::string& path, Dataset& dataset);

// Builds the dataset file for a generated triplet list. Node level turns
// each triplet into one record using node labels; instance level streams
// the full paraphrase cross product straight to disk. Either way the
// labels are balanced: a seeded shuffle decides which records end up with
// label 1 vs 2, and records whose raw label disagrees get their choice
// slots flipped. Counts of the two labels differ by at most one.
void generate_dataset_file(const std::string& path, const ActivityGraphs& graphs,
                           const std::vector<Triplet>& triplets, Variant variant,
                           Level level, uint64_t seed);

// Uniform sample without replacement of n records, streamed so instance
// datasets never load whole. The sample is fully determined by the source
// digest, n, and seed; source_digest records provenance.
void sample_dataset_file(const std::string& in_path, const std::string& out_path,
                         uint64_t n, uint64_t seed);

// ESD corpus file: {activity, esds: [[node_id, ...], ...]}. Loading
// validates every id against g_o and the rank-order invariant.
EsdCorpus load_esd_corpus(const std::string& path, const Dag& g_o);
void save_esd_corpus(const std::string& path, const EsdCorpus& corpus);

// Eval record files: newline-delimited JSON, one EvalRecord per line.
void save_eval_records(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> load_eval_records(const std::string& path);

} // namespace causalq

#endif
