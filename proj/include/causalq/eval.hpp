#ifndef CAUSALQ_EVAL_HPP
#define CAUSALQ_EVAL_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "causalq/estimand.hpp"
#include "causalq/trajectory.hpp"
#include "causalq/triplets.hpp"

namespace causalq {

// One evaluated dataset record. delta1/delta2 are the Δ values behind the
// prediction (choice1 and choice2 pairings); NaN for direct MCQA scoring.
// An excluded record hit a per-triplet estimator failure: it stays in the
// file with the error text but never counts toward n.
struct EvalRecord {
    std::string activity;
    std::string p_id;
    std::string c1_id;
    std::string c2_id;
    Question question = Question::cause;
    Variant variant = Variant::causal;
    int true_label = 1;
    std::string scheme;
    int predicted = 0; // 1 or 2; 0 when excluded
    bool correct = false;
    bool tie = false;
    double delta1 = NAN;
    double delta2 = NAN;
    int empty_strata = 0; // zero-count strata hit by Δ_o for this record
    bool excluded = false;
    std::string error;
};

// Aggregate over records sharing (activity, scheme, variant).
struct SuccessReport {
    std::string activity;
    std::string scheme;
    Variant variant = Variant::causal;
    long n = 0; // evaluated records; excluded ones are counted separately
    long correct = 0;
    double success_rate = 0.0; // 100 * correct / n (0 when n = 0)
    long tie_count = 0;
    long empty_strata = 0;
    long excluded = 0;

    bool operator==(const SuccessReport&) const = default;
};

struct EvalResult {
    SuccessReport report;
    std::vector<EvalRecord> records;
};

// Progress is saved to <digest16>-<scheme>.ckpt.json in checkpoint_dir
// every checkpoint_every records and before a propagated scorer error; a
// rerun over the same dataset digest + scheme resumes from it. Empty dir
// disables checkpointing. The file is removed on completion.
struct EvalOptions {
    std::string checkpoint_dir;
    size_t checkpoint_every = 500;
};

// Direct MCQA evaluation: render the causal question, score both options,
// argmax (ties to option 1, counted). Scorer failures propagate with the
// record index attached; progress up to that point is checkpointed.
EvalResult evaluate_mcqa(const Dataset& dataset, Scorer& scorer,
                         McqaTemplate tmpl, const EvalOptions& options = {});

// A causal-strength estimator over an ordered node-id pair.
using DeltaFn = std::function<DeltaEstimate(const std::string&, const std::string&)>;

// Δ-based evaluation: cause questions compare Δ(c1, p) vs Δ(c2, p), effect
// questions Δ(p, c1) vs Δ(p, c2); predict the larger (ties to option 1).
// A delta_fn failure excludes that record from n — counted and carried in
// the record's error field, never scored as wrong.
EvalResult evaluate_delta(const Dataset& dataset, const DeltaFn& delta_fn,
                          const std::string& scheme_name,
                          const EvalOptions& options = {});

// Scheme adapters. The graph-statistical estimators are only defined when
// e1 precedes e2 in topological order; the evaluation loop also feeds them
// reversed pairs, and an intervention cannot affect its own past, so those
// get Δ = 0.
DeltaFn make_graph_delta_fn(const Dag& g_o, TransitionScheme scheme);
DeltaFn make_original_delta_fn(const EsdCorpus& corpus, const Dag& g_o);
// Graph truth: 1 when d-connected in G_c, else 0. Recovers every label.
DeltaFn make_graph_truth_delta_fn(const Dag& g_c);
DeltaFn make_temporal_delta_fn(std::shared_ptr<Scorer> scorer, const Dag& g_o,
                               const std::string& activity, bool use_masked);
DeltaFn make_backdoor_delta_fn(std::shared_ptr<Scorer> scorer, const Dag& g_o,
                               const std::string& activity,
                               uint64_t n_trajectories, uint64_t seed);

enum class ReportFormat { text, csv, json };

ReportFormat report_format_from_string(const std::string& s);

// Group records by (activity, scheme, variant), sorted by that key.
std::vector<SuccessReport> aggregate_records(const std::vector<EvalRecord>& records);

// text: success-rate matrix, rows = scheme/variant, columns = activities.
// csv / json: one row (object) per SuccessReport, loss-free.
std::string render_report(const std::vector<SuccessReport>& reports, ReportFormat format);
// Inverse of render_report for csv and json (text is display-only).
std::vector<SuccessReport> parse_report(const std::string& content, ReportFormat format);

// One-line JSON forms used by record files and checkpoints.
std::string to_json_line(const EvalRecord& record);
EvalRecord eval_record_from_json(const std::string& line);

} // namespace causalq

#endif
