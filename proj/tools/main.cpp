// Command-line surface over the causalq library: bundle validation, triplet
// dataset generation/sampling, trajectory counting, graph ATE analytics, and
// scorer-driven evaluation. Machine-readable output goes to stdout only;
// every diagnostic goes to stderr. Exit codes: 0 ok, 1 validation failure,
// 2 transport/protocol failure.
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "causalq/bundle_io.hpp"
#include "causalq/error.hpp"
#include "causalq/eval.hpp"
#include "causalq/prompts.hpp"
#include "causalq/scorers.hpp"
#include "causalq/trajectory.hpp"
#include "causalq/triplets.hpp"

#include "CLI11.hpp"

namespace {

using namespace causalq;

std::vector<std::pair<std::string, std::string>> load_pairs(const std::string& arg,
                                                            const Dag& g_o) {
    std::vector<std::pair<std::string, std::string>> out;
    if (arg == "all") {
        TopoOrder topo = topological_order(g_o);
        for (size_t i = 0; i < topo.order.size(); ++i)
            for (size_t j = i + 1; j < topo.order.size(); ++j)
                out.emplace_back(g_o.node(topo.order[i]).id,
                                 g_o.node(topo.order[j]).id);
        return out;
    }
    std::ifstream in(arg, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open pairs file '" + arg + "'");
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        std::string e1, e2, extra;
        if (!(row >> e1))
            continue; // blank line
        if (!(row >> e2) || (row >> extra))
            throw ValidationError("pairs file '" + arg + "': line " +
                                  std::to_string(line_no) +
                                  ": expected exactly two node ids");
        g_o.index_of(e1); // unknown ids fail here with a clear message
        g_o.index_of(e2);
        out.emplace_back(std::move(e1), std::move(e2));
    }
    if (out.empty())
        throw ValidationError("pairs file '" + arg + "' has no pairs");
    return out;
}

std::string fmt_delta(double v) {
    std::ostringstream s;
    s << std::setprecision(12) << v;
    return s.str();
}

struct RemoteFlags {
    std::string model = "default";
    double timeout = 30.0;
    int max_in_flight = 4;
    int max_retries = 3;
    std::string score_kind = "probability";
};

void add_remote_flags(CLI::App* cmd, RemoteFlags& f) {
    cmd->add_option("--model", f.model, "Model id sent to a remote scorer");
    cmd->add_option("--timeout", f.timeout, "Remote scorer timeout, seconds");
    cmd->add_option("--max-in-flight", f.max_in_flight,
                    "Concurrent request cap for a remote scorer");
    cmd->add_option("--max-retries", f.max_retries,
                    "Transient-failure retries for a remote scorer");
    cmd->add_option("--score-kind", f.score_kind,
                    "What the remote scores are: probability|exp_logit");
}

// `spec` is "oracle", "uniform", or a scorer endpoint URL.
std::shared_ptr<Scorer> build_scorer(const std::string& spec,
                                     const ActivityGraphs* graphs, double margin,
                                     const RemoteFlags& flags) {
    if (spec == "oracle") {
        if (graphs == nullptr)
            throw ValidationError("--scorer oracle needs --bundle for the causal graph");
        OracleScorerConfig cfg;
        cfg.causal = graphs->causal;
        cfg.connected_margin = margin;
        return std::make_shared<OracleScorer>(std::move(cfg));
    }
    if (spec == "uniform")
        return std::make_shared<UniformScorer>();
    RemoteScorerConfig cfg;
    cfg.endpoint = spec;
    cfg.model_id = flags.model;
    cfg.timeout_seconds = flags.timeout;
    cfg.max_in_flight = flags.max_in_flight;
    cfg.max_retries = flags.max_retries;
    cfg.score_kind = flags.score_kind;
    return std::make_shared<RemoteScorer>(with_env_overrides(std::move(cfg)));
}

void check_activity(const std::string& dataset_activity, const std::string& other,
                    const std::string& what) {
    if (dataset_activity != other)
        throw ValidationError("dataset activity '" + dataset_activity +
                              "' does not match " + what + " activity '" + other + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal query triplets over paired event graphs: generation, "
                 "trajectory analytics, and scorer evaluation"};
    app.require_subcommand(1);

    // validate ------------------------------------------------------------
    std::string v_bundle;
    bool v_strict = false;
    auto* validate_cmd =
        app.add_subcommand("validate", "Check a bundle against every graph invariant");
    validate_cmd->add_option("bundle", v_bundle, "Activity bundle JSON")->required();
    validate_cmd->add_flag("--strict", v_strict, "Reject unknown JSON fields");
    validate_cmd->callback([&] {
        load_bundle(v_bundle, v_strict);
        std::cout << "ok\n";
    });

    // generate ------------------------------------------------------------
    std::string g_bundle, g_out, g_level = "node";
    bool g_hard = false, g_strict = false;
    uint64_t g_seed = 0;
    auto* generate_cmd =
        app.add_subcommand("generate", "Build the causal query triplet dataset");
    generate_cmd->add_option("bundle", g_bundle, "Activity bundle JSON")->required();
    generate_cmd->add_flag("--hard", g_hard,
                           "Swap wrong choices for d-separated one-hop neighbors");
    generate_cmd->add_option("--level", g_level, "node|instance (default node)");
    generate_cmd->add_option("--seed", g_seed, "Label-balancing seed (default 0)");
    generate_cmd->add_flag("--strict", g_strict, "Reject unknown bundle fields");
    generate_cmd->add_option("-o,--out", g_out, "Dataset file to write")->required();
    generate_cmd->callback([&] {
        ActivityGraphs graphs = load_bundle(g_bundle, g_strict);
        std::vector<Triplet> triplets = create_triplets(graphs);
        Variant variant = Variant::causal;
        if (g_hard) {
            triplets = make_hard_variant(triplets, graphs.observational, graphs.causal);
            variant = Variant::causally_hard;
        }
        generate_dataset_file(g_out, graphs, triplets, variant,
                              level_from_string(g_level), g_seed);
        DatasetManifest m = read_manifest(g_out);
        std::cerr << "wrote " << m.count << " records to " << g_out << " (digest "
                  << m.digest.substr(0, 16) << "…)\n";
    });

    // sample --------------------------------------------------------------
    std::string s_dataset, s_out;
    uint64_t s_n = 0, s_seed = 0;
    auto* sample_cmd =
        app.add_subcommand("sample", "Freeze a uniform subsample of a dataset");
    sample_cmd->add_option("dataset", s_dataset, "Dataset file")->required();
    sample_cmd->add_option("-n", s_n, "Sample size")->required();
    sample_cmd->add_option("--seed", s_seed, "Sampling seed (default 0)");
    sample_cmd->add_option("-o,--out", s_out, "Sampled dataset file")->required();
    sample_cmd->callback([&] {
        sample_dataset_file(s_dataset, s_out, s_n, s_seed);
        DatasetManifest m = read_manifest(s_out);
        std::cerr << "wrote " << m.count << " records to " << s_out << " (digest "
                  << m.digest.substr(0, 16) << "…)\n";
    });

    // count ---------------------------------------------------------------
    std::string c_bundle, c_level = "compact";
    bool c_strict = false;
    auto* count_cmd =
        app.add_subcommand("count", "Count start->end trajectories of a bundle");
    count_cmd->add_option("bundle", c_bundle, "Activity bundle JSON")->required();
    count_cmd->add_option("--level", c_level, "compact|total (default compact)");
    count_cmd->add_flag("--strict", c_strict, "Reject unknown bundle fields");
    count_cmd->callback([&] {
        ActivityGraphs graphs = load_bundle(c_bundle, c_strict);
        CountLevel lvl;
        if (c_level == "compact")
            lvl = CountLevel::compact;
        else if (c_level == "total")
            lvl = CountLevel::total;
        else
            throw ValidationError("unknown count level '" + c_level +
                                  "' (compact|total)");
        const Dag& g_o = graphs.observational;
        TrajectoryCount n =
            count_trajectories(g_o, g_o.start_id(), g_o.end_id(), lvl);
        std::cout << n.value.str() << "\n";
    });

    // ate -----------------------------------------------------------------
    auto* ate_cmd = app.add_subcommand("ate", "Graph-statistical causal effects");
    ate_cmd->require_subcommand(1);

    std::string ag_bundle, ag_scheme, ag_pairs = "all";
    auto* ate_graph_cmd = ate_cmd->add_subcommand(
        "graph", "Backdoor-adjusted Δ from the transition matrix");
    ate_graph_cmd->add_option("bundle", ag_bundle, "Activity bundle JSON")->required();
    ate_graph_cmd->add_option("--scheme", ag_scheme, "node|trajectory")->required();
    ate_graph_cmd->add_option("--pairs", ag_pairs,
                              "Pairs file (one 'e1 e2' per line) or 'all'");
    ate_graph_cmd->callback([&] {
        ActivityGraphs graphs = load_bundle(ag_bundle);
        TransitionScheme scheme;
        if (ag_scheme == "node")
            scheme = TransitionScheme::node_uniform;
        else if (ag_scheme == "trajectory")
            scheme = TransitionScheme::trajectory_uniform;
        else
            throw ValidationError("unknown scheme '" + ag_scheme +
                                  "' (node|trajectory)");
        auto pairs = load_pairs(ag_pairs, graphs.observational);
        DeltaGraphEvaluator eval(graphs.observational, scheme);
        for (const auto& [e1, e2] : pairs) {
            DeltaEstimate d = eval(e1, e2);
            std::cout << e1 << '\t' << e2 << '\t' << fmt_delta(d.value) << '\n';
        }
    });

    std::string ao_bundle, ao_esds, ao_pairs = "all";
    auto* ate_orig_cmd = ate_cmd->add_subcommand(
        "original", "Stratified Δ estimated from raw event sequences");
    ate_orig_cmd->add_option("bundle", ao_bundle, "Activity bundle JSON")->required();
    ate_orig_cmd->add_option("esds", ao_esds, "ESD corpus JSON")->required();
    ate_orig_cmd->add_option("--pairs", ao_pairs,
                             "Pairs file (one 'e1 e2' per line) or 'all'");
    ate_orig_cmd->callback([&] {
        ActivityGraphs graphs = load_bundle(ao_bundle);
        EsdCorpus corpus = load_esd_corpus(ao_esds, graphs.observational);
        if (corpus.activity != graphs.activity)
            throw ValidationError("esd corpus activity '" + corpus.activity +
                                  "' does not match bundle activity '" +
                                  graphs.activity + "'");
        auto pairs = load_pairs(ao_pairs, graphs.observational);
        for (const auto& [e1, e2] : pairs) {
            DeltaEstimate d = delta_original(corpus, graphs.observational, e1, e2);
            std::cout << e1 << '\t' << e2 << '\t' << fmt_delta(d.value) << '\t'
                      << d.empty_strata << '\n';
        }
    });

    // eval ----------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Score a dataset with a model or Δ");
    eval_cmd->require_subcommand(1);

    std::string em_dataset, em_scorer, em_bundle, em_template = "v1";
    std::string em_records_out, em_ckpt_dir, em_format = "text";
    double em_margin = 0.4;
    RemoteFlags em_remote;
    auto* eval_mcqa_cmd =
        eval_cmd->add_subcommand("mcqa", "Direct multiple-choice evaluation");
    eval_mcqa_cmd->add_option("dataset", em_dataset, "Dataset file")->required();
    eval_mcqa_cmd->add_option("--scorer", em_scorer, "oracle|uniform|<endpoint URL>")
        ->required();
    eval_mcqa_cmd->add_option("--template", em_template, "v1|v2 (default v1)");
    eval_mcqa_cmd->add_option("--bundle", em_bundle,
                              "Activity bundle (required for --scorer oracle)");
    eval_mcqa_cmd->add_option("--margin", em_margin,
                              "Oracle scorer margin in (0, 0.5]");
    eval_mcqa_cmd->add_option("--records-out", em_records_out,
                              "Write per-record results (NDJSON)");
    eval_mcqa_cmd->add_option("--checkpoint-dir", em_ckpt_dir,
                              "Resume long runs from checkpoints in this directory");
    eval_mcqa_cmd->add_option("--format", em_format, "text|csv|json (default text)");
    add_remote_flags(eval_mcqa_cmd, em_remote);
    eval_mcqa_cmd->callback([&] {
        Dataset ds = load_dataset(em_dataset);
        std::unique_ptr<ActivityGraphs> graphs;
        if (!em_bundle.empty()) {
            graphs = std::make_unique<ActivityGraphs>(load_bundle(em_bundle));
            check_activity(ds.manifest.activity, graphs->activity, "bundle");
        }
        auto scorer = build_scorer(em_scorer, graphs.get(), em_margin, em_remote);
        McqaTemplate tmpl;
        if (em_template == "v1")
            tmpl = McqaTemplate::v1;
        else if (em_template == "v2")
            tmpl = McqaTemplate::v2;
        else
            throw ValidationError("unknown template '" + em_template + "' (v1|v2)");
        EvalOptions opts;
        opts.checkpoint_dir = em_ckpt_dir;
        EvalResult res = evaluate_mcqa(ds, *scorer, tmpl, opts);
        if (!em_records_out.empty())
            save_eval_records(em_records_out, res.records);
        std::cout << render_report({res.report},
                                   report_format_from_string(em_format));
    });

    std::string ed_dataset, ed_scheme, ed_scorer, ed_bundle, ed_esds;
    std::string ed_records_out, ed_ckpt_dir, ed_format = "text";
    std::string ed_temporal_prompt = "masked";
    double ed_margin = 0.4;
    uint64_t ed_trajectories = 30, ed_seed = 0;
    RemoteFlags ed_remote;
    auto* eval_delta_cmd =
        eval_cmd->add_subcommand("delta", "Δ-based evaluation of the triplets");
    eval_delta_cmd->add_option("dataset", ed_dataset, "Dataset file")->required();
    eval_delta_cmd->add_option("--scheme", ed_scheme,
                               "o|n|t|temporal|backdoor|oracle");
    eval_delta_cmd->add_option("--scorer", ed_scorer,
                               "oracle|uniform|<endpoint URL> (temporal/backdoor)");
    eval_delta_cmd->add_option("--bundle", ed_bundle, "Activity bundle JSON")
        ->required();
    eval_delta_cmd->add_option("--esds", ed_esds, "ESD corpus (required for scheme o)");
    eval_delta_cmd->add_option("--trajectories", ed_trajectories,
                               "Sampled prefixes per pair for backdoor (default 30)");
    eval_delta_cmd->add_option("--seed", ed_seed, "Backdoor sampling seed");
    eval_delta_cmd->add_option("--temporal-prompt", ed_temporal_prompt,
                               "masked|mcqa (default masked)");
    eval_delta_cmd->add_option("--margin", ed_margin, "Oracle scorer margin");
    eval_delta_cmd->add_option("--records-out", ed_records_out,
                               "Write per-record results (NDJSON)");
    eval_delta_cmd->add_option("--checkpoint-dir", ed_ckpt_dir,
                               "Resume long runs from checkpoints in this directory");
    eval_delta_cmd->add_option("--format", ed_format, "text|csv|json (default text)");
    add_remote_flags(eval_delta_cmd, ed_remote);
    eval_delta_cmd->callback([&] {
        Dataset ds = load_dataset(ed_dataset);
        ActivityGraphs graphs = load_bundle(ed_bundle);
        check_activity(ds.manifest.activity, graphs.activity, "bundle");

        std::string scheme = ed_scheme;
        if (scheme.empty()) {
            if (ed_scorer == "oracle")
                scheme = "oracle"; // graph truth: the scorer IS the graph
            else
                throw ValidationError("--scheme is required (o|n|t|temporal|"
                                      "backdoor|oracle)");
        }

        DeltaFn fn;
        std::string scheme_name;
        if (scheme == "o") {
            if (ed_esds.empty())
                throw ValidationError("scheme o needs --esds");
            EsdCorpus corpus = load_esd_corpus(ed_esds, graphs.observational);
            if (corpus.activity != graphs.activity)
                throw ValidationError("esd corpus activity '" + corpus.activity +
                                      "' does not match bundle activity '" +
                                      graphs.activity + "'");
            fn = make_original_delta_fn(corpus, graphs.observational);
            scheme_name = "original";
        } else if (scheme == "n") {
            fn = make_graph_delta_fn(graphs.observational,
                                     TransitionScheme::node_uniform);
            scheme_name = to_string(TransitionScheme::node_uniform);
        } else if (scheme == "t") {
            fn = make_graph_delta_fn(graphs.observational,
                                     TransitionScheme::trajectory_uniform);
            scheme_name = to_string(TransitionScheme::trajectory_uniform);
        } else if (scheme == "temporal") {
            if (ed_scorer.empty())
                throw ValidationError("scheme temporal needs --scorer");
            bool masked;
            if (ed_temporal_prompt == "masked")
                masked = true;
            else if (ed_temporal_prompt == "mcqa")
                masked = false;
            else
                throw ValidationError("unknown temporal prompt '" +
                                      ed_temporal_prompt + "' (masked|mcqa)");
            auto scorer = build_scorer(ed_scorer, &graphs, ed_margin, ed_remote);
            fn = make_temporal_delta_fn(scorer, graphs.observational,
                                        graphs.activity, masked);
            scheme_name = "temporal";
        } else if (scheme == "backdoor") {
            if (ed_scorer.empty())
                throw ValidationError("scheme backdoor needs --scorer");
            auto scorer = build_scorer(ed_scorer, &graphs, ed_margin, ed_remote);
            fn = make_backdoor_delta_fn(scorer, graphs.observational,
                                        graphs.activity, ed_trajectories, ed_seed);
            scheme_name = "backdoor_lm";
        } else if (scheme == "oracle") {
            fn = make_graph_truth_delta_fn(graphs.causal);
            scheme_name = "oracle";
        } else {
            throw ValidationError("unknown scheme '" + scheme +
                                  "' (o|n|t|temporal|backdoor|oracle)");
        }

        EvalOptions opts;
        opts.checkpoint_dir = ed_ckpt_dir;
        EvalResult res = evaluate_delta(ds, fn, scheme_name, opts);
        if (!ed_records_out.empty())
            save_eval_records(ed_records_out, res.records);
        std::cout << render_report({res.report},
                                   report_format_from_string(ed_format));
    });

    // report ----------------------------------------------------------------
    std::string r_records, r_format = "text";
    auto* report_cmd =
        app.add_subcommand("report", "Aggregate eval records into a success table");
    report_cmd->add_option("records", r_records, "Eval records NDJSON")->required();
    report_cmd->add_option("--format", r_format, "text|csv|json (default text)");
    report_cmd->callback([&] {
        std::vector<EvalRecord> records = load_eval_records(r_records);
        std::cout << render_report(aggregate_records(records),
                                   report_format_from_string(r_format));
    });

    // dump-templates ---------------------------------------------------------
    auto* dump_cmd =
        app.add_subcommand("dump-templates", "Print every prompt template");
    dump_cmd->callback([] { dump_templates(std::cout); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const TransportError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
