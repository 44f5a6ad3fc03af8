// Acceptance gate for the whole pipeline. Runs one self-contained check per
// release criterion and prints exactly one line for each:
//
//   PASS <criterion>
//   FAIL <criterion>: <what went wrong>
//   SKIP <criterion>: <why it could not run here>
//
// Exits non-zero iff any criterion failed. Tolerances and time budgets are
// pinned here, next to the checks they gate.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "causalq/bundle_io.hpp"
#include "causalq/digest.hpp"
#include "causalq/estimand.hpp"
#include "causalq/eval.hpp"
#include "causalq/scorers.hpp"
#include "causalq/trajectory.hpp"
#include "causalq/triplets.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#ifndef CAUSALQ_CLI_PATH
#error "CAUSALQ_CLI_PATH must be defined by the build"
#endif

using namespace causalq;
using namespace causalq::testing;

namespace {

// Tolerances, sample sizes, and budgets for every criterion below.
constexpr double kDeltaEnumTol = 1e-9;   // delta_graph vs path enumeration
constexpr double kRolloutTol = 0.01;     // delta_graph vs Monte-Carlo
constexpr uint64_t kRollouts = 1'000'000;
constexpr double kWalkProbTol = 1e-12;   // per-trajectory equiprobability
constexpr double kWalkSumTol = 1e-9;     // total trajectory mass
constexpr double kBiasTol = 1e-12;       // position-bias cancellation
constexpr double kChanceBand = 2.0;      // uniform scorer: 50 +/- this, percent
constexpr int kGenerationGraphs = 50;    // random graphs for triplet soundness
constexpr auto kGenerationBudget = std::chrono::seconds(60);
constexpr auto kDsepBudget = std::chrono::seconds(60);
constexpr auto kDeltaBudget = std::chrono::seconds(300);

struct Fail {
    std::string reason;
};
struct Skip {
    std::string reason;
};

int g_failures = 0;

void criterion(const std::string& name, const std::function<void()>& body) {
    try {
        body();
        std::cout << "PASS " << name << "\n";
    } catch (const Fail& f) {
        ++g_failures;
        std::cout << "FAIL " << name << ": " << f.reason << "\n";
    } catch (const Skip& s) {
        std::cout << "SKIP " << name << ": " << s.reason << "\n";
    } catch (const std::exception& e) {
        ++g_failures;
        std::cout << "FAIL " << name << ": unexpected error: " << e.what() << "\n";
    }
    std::cout.flush();
}

[[noreturn]] void fail(const std::string& reason) { throw Fail{reason}; }

template <typename T>
std::string str(const T& v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

double elapsed_s(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since)
        .count();
}

// ---------------------------------------------------------------- criteria

// Every triplet the library emits, and none it does not, also falls out of
// the brute-force reimplementation (own topo order, own d-separation, own
// mirror construction). Parallel and serial construction agree verbatim.
void check_generation_soundness() {
    auto t0 = std::chrono::steady_clock::now();
    for (uint64_t seed = 1000; seed < 1000 + kGenerationGraphs; ++seed) {
        ActivityGraphs g = random_activity(seed, 6, 12);
        std::vector<Triplet> lib = create_triplets(g);
        std::vector<Triplet> serial = create_triplets_serial(g);
        std::vector<Triplet> brute = brute_force_triplets(g);
        if (lib != serial)
            fail("parallel and serial construction disagree at seed " + str(seed));
        if (lib != brute)
            fail("library and brute-force triplets disagree at seed " + str(seed) +
                 " (library " + str(lib.size()) + ", brute " + str(brute.size()) + ")");
        for (const Triplet& t : lib) {
            auto v = validate_triplet(g, t, Variant::causal);
            if (!v.empty())
                fail("generated triplet fails validation at seed " + str(seed) +
                     ": " + v.front().code);
        }
    }
    double secs = elapsed_s(t0);
    if (secs > std::chrono::duration<double>(kGenerationBudget).count())
        fail("took " + str(secs) + "s, budget 60s");
}

// Bayes-ball d-separation equals the literal blocked-path definition for
// every node pair and every conditioning set of size <= 2.
void check_dsep_oracle() {
    auto t0 = std::chrono::steady_clock::now();
    for (uint64_t seed = 2000; seed < 2006; ++seed) {
        ActivityGraphs act = random_activity(seed, 6, 10);
        for (const Dag* g : {&act.observational, &act.causal}) {
            int n = int(g->nodes().size());
            for (int x = 0; x < n; ++x) {
                for (int y = x + 1; y < n; ++y) {
                    auto paths = undirected_paths(*g, x, y);
                    std::vector<int> others;
                    for (int v = 0; v < n; ++v)
                        if (v != x && v != y) others.push_back(v);
                    std::vector<std::vector<int>> zsets{{}};
                    for (size_t i = 0; i < others.size(); ++i) {
                        zsets.push_back({others[i]});
                        for (size_t j = i + 1; j < others.size(); ++j)
                            zsets.push_back({others[i], others[j]});
                    }
                    for (const auto& z : zsets) {
                        bool lib = d_separated(*g, x, y, z);
                        bool oracle = paths_all_blocked(*g, paths, z);
                        if (lib != oracle)
                            fail("seed " + str(seed) + ", pair (" +
                                 g->node(x).id + ", " + g->node(y).id +
                                 "), |z|=" + str(z.size()) + ": library says " +
                                 (lib ? "separated" : "connected") +
                                 ", path oracle disagrees");
                    }
                }
            }
        }
    }
    double secs = elapsed_s(t0);
    if (secs > std::chrono::duration<double>(kDsepBudget).count())
        fail("took " + str(secs) + "s, budget 60s");
}

// The matrix-powered backdoor Δ equals an explicit sum over enumerated
// paths everywhere, and a million forward rollouts land within 0.01.
void check_delta_oracles() {
    auto t0 = std::chrono::steady_clock::now();
    for (uint64_t seed = 3000; seed < 3003; ++seed) {
        ActivityGraphs act = random_activity(seed, 8, 12);
        const Dag& g = act.observational;
        TopoOrder topo = topological_order(g);
        std::vector<std::pair<int, int>> pairs;
        for (size_t i = 0; i < topo.order.size(); ++i)
            for (size_t j = i + 1; j < topo.order.size(); ++j)
                pairs.emplace_back(topo.order[i], topo.order[j]);

        for (TransitionScheme scheme :
             {TransitionScheme::node_uniform, TransitionScheme::trajectory_uniform}) {
            TransitionMatrix tm = build_transition(g, scheme);
            for (auto [i, j] : pairs) {
                const std::string& e1 = g.node(i).id;
                const std::string& e2 = g.node(j).id;
                double lib = delta_graph(g, e1, e2, scheme).value;
                double byref = delta_by_enumeration(g, tm, i, j);
                if (std::abs(lib - byref) > kDeltaEnumTol)
                    fail("seed " + str(seed) + " " + to_string(scheme) + " Δ(" + e1 +
                         "," + e2 + "): library " + str(lib) + " vs enumeration " +
                         str(byref));
                if (lib < -1.0 || lib > 1.0)
                    fail("Δ out of [-1,1] at seed " + str(seed));
            }
            // Monte-Carlo spot checks: first, middle, and last pair.
            for (size_t k : {size_t(0), pairs.size() / 2, pairs.size() - 1}) {
                auto [i, j] = pairs[k];
                const std::string& e1 = g.node(i).id;
                const std::string& e2 = g.node(j).id;
                double lib = delta_graph(g, e1, e2, scheme).value;
                double mc = delta_by_rollouts(g, tm, i, j, kRollouts, seed * 7 + k);
                if (std::abs(lib - mc) > kRolloutTol)
                    fail("seed " + str(seed) + " " + to_string(scheme) + " Δ(" + e1 +
                         "," + e2 + "): library " + str(lib) + " vs " +
                         str(kRollouts) + " rollouts " + str(mc));
            }
        }
    }
    double secs = elapsed_s(t0);
    if (secs > std::chrono::duration<double>(kDeltaBudget).count())
        fail("took " + str(secs) + "s, budget 300s");
}

// Under the trajectory-uniform transitions, every full start->end walk has
// probability exactly 1/<number of walks>.
void check_trajectory_equiprobability() {
    for (uint64_t seed = 4000; seed < 4005; ++seed) {
        ActivityGraphs act = random_activity(seed, 6, 10);
        const Dag& g = act.observational;
        TransitionMatrix tm =
            build_transition(g, TransitionScheme::trajectory_uniform);
        auto walks = directed_paths(g, g.start_index(), g.end_index());
        if (walks.empty())
            fail("random graph at seed " + str(seed) + " has no walks");
        double expected = 1.0 / double(walks.size());
        double total = 0.0;
        for (const auto& walk : walks) {
            Trajectory ids;
            for (int v : walk) ids.push_back(g.node(v).id);
            double p = trajectory_prob(tm, ids);
            if (std::abs(p - expected) > kWalkProbTol)
                fail("seed " + str(seed) + ": walk probability " + str(p) +
                     " differs from 1/" + str(walks.size()));
            total += p;
        }
        if (std::abs(total - 1.0) > kWalkSumTol)
            fail("seed " + str(seed) + ": walk probabilities sum to " + str(total));
    }
}

// The flipped-prompt normalization stays in [0,1], collapses to exactly 1/2
// on constant scores, and cancels multiplicative position bias.
void check_normalization_algebra() {
    DeterministicRng rng(mix_seed(sha256_hex("acceptance-quads"), 0, 0));
    for (int i = 0; i < 500; ++i) {
        ScoreQuad q{rng.unit() * 10, rng.unit() * 10, rng.unit() * 10,
                    rng.unit() * 10};
        double f = normalized_score(q);
        if (!(f >= 0.0 && f <= 1.0))
            fail("normalized score " + str(f) + " outside [0,1]");
    }
    for (double c : {0.3, 1.0, 7.5}) {
        double f = normalized_score(ScoreQuad{c, c, c, c});
        if (f != 0.5)
            fail("constant quad at " + str(c) + " gave " + str(f) + ", not 0.5");
    }

    ActivityGraphs tea = load_tea();
    auto inner = std::make_shared<OracleScorer>(OracleScorerConfig{tea.causal, 0.4});
    InterventionContext ctx{"brewing tea", {"enter the kitchen"}, Polarity::occurred};
    PromptMeta meta;
    meta.e1 = "a";
    meta.e2 = "c";
    double clean = normalized_increase_score(*inner, ctx, "fill", "boil", meta);
    for (double factor : {3.7, 0.2, 12.0}) {
        BiasedScorer biased(inner, factor);
        double f = normalized_increase_score(biased, ctx, "fill", "boil", meta);
        if (std::abs(f - clean) > kBiasTol)
            fail("bias factor " + str(factor) + " moved the score by " +
                 str(std::abs(f - clean)));
    }
}

// ---- CLI-driven end-to-end checks ----------------------------------------

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

void run_cli(const std::string& args, const std::string& log) {
    std::string cmd = std::string(CAUSALQ_CLI_PATH) + " " + args + " 2>>" +
                      shell_quote(log);
    int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc) || WEXITSTATUS(rc) != 0)
        fail("command failed: causalq " + args);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail("missing expected output file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Generates the car-wash instance dataset with the real binary, freezes a
// 10k sample, and scores it: the graph-truth oracle must recover every
// label, the uniform scorer must sit at chance.
void check_cli_end_to_end() {
    ScratchDir dir;
    std::string log = dir.file("cli.log");
    std::string bundle = data_path("activities/carwash.json");
    std::string inst = dir.file("carwash-instance.jsonl");
    run_cli("generate " + shell_quote(bundle) + " --level instance --seed 7 -o " +
                shell_quote(inst),
            log);

    uint64_t total = read_manifest(inst).count;
    uint64_t n = std::min<uint64_t>(10000, total);
    std::string sampled = dir.file("sample.jsonl");
    run_cli("sample " + shell_quote(inst) + " -n " + str(n) + " --seed 11 -o " +
                shell_quote(sampled),
            log);

    std::string oracle_csv = dir.file("oracle.csv");
    run_cli("eval mcqa " + shell_quote(sampled) + " --scorer oracle --bundle " +
                shell_quote(bundle) + " --format csv > " + shell_quote(oracle_csv),
            log);
    auto oracle = parse_report(slurp(oracle_csv), ReportFormat::csv);
    if (oracle.size() != 1 || oracle[0].n != long(n))
        fail("oracle report shape is wrong");
    if (oracle[0].success_rate != 100.0)
        fail("oracle recovery is " + str(oracle[0].success_rate) + "%, not 100%");

    std::string delta_csv = dir.file("delta.csv");
    run_cli("eval delta " + shell_quote(sampled) + " --scorer oracle --bundle " +
                shell_quote(bundle) + " --format csv > " + shell_quote(delta_csv),
            log);
    auto delta = parse_report(slurp(delta_csv), ReportFormat::csv);
    if (delta.size() != 1 || delta[0].n != long(n))
        fail("delta oracle report shape is wrong");
    if (delta[0].success_rate != 100.0)
        fail("delta oracle recovery is " + str(delta[0].success_rate) +
             "%, not 100%");

    std::string uniform_csv = dir.file("uniform.csv");
    run_cli("eval mcqa " + shell_quote(sampled) + " --scorer uniform --format csv > " +
                shell_quote(uniform_csv),
            log);
    auto uniform = parse_report(slurp(uniform_csv), ReportFormat::csv);
    if (uniform.size() != 1)
        fail("uniform report shape is wrong");
    if (std::abs(uniform[0].success_rate - 50.0) > kChanceBand)
        fail("uniform scorer scored " + str(uniform[0].success_rate) +
             "%, outside 50±" + str(kChanceBand));
    if (uniform[0].tie_count != long(n))
        fail("uniform scorer should tie on every record");
}

// generate -> sample -> eval, twice, must produce byte-identical artifacts.
void check_cli_determinism() {
    std::string bundle = data_path("activities/carwash.json");
    std::vector<std::string> outputs;
    ScratchDir a, b;
    for (const ScratchDir* dir : {&a, &b}) {
        std::string log = dir->file("cli.log");
        std::string ds = dir->file("carwash.jsonl");
        std::string sampled = dir->file("sample.jsonl");
        std::string records = dir->file("records.jsonl");
        std::string report = dir->file("report.json");
        run_cli("generate " + shell_quote(bundle) + " --seed 3 -o " + shell_quote(ds),
                log);
        run_cli("sample " + shell_quote(ds) + " -n 50 --seed 5 -o " +
                    shell_quote(sampled),
                log);
        run_cli("eval mcqa " + shell_quote(sampled) + " --scorer oracle --bundle " +
                    shell_quote(bundle) + " --records-out " + shell_quote(records) +
                    " --format json > " + shell_quote(report),
                log);
        outputs.push_back(slurp(ds) + "\x1f" + slurp(sampled) + "\x1f" +
                          slurp(records) + "\x1f" + slurp(report));
    }
    if (outputs[0] != outputs[1])
        fail("two identical runs produced different bytes");
}

// Published per-activity totals, checkable only when the five full bundles
// are present (they are not shipped with the repository).
void check_published_totals() {
    struct Expected {
        const char* name;
        size_t triplets;        // node-level dataset size
        const char* compact;    // start->end walk count
    };
    const std::vector<Expected> table = {
        {"cake", 864, "177030"},   {"bus", 334, "13945"},
        {"shopping", 1984, "626096"}, {"train", 950, "133799"},
        {"tree", 260, "4466"},
    };
    const uint64_t expected_total = 4392;
    const uint64_t expected_instance_total = 9'520'340;

    std::vector<std::string> missing;
    for (const Expected& e : table) {
        std::string path = data_path("full/" + std::string(e.name) + ".json");
        if (!std::filesystem::exists(path))
            missing.push_back(e.name);
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        throw Skip{"full activity bundles not present under data/full/ (" + names +
                   "); expected totals stay pinned here: 4392 node triplets, "
                   "9520340 instance records"};
    }

    uint64_t total = 0, instance_total = 0;
    for (const Expected& e : table) {
        ActivityGraphs g =
            load_bundle(data_path("full/" + std::string(e.name) + ".json"));
        std::vector<Triplet> triplets = create_triplets(g);
        if (triplets.size() != e.triplets)
            fail(std::string(e.name) + ": " + str(triplets.size()) +
                 " triplets, published " + str(e.triplets));
        total += triplets.size();
        instance_total += count_instance_triplets(g.observational, triplets);
        const Dag& go = g.observational;
        TrajectoryCount walks = count_trajectories(go, go.start_id(), go.end_id(),
                                                   CountLevel::compact);
        if (walks.value.str() != e.compact)
            fail(std::string(e.name) + ": " + walks.value.str() +
                 " walks, published " + e.compact);
    }
    if (total != expected_total)
        fail("triplet total " + str(total) + ", published " + str(expected_total));
    if (instance_total != expected_instance_total)
        fail("instance total " + str(instance_total) + ", published " +
             str(expected_instance_total));
}

} // namespace

int main() {
    criterion("triplet construction matches brute-force enumeration",
              check_generation_soundness);
    criterion("d-separation matches the blocked-path definition", check_dsep_oracle);
    criterion("graph deltas match enumeration and million-walk simulation",
              check_delta_oracles);
    criterion("trajectory scheme makes full walks equiprobable",
              check_trajectory_equiprobability);
    criterion("score normalization is position-bias invariant",
              check_normalization_algebra);
    criterion("CLI recovers labels with the oracle and sits at chance with uniform",
              check_cli_end_to_end);
    criterion("CLI pipeline is byte-identical across repeat runs",
              check_cli_determinism);
    criterion("published activity totals match", check_published_totals);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed or were skipped honestly\n";
    return 0;
}
