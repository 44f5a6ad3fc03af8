// Wall-clock comparison of the parallel kernels against their serial
// reference implementations: the reach-matrix power sum and the triplet
// construction. The parallel results must match the serial ones exactly
// (bit-identical matrices, identical triplet lists); the point of the
// benchmark is the timing, the equality check is a free safety net.
//
// Usage: bench_kernels [repetitions]   (default 5, best-of)
#include <chrono>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "causalq/digest.hpp"
#include "causalq/graph.hpp"
#include "causalq/trajectory.hpp"
#include "causalq/triplets.hpp"

using namespace causalq;

namespace {

// Deterministic layered DAG: a spine 0 -> 1 -> ... -> n-1 guarantees
// acyclicity and connectivity, extra forward edges add branching. The
// paired causal graph reuses the ids with its own random forward edges.
ActivityGraphs make_graph(int n, uint64_t seed) {
    DeterministicRng rng(mix_seed(sha256_hex("bench-graph"), uint64_t(n), seed));
    std::vector<EventNode> nodes;
    nodes.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        std::string num = std::to_string(i);
        num.insert(0, 3 - num.size(), '0');
        nodes.push_back({"n" + num, "step " + num, {"step " + num}});
    }
    std::vector<std::pair<std::string, std::string>> obs, cau;
    for (int i = 0; i + 1 < n; ++i)
        obs.emplace_back(nodes[size_t(i)].id, nodes[size_t(i) + 1].id);
    for (int i = 0; i < n; ++i)
        for (int j = i + 2; j < n; ++j)
            if (rng.unit() < 4.0 / double(n))
                obs.emplace_back(nodes[size_t(i)].id, nodes[size_t(j)].id);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.unit() < 3.0 / double(n))
                cau.emplace_back(nodes[size_t(i)].id, nodes[size_t(j)].id);

    ActivityGraphs g;
    g.activity = "bench";
    g.observational = Dag(nodes, obs, nodes.front().id, nodes.back().id);
    g.causal = Dag(nodes, cau);
    return g;
}

template <typename Fn>
double best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                       .count();
        if (s < best) best = s;
    }
    return best;
}

void print_row(const std::string& label, double serial_s, double parallel_s,
               bool equal) {
    std::cout << std::left << std::setw(28) << label << std::right << std::fixed
              << std::setprecision(3) << std::setw(10) << serial_s * 1e3 << " ms"
              << std::setw(10) << parallel_s * 1e3 << " ms" << std::setw(9)
              << std::setprecision(2) << (parallel_s > 0 ? serial_s / parallel_s : 0.0)
              << "x   " << (equal ? "identical" : "MISMATCH") << "\n";
}

} // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::max(1, std::atoi(argv[1]));

#ifdef _OPENMP
    std::cout << "OpenMP threads: " << omp_get_max_threads() << "\n";
#else
    std::cout << "built without OpenMP; both columns run serial code\n";
#endif
    std::cout << std::left << std::setw(28) << "kernel" << std::right << std::setw(13)
              << "serial" << std::setw(13) << "parallel" << std::setw(10) << "speedup"
              << "\n";

    bool all_equal = true;

    for (int n : {40, 80, 120}) {
        ActivityGraphs g = make_graph(n, 17);
        TransitionMatrix tm =
            build_transition(g.observational, TransitionScheme::node_uniform);
        Matrix serial, parallel;
        double ts = best_of(reps, [&] { serial = reach_matrix_serial(tm.probs); });
        double tp = best_of(reps, [&] { parallel = reach_matrix(tm.probs); });
        bool equal = serial.a == parallel.a; // bit-identical, not approximate
        all_equal = all_equal && equal;
        print_row("reach_matrix n=" + std::to_string(n), ts, tp, equal);
    }

    for (int n : {24, 32}) {
        ActivityGraphs g = make_graph(n, 23);
        std::vector<Triplet> serial, parallel;
        double ts = best_of(reps, [&] { serial = create_triplets_serial(g); });
        double tp = best_of(reps, [&] { parallel = create_triplets(g); });
        bool equal = serial == parallel;
        all_equal = all_equal && equal;
        print_row("create_triplets n=" + std::to_string(n), ts, tp, equal);
    }

    if (!all_equal) {
        std::cout << "parallel kernels diverged from the serial reference\n";
        return 1;
    }
    return 0;
}
