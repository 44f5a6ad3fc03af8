#include "causalq/estimand.hpp"

#include <cmath>

#include "causalq/digest.hpp"

namespace causalq {

std::vector<double> checked_option_scores(Scorer& scorer,
                                          const RenderedPrompt& prompt,
                                          const PromptMeta& meta) {
    std::map<std::string, double> raw = scorer.score(prompt, meta);
    std::vector<double> out;
    out.reserve(prompt.option_tokens.size());
    for (const auto& token : prompt.option_tokens) {
        auto it = raw.find(token);
        if (it == raw.end())
            throw ProtocolError("scorer '" + scorer.name() +
                                "' returned no score for option '" + token + "'");
        if (!std::isfinite(it->second) || it->second < 0.0)
            throw ProtocolError("scorer '" + scorer.name() +
                                "' returned an invalid score for option '" + token +
                                "'");
        out.push_back(it->second);
    }
    return out;
}

double normalized_score(const ScoreQuad& quad) {
    double denom = quad.s_phi + quad.s_phi_f + quad.s_tilde_phi + quad.s_tilde_phi_f;
    if (denom <= 0.0)
        throw ValidationError("degenerate score: all four option scores are zero");
    return (quad.s_phi + quad.s_phi_f) / denom;
}

double normalized_increase_score(Scorer& scorer, const InterventionContext& ctx,
                                 const std::string& e1_text,
                                 const std::string& e2_text,
                                 const PromptMeta& meta) {
    PromptMeta meta_with_polarity = meta;
    meta_with_polarity.polarity = ctx.polarity;

    RenderedPrompt phi = render_intervention(ctx.activity, ctx.trajectory_texts,
                                             e1_text, ctx.polarity, e2_text, false);
    RenderedPrompt phi_f = render_intervention(ctx.activity, ctx.trajectory_texts,
                                               e1_text, ctx.polarity, e2_text, true);
    std::vector<double> s = checked_option_scores(scorer, phi, meta_with_polarity);
    std::vector<double> sf = checked_option_scores(scorer, phi_f, meta_with_polarity);

    ScoreQuad quad;
    quad.s_phi = s[0];        // A = Increase in φ
    quad.s_tilde_phi = s[1];  // B = Decrease in φ
    quad.s_phi_f = sf[1];     // B = Increase in φ_f
    quad.s_tilde_phi_f = sf[0]; // A = Decrease in φ_f
    try {
        return normalized_score(quad);
    } catch (const ValidationError&) {
        throw ValidationError("degenerate score for intervention prompt on '" +
                              e1_text + "' / '" + e2_text + "'");
    }
}

double p_do(Scorer& scorer, const Dag& g_o, const std::string& activity,
            const std::string& e1, const std::string& e2, Polarity polarity,
            const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) throw ValidationError("empty trajectory list");
    const std::string& e1_text = g_o.node(g_o.index_of(e1)).label;
    const std::string& e2_text = g_o.node(g_o.index_of(e2)).label;

    double sum = 0.0;
    for (const auto& walk : trajectories) {
        InterventionContext ctx;
        ctx.activity = activity;
        ctx.polarity = polarity;
        for (const auto& id : walk)
            ctx.trajectory_texts.push_back(g_o.node(g_o.index_of(id)).label);
        PromptMeta meta;
        meta.e1 = e1;
        meta.e2 = e2;
        sum += normalized_increase_score(scorer, ctx, e1_text, e2_text, meta);
    }
    return sum / double(trajectories.size());
}

std::vector<Trajectory> sample_prefix_trajectories(const Dag& g_o,
                                                   const std::string& e1,
                                                   int n, uint64_t seed) {
    int target = g_o.index_of(e1);
    int start = g_o.start_index();
    if (start < 0) throw ValidationError("graph has no start node");
    if (target == start)
        throw ValidationError("'" + e1 + "' is the start node: no prefix trajectory exists");
    if (count_paths(g_o, start, target) == 0)
        throw ValidationError("'" + e1 + "' is unreachable from start");

    // Node-uniform rollouts from start, rejecting walks that miss e1. The
    // accepted prefix stops at e1's parent ("trajectory till E1, excluding
    // E1"). Reachability was proven above, so acceptance has positive
    // probability; the attempt cap only guards against degenerate odds.
    DeterministicRng rng(mix_seed(e1, uint64_t(n), seed));
    std::vector<Trajectory> out;
    long attempts = 0;
    const long max_attempts = 200000L * std::max(n, 1);
    while (int(out.size()) < n) {
        if (++attempts > max_attempts)
            throw ValidationError("rollouts keep missing '" + e1 +
                                  "'; acceptance probability too small");
        Trajectory walk;
        int v = start;
        while (true) {
            if (v == target) {
                out.push_back(walk);
                break;
            }
            walk.push_back(g_o.node(v).id);
            const auto& succ = g_o.successors(v);
            if (succ.empty()) break; // reached end without meeting e1: reject
            v = succ[size_t(rng.below(succ.size()))];
        }
    }
    return out;
}

DeltaEstimate delta_backdoor_lm(Scorer& scorer, const Dag& g_o,
                                const std::string& activity,
                                const std::string& e1, const std::string& e2,
                                int n_trajectories, uint64_t seed) {
    if (n_trajectories < 1) throw ValidationError("need at least one trajectory");
    std::vector<Trajectory> sample =
        sample_prefix_trajectories(g_o, e1, n_trajectories, seed);
    double treated = p_do(scorer, g_o, activity, e1, e2, Polarity::occurred, sample);
    double control = p_do(scorer, g_o, activity, e1, e2, Polarity::negated, sample);

    DeltaEstimate est;
    est.value = treated - control;
    est.scheme = "backdoor_lm";
    est.e1 = e1;
    est.e2 = e2;
    est.trajectory_sample_size = uint64_t(n_trajectories);
    return est;
}

namespace {

// before/(before+after) for the given event order.
double before_rate(Scorer& scorer, const std::string& activity,
                   const std::string& first, const std::string& second,
                   bool use_masked, const PromptMeta& meta) {
    RenderedPrompt prompt = use_masked
                                ? render_temporal_masked(first, second)
                                : render_temporal_mcqa(activity, first, second);
    std::vector<double> s = checked_option_scores(scorer, prompt, meta);
    double denom = s[0] + s[1];
    if (denom <= 0.0)
        throw ValidationError("degenerate score for temporal prompt on '" + first +
                              "' / '" + second + "'");
    return s[0] / denom;
}

} // namespace

DeltaEstimate delta_temporal(Scorer& scorer, const std::string& activity,
                             const std::string& e1_text,
                             const std::string& e2_text, bool use_masked,
                             const PromptMeta& meta) {
    PromptMeta swapped = meta;
    std::swap(swapped.e1, swapped.e2);
    double b12 = before_rate(scorer, activity, e1_text, e2_text, use_masked, meta);
    double b21 = before_rate(scorer, activity, e2_text, e1_text, use_masked, swapped);

    DeltaEstimate est;
    // 2·[(b12 + (1 − b21))/2 − 1/2] simplifies to b12 − b21.
    est.value = b12 - b21;
    est.scheme = "temporal";
    est.e1 = meta.e1;
    est.e2 = meta.e2;
    return est;
}

} // namespace causalq
