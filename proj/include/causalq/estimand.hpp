#ifndef CAUSALQ_ESTIMAND_HPP
#define CAUSALQ_ESTIMAND_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "causalq/prompts.hpp"
#include "causalq/trajectory.hpp"

namespace causalq {

// Node ids behind a rendered prompt's text slots. Deterministic scorers
// (the graph-truth oracle) key off these; remote scorers ignore them.
struct PromptMeta {
    std::string e1;
    std::string e2;
    std::string premise;
    std::string choice1;
    std::string choice2;
    Polarity polarity = Polarity::occurred;
};

// Anything that can score a prompt's option tokens. Implementations must
// return a finite score >= 0 for every option token of the prompt.
class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::map<std::string, double> score(const RenderedPrompt& prompt,
                                                const PromptMeta& meta) = 0;
    virtual std::string name() const = 0;
};

// Checks the Scorer contract and returns the per-option scores in option
// order. Throws ProtocolError naming the offending token.
std::vector<double> checked_option_scores(Scorer& scorer,
                                          const RenderedPrompt& prompt,
                                          const PromptMeta& meta);

// The four raw scores behind the normalized flipped-option estimate:
// Increase/Decrease under the original prompt φ and the flipped prompt φ_f.
struct ScoreQuad {
    double s_phi = 0.0;        // Increase under φ
    double s_phi_f = 0.0;      // Increase under φ_f
    double s_tilde_phi = 0.0;  // Decrease under φ
    double s_tilde_phi_f = 0.0; // Decrease under φ_f
};

// f = (s_φ + s_φf) / (s_φ + s_φf + s̃_φ + s̃_φf). Averaging the two option
// orders cancels any constant multiplicative position bias. Throws on an
// all-zero denominator.
double normalized_score(const ScoreQuad& quad);

// Everything an intervention prompt needs besides the event pair.
struct InterventionContext {
    std::string activity;
    std::vector<std::string> trajectory_texts;
    Polarity polarity = Polarity::occurred;
};

// Renders the intervention prompt in both option orders, scores each, and
// reduces to f via normalized_score.
double normalized_increase_score(Scorer& scorer, const InterventionContext& ctx,
                                 const std::string& e1_text,
                                 const std::string& e2_text,
                                 const PromptMeta& meta);

// Mean of normalized_increase_score over the trajectory list (one prompt
// pair per trajectory, fixed polarity). Trajectories are node-id prefixes
// ending at a parent of e1; prompt lines use the nodes' canonical labels.
double p_do(Scorer& scorer, const Dag& g_o, const std::string& activity,
            const std::string& e1, const std::string& e2, Polarity polarity,
            const std::vector<Trajectory>& trajectories);

// Samples n_trajectories start→(parent of e1) prefixes by seeded
// node-uniform rollouts conditioned on reaching e1, evaluates p_do under
// both polarities on the same sample, and returns the difference.
// The estimate targets the rollout-weighted (not distinct-uniform) mean.
DeltaEstimate delta_backdoor_lm(Scorer& scorer, const Dag& g_o,
                                const std::string& activity,
                                const std::string& e1, const std::string& e2,
                                int n_trajectories, uint64_t seed);

// Samples the prefix set used by delta_backdoor_lm (exposed for tests).
std::vector<Trajectory> sample_prefix_trajectories(const Dag& g_o,
                                                   const std::string& e1,
                                                   int n, uint64_t seed);

// Temporal-order proxy: with b(x,y) = before/(before+after) for the prompt
// ordered (x,y), Δ = 2·[(b(e1,e2) + 1 − b(e2,e1))/2 − 1/2] = b(e1,e2) −
// b(e2,e1). Antisymmetric in the pair by construction. use_masked selects
// the masked template; otherwise the autoregressive MCQA one.
DeltaEstimate delta_temporal(Scorer& scorer, const std::string& activity,
                             const std::string& e1_text,
                             const std::string& e2_text, bool use_masked,
                             const PromptMeta& meta);

} // namespace causalq

#endif
