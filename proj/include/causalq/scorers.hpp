#ifndef CAUSALQ_SCORERS_HPP
#define CAUSALQ_SCORERS_HPP

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>

#include "causalq/estimand.hpp"
#include "causalq/graph.hpp"

namespace causalq {

// Wire contract (HTTP POST <endpoint>/score, JSON, UTF-8):
//   single:  {"model": id, "prompt": text, "options": [token, ...]}
//         -> {"scores": {token: number >= 0, ...}}
//   batch:   {"model": id, "prompts": [{"prompt": text, "options": [...]}, ...]}
//         -> {"scores": [{token: number}, ...]}   (same order)
// score_kind documents whether the numbers are next-token probabilities or
// exponentiated logits; downstream ratios are invariant to that choice.
struct RemoteScorerConfig {
    std::string endpoint;      // e.g. "http://127.0.0.1:8341"
    std::string model_id;
    double timeout_seconds = 30.0;
    int max_in_flight = 4;
    int max_retries = 3;
    std::string score_kind = "probability"; // or "exp_logit"
};

// Applies CAUSALQ_SCORER_ENDPOINT / CAUSALQ_SCORER_TIMEOUT /
// CAUSALQ_SCORER_MAX_IN_FLIGHT over the given config.
RemoteScorerConfig with_env_overrides(RemoteScorerConfig config);

// HTTP client for the wire contract above. Safe for concurrent use; the
// in-flight limit is enforced by a semaphore shared by all threads using
// this instance (the CLI builds exactly one client per run). Transient
// failures (connect errors, timeouts, 5xx) are retried with exponential
// backoff and byte-identical request bodies; 4xx and malformed responses
// are protocol errors and not retried.
class RemoteScorer : public Scorer {
public:
    explicit RemoteScorer(RemoteScorerConfig config);

    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta& meta) override;
    // Batch endpoint; semantics identical to scoring each prompt in turn.
    std::vector<std::map<std::string, double>> score_batch(
        const std::vector<RenderedPrompt>& prompts);
    std::string name() const override { return "remote:" + config_.model_id; }

    // Total transient-failure retries performed (tests assert on this).
    long retries() const { return retries_.load(); }

private:
    std::string post_raw(const std::string& body);

    RemoteScorerConfig config_;
    std::atomic<long> retries_{0};

    // Counting semaphore (mutex/cv form so the limit can be runtime-chosen).
    std::mutex mutex_;
    std::condition_variable slot_free_;
    int in_flight_ = 0;
};

// Graph-truth scorer: knows G_c and answers every prompt the way the
// generation rules would. Drives the 100%-recovery acceptance tests.
struct OracleScorerConfig {
    Dag causal;                 // G_c
    double connected_margin = 0.4; // in (0, 0.5]
};

class OracleScorer : public Scorer {
public:
    explicit OracleScorer(OracleScorerConfig config);
    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta& meta) override;
    std::string name() const override { return "oracle"; }

private:
    OracleScorerConfig config_;
};

// 0.5 for every option: the no-signal baseline.
class UniformScorer : public Scorer {
public:
    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta& meta) override;
    std::string name() const override { return "uniform"; }
};

// Wraps a scorer and multiplies the first option's score by a constant:
// models a position-biased LM. f_M must be invariant to it.
class BiasedScorer : public Scorer {
public:
    BiasedScorer(std::shared_ptr<Scorer> inner, double first_option_factor)
        : inner_(std::move(inner)), factor_(first_option_factor) {}
    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta& meta) override;
    std::string name() const override { return "biased:" + inner_->name(); }

private:
    std::shared_ptr<Scorer> inner_;
    double factor_;
};

// Swaps the two option scores: turns the oracle into the anti-oracle.
class InvertedScorer : public Scorer {
public:
    explicit InvertedScorer(std::shared_ptr<Scorer> inner) : inner_(std::move(inner)) {}
    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta& meta) override;
    std::string name() const override { return "inverted:" + inner_->name(); }

private:
    std::shared_ptr<Scorer> inner_;
};

struct McqaPrediction {
    int choice = 1; // 1-based option slot
    bool tie = false;
};

// Argmax over the prompt's option scores; exact ties go to option 1 and
// are flagged so reports can count them.
McqaPrediction mcqa_predict(Scorer& scorer, const RenderedPrompt& prompt,
                            const PromptMeta& meta);

} // namespace causalq

#endif
