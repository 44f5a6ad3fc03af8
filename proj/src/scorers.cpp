#include "causalq/scorers.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "causalq/error.hpp"

#include "httplib.h"
#include "json.hpp"

namespace causalq {

using nlohmann::json;

RemoteScorerConfig with_env_overrides(RemoteScorerConfig config) {
    if (const char* ep = std::getenv("CAUSALQ_SCORER_ENDPOINT"); ep && *ep)
        config.endpoint = ep;
    if (const char* to = std::getenv("CAUSALQ_SCORER_TIMEOUT"); to && *to) {
        char* end = nullptr;
        double v = std::strtod(to, &end);
        if (end == to || *end != '\0' || !(v > 0))
            throw ValidationError("CAUSALQ_SCORER_TIMEOUT must be a positive number, got '" +
                                  std::string(to) + "'");
        config.timeout_seconds = v;
    }
    if (const char* mif = std::getenv("CAUSALQ_SCORER_MAX_IN_FLIGHT"); mif && *mif) {
        char* end = nullptr;
        long v = std::strtol(mif, &end, 10);
        if (end == mif || *end != '\0' || v < 1)
            throw ValidationError("CAUSALQ_SCORER_MAX_IN_FLIGHT must be a positive integer, got '" +
                                  std::string(mif) + "'");
        config.max_in_flight = static_cast<int>(v);
    }
    return config;
}

RemoteScorer::RemoteScorer(RemoteScorerConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty())
        throw ValidationError("remote scorer endpoint is empty");
    if (config_.max_in_flight < 1)
        throw ValidationError("max_in_flight must be >= 1");
    if (config_.max_retries < 0)
        throw ValidationError("max_retries must be >= 0");
    if (!(config_.timeout_seconds > 0))
        throw ValidationError("timeout must be positive");
    if (config_.score_kind != "probability" && config_.score_kind != "exp_logit")
        throw ValidationError("score_kind must be 'probability' or 'exp_logit', got '" +
                              config_.score_kind + "'");
}

namespace {

std::map<std::string, double> parse_score_object(const json& obj,
                                                 const std::vector<std::string>& options) {
    if (!obj.is_object())
        throw ProtocolError("scorer response: expected a score object, got " +
                            std::string(obj.type_name()));
    std::map<std::string, double> out;
    for (const std::string& opt : options) {
        auto it = obj.find(opt);
        if (it == obj.end())
            throw ProtocolError("scorer response is missing a score for option '" + opt + "'");
        if (!it->is_number())
            throw ProtocolError("scorer response: score for option '" + opt +
                                "' is not a number");
        double v = it->get<double>();
        if (!std::isfinite(v) || v < 0.0)
            throw ProtocolError("scorer response: score for option '" + opt +
                                "' must be finite and >= 0, got " + it->dump());
        out[opt] = v;
    }
    return out;
}

} // namespace

// POST the (byte-identical) body, retrying transient failures, and return the
// response body of the eventual 200. Holds one in-flight slot throughout.
std::string RemoteScorer::post_raw(const std::string& body) {
    {
        std::unique_lock<std::mutex> lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
        ++in_flight_;
    }
    struct SlotGuard {
        RemoteScorer* self;
        ~SlotGuard() {
            std::lock_guard<std::mutex> lock(self->mutex_);
            --self->in_flight_;
            self->slot_free_.notify_one();
        }
    } guard{this};

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            retries_.fetch_add(1);
            // 50ms, 100ms, 200ms, ... capped at 2s.
            long ms = std::min(2000L, 50L << std::min(attempt - 1, 6));
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        }
        httplib::Client client(config_.endpoint);
        auto whole = std::chrono::duration<double>(config_.timeout_seconds);
        client.set_connection_timeout(whole);
        client.set_read_timeout(whole);
        client.set_write_timeout(whole);

        auto res = client.Post("/score", body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue; // transport failure: retry
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue; // server-side transient: retry
        }
        if (res->status != 200)
            throw ProtocolError("scorer returned HTTP " + std::to_string(res->status) +
                                " for " + config_.endpoint + "/score");
        return res->body;
    }
    throw TransportError("scorer unreachable after " + std::to_string(config_.max_retries) +
                         " retries (" + config_.endpoint + "/score): " + last_error);
}

namespace {

json decode_scores(const std::string& body) {
    json reply = json::parse(body, nullptr, false);
    if (reply.is_discarded())
        throw ProtocolError("scorer response is not valid JSON");
    auto scores_it = reply.find("scores");
    if (scores_it == reply.end())
        throw ProtocolError("scorer response has no 'scores' field");
    return std::move(*scores_it);
}

} // namespace

std::map<std::string, double> RemoteScorer::score(const RenderedPrompt& prompt,
                                                  const PromptMeta& meta) {
    (void)meta; // the wire protocol carries only text and option tokens
    json body = {{"model", config_.model_id},
                 {"prompt", prompt.text},
                 {"options", prompt.option_tokens}};
    return parse_score_object(decode_scores(post_raw(body.dump())), prompt.option_tokens);
}

std::vector<std::map<std::string, double>> RemoteScorer::score_batch(
    const std::vector<RenderedPrompt>& prompts) {
    if (prompts.empty())
        return {};
    json entries = json::array();
    for (const RenderedPrompt& p : prompts)
        entries.push_back({{"prompt", p.text}, {"options", p.option_tokens}});
    json body = {{"model", config_.model_id}, {"prompts", entries}};

    json scores = decode_scores(post_raw(body.dump()));
    if (!scores.is_array() || scores.size() != prompts.size())
        throw ProtocolError("scorer batch response: 'scores' must be an array of " +
                            std::to_string(prompts.size()) + " objects");
    std::vector<std::map<std::string, double>> out;
    out.reserve(prompts.size());
    for (size_t i = 0; i < prompts.size(); ++i)
        out.push_back(parse_score_object(scores[i], prompts[i].option_tokens));
    return out;
}

OracleScorer::OracleScorer(OracleScorerConfig config) : config_(std::move(config)) {
    if (!(config_.connected_margin > 0.0) || config_.connected_margin > 0.5)
        throw ValidationError("oracle margin must lie in (0, 0.5]");
}

std::map<std::string, double> OracleScorer::score(const RenderedPrompt& prompt,
                                                  const PromptMeta& meta) {
    if (prompt.option_tokens.size() != 2)
        throw ValidationError("oracle scorer expects two-option prompts");
    const double hi = 0.5 + config_.connected_margin;
    const double lo = 0.5 - config_.connected_margin;
    std::map<std::string, double> out = {{prompt.option_tokens[0], 0.5},
                                         {prompt.option_tokens[1], 0.5}};
    switch (prompt.kind) {
    case PromptKind::mcqa_causal: {
        // meta.choice1 / meta.choice2 are the node ids shown as options A / B.
        if (meta.premise.empty() || meta.choice1.empty() || meta.choice2.empty())
            throw ValidationError("oracle scorer needs premise/choice node ids in the metadata");
        bool a_conn = d_connected(config_.causal, meta.choice1, meta.premise, {});
        bool b_conn = d_connected(config_.causal, meta.choice2, meta.premise, {});
        if (a_conn != b_conn) {
            out[prompt.option_tokens[0]] = a_conn ? hi : lo;
            out[prompt.option_tokens[1]] = b_conn ? hi : lo;
        }
        return out;
    }
    case PromptKind::intervention: {
        if (meta.e1.empty() || meta.e2.empty())
            throw ValidationError("oracle scorer needs e1/e2 node ids in the metadata");
        if (!d_connected(config_.causal, meta.e1, meta.e2, {}))
            return out; // no causal path: the intervention moves nothing
        // Find which option slot carries "Increase" (flipping may reorder).
        int inc = -1;
        for (size_t i = 0; i < prompt.option_texts.size(); ++i)
            if (prompt.option_texts[i] == "Increase")
                inc = static_cast<int>(i);
        if (inc < 0)
            throw ValidationError("intervention prompt has no 'Increase' option");
        bool raises = meta.polarity == Polarity::occurred;
        out[prompt.option_tokens[inc]] = raises ? hi : lo;
        out[prompt.option_tokens[1 - inc]] = raises ? lo : hi;
        return out;
    }
    case PromptKind::temporal_masked:
    case PromptKind::temporal_mcqa:
        return out; // graph truth carries no token-level order preference
    }
    throw ValidationError("unknown prompt kind");
}

std::map<std::string, double> UniformScorer::score(const RenderedPrompt& prompt,
                                                   const PromptMeta& meta) {
    (void)meta;
    std::map<std::string, double> out;
    for (const std::string& tok : prompt.option_tokens)
        out[tok] = 0.5;
    return out;
}

std::map<std::string, double> BiasedScorer::score(const RenderedPrompt& prompt,
                                                  const PromptMeta& meta) {
    auto out = inner_->score(prompt, meta);
    if (!prompt.option_tokens.empty())
        out[prompt.option_tokens[0]] *= factor_;
    return out;
}

std::map<std::string, double> InvertedScorer::score(const RenderedPrompt& prompt,
                                                    const PromptMeta& meta) {
    auto out = inner_->score(prompt, meta);
    if (prompt.option_tokens.size() == 2)
        std::swap(out[prompt.option_tokens[0]], out[prompt.option_tokens[1]]);
    return out;
}

McqaPrediction mcqa_predict(Scorer& scorer, const RenderedPrompt& prompt,
                            const PromptMeta& meta) {
    std::vector<double> s = checked_option_scores(scorer, prompt, meta);
    if (s.size() != 2)
        throw ValidationError("mcqa_predict expects two options");
    McqaPrediction pred;
    if (s[1] > s[0]) {
        pred.choice = 2;
    } else {
        pred.choice = 1;
        pred.tie = (s[1] == s[0]);
    }
    return pred;
}

} // namespace causalq
