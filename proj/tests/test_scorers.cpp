#include "doctest.h"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "causalq/scorers.hpp"
#include "support/fixtures.hpp"

using namespace causalq;
using namespace causalq::testing;
using nlohmann::json;

namespace {

// In-process scorer endpoint. The handler can be swapped per test; every
// request body is recorded for the byte-identity assertions.
class MockServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    MockServer() {
        server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard<std::mutex> lock(mutex_);
                bodies_.push_back(req.body);
            }
            handler_(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        REQUIRE(port_ > 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    void set_handler(Handler h) { handler_ = std::move(h); }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::vector<std::string> bodies() {
        std::lock_guard<std::mutex> lock(mutex_);
        return bodies_;
    }

    // Scores option i of each prompt as i+1; the single-prompt form answers
    // a "prompt" request, the array form a "prompts" one.
    static void echo(const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        auto score_one = [](const json& entry) {
            json scores = json::object();
            int i = 0;
            for (const auto& opt : entry.at("options"))
                scores[opt.get<std::string>()] = ++i;
            return scores;
        };
        json reply;
        if (body.contains("prompts")) {
            reply["scores"] = json::array();
            for (const auto& entry : body.at("prompts"))
                reply["scores"].push_back(score_one(entry));
        } else {
            reply["scores"] = score_one(body);
        }
        res.set_content(reply.dump(), "application/json");
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    Handler handler_ = echo;
    std::mutex mutex_;
    std::vector<std::string> bodies_;
};

RemoteScorerConfig config_for(const MockServer& server) {
    RemoteScorerConfig config;
    config.endpoint = server.endpoint();
    config.model_id = "test-model";
    config.timeout_seconds = 5.0;
    config.max_retries = 3;
    return config;
}

RenderedPrompt two_option_prompt() {
    return render_mcqa_causal("tea", "boil", "fill", "enter", Question::cause);
}

} // namespace

TEST_CASE("remote scorer round-trips the wire protocol") {
    MockServer server;
    RemoteScorer scorer(config_for(server));
    RenderedPrompt prompt = two_option_prompt();

    auto scores = scorer.score(prompt, {});
    CHECK(scores == std::map<std::string, double>{{" A", 1.0}, {" B", 2.0}});
    CHECK(scorer.retries() == 0);
    CHECK(scorer.name() == "remote:test-model");

    // The request body carries exactly model, prompt text, option tokens.
    auto bodies = server.bodies();
    REQUIRE(bodies.size() == 1);
    json sent = json::parse(bodies[0]);
    CHECK(sent.at("model") == "test-model");
    CHECK(sent.at("prompt") == prompt.text);
    CHECK(sent.at("options") == json(prompt.option_tokens));
}

TEST_CASE("remote scorer retries transient failures with identical bodies") {
    MockServer server;
    std::atomic<int> hits{0};
    server.set_handler([&](const httplib::Request& req, httplib::Response& res) {
        if (hits.fetch_add(1) < 2) {
            res.status = 503;
            return;
        }
        MockServer::echo(req, res);
    });
    RemoteScorer scorer(config_for(server));
    auto scores = scorer.score(two_option_prompt(), {});
    CHECK(scores.at(" A") == 1.0);
    CHECK(scorer.retries() == 2);

    auto bodies = server.bodies();
    REQUIRE(bodies.size() == 3);
    CHECK(bodies[0] == bodies[1]);
    CHECK(bodies[1] == bodies[2]);
}

TEST_CASE("remote scorer gives up after max_retries") {
    MockServer server;
    server.set_handler([](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
    });
    RemoteScorerConfig config = config_for(server);
    config.max_retries = 1;
    RemoteScorer scorer(config);
    CHECK_THROWS_AS(scorer.score(two_option_prompt(), {}), TransportError);
    CHECK(scorer.retries() == 1);
    CHECK(server.bodies().size() == 2); // initial try + one retry
}

TEST_CASE("remote scorer treats 4xx and bad payloads as protocol errors") {
    MockServer server;
    RenderedPrompt prompt = two_option_prompt();

    server.set_handler([](const httplib::Request&, httplib::Response& res) {
        res.status = 404;
    });
    RemoteScorer scorer(config_for(server));
    CHECK_THROWS_AS(scorer.score(prompt, {}), ProtocolError);
    CHECK(scorer.retries() == 0); // protocol errors are not retried

    server.set_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_content("this is not json", "text/plain");
    });
    CHECK_THROWS_AS(scorer.score(prompt, {}), ProtocolError);

    server.set_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"scores": {" A": 1.0}})", "application/json");
    });
    CHECK_THROWS_AS(scorer.score(prompt, {}), ProtocolError); // " B" missing

    server.set_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"scores": {" A": 1.0, " B": -3.0}})", "application/json");
    });
    CHECK_THROWS_AS(scorer.score(prompt, {}), ProtocolError);

    server.set_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"wrong_key": {}})", "application/json");
    });
    CHECK_THROWS_AS(scorer.score(prompt, {}), ProtocolError);
    CHECK(scorer.retries() == 0);
}

TEST_CASE("remote scorer reports unreachable endpoints as transport errors") {
    RemoteScorerConfig config;
    config.endpoint = "http://127.0.0.1:9"; // discard port: nothing listens
    config.model_id = "m";
    config.timeout_seconds = 0.2;
    config.max_retries = 1;
    RemoteScorer scorer(config);
    CHECK_THROWS_AS(scorer.score(two_option_prompt(), {}), TransportError);
    CHECK(scorer.retries() == 1);
}

TEST_CASE("remote scorer batch matches one-by-one semantics") {
    MockServer server;
    RemoteScorer scorer(config_for(server));
    std::vector<RenderedPrompt> prompts{
        two_option_prompt(), render_temporal_masked("fill", "boil")};
    auto batch = scorer.score_batch(prompts);
    REQUIRE(batch.size() == 2);
    CHECK(batch[0] == std::map<std::string, double>{{" A", 1.0}, {" B", 2.0}});
    CHECK(batch[1] ==
          std::map<std::string, double>{{"before", 1.0}, {"after", 2.0}});
    CHECK(scorer.score_batch({}).empty());

    // Wrong-arity batch reply is a protocol error.
    server.set_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"scores": [{" A": 1, " B": 2}]})", "application/json");
    });
    CHECK_THROWS_AS(scorer.score_batch(prompts), ProtocolError);
}

TEST_CASE("remote scorer honors the in-flight ceiling under load") {
    MockServer server;
    std::atomic<int> in_flight{0}, peak{0};
    server.set_handler([&](const httplib::Request& req, httplib::Response& res) {
        int now = in_flight.fetch_add(1) + 1;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
        in_flight.fetch_sub(1);
        MockServer::echo(req, res);
    });
    RemoteScorerConfig config = config_for(server);
    config.max_in_flight = 2;
    RemoteScorer scorer(config);

    std::vector<std::thread> workers;
    for (int i = 0; i < 8; ++i)
        workers.emplace_back([&] { scorer.score(two_option_prompt(), {}); });
    for (auto& w : workers) w.join();
    CHECK(server.bodies().size() == 8);
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
}

TEST_CASE("config validation and env overrides") {
    RemoteScorerConfig config;
    config.model_id = "m";
    CHECK_THROWS_AS(RemoteScorer(RemoteScorerConfig(config)), ValidationError);
    config.endpoint = "http://h";
    config.max_in_flight = 0;
    CHECK_THROWS_AS(RemoteScorer(RemoteScorerConfig(config)), ValidationError);
    config.max_in_flight = 1;
    config.score_kind = "perplexity";
    CHECK_THROWS_AS(RemoteScorer(RemoteScorerConfig(config)), ValidationError);

    setenv("CAUSALQ_SCORER_ENDPOINT", "http://10.0.0.1:99", 1);
    setenv("CAUSALQ_SCORER_TIMEOUT", "12.5", 1);
    setenv("CAUSALQ_SCORER_MAX_IN_FLIGHT", "7", 1);
    RemoteScorerConfig base;
    base.endpoint = "http://original";
    RemoteScorerConfig over = with_env_overrides(base);
    CHECK(over.endpoint == "http://10.0.0.1:99");
    CHECK(over.timeout_seconds == 12.5);
    CHECK(over.max_in_flight == 7);

    setenv("CAUSALQ_SCORER_TIMEOUT", "soon", 1);
    CHECK_THROWS_AS(with_env_overrides(base), ValidationError);
    setenv("CAUSALQ_SCORER_TIMEOUT", "12.5", 1);
    setenv("CAUSALQ_SCORER_MAX_IN_FLIGHT", "0", 1);
    CHECK_THROWS_AS(with_env_overrides(base), ValidationError);

    unsetenv("CAUSALQ_SCORER_ENDPOINT");
    unsetenv("CAUSALQ_SCORER_TIMEOUT");
    unsetenv("CAUSALQ_SCORER_MAX_IN_FLIGHT");
    RemoteScorerConfig clean = with_env_overrides(base);
    CHECK(clean.endpoint == "http://original");
    CHECK(clean.timeout_seconds == 30.0);
}

TEST_CASE("oracle scorer answers mcqa prompts from the causal graph") {
    ActivityGraphs tea = load_tea();
    OracleScorer oracle(OracleScorerConfig{tea.causal, 0.4});
    RenderedPrompt prompt = two_option_prompt();

    PromptMeta meta;
    meta.premise = "c";
    meta.choice1 = "a"; // d-connected to c
    meta.choice2 = "s"; // separated
    auto s = oracle.score(prompt, meta);
    CHECK(s.at(" A") == doctest::Approx(0.9));
    CHECK(s.at(" B") == doctest::Approx(0.1));

    std::swap(meta.choice1, meta.choice2);
    s = oracle.score(prompt, meta);
    CHECK(s.at(" A") == doctest::Approx(0.1));
    CHECK(s.at(" B") == doctest::Approx(0.9));

    // Neither (or both) connected: no signal either way.
    meta.premise = "e";
    meta.choice1 = "s";
    meta.choice2 = "b";
    s = oracle.score(prompt, meta);
    CHECK(s.at(" A") == 0.5);
    CHECK(s.at(" B") == 0.5);

    PromptMeta empty;
    CHECK_THROWS_AS(oracle.score(prompt, empty), ValidationError);
    CHECK_THROWS_AS(OracleScorer(OracleScorerConfig{tea.causal, 0.0}), ValidationError);
    CHECK_THROWS_AS(OracleScorer(OracleScorerConfig{tea.causal, 0.6}), ValidationError);
}

TEST_CASE("oracle scorer answers intervention prompts by polarity") {
    ActivityGraphs tea = load_tea();
    OracleScorer oracle(OracleScorerConfig{tea.causal, 0.4});
    PromptMeta meta;
    meta.e1 = "a";
    meta.e2 = "c";

    for (bool flipped : {false, true}) {
        RenderedPrompt prompt = render_intervention("tea", {"enter"}, "fill",
                                                    Polarity::occurred, "boil", flipped);
        meta.polarity = Polarity::occurred;
        auto s = oracle.score(prompt, meta);
        // Increase gets the high score wherever it sits.
        CHECK(s.at(flipped ? " B" : " A") == doctest::Approx(0.9));
        CHECK(s.at(flipped ? " A" : " B") == doctest::Approx(0.1));
    }

    RenderedPrompt negated = render_intervention("tea", {"enter"}, "fill",
                                                 Polarity::negated, "boil", false);
    meta.polarity = Polarity::negated;
    auto s = oracle.score(negated, meta);
    CHECK(s.at(" A") == doctest::Approx(0.1)); // Increase now scores low

    meta.e1 = "b";
    meta.e2 = "c"; // causally unlinked: flat
    s = oracle.score(negated, meta);
    CHECK(s.at(" A") == 0.5);
    CHECK(s.at(" B") == 0.5);

    // Temporal prompts carry no graph signal.
    auto t = oracle.score(render_temporal_masked("x", "y"), meta);
    CHECK(t.at("before") == 0.5);
    CHECK(t.at("after") == 0.5);
}

TEST_CASE("uniform, biased, and inverted scorers") {
    RenderedPrompt prompt = two_option_prompt();
    auto uniform = std::make_shared<UniformScorer>();
    CHECK(uniform->score(prompt, {}) ==
          std::map<std::string, double>{{" A", 0.5}, {" B", 0.5}});

    BiasedScorer biased(uniform, 3.0);
    auto b = biased.score(prompt, {});
    CHECK(b.at(" A") == doctest::Approx(1.5));
    CHECK(b.at(" B") == 0.5);

    ActivityGraphs tea = load_tea();
    auto oracle = std::make_shared<OracleScorer>(OracleScorerConfig{tea.causal, 0.4});
    InvertedScorer inverted(oracle);
    PromptMeta meta;
    meta.premise = "c";
    meta.choice1 = "a";
    meta.choice2 = "s";
    auto inv = inverted.score(prompt, meta);
    CHECK(inv.at(" A") == doctest::Approx(0.1));
    CHECK(inv.at(" B") == doctest::Approx(0.9));
}

TEST_CASE("mcqa_predict argmaxes with ties to option one") {
    RenderedPrompt prompt = two_option_prompt();
    {
        FixedScorer hi_b({{" A", 0.2}, {" B", 0.7}});
        auto pred = mcqa_predict(hi_b, prompt, {});
        CHECK(pred.choice == 2);
        CHECK(!pred.tie);
    }
    {
        FixedScorer hi_a({{" A", 0.7}, {" B", 0.2}});
        auto pred = mcqa_predict(hi_a, prompt, {});
        CHECK(pred.choice == 1);
        CHECK(!pred.tie);
    }
    {
        UniformScorer uniform;
        auto pred = mcqa_predict(uniform, prompt, {});
        CHECK(pred.choice == 1);
        CHECK(pred.tie);
    }
}
