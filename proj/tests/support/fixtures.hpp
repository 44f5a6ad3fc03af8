// Shared helpers for the test suites: repo data paths, scratch directories,
// and a few scripted Scorer implementations.
#ifndef CAUSALQ_TEST_FIXTURES_HPP
#define CAUSALQ_TEST_FIXTURES_HPP

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <map>
#include <string>

#include "causalq/bundle_io.hpp"
#include "causalq/error.hpp"
#include "causalq/estimand.hpp"
#include "causalq/scorers.hpp"

#ifndef CAUSALQ_TEST_DATA_DIR
#error "CAUSALQ_TEST_DATA_DIR must be defined by the build"
#endif

namespace causalq::testing {

inline std::string data_path(const std::string& rel) {
    return std::string(CAUSALQ_TEST_DATA_DIR) + "/" + rel;
}

inline ActivityGraphs load_tea() { return load_bundle(data_path("activities/tea.json")); }
inline ActivityGraphs load_carwash() {
    return load_bundle(data_path("activities/carwash.json"));
}
inline ActivityGraphs load_diamond() {
    return load_bundle(data_path("activities/diamond.json"));
}

// Fresh scratch directory per call; removed when the object dies.
class ScratchDir {
public:
    ScratchDir() {
        static std::atomic<uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("causalq-test-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

// Returns fixed per-token scores regardless of the prompt.
class FixedScorer : public Scorer {
public:
    explicit FixedScorer(std::map<std::string, double> scores)
        : scores_(std::move(scores)) {}
    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta&) override {
        std::map<std::string, double> out;
        for (const auto& token : prompt.option_tokens) out[token] = scores_.at(token);
        return out;
    }
    std::string name() const override { return "fixed"; }

private:
    std::map<std::string, double> scores_;
};

// Delegates and counts calls.
class CountingScorer : public Scorer {
public:
    explicit CountingScorer(Scorer& inner) : inner_(inner) {}
    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta& meta) override {
        ++calls_;
        return inner_.score(prompt, meta);
    }
    std::string name() const override { return inner_.name(); }
    int calls() const { return calls_; }

private:
    Scorer& inner_;
    int calls_ = 0;
};

// Delegates until call number `fail_at` (1-based), then throws once and
// works normally afterwards.
class FlakyScorer : public Scorer {
public:
    FlakyScorer(Scorer& inner, int fail_at) : inner_(inner), fail_at_(fail_at) {}
    std::map<std::string, double> score(const RenderedPrompt& prompt,
                                        const PromptMeta& meta) override {
        if (++calls_ == fail_at_) throw TransportError("scripted outage");
        return inner_.score(prompt, meta);
    }
    std::string name() const override { return "flaky:" + inner_.name(); }
    int calls() const { return calls_; }

private:
    Scorer& inner_;
    int fail_at_;
    int calls_ = 0;
};

} // namespace causalq::testing

#endif
