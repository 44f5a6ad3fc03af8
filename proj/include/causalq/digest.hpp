#ifndef CAUSALQ_DIGEST_HPP
#define CAUSALQ_DIGEST_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace causalq {

// Incremental SHA-256. Self-contained so dataset digests do not pull in a
// crypto library; the digest is a content fingerprint, not a security
// boundary.
class Sha256 {
public:
    Sha256();
    void update(const void* data, size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }
    // Finalizes and returns the digest as 64 lowercase hex characters.
    // The object must not be updated afterwards.
    std::string hex_digest();

private:
    void process_block(const uint8_t* block);

    uint32_t state_[8];
    uint64_t bit_len_;
    uint8_t buffer_[64];
    size_t buffer_len_;
};

std::string sha256_hex(const std::string& data);

// Collapses a content digest plus sampling parameters into a 64-bit RNG
// seed, so a frozen sample is a pure function of (content, n, seed).
uint64_t mix_seed(const std::string& digest_hex, uint64_t n, uint64_t seed);

// Deterministic draws on top of mt19937_64. The engine's output sequence is
// pinned by the standard, but std::shuffle and the distribution classes are
// implementation-defined, which would let a libstdc++ upgrade silently change
// frozen samples; this spells out the draws (rejection sampling for unbiased
// bounded values, explicit Fisher-Yates for shuffles).
class DeterministicRng {
public:
    explicit DeterministicRng(uint64_t seed) : engine_(seed) {}
    uint64_t next() { return engine_(); }
    uint64_t below(uint64_t bound);  // uniform in [0, bound), bound >= 1
    double unit();                   // uniform in [0, 1)
    void shuffle(std::vector<uint32_t>& values);

private:
    std::mt19937_64 engine_;
};

} // namespace causalq

#endif
