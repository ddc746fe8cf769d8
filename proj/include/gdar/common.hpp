#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gdar {

// Exit-code-bearing error. Codes match the CLI contract:
// 1 generic failure, 2 usage, 3 schema-hash mismatch.
enum class Errc { failure = 1, usage = 2, schema_mismatch = 3 };

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Errc code() const { return code_; }
    int exit_code() const { return static_cast<int>(code_); }

private:
    Errc code_;
};

[[noreturn]] inline void fail(const std::string& msg, Errc code = Errc::failure) {
    throw Error(code, msg);
}

inline void require(bool cond, const std::string& msg, Errc code = Errc::failure) {
    if (!cond) fail(msg, code);
}

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64), used for schema/config fingerprints.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 14695981039346656037ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

// Deterministic sub-stream seeding: mixes a base seed with a tag and indices
// so independent consumers (init, dropout, sampling, ...) never share streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = fnv1a(tag, base ^ 0x9e3779b97f4a7c15ULL);
    h ^= a + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdULL;
    h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xc4ceb9fe1a85ec53ULL;
    h ^= h >> 33;
    return h;
}

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

inline double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double leaky_relu(double x, double slope) { return x >= 0 ? x : slope * x; }

// derivative convention: 1 at x == 0
inline double leaky_relu_grad(double x, double slope) { return x >= 0 ? 1.0 : slope; }

// Uniform double in [0,1) from a raw 64-bit draw; engine-independent mapping.
inline double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Unbiased-enough bounded draw without uniform_int_distribution (whose
// sequence is implementation-defined).
template <class Rng>
std::uint64_t bounded(Rng& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(rng()) * n) >> 64);
}

std::string format_double(double v, const char* fmt = "%.17g");

}  // namespace gdar
