#pragma once

#include <cstdint>
#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

namespace dac {

/// FNV-1a hash of a role string, used to derive per-purpose seeds.
std::uint64_t fnv1a64(std::string_view s);

/// One step of the splitmix64 generator; advances `state` and returns the output.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Derives the seed for a named role ("model-init", "shuffle", ...) from the
/// single master seed, so every consumer gets an independent stream while the
/// whole run stays reproducible from one number.
std::uint64_t seed_for(std::uint64_t master_seed, std::string_view role);

/// Deterministic random generator with explicitly coded distributions.
///
/// The standard library leaves std::normal_distribution and friends
/// implementation-defined, which would make byte-level reproducibility depend
/// on the toolchain. Everything here is spelled out: splitmix64 for bits,
/// Box-Muller for normals, Fisher-Yates for shuffles.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). Requires n > 0.
    std::size_t below(std::size_t n) {
        // Lemire's multiply-shift; bias is < 2^-64 per draw, far below anything
        // observable at this scale, and the mapping is fully deterministic.
        using u128 = unsigned __int128;
        return static_cast<std::size_t>(
            (static_cast<u128>(next_u64()) * static_cast<u128>(n)) >> 64);
    }

    /// Standard normal via Box-Muller. Draws two uniforms every other call.
    double normal();

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Draws `m` distinct indices from 0..n-1 (partial Fisher-Yates). The
    /// returned order is part of the deterministic contract.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m);

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dac
