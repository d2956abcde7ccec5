#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace ntn {

using Rng = std::mt19937_64;

/// Independent random streams derived from one run seed. Each purpose owns a
/// stream so that, e.g., changing the policy does not perturb user mobility.
enum class Stream : std::uint32_t {
    Placement = 1,
    Mobility = 2,
    TaskGeneration = 3,
    Policy = 4,
    Exploration = 5,
    Replay = 6,
    NetworkInit = 7,
    Bootstrap = 8,
    EpisodeSeeds = 9,
};

inline Rng make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Seed for the `index`-th episode of a run; stable across resumes.
inline std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t index) {
    Rng r = make_stream(run_seed, Stream::EpisodeSeeds, index);
    return r();
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double gaussian(Rng& rng, double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(rng);
}

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& text);

}  // namespace ntn
