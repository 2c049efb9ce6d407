#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace ionwork {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent generator for work item `index` of stream `domain` under `seed`.
/// The same (seed, domain, index) always yields the same sequence.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t domain = 0)
{
    std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (domain + 1));
    s ^= splitmix64(s) + index * 0xa0761d6478bd642fULL;
    std::array<std::uint32_t, 8> words{};
    for (std::size_t k = 0; k < words.size(); k += 2) {
        const std::uint64_t v = splitmix64(s);
        words[k] = static_cast<std::uint32_t>(v);
        words[k + 1] = static_cast<std::uint32_t>(v >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

/// Stream domains, so that different consumers of one seed never share draws.
namespace stream {
inline constexpr std::uint64_t kShots = 1;
inline constexpr std::uint64_t kTrajectories = 2;
inline constexpr std::uint64_t kBootstrap = 3;
inline constexpr std::uint64_t kReadout = 4;
inline constexpr std::uint64_t kNoise = 5;
}  // namespace stream

}  // namespace ionwork
