#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace flowguess {

using Rng = std::mt19937_64;

// Independent, reproducible stream for (seed, tag...). Used so that workers,
// batches and chunks each draw from their own generator.
Rng derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {});

// Stream tags keep sub-streams of one run disjoint.
namespace stream_tag {
inline constexpr std::uint64_t init = 0x696e6974;
inline constexpr std::uint64_t shuffle = 0x73687566;
inline constexpr std::uint64_t jitter = 0x6a697474;
inline constexpr std::uint64_t latent = 0x6c61746e;
inline constexpr std::uint64_t smoothing = 0x736d6f6f;
inline constexpr std::uint64_t split = 0x73706c74;
inline constexpr std::uint64_t corpus = 0x636f7270;
}  // namespace stream_tag

}  // namespace flowguess
