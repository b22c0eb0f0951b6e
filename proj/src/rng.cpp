#include "flowguess/rng.hpp"

#include <vector>

namespace flowguess {

Rng derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * tags.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto t : tags) push(t);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace flowguess
