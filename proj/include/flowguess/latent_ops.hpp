#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "flowguess/flow.hpp"

namespace flowguess {

// Linear path in latent space from start to target, decoded at steps + 1
// evenly spaced points (both endpoints included, consecutive duplicates kept).
std::vector<std::string> interpolate(const FlowModel& model, std::string_view start, std::string_view target,
                                     int steps);

// Decoded samples of N(f(pivot), sigma^2 I). With `unique`, duplicates and the
// pivot itself are dropped and drawing continues until n strings are found or
// 20 * n draws have been made.
std::vector<std::string> neighborhood(const FlowModel& model, std::string_view pivot, double sigma, std::size_t n,
                                      std::uint64_t seed, bool unique);

// Levenshtein distance over Unicode scalars.
std::size_t edit_distance(std::string_view a, std::string_view b);

}  // namespace flowguess
