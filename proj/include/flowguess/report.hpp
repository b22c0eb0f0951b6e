#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace flowguess {

struct MilestoneRow {
    std::uint64_t milestone = 0;
    std::uint64_t guesses = 0;
    std::uint64_t unique = 0;
    std::uint64_t matched = 0;
    double match_rate = 0.0;
};

struct MatchReport {
    std::uint64_t guesses = 0;
    std::uint64_t unique = 0;
    std::uint64_t matched = 0;
    double match_rate = 0.0;  // matched / number of targets
    std::vector<MilestoneRow> milestones;

    // Tab-separated rows with a header line: milestone guesses unique matched match_rate.
    std::string milestone_table() const;
};

// 10^4 .. 10^8.
const std::vector<std::uint64_t>& guess_milestones();

// Single-consumer running counts over a guess stream.
class MatchTracker {
public:
    explicit MatchTracker(std::size_t target_count);

    void observe(bool new_unique, bool new_match);
    MatchReport report() const;

private:
    std::size_t targets_;
    MatchReport current_;
    std::size_t next_milestone_ = 0;
};

std::string format_rate(double rate);

}  // namespace flowguess
