#include "flowguess/report.hpp"

#include <cstdio>
#include <sstream>

namespace flowguess {

const std::vector<std::uint64_t>& guess_milestones() {
    static const std::vector<std::uint64_t> m{10'000, 100'000, 1'000'000, 10'000'000, 100'000'000};
    return m;
}

std::string format_rate(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", rate);
    return buf;
}

std::string MatchReport::milestone_table() const {
    std::ostringstream os;
    os << "milestone\tguesses\tunique\tmatched\tmatch_rate\n";
    for (const auto& r : milestones) {
        os << r.milestone << '\t' << r.guesses << '\t' << r.unique << '\t' << r.matched << '\t'
           << format_rate(r.match_rate) << '\n';
    }
    return os.str();
}

MatchTracker::MatchTracker(std::size_t target_count) : targets_(target_count) {}

void MatchTracker::observe(bool new_unique, bool new_match) {
    ++current_.guesses;
    if (new_unique) ++current_.unique;
    if (new_match) ++current_.matched;
    current_.match_rate = targets_ == 0 ? 0.0 : static_cast<double>(current_.matched) / static_cast<double>(targets_);
    const auto& ms = guess_milestones();
    if (next_milestone_ < ms.size() && current_.guesses == ms[next_milestone_]) {
        current_.milestones.push_back(
            {ms[next_milestone_], current_.guesses, current_.unique, current_.matched, current_.match_rate});
        ++next_milestone_;
    }
}

MatchReport MatchTracker::report() const { return current_; }

}  // namespace flowguess
