#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "flowguess/flow.hpp"
#include "flowguess/oracle.hpp"
#include "flowguess/report.hpp"
#include "flowguess/rng.hpp"

namespace flowguess {

inline constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

enum class SamplingMode { Static, Dynamic, DynamicSmoothing };

std::string_view mode_name(SamplingMode mode);
SamplingMode parse_mode(std::string_view text);

struct DynamicParams {
    std::uint64_t alpha = 1;  // mixture replaces the prior once more than alpha matches exist
    double sigma = 0.12;      // std-dev of every mixture component
    std::uint64_t gamma = 2;  // a component is dropped after gamma refresh rounds; kUnlimited keeps phi = 1
};

// Parameters tabulated for 10^4 .. 10^8 guesses; picks the row whose milestone
// is nearest to n on a log scale.
DynamicParams default_dynamic_params(std::uint64_t n_guesses);

struct SamplingConfig {
    SamplingMode mode = SamplingMode::Static;
    std::uint64_t n_guesses = 0;
    std::uint64_t seed = 0;
    DynamicParams dynamic;
    double gs_sigma = 0.01;
    int gs_max_attempts = 8;
    std::size_t batch_size = 1024;  // prior refresh interval
    unsigned workers = 1;
    std::size_t seen_capacity = std::size_t{1} << 27;

    void validate() const;
};

// Penalization step function: 1 while a component has been used fewer than gamma times.
double phi(std::uint64_t count, std::uint64_t gamma);

// A frozen mixture used for one batch of draws.
struct MixturePrior {
    bool active = false;
    double sigma = 1.0;
    std::vector<LatentPoint> centers;
    std::vector<double> cumulative;  // cumulative weights over centers

    // z ~ N(0, I) when inactive, otherwise a component pick then N(center, sigma^2 I).
    void draw(Rng& rng, std::span<double> out) const;
    // Index into `centers` for a uniform draw u in [0, total).
    std::size_t pick(double u) const;
};

class DynamicSamplerState {
public:
    explicit DynamicSamplerState(DynamicParams params);

    const DynamicParams& params() const noexcept { return params_; }
    bool mixture_active() const noexcept { return latents_.size() > params_.alpha; }

    // First match wins; returns false when the password was already matched.
    bool add_match(const std::string& password, const LatentPoint& z);

    std::vector<double> weights() const;
    // Builds the mixture for the next round and charges one use to every
    // component that carries weight in it. Inactive when |M| <= alpha or
    // every weight is zero.
    MixturePrior refresh();
    // Same mixture as refresh() would build, without charging usage.
    MixturePrior snapshot() const;

    const std::vector<LatentPoint>& latents() const noexcept { return latents_; }
    const std::vector<std::uint64_t>& usage_counts() const noexcept { return usage_; }
    const std::vector<std::string>& matched() const noexcept { return matched_order_; }

private:
    DynamicParams params_;
    std::unordered_set<std::string> matched_;
    std::vector<std::string> matched_order_;
    std::vector<LatentPoint> latents_;
    std::vector<std::uint64_t> usage_;
};

// One latent draw from the state's current mixture (standard normal while inactive).
LatentPoint mixture_sample(const DynamicSamplerState& state, int dim, Rng& rng);

// Decodes x; on a collision with `seen`, adds N(0, gs_sigma^2 I) noise to x
// repeatedly (cumulatively) until an unseen string appears or attempts run out.
std::string gaussian_smooth(std::span<const double> x, const std::function<bool(std::string_view)>& seen,
                            double gs_sigma, int max_attempts, const Charset& charset, Rng& rng);

struct RunReport : MatchReport {
    std::vector<std::string> matched_passwords;  // in match order
};

using GuessSink = std::function<void(std::string_view)>;
// Invoked after each prior refresh, before the batch is drawn.
using RefreshHook = std::function<void(std::uint64_t batch, const DynamicSamplerState&, const MixturePrior&)>;

// Generates config.n_guesses guesses. Latents for batch b, chunk c come from
// stream (seed, b, c), so output does not depend on the worker count.
RunReport dynamic_sample(const FlowModel& model, const MembershipOracle& oracle, const SamplingConfig& config,
                         const GuessSink& sink = {}, const RefreshHook& hook = {});

// Prior sampling with no conditioning.
void sample_static(const FlowModel& model, std::uint64_t n, std::uint64_t seed, const GuessSink& sink,
                   unsigned workers = 1);

}  // namespace flowguess
