#include "flowguess/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "flowguess/errors.hpp"

namespace flowguess {

namespace {

// Rows per generation chunk. Fixed so that results do not depend on how many
// workers share a batch.
constexpr std::size_t kChunkRows = 256;

}  // namespace

std::string_view mode_name(SamplingMode mode) {
    switch (mode) {
    case SamplingMode::Static: return "static";
    case SamplingMode::Dynamic: return "dynamic";
    case SamplingMode::DynamicSmoothing: return "dynamic-gs";
    }
    return "static";
}

SamplingMode parse_mode(std::string_view text) {
    if (text == "static") return SamplingMode::Static;
    if (text == "dynamic") return SamplingMode::Dynamic;
    if (text == "dynamic-gs") return SamplingMode::DynamicSmoothing;
    throw Error(ErrorCode::BadConfig, "unknown sampling mode '" + std::string(text) + "'");
}

DynamicParams default_dynamic_params(std::uint64_t n_guesses) {
    struct Row {
        double log10_guesses;
        DynamicParams params;
    };
    static constexpr Row table[] = {
        {4.0, {1, 0.12, 2}}, {5.0, {1, 0.12, 2}}, {6.0, {5, 0.12, 2}}, {7.0, {50, 0.12, 10}}, {8.0, {50, 0.15, 10}},
    };
    const double x = n_guesses == 0 ? 0.0 : std::log10(static_cast<double>(n_guesses));
    const Row* best = &table[0];
    for (const Row& r : table) {
        if (std::abs(r.log10_guesses - x) < std::abs(best->log10_guesses - x)) best = &r;
    }
    return best->params;
}

void SamplingConfig::validate() const {
    if (mode != SamplingMode::Static) {
        if (!(dynamic.sigma > 0.0) || !std::isfinite(dynamic.sigma)) {
            throw Error(ErrorCode::BadConfig, "sigma must be positive");
        }
        if (dynamic.gamma < 1) throw Error(ErrorCode::BadConfig, "gamma must be >= 1");
    }
    if (!(gs_sigma >= 0.0)) throw Error(ErrorCode::BadConfig, "gs sigma must be >= 0");
    if (gs_max_attempts < 0) throw Error(ErrorCode::BadConfig, "gs attempts must be >= 0");
    if (batch_size < 1) throw Error(ErrorCode::BadConfig, "batch size must be positive");
    if (workers < 1) throw Error(ErrorCode::BadConfig, "workers must be positive");
}

double phi(std::uint64_t count, std::uint64_t gamma) { return count < gamma ? 1.0 : 0.0; }

void MixturePrior::draw(Rng& rng, std::span<double> out) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    if (!active) {
        for (double& v : out) v = normal(rng);
        return;
    }
    std::uniform_real_distribution<double> uniform(0.0, cumulative.back());
    const LatentPoint& c = centers[pick(uniform(rng))];
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = c[static_cast<Eigen::Index>(j)] + sigma * normal(rng);
}

std::size_t MixturePrior::pick(double u) const {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), centers.size() - 1);
}

DynamicSamplerState::DynamicSamplerState(DynamicParams params) : params_(params) {}

bool DynamicSamplerState::add_match(const std::string& password, const LatentPoint& z) {
    if (!matched_.insert(password).second) return false;
    matched_order_.push_back(password);
    latents_.push_back(z);
    usage_.push_back(0);
    return true;
}

std::vector<double> DynamicSamplerState::weights() const {
    std::vector<double> w(usage_.size());
    for (std::size_t i = 0; i < usage_.size(); ++i) w[i] = phi(usage_[i], params_.gamma);
    return w;
}

MixturePrior DynamicSamplerState::snapshot() const {
    MixturePrior prior;
    prior.sigma = params_.sigma;
    if (!mixture_active()) return prior;
    const std::vector<double> w = weights();
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) {
            total += w[i];
            prior.centers.push_back(latents_[i]);
            prior.cumulative.push_back(total);
        }
    }
    prior.active = !prior.centers.empty();
    return prior;
}

MixturePrior DynamicSamplerState::refresh() {
    MixturePrior prior = snapshot();
    if (prior.active) {
        for (std::size_t i = 0; i < usage_.size(); ++i) {
            if (phi(usage_[i], params_.gamma) > 0.0) ++usage_[i];
        }
    }
    return prior;
}

LatentPoint mixture_sample(const DynamicSamplerState& state, int dim, Rng& rng) {
    LatentPoint z(dim);
    state.snapshot().draw(rng, std::span<double>(z.data(), static_cast<std::size_t>(dim)));
    return z;
}

std::string gaussian_smooth(std::span<const double> x, const std::function<bool(std::string_view)>& seen,
                            double gs_sigma, int max_attempts, const Charset& charset, Rng& rng) {
    std::string guess = decode_vector(x, charset);
    if (max_attempts <= 0 || !seen(guess)) return guess;
    std::vector<double> work(x.begin(), x.end());
    std::normal_distribution<double> noise(0.0, gs_sigma);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        for (double& v : work) v += noise(rng);
        guess = decode_vector(work, charset);
        if (!seen(guess)) break;
    }
    return guess;
}

namespace {

struct BatchDraw {
    Matrix latents;
    Matrix data;
};

BatchDraw draw_batch(const FlowModel& model, const MixturePrior& prior, std::uint64_t seed, std::uint64_t batch,
                     std::size_t rows, unsigned workers) {
    const int dim = model.dim();
    BatchDraw out{Matrix(static_cast<Eigen::Index>(rows), dim), Matrix(static_cast<Eigen::Index>(rows), dim)};
    const std::size_t chunks = (rows + kChunkRows - 1) / kChunkRows;

    auto run_chunk = [&](std::size_t c) {
        const auto start = static_cast<Eigen::Index>(c * kChunkRows);
        const auto count = static_cast<Eigen::Index>(std::min(kChunkRows, rows - c * kChunkRows));
        Rng rng = derive_stream(seed, {stream_tag::latent, batch, c});
        for (Eigen::Index r = start; r < start + count; ++r) {
            prior.draw(rng, std::span<double>(out.latents.row(r).data(), static_cast<std::size_t>(dim)));
        }
        out.data.middleRows(start, count) = flow_inverse(model, out.latents.middleRows(start, count));
    };

    const unsigned threads = std::min<unsigned>(workers, static_cast<unsigned>(chunks));
    if (threads <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                try {
                    for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace

RunReport dynamic_sample(const FlowModel& model, const MembershipOracle& oracle, const SamplingConfig& config,
                         const GuessSink& sink, const RefreshHook& hook) {
    config.validate();
    const bool conditioned = config.mode != SamplingMode::Static;
    // Static runs still record matches, but alpha = unlimited keeps the prior fixed.
    DynamicSamplerState state(conditioned ? config.dynamic
                                          : DynamicParams{kUnlimited, config.dynamic.sigma, config.dynamic.gamma});
    SeenSet seen(config.seen_capacity);
    MatchTracker tracker(oracle.size());
    const bool smoothing = config.mode == SamplingMode::DynamicSmoothing;
    auto is_seen = [&](std::string_view s) { return seen.contains(s); };

    RunReport report;
    std::uint64_t done = 0;
    for (std::uint64_t batch = 0; done < config.n_guesses; ++batch) {
        const auto rows = static_cast<std::size_t>(std::min<std::uint64_t>(config.batch_size, config.n_guesses - done));
        const MixturePrior prior = state.refresh();
        if (hook) hook(batch, state, prior);
        const BatchDraw draw = draw_batch(model, prior, config.seed, batch, rows, config.workers);

        Rng gs_rng = derive_stream(config.seed, {stream_tag::smoothing, batch});
        for (std::size_t i = 0; i < rows; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const std::span<const double> x(draw.data.row(r).data(), static_cast<std::size_t>(model.dim()));
            std::string guess = smoothing
                ? gaussian_smooth(x, is_seen, config.gs_sigma, config.gs_max_attempts, model.charset(), gs_rng)
                : decode_vector(x, model.charset());
            const bool fresh = seen.insert(guess);
            bool new_match = false;
            if (oracle.kind() != MembershipOracle::Kind::Empty && oracle.contains(guess)) {
                new_match = state.add_match(guess, draw.latents.row(r).transpose());
            }
            tracker.observe(fresh, new_match);
            if (sink) sink(guess);
        }
        done += rows;
    }
    static_cast<MatchReport&>(report) = tracker.report();
    report.matched_passwords = state.matched();
    return report;
}

void sample_static(const FlowModel& model, std::uint64_t n, std::uint64_t seed, const GuessSink& sink,
                   unsigned workers) {
    SamplingConfig config;
    config.mode = SamplingMode::Static;
    config.n_guesses = n;
    config.seed = seed;
    config.workers = workers;
    dynamic_sample(model, MembershipOracle{}, config, sink);
}

}  // namespace flowguess
