#include "flowguess/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "flowguess/errors.hpp"
#include "flowguess/rng.hpp"

namespace flowguess {

namespace detail {
extern const char* const kBundledWords;
extern const char* const kBundledNames;
}  // namespace detail

namespace {

std::vector<std::string> split_lines(const char* text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

}  // namespace

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::BadConfig, "train fraction must lie in (0, 1)");
    }
    if (train_subsample && *train_subsample == 0) throw Error(ErrorCode::BadConfig, "subsample must be positive");
}

Split split_and_clean(const std::vector<std::string>& corpus, const SplitSpec& spec) {
    spec.validate();
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot split an empty corpus");

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = derive_stream(spec.seed, {stream_tag::split});
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_train =
        static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(corpus.size()) + 1e-9));
    Split split;
    std::unordered_set<std::string> train_set;
    for (std::size_t i = 0; i < n_train; ++i) {
        split.train.push_back(corpus[order[i]]);
        train_set.insert(corpus[order[i]]);
    }
    std::unordered_set<std::string> test_seen;
    for (std::size_t i = n_train; i < order.size(); ++i) {
        const std::string& p = corpus[order[i]];
        if (train_set.contains(p) || !test_seen.insert(p).second) continue;
        split.test.push_back(p);
    }
    if (spec.train_subsample && *spec.train_subsample < split.train.size()) {
        std::shuffle(split.train.begin(), split.train.end(), rng);
        split.train.resize(*spec.train_subsample);
    }
    if (split.train.empty() || split.test.empty()) {
        throw Error(ErrorCode::EmptySplit, "split left " + std::to_string(split.train.size()) + " train and " +
                                               std::to_string(split.test.size()) + " test passwords");
    }
    return split;
}

MatchReport evaluate(const std::vector<std::string>& guesses, const std::vector<std::string>& test) {
    const std::unordered_set<std::string> targets(test.begin(), test.end());
    std::unordered_set<std::string> unique;
    MatchTracker tracker(targets.size());
    for (const auto& g : guesses) {
        const bool fresh = unique.insert(g).second;
        tracker.observe(fresh, fresh && targets.contains(g));
    }
    return tracker.report();
}

const std::vector<std::string>& bundled_words() {
    static const std::vector<std::string> words = split_lines(detail::kBundledWords);
    return words;
}

const std::vector<std::string>& bundled_names() {
    static const std::vector<std::string> names = split_lines(detail::kBundledNames);
    return names;
}

std::vector<std::string> gen_synthetic_corpus(std::size_t n, std::uint64_t seed, const TemplateWeights& weights,
                                              int max_length) {
    if (n == 0) throw Error(ErrorCode::BadConfig, "corpus size must be positive");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw Error(ErrorCode::BadConfig, "template weights must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::BadConfig, "at least one template weight must be positive");

    const auto& words = bundled_words();
    const auto& names = bundled_names();
    const auto max_len = static_cast<std::size_t>(max_length);
    Rng rng = derive_stream(seed, {stream_tag::corpus});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](std::size_t size) { return static_cast<std::size_t>(unit(rng) * static_cast<double>(size)) % size; };
    auto digit = [&] { return static_cast<char>('0' + uniform(10)); };
    auto pick_word = [&](std::size_t room) {
        for (;;) {
            const std::string& w = words[uniform(words.size())];
            if (w.size() <= room) return w;
        }
    };

    static constexpr std::string_view symbols = "!@#$%&*.";
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = unit(rng) * total;
        std::size_t kind = 0;
        while (kind + 1 < weights.size() && u >= weights[kind]) u -= weights[kind++];
        while (weights[kind] == 0.0) kind = (kind + weights.size() - 1) % weights.size();

        std::string s;
        switch (kind) {
        case 0: {
            std::string name;
            do name = names[uniform(names.size())]; while (name.size() + 2 > max_len);
            const int year = 1960 + static_cast<int>(uniform(56));
            s = name;
            s.push_back(static_cast<char>('0' + (year / 10) % 10));
            s.push_back(static_cast<char>('0' + year % 10));
            break;
        }
        case 1:
            s = pick_word(max_len - 1);
            s.push_back(digit());
            break;
        case 2: {
            s = pick_word(max_len - 2);
            s.push_back(symbols[uniform(symbols.size())]);
            const std::size_t room = std::min<std::size_t>(3, max_len - s.size());
            const std::size_t count = 1 + uniform(room);
            for (std::size_t k = 0; k < count; ++k) s.push_back(digit());
            break;
        }
        case 3:
            s = pick_word(max_len);
            break;
        default: {
            s = pick_word(max_len);
            for (char& c : s) {
                char leet = 0;
                switch (c) {
                case 'a': leet = '4'; break;
                case 'e': leet = '3'; break;
                case 'i': leet = '1'; break;
                case 'o': leet = '0'; break;
                case 's': leet = '5'; break;
                case 't': leet = '7'; break;
                default: break;
                }
                if (leet && unit(rng) < 0.5) c = leet;
            }
            break;
        }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AblationRow> masking_ablation(const std::vector<std::string>& train,
                                          const std::vector<std::string>& test, const std::vector<MaskSpec>& kinds,
                                          const FlowConfig& model_config, const TrainConfig& train_config,
                                          const SamplingConfig& sampling, std::uint64_t model_seed,
                                          const AblationProgress& progress) {
    if (kinds.empty()) throw Error(ErrorCode::BadConfig, "no mask kinds given");
    const MembershipOracle oracle = MembershipOracle::plaintext(test);
    SamplingConfig static_sampling = sampling;
    static_sampling.mode = SamplingMode::Static;

    std::vector<AblationRow> rows;
    for (const MaskSpec& kind : kinds) {
        FlowConfig cfg = model_config;
        cfg.mask = kind;
        FlowModel model = FlowModel::create(cfg, Charset::canonical(), model_seed);
        const TrainResult tr = flowguess::train(model, train, train_config);
        AblationRow row{kind, tr.history.empty() ? tr.initial_loss : tr.best_loss, {}};
        row.report = dynamic_sample(model, oracle, static_sampling);
        if (progress) {
            progress(kind.to_string() + ": loss " + std::to_string(row.final_loss) + ", matched " +
                     std::to_string(row.report.matched));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "mask\tguesses\tunique\tmatched\tmatch_rate\tfinal_loss\n";
    for (const auto& r : rows) {
        os << r.mask.to_string() << '\t' << r.report.guesses << '\t' << r.report.unique << '\t' << r.report.matched
           << '\t' << format_rate(r.report.match_rate) << '\t' << format_rate(r.final_loss) << '\n';
    }
    return os.str();
}

std::vector<SweepRow> train_size_sweep(const std::vector<std::string>& train, const std::vector<std::string>& test,
                                       const std::vector<std::size_t>& sizes, const FlowConfig& model_config,
                                       const TrainConfig& train_config, const SamplingConfig& sampling,
                                       std::uint64_t model_seed) {
    if (sizes.empty()) throw Error(ErrorCode::BadConfig, "no train sizes given");
    const MembershipOracle oracle = MembershipOracle::plaintext(test);
    SamplingConfig static_sampling = sampling;
    static_sampling.mode = SamplingMode::Static;

    std::vector<SweepRow> rows;
    for (std::size_t size : sizes) {
        if (size == 0 || size > train.size()) throw Error(ErrorCode::BadConfig, "train size out of range");
        const std::vector<std::string> subset(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(size));
        FlowModel model = FlowModel::create(model_config, Charset::canonical(), model_seed);
        flowguess::train(model, subset, train_config);
        SweepRow row{size, dynamic_sample(model, oracle, static_sampling).matched, 0.0};
        if (!rows.empty() && rows.front().matched > 0) {
            row.marginal_improvement = (static_cast<double>(row.matched) - static_cast<double>(rows.front().matched)) /
                                       static_cast<double>(rows.front().matched);
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace flowguess
