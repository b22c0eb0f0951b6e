#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "flowguess/checkpoint.hpp"
#include "flowguess/encoding.hpp"
#include "flowguess/errors.hpp"
#include "flowguess/flow.hpp"
#include "flowguess/harness.hpp"
#include "flowguess/latent_ops.hpp"
#include "flowguess/oracle.hpp"
#include "flowguess/rng.hpp"
#include "flowguess/sampling.hpp"
#include "flowguess/training.hpp"

namespace fs = std::filesystem;
using namespace flowguess;

namespace {

// Exit statuses; documented in the README.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitIo = 5;

int exit_status(ErrorClass c) {
    switch (c) {
        case ErrorClass::Usage: return kExitUsage;
        case ErrorClass::Data: return kExitData;
        case ErrorClass::Numeric: return kExitNumeric;
        case ErrorClass::Io: return kExitIo;
        case ErrorClass::Internal: return kExitInternal;
    }
    return kExitInternal;
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

// Default paths may come from the environment; flags always win.
std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

std::string model_path(const std::string& flag) {
    const std::string p = flag.empty() ? env_or("FLOWGUESS_MODEL", "") : flag;
    if (p.empty()) throw Error(ErrorCode::BadConfig, "--model is required (or set FLOWGUESS_MODEL)");
    return p;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    return out;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream out = open_out(path);
    for (const auto& l : lines) out << l << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> seeded_subsample(std::vector<std::string> v, std::size_t k, std::uint64_t seed) {
    if (k >= v.size()) return v;
    Rng rng = derive_stream(seed, {stream_tag::corpus});
    std::shuffle(v.begin(), v.end(), rng);
    v.resize(k);
    return v;
}

std::vector<MaskSpec> parse_masks(const std::string& list) {
    std::vector<MaskSpec> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(MaskSpec::parse(item));
    }
    if (out.empty()) throw Error(ErrorCode::BadMaskSpec, "no masks given");
    return out;
}

struct ModelFlags {
    int layers = 18;
    std::string mask = "char-run:1";
    int hidden = 256;
    int blocks = 2;
    int max_len = kDefaultMaxLength;
    double scale_bound = kDefaultScaleBound;
    bool unbounded = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--layers", layers, "Coupling layers")->capture_default_str();
        cmd->add_option("--mask", mask, "horizontal | char-run:M")->capture_default_str();
        cmd->add_option("--hidden", hidden, "Hidden width of the s/t networks")->capture_default_str();
        cmd->add_option("--blocks", blocks, "Residual blocks per network")->capture_default_str();
        cmd->add_option("--max-len", max_len, "Maximum password length (data dimension)")->capture_default_str();
        cmd->add_option("--scale-bound", scale_bound, "Bound on |s|")->capture_default_str();
        cmd->add_flag("--unbounded-scale", unbounded, "Use exp(s) with no bound on s");
    }

    FlowConfig config() const {
        FlowConfig c;
        c.dim = max_len;
        c.layers = layers;
        c.mask = MaskSpec::parse(mask);
        c.hidden = hidden;
        c.blocks = blocks;
        c.scale_bound = unbounded ? kUnboundedScale : scale_bound;
        c.validate();
        return c;
    }
};

struct TrainFlags {
    int epochs = 400;
    int batch = 512;
    double lr = 1e-3;
    std::optional<double> clip;
    double jitter = 0.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
        cmd->add_option("--batch", batch, "Minibatch size")->capture_default_str();
        cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        cmd->add_option("--clip", clip, "Clip the gradient norm to this value");
        cmd->add_option("--jitter", jitter, "Uniform dequantization noise amplitude")->capture_default_str();
    }

    TrainConfig config(std::uint64_t seed) const {
        TrainConfig c;
        c.epochs = epochs;
        c.batch_size = batch;
        c.learning_rate = lr;
        c.seed = seed;
        c.grad_clip_norm = clip;
        c.dequant_jitter = jitter;
        c.validate();
        return c;
    }
};

std::string format_double(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::string corpus;
    std::string out;
    std::string history;
    std::string charset;
    std::uint64_t seed = 0;
    std::optional<std::size_t> subsample;
    int keep_every = 0;
    bool progress = false;
    ModelFlags model;
    TrainFlags training;
};

int run_train(const TrainArgs& a) {
    const Charset cs = a.charset.empty() ? Charset::canonical() : Charset::from_utf8(a.charset);
    const FlowConfig fc = a.model.config();
    const TrainConfig tc = a.training.config(a.seed);

    Corpus corpus = load_corpus(a.corpus, cs, fc.dim);
    if (corpus.skipped.total() > 0) std::cerr << "skipped " << corpus.skipped.summary() << '\n';
    std::vector<std::string> train_set =
        a.subsample ? seeded_subsample(std::move(corpus.passwords), *a.subsample, a.seed) : corpus.passwords;
    if (train_set.empty()) throw Error(ErrorCode::EmptyCorpus, "no passwords left to train on");

    FlowModel model = FlowModel::create(fc, cs, a.seed);
    auto& meta = model.mutable_info().metadata;
    meta["train.epochs"] = std::to_string(tc.epochs);
    meta["train.batch"] = std::to_string(tc.batch_size);
    meta["train.lr"] = format_double(tc.learning_rate, 8);
    meta["train.seed"] = std::to_string(tc.seed);
    meta["train.size"] = std::to_string(train_set.size());

    const fs::path out(a.out);
    ProgressSink sink = [&](const EpochStats& s, const FlowModel& m) {
        if (a.progress) {
            std::cerr << "epoch " << s.epoch << " loss " << format_double(s.mean_loss) << (s.improved ? " *" : "")
                      << '\n';
        }
        if (a.keep_every > 0 && s.epoch % a.keep_every == 0) {
            fs::path snap = out;
            snap += ".epoch" + std::to_string(s.epoch);
            save_checkpoint(m, snap);
        }
    };

    TrainResult r;
    try {
        r = train(model, train_set, tc, sink);
    } catch (const Error& e) {
        if (e.error_class() == ErrorClass::Numeric) {
            fs::path partial = out;
            partial += ".best";
            save_checkpoint(model, partial);
        }
        throw;
    }
    meta["train.best_epoch"] = std::to_string(r.best_epoch);
    save_checkpoint(model, out);

    const fs::path history = a.history.empty() ? fs::path(a.out + ".loss.tsv") : fs::path(a.history);
    std::ofstream h = open_out(history);
    h << "epoch\tloss\n0\t" << format_double(r.initial_loss, 10) << '\n';
    for (std::size_t i = 0; i < r.history.size(); ++i) h << (i + 1) << '\t' << format_double(r.history[i], 10) << '\n';
    if (!h) throw Error(ErrorCode::IoError, "failed writing " + history.string());

    std::cout << "parameters\t" << model.parameter_count() << '\n'
              << "train_size\t" << train_set.size() << '\n'
              << "initial_loss\t" << format_double(r.initial_loss) << '\n'
              << "best_epoch\t" << r.best_epoch << '\n'
              << "best_loss\t" << format_double(r.best_loss) << '\n';
    return kExitOk;
}

// ---- guess ---------------------------------------------------------------

struct GuessArgs {
    std::string model;
    std::string targets;
    std::uint64_t n = 0;
    std::string mode = "static";
    std::optional<std::uint64_t> alpha;
    std::optional<double> sigma;
    std::optional<std::uint64_t> gamma;
    bool no_penalty = false;
    double gs_sigma = 0.01;
    int gs_attempts = 8;
    std::size_t batch = 1024;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string report;
    std::string matched_out;
    bool quiet = false;
    bool progress = false;
    bool timing = false;
};

std::string render_report(const SamplingConfig& sc, const FlowModel& model,
                          const RunReport& r, std::optional<double> seconds) {
    std::ostringstream o;
    o << "mode\t" << mode_name(sc.mode) << '\n'
      << "seed\t" << sc.seed << '\n'
      << "guesses\t" << r.guesses << '\n'
      << "unique\t" << r.unique << '\n'
      << "matched\t" << r.matched << '\n'
      << "match_rate\t" << format_rate(r.match_rate) << '\n'
      << "parameters\t" << model.parameter_count() << '\n';
    if (sc.mode != SamplingMode::Static) {
        o << "alpha\t" << sc.dynamic.alpha << '\n'
          << "sigma\t" << format_double(sc.dynamic.sigma) << '\n'
          << "gamma\t" << (sc.dynamic.gamma == kUnlimited ? std::string("inf") : std::to_string(sc.dynamic.gamma))
          << '\n';
    }
    if (sc.mode == SamplingMode::DynamicSmoothing) {
        o << "gs_sigma\t" << format_double(sc.gs_sigma) << '\n' << "gs_attempts\t" << sc.gs_max_attempts << '\n';
    }
    if (seconds) o << "seconds\t" << format_double(*seconds, 3) << '\n';
    o << '\n' << r.milestone_table();
    return o.str();
}

int run_guess(const GuessArgs& a) {
    if (a.n == 0) throw Error(ErrorCode::BadConfig, "--n must be positive");
    const FlowModel model = load_checkpoint(model_path(a.model));
    const MembershipOracle oracle = MembershipOracle::from_file(a.targets);

    SamplingConfig sc;
    sc.mode = parse_mode(a.mode);
    sc.n_guesses = a.n;
    sc.seed = a.seed;
    sc.gs_sigma = a.gs_sigma;
    sc.gs_max_attempts = a.gs_attempts;
    sc.batch_size = a.batch;
    sc.workers = a.workers;
    sc.dynamic = default_dynamic_params(a.n);
    if (sc.mode == SamplingMode::Static) {
        if (a.alpha || a.sigma || a.gamma || a.no_penalty) {
            std::cerr << "warning: --alpha/--sigma/--gamma/--no-penalty are ignored in static mode\n";
        }
    } else {
        if (a.alpha) sc.dynamic.alpha = *a.alpha;
        if (a.sigma) sc.dynamic.sigma = *a.sigma;
        if (a.gamma) sc.dynamic.gamma = *a.gamma;
        if (a.no_penalty) sc.dynamic.gamma = kUnlimited;
    }
    sc.validate();

    GuessSink sink;
    if (!a.quiet) {
        sink = [](std::string_view g) {
            std::cout.write(g.data(), static_cast<std::streamsize>(g.size()));
            std::cout.put('\n');
        };
    }
    const std::uint64_t batches = (a.n + sc.batch_size - 1) / sc.batch_size;
    RefreshHook hook = [&](std::uint64_t batch, const DynamicSamplerState& state, const MixturePrior& prior) {
        // A batch's guesses are written by the time the next refresh happens.
        if (!a.quiet) std::cout.flush();
        if (a.progress && (batch % 64 == 0 || batch + 1 == batches)) {
            std::cerr << "batch " << batch << "/" << batches << " matched " << state.matched().size()
                      << (prior.active ? " mixture" : " prior") << '\n';
        }
    };

    const auto t0 = std::chrono::steady_clock::now();
    const RunReport r = dynamic_sample(model, oracle, sc, sink, hook);
    std::cout.flush();
    std::optional<double> seconds;
    if (a.timing) seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string text = render_report(sc, model, r, seconds);
    if (!a.report.empty()) {
        std::ofstream out = open_out(a.report);
        out << text;
        if (!out) throw Error(ErrorCode::IoError, "failed writing " + a.report);
    } else if (a.quiet) {
        std::cout << text;
    } else {
        std::cerr << text;
    }
    if (!a.matched_out.empty()) write_lines(a.matched_out, r.matched_passwords);
    return kExitOk;
}

// ---- small subcommands ---------------------------------------------------

struct SampleArgs {
    std::string model;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

int run_sample(const SampleArgs& a) {
    const FlowModel model = load_checkpoint(model_path(a.model));
    std::uint64_t emitted = 0;
    sample_static(model, a.n, a.seed, [&](std::string_view g) {
        std::cout.write(g.data(), static_cast<std::streamsize>(g.size()));
        std::cout.put('\n');
        if (++emitted % 1024 == 0) std::cout.flush();
    }, a.workers);
    std::cout.flush();
    return kExitOk;
}

struct InterpolateArgs {
    std::string model;
    std::string start;
    std::string target;
    int steps = 10;
    bool verbose = false;
};

int run_interpolate(const InterpolateArgs& a) {
    const FlowModel model = load_checkpoint(model_path(a.model));
    const auto path = interpolate(model, a.start, a.target, a.steps);
    for (std::size_t j = 0; j < path.size(); ++j) {
        if (a.verbose) {
            std::cout << j << '\t' << edit_distance(path[j], a.start) << '\t' << edit_distance(path[j], a.target)
                      << '\t';
        }
        std::cout << path[j] << '\n';
    }
    return kExitOk;
}

struct NeighborhoodArgs {
    std::string model;
    std::string pivot;
    double sigma = 0.05;
    std::size_t n = 10;
    std::uint64_t seed = 0;
    bool unique = false;
};

int run_neighborhood(const NeighborhoodArgs& a) {
    const FlowModel model = load_checkpoint(model_path(a.model));
    for (const auto& s : neighborhood(model, a.pivot, a.sigma, a.n, a.seed, a.unique)) std::cout << s << '\n';
    return kExitOk;
}

struct LogprobArgs {
    std::string model;
    std::vector<std::string> passwords;
};

int run_logprob(const LogprobArgs& a) {
    const FlowModel model = load_checkpoint(model_path(a.model));
    for (const auto& p : a.passwords) {
        const double lp = log_prob(model, encode_password(p, model.charset(), model.dim()));
        if (a.passwords.size() == 1) {
            std::cout << format_double(lp) << '\n';
        } else {
            std::cout << p << '\t' << format_double(lp) << '\n';
        }
    }
    return kExitOk;
}

struct SplitArgs {
    std::string corpus;
    std::string train_out;
    std::string test_out;
    double fraction = 0.8;
    std::optional<std::size_t> subsample;
    std::uint64_t seed = 0;
    int max_len = kDefaultMaxLength;
};

int run_split(const SplitArgs& a) {
    Corpus corpus = load_corpus(a.corpus, Charset::canonical(), a.max_len);
    if (corpus.skipped.total() > 0) std::cerr << "skipped " << corpus.skipped.summary() << '\n';
    SplitSpec spec;
    spec.train_fraction = a.fraction;
    spec.train_subsample = a.subsample;
    spec.seed = a.seed;
    const Split s = split_and_clean(corpus.passwords, spec);
    write_lines(a.train_out, s.train);
    write_lines(a.test_out, s.test);
    std::cout << "train\t" << s.train.size() << '\n' << "test\t" << s.test.size() << '\n';
    return kExitOk;
}

struct GenArgs {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::vector<double> weights;
    int max_len = kDefaultMaxLength;
};

int run_gen(const GenArgs& a) {
    TemplateWeights w = kDefaultTemplateWeights;
    if (!a.weights.empty()) {
        if (a.weights.size() != w.size()) throw Error(ErrorCode::BadConfig, "--weights takes exactly 5 values");
        std::copy(a.weights.begin(), a.weights.end(), w.begin());
    }
    const auto corpus = gen_synthetic_corpus(a.n, a.seed, w, a.max_len);
    if (a.out.empty() || a.out == "-") {
        for (const auto& p : corpus) std::cout << p << '\n';
    } else {
        write_lines(a.out, corpus);
    }
    return kExitOk;
}

struct AblateArgs {
    std::string train;
    std::string test;
    std::string masks = "char-run:1,char-run:2,horizontal";
    std::uint64_t n = 100000;
    std::uint64_t seed = 0;
    std::uint64_t sample_seed = 0;
    unsigned workers = 1;
    std::string out;
    bool progress = false;
    ModelFlags model;
    TrainFlags training;
};

int run_ablate(const AblateArgs& a) {
    const Charset cs = Charset::canonical();
    const std::vector<MaskSpec> masks = parse_masks(a.masks);
    const FlowConfig fc = a.model.config();
    const TrainConfig tc = a.training.config(a.seed);
    const auto train_set = filter_corpus(read_lines(a.train), cs, fc.dim).passwords;
    const auto test_set = filter_corpus(read_lines(a.test), cs, fc.dim, true).passwords;

    SamplingConfig sc;
    sc.mode = SamplingMode::Static;
    sc.n_guesses = a.n;
    sc.seed = a.sample_seed;
    sc.workers = a.workers;
    AblationProgress progress;
    if (a.progress) progress = [](const std::string& m) { std::cerr << m << '\n'; };
    const auto rows = masking_ablation(train_set, test_set, masks, fc, tc, sc, a.seed, progress);
    const std::string table = ablation_table(rows);
    if (a.out.empty()) {
        std::cout << table;
    } else {
        std::ofstream out = open_out(a.out);
        out << table;
    }
    return kExitOk;
}

struct InfoArgs {
    std::string model;
};

int run_info(const InfoArgs& a) {
    const FlowModel model = load_checkpoint(model_path(a.model));
    const FlowConfig& c = model.config();
    std::cout << "dim\t" << c.dim << '\n'
              << "layers\t" << c.layers << '\n'
              << "mask\t" << c.mask.to_string() << '\n'
              << "hidden\t" << c.hidden << '\n'
              << "blocks\t" << c.blocks << '\n'
              << "scale_bound\t" << (std::isinf(c.scale_bound) ? std::string("inf") : format_double(c.scale_bound))
              << '\n'
              << "parameters\t" << model.parameter_count() << '\n'
              << "charset_digest\t" << model.charset_digest() << '\n'
              << "epochs_recorded\t" << model.info().loss_history.size() << '\n';
    for (const auto& [k, v] : model.info().metadata) std::cout << "meta." << k << '\t' << v << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(false);

    CLI::App app{"Flow-based password guessing"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::function<int()> action;

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Fit a flow to a password corpus");
    train_cmd->add_option("--corpus", tr.corpus, "One password per line")->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
    train_cmd->add_option("--history", tr.history, "Loss history path (default: OUT.loss.tsv)");
    train_cmd->add_option("--charset", tr.charset, "Printable alphabet, UTF-8 (default: ASCII 0x20-0x7E)");
    train_cmd->add_option("--seed", tr.seed, "Seed for init and shuffling")->capture_default_str();
    train_cmd->add_option("--subsample", tr.subsample, "Train on a seeded subsample of this size");
    train_cmd->add_option("--keep-every", tr.keep_every, "Also save OUT.epochN every N epochs");
    train_cmd->add_flag("--progress", tr.progress, "Per-epoch status on stderr");
    tr.model.attach(train_cmd);
    tr.training.attach(train_cmd);
    train_cmd->callback([&] { action = [&] { return run_train(tr); }; });

    GuessArgs gu;
    auto* guess_cmd = app.add_subcommand("guess", "Generate guesses and count matches against targets");
    guess_cmd->add_option("--model", gu.model, "Checkpoint (default: $FLOWGUESS_MODEL)");
    guess_cmd->add_option("--targets", gu.targets, "Plaintext targets, or 'digest: sha256' file")->required();
    guess_cmd->add_option("--n", gu.n, "Number of guesses")->required();
    guess_cmd->add_option("--mode", gu.mode, "static | dynamic | dynamic-gs")->capture_default_str();
    guess_cmd->add_option("--alpha", gu.alpha, "Matches needed before the mixture takes over");
    guess_cmd->add_option("--sigma", gu.sigma, "Mixture component std-dev");
    guess_cmd->add_option("--gamma", gu.gamma, "Refresh rounds a component stays active");
    guess_cmd->add_flag("--no-penalty", gu.no_penalty, "Keep every matched component forever");
    guess_cmd->add_option("--gs-sigma", gu.gs_sigma, "Smoothing noise std-dev")->capture_default_str();
    guess_cmd->add_option("--gs-attempts", gu.gs_attempts, "Smoothing retries per collision")->capture_default_str();
    guess_cmd->add_option("--batch", gu.batch, "Guesses between prior refreshes")->capture_default_str();
    guess_cmd->add_option("--seed", gu.seed, "Sampling seed")->capture_default_str();
    guess_cmd->add_option("--workers", gu.workers, "Generation threads")->capture_default_str();
    guess_cmd->add_option("--report", gu.report, "Write the report here");
    guess_cmd->add_option("--matched-out", gu.matched_out, "Write matched passwords here");
    guess_cmd->add_flag("--quiet", gu.quiet, "Do not stream guesses to stdout");
    guess_cmd->add_flag("--progress", gu.progress, "Per-batch status on stderr");
    guess_cmd->add_flag("--report-timing", gu.timing, "Add wall time to the report");
    guess_cmd->callback([&] { action = [&] { return run_guess(gu); }; });

    SampleArgs sa;
    auto* sample_cmd = app.add_subcommand("sample", "Stream samples from the prior");
    sample_cmd->add_option("--model", sa.model, "Checkpoint (default: $FLOWGUESS_MODEL)");
    sample_cmd->add_option("--n", sa.n, "Number of samples")->required();
    sample_cmd->add_option("--seed", sa.seed, "Sampling seed")->capture_default_str();
    sample_cmd->add_option("--workers", sa.workers, "Generation threads")->capture_default_str();
    sample_cmd->callback([&] { action = [&] { return run_sample(sa); }; });

    InterpolateArgs ip;
    auto* interp_cmd = app.add_subcommand("interpolate", "Walk the latent line between two passwords");
    interp_cmd->add_option("--model", ip.model, "Checkpoint (default: $FLOWGUESS_MODEL)");
    interp_cmd->add_option("--start", ip.start, "Start password")->required();
    interp_cmd->add_option("--target", ip.target, "Target password")->required();
    interp_cmd->add_option("--steps", ip.steps, "Number of steps")->capture_default_str();
    interp_cmd->add_flag("--verbose", ip.verbose, "Prefix step index and edit distances");
    interp_cmd->callback([&] { action = [&] { return run_interpolate(ip); }; });

    NeighborhoodArgs nb;
    auto* nb_cmd = app.add_subcommand("neighborhood", "Sample around a password in latent space");
    nb_cmd->add_option("--model", nb.model, "Checkpoint (default: $FLOWGUESS_MODEL)");
    nb_cmd->add_option("--pivot", nb.pivot, "Pivot password")->required();
    nb_cmd->add_option("--sigma", nb.sigma, "Latent std-dev")->capture_default_str();
    nb_cmd->add_option("--n", nb.n, "Number of strings")->capture_default_str();
    nb_cmd->add_option("--seed", nb.seed, "Sampling seed")->capture_default_str();
    nb_cmd->add_flag("--unique", nb.unique, "Drop duplicates and the pivot");
    nb_cmd->callback([&] { action = [&] { return run_neighborhood(nb); }; });

    LogprobArgs lp;
    auto* lp_cmd = app.add_subcommand("logprob", "Exact log-density of encoded passwords");
    lp_cmd->add_option("--model", lp.model, "Checkpoint (default: $FLOWGUESS_MODEL)");
    lp_cmd->add_option("--password", lp.passwords, "Password (repeatable)")->required()->allow_extra_args(false);
    lp_cmd->callback([&] { action = [&] { return run_logprob(lp); }; });

    SplitArgs sp;
    auto* split_cmd = app.add_subcommand("split", "Seeded train/test split with a cleaned test side");
    split_cmd->add_option("--corpus", sp.corpus, "One password per line")->required();
    split_cmd->add_option("--train-out", sp.train_out, "Train partition output")->required();
    split_cmd->add_option("--test-out", sp.test_out, "Test partition output")->required();
    split_cmd->add_option("--fraction", sp.fraction, "Train fraction")->capture_default_str();
    split_cmd->add_option("--subsample", sp.subsample, "Keep this many train passwords");
    split_cmd->add_option("--seed", sp.seed, "Shuffle seed")->capture_default_str();
    split_cmd->add_option("--max-len", sp.max_len, "Drop longer passwords")->capture_default_str();
    split_cmd->callback([&] { action = [&] { return run_split(sp); }; });

    GenArgs gn;
    auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic template corpus");
    gen_cmd->add_option("--n", gn.n, "Number of passwords")->required();
    gen_cmd->add_option("--seed", gn.seed, "Generator seed")->capture_default_str();
    gen_cmd->add_option("--out", gn.out, "Output path (default: stdout)");
    gen_cmd->add_option("--weights", gn.weights, "Five template weights")->delimiter(',');
    gen_cmd->add_option("--max-len", gn.max_len, "Maximum password length")->capture_default_str();
    gen_cmd->callback([&] { action = [&] { return run_gen(gn); }; });

    AblateArgs ab;
    auto* ab_cmd = app.add_subcommand("ablate-masks", "Train one model per mask and compare static matches");
    ab_cmd->add_option("--train", ab.train, "Train partition")->required();
    ab_cmd->add_option("--test", ab.test, "Test partition")->required();
    ab_cmd->add_option("--masks", ab.masks, "Comma-separated mask list")->capture_default_str();
    ab_cmd->add_option("--n", ab.n, "Guesses per model")->capture_default_str();
    ab_cmd->add_option("--seed", ab.seed, "Model and training seed")->capture_default_str();
    ab_cmd->add_option("--sample-seed", ab.sample_seed, "Sampling seed")->capture_default_str();
    ab_cmd->add_option("--workers", ab.workers, "Generation threads")->capture_default_str();
    ab_cmd->add_option("--out", ab.out, "Table output (default: stdout)");
    ab_cmd->add_flag("--progress", ab.progress, "Status on stderr");
    ab.model.attach(ab_cmd);
    ab.training.attach(ab_cmd);
    ab_cmd->callback([&] { action = [&] { return run_ablate(ab); }; });

    InfoArgs in;
    auto* info_cmd = app.add_subcommand("info", "Print a checkpoint's configuration");
    info_cmd->add_option("--model", in.model, "Checkpoint (default: $FLOWGUESS_MODEL)");
    info_cmd->callback([&] { action = [&] { return run_info(in); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << '\n';
        return kExitUsage;
    }

    try {
        return action();
    } catch (const Error& e) {
        std::cout.flush();
        std::cerr << "error: " << error_name(e.code()) << ": " << one_line(e.what()) << '\n';
        return exit_status(e.error_class());
    } catch (const std::exception& e) {
        std::cout.flush();
        std::cerr << "error: internal: " << one_line(e.what()) << '\n';
        return kExitInternal;
    }
}
