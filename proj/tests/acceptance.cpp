// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fail.

#include <sys/wait.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "flowguess/checkpoint.hpp"
#include "flowguess/errors.hpp"
#include "flowguess/harness.hpp"
#include "flowguess/latent_ops.hpp"
#include "flowguess/sampling.hpp"
#include "flowguess/training.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace flowguess;
using testing_support::fd_logdet;
using testing_support::perturb;
using testing_support::random_model;
using testing_support::rel_err;
using testing_support::uniform_matrix;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void log(const std::string& msg) { std::cerr << "  " << msg << std::endl; }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

constexpr std::uint64_t kDeskBudget = 100000;
constexpr std::array<std::uint64_t, 3> kSampleSeeds{11, 12, 13};

struct Options {
    fs::path workdir = "acceptance_work";
    int desk_epochs = 100;
    bool reuse = false;
    std::vector<int> only;
};

// Shared state for the desk-scale criteria: one corpus, one split, one model
// per mask kind trained with identical seeds.
class Desk {
public:
    explicit Desk(const Options& opt) : opt_(opt) {
        corpus_ = gen_synthetic_corpus(20000, 1);
        split_ = split_and_clean(corpus_, {0.8, std::size_t{8000}, 1});
        oracle_ = MembershipOracle::plaintext(split_.test);
        log(fmt("desk corpus: %zu train, %zu test", split_.train.size(), split_.test.size()));
    }

    const std::vector<std::string>& corpus() const { return corpus_; }
    const Split& split() const { return split_; }

    const FlowModel& model(const std::string& mask) {
        auto it = models_.find(mask);
        if (it != models_.end()) return it->second;
        const fs::path path = checkpoint_path(mask);
        if (opt_.reuse && fs::exists(path)) {
            log("reusing " + path.string());
            return models_.emplace(mask, load_checkpoint(path)).first->second;
        }
        FlowConfig fc;
        fc.mask = MaskSpec::parse(mask);
        FlowModel m = FlowModel::create(fc, Charset::canonical(), 1);
        TrainConfig tc;
        tc.epochs = opt_.desk_epochs;
        tc.seed = 1;
        Stopwatch sw;
        const TrainResult r = train(m, split_.train, tc, [&](const EpochStats& s, const FlowModel&) {
            if (s.epoch % 10 == 0) log(fmt("%s epoch %d loss %.4f (%.0f s)", mask.c_str(), s.epoch, s.mean_loss, sw.seconds()));
        });
        log(fmt("%s trained: initial %.4f, best %.4f at epoch %d, %.0f s", mask.c_str(), r.initial_loss, r.best_loss,
                r.best_epoch, sw.seconds()));
        save_checkpoint(m, path);
        return models_.emplace(mask, std::move(m)).first->second;
    }

    fs::path checkpoint_path(const std::string& mask) const {
        std::string name = mask;
        std::replace(name.begin(), name.end(), ':', '-');
        return opt_.workdir / ("desk-" + name + ".ckpt");
    }

    // Memoized: several criteria share the same run.
    const RunReport& run(const std::string& mask, SamplingMode mode, std::uint64_t seed, bool penalty = true) {
        const std::string key = mask + "/" + std::string(mode_name(mode)) + "/" + std::to_string(seed) +
                                (penalty ? "" : "/nophi");
        auto it = runs_.find(key);
        if (it != runs_.end()) return it->second;
        const FlowModel& m = model(mask);
        SamplingConfig sc;
        sc.mode = mode;
        sc.n_guesses = kDeskBudget;
        sc.seed = seed;
        sc.dynamic = default_dynamic_params(kDeskBudget);
        if (!penalty) sc.dynamic.gamma = kUnlimited;
        Stopwatch sw;
        RunReport r = dynamic_sample(m, oracle_, sc);
        log(fmt("%s: unique %llu matched %llu (%.0f s)", key.c_str(), static_cast<unsigned long long>(r.unique),
                static_cast<unsigned long long>(r.matched), sw.seconds()));
        return runs_.emplace(key, std::move(r)).first->second;
    }

private:
    Options opt_;
    std::vector<std::string> corpus_;
    Split split_;
    MembershipOracle oracle_ = MembershipOracle::plaintext({});
    std::map<std::string, FlowModel> models_;
    std::map<std::string, RunReport> runs_;
};

Outcome invertibility() {
    Stopwatch sw;
    FlowModel m = FlowModel::create(FlowConfig{}, Charset::canonical(), 101);
    // Larger perturbations of the full-width nets make the map expand by
    // e^25 or more, which no longer resembles a trained model.
    perturb(m, 0.005, 102);
    const Matrix x = uniform_matrix(1000, m.dim(), 103);
    const Matrix back = flow_inverse(m, flow_forward(m, x).z);
    const double err = (back - x).cwiseAbs().maxCoeff();
    const double t = sw.seconds();
    return {err < 1e-8 && t < 10.0, fmt("max |f^-1(f(x)) - x| = %.3g over 1000 vectors, %.1f s", err, t)};
}

Outcome jacobian() {
    Stopwatch sw;
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int dim = 2 + i % 5;
        const int layers = 2 + i % 4;
        const char* kinds[] = {"horizontal", "char-run:1", "char-run:2"};
        const MaskSpec mask = MaskSpec::parse(dim > 2 ? kinds[i % 3] : kinds[i % 2]);
        const FlowModel m = random_model(dim, layers, 16, 2, mask, 300 + i, 0.1);
        const Matrix x = uniform_matrix(1, dim, 400 + i);
        const double analytic = flow_forward(m, x).logdet(0);
        worst = std::max(worst, std::abs(analytic - fd_logdet(m, x.row(0).transpose())));
    }
    const double t = sw.seconds();
    return {worst < 1e-4 && t < 30.0, fmt("worst |analytic - FD| = %.3g over 50 models, %.1f s", worst, t)};
}

Outcome gradients() {
    Stopwatch sw;
    FlowModel m = random_model(4, 2, 8, 2, MaskSpec::parse("char-run:1"), 501, 0.3);
    const Matrix batch = uniform_matrix(8, 4, 502);
    std::vector<double> analytic;
    nll_loss_and_grads(m, batch).grads.for_each_array(
        [&](std::span<const double> s) { analytic.insert(analytic.end(), s.begin(), s.end()); });
    std::vector<double*> params;
    m.for_each_array([&](std::span<double> s) {
        for (double& v : s) params.push_back(&v);
    });
    const double h = 1e-5;
    std::size_t good = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = *params[i];
        *params[i] = keep + h;
        const double fp = -log_prob(m, batch).mean();
        *params[i] = keep - h;
        const double fm = -log_prob(m, batch).mean();
        *params[i] = keep;
        const double e = rel_err(analytic[i], (fp - fm) / (2.0 * h), 1e-4);
        worst = std::max(worst, e);
        if (e < 1e-5) ++good;
    }
    const double frac = static_cast<double>(good) / static_cast<double>(params.size());
    const double t = sw.seconds();
    return {frac >= 0.999 && worst < 1e-3 && t < 60.0,
            fmt("%zu/%zu parameters under 1e-5 (%.4f), worst %.3g, %.1f s", good, params.size(), frac, worst, t)};
}

Outcome loss_anchor(const Desk& desk) {
    FlowModel m = FlowModel::create(FlowConfig{}, Charset::canonical(), 7);
    TrainConfig tc;
    tc.epochs = 0;
    const TrainResult r = train(m, desk.split().train, tc);
    double expect = 0.0;
    const double log2pi = std::log(2.0 * std::numbers::pi);
    for (const auto& p : desk.split().train) {
        const DataVector x = encode_password(p, m.charset());
        expect += 0.5 * x.squaredNorm() + 0.5 * static_cast<double>(x.size()) * log2pi;
    }
    expect /= static_cast<double>(desk.split().train.size());
    const double pad = -log_prob(m, DataVector(DataVector::Zero(m.dim())));
    const double diff = std::abs(r.initial_loss - expect);
    const bool ok = diff < 1e-10 && std::abs(pad - 5.0 * log2pi) < 1e-10 && std::abs(pad - 9.189385) < 1e-6;
    return {ok, fmt("epoch-0 loss %.10f vs oracle %.10f (diff %.2g), all-pad %.6f", r.initial_loss, expect, diff, pad)};
}

Outcome desk_end_to_end(Desk& desk) {
    const RunReport& r = desk.run("char-run:1", SamplingMode::Static, kSampleSeeds[0]);
    return {r.matched >= 50, fmt("static matched %llu of %zu test passwords at 1e5 guesses (unique %llu)",
                                 static_cast<unsigned long long>(r.matched), desk.split().test.size(),
                                 static_cast<unsigned long long>(r.unique))};
}

// The ordering criteria compare match counts. When every run involved
// matched nothing they hold trivially, which says nothing about the
// strategies, so that case is reported as a failure.
constexpr const char* kNoSignal = "inconclusive, no run matched anything: ";

Outcome strategy_ordering(Desk& desk) {
    std::string detail;
    bool ok = true;
    std::uint64_t total = 0;
    for (std::uint64_t seed : kSampleSeeds) {
        const auto& s = desk.run("char-run:1", SamplingMode::Static, seed);
        const auto& d = desk.run("char-run:1", SamplingMode::Dynamic, seed);
        const auto& g = desk.run("char-run:1", SamplingMode::DynamicSmoothing, seed);
        const bool seed_ok = g.matched >= d.matched && d.matched >= s.matched && g.unique > d.unique;
        ok = ok && seed_ok;
        total += s.matched + d.matched + g.matched;
        detail += fmt("%sseed %llu: matched gs/dyn/static %llu/%llu/%llu, unique gs/dyn %llu/%llu",
                      detail.empty() ? "" : "; ", static_cast<unsigned long long>(seed),
                      static_cast<unsigned long long>(g.matched), static_cast<unsigned long long>(d.matched),
                      static_cast<unsigned long long>(s.matched), static_cast<unsigned long long>(g.unique),
                      static_cast<unsigned long long>(d.unique));
    }
    if (total == 0) return {false, kNoSignal + detail};
    return {ok, detail};
}

Outcome penalization(Desk& desk) {
    int wins = 0;
    std::uint64_t total = 0;
    std::string detail;
    for (std::uint64_t seed : kSampleSeeds) {
        const auto& with = desk.run("char-run:1", SamplingMode::Dynamic, seed);
        const auto& without = desk.run("char-run:1", SamplingMode::Dynamic, seed, false);
        if (with.matched >= without.matched) ++wins;
        total += with.matched + without.matched;
        detail += fmt("%sseed %llu: %llu vs %llu", detail.empty() ? "" : "; ", static_cast<unsigned long long>(seed),
                      static_cast<unsigned long long>(with.matched), static_cast<unsigned long long>(without.matched));
    }
    detail = fmt("phi wins %d/3 (", wins) + detail + ")";
    if (total == 0) return {false, kNoSignal + detail};
    return {wins >= 2, detail};
}

Outcome masking(Desk& desk) {
    const auto& c1 = desk.run("char-run:1", SamplingMode::Static, kSampleSeeds[0]);
    const auto& hz = desk.run("horizontal", SamplingMode::Static, kSampleSeeds[0]);
    const std::string detail = fmt("char-run:1 matched %llu, horizontal matched %llu",
                                   static_cast<unsigned long long>(c1.matched),
                                   static_cast<unsigned long long>(hz.matched));
    if (c1.matched + hz.matched == 0) return {false, kNoSignal + detail};
    return {c1.matched >= hz.matched, detail};
}

Outcome mixture_statistics() {
    // Component 0 is used up (gamma = 1) before the other two are added.
    DynamicSamplerState st({0, 1e-6, 1});
    st.add_match("spent", LatentPoint::Unit(2, 1) * 10.0);
    st.refresh();
    st.add_match("left", LatentPoint::Unit(2, 0) * -10.0);
    st.add_match("right", LatentPoint::Unit(2, 0) * 10.0);
    const MixturePrior prior = st.snapshot();
    Rng rng = derive_stream(901);
    const int n = 100000;
    std::array<int, 3> counts{};
    LatentPoint z(2);
    for (int i = 0; i < n; ++i) {
        prior.draw(rng, std::span<double>(z.data(), 2));
        if (z(1) > 5.0) ++counts[0];
        else if (z(0) < 0.0) ++counts[1];
        else ++counts[2];
    }
    const double bound = 3.0 * std::sqrt(n * 0.25);
    const bool ok = counts[0] == 0 && std::abs(counts[1] - n / 2.0) < bound && std::abs(counts[2] - n / 2.0) < bound;
    return {ok, fmt("counts %d/%d/%d over %d draws, 3-sigma band +/-%.0f", counts[0], counts[1], counts[2], n, bound)};
}

Outcome interpolation_endpoints(Desk& desk) {
    const FlowModel& m = desk.model("char-run:1");
    const auto& corpus = desk.corpus();
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
    std::uniform_int_distribution<int> steps(1, 20);
    int exact = 0;
    for (int i = 0; i < 100; ++i) {
        const std::string& a = corpus[pick(rng)];
        const std::string& b = corpus[pick(rng)];
        const auto path = interpolate(m, a, b, steps(rng));
        if (path.front() == a && path.back() == b) ++exact;
    }
    return {exact == 100, fmt("%d/100 pairs with exact endpoints", exact)};
}

Outcome checkpoint_round_trip(Desk& desk, const fs::path& workdir) {
    const FlowModel& m = desk.model("char-run:1");
    const fs::path first = workdir / "roundtrip-a.ckpt";
    const fs::path second = workdir / "roundtrip-b.ckpt";
    save_checkpoint(m, first);
    save_checkpoint(load_checkpoint(first), second);
    const std::string bytes = slurp(first);
    const bool identical = bytes == slurp(second);

    auto payload_start = [](const std::string& b) {
        std::uint64_t len = 0;
        for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(b[8 + i]);
        return static_cast<std::size_t>(16 + len);
    };
    auto detected = [](const std::string& b) {
        try {
            deserialize_checkpoint(b);
        } catch (const Error& e) {
            return e.code() == ErrorCode::CorruptPayload;
        }
        return false;
    };

    // Every payload bit of a small model, then a random sample of the desk model's.
    std::size_t flips = 0;
    std::size_t caught = 0;
    const std::string tiny = serialize_checkpoint(random_model(2, 2, 2, 1, MaskSpec::parse("char-run:1"), 1101));
    for (std::size_t byte = payload_start(tiny); byte < tiny.size(); ++byte) {
        for (int bit = 0; bit < 8; ++bit) {
            std::string b = tiny;
            b[byte] = static_cast<char>(b[byte] ^ (1 << bit));
            ++flips;
            caught += detected(b);
        }
    }
    std::mt19937_64 rng(1102);
    std::uniform_int_distribution<std::size_t> where(payload_start(bytes), bytes.size() - 1);
    std::string b = bytes;
    for (int i = 0; i < 20; ++i) {
        const std::size_t byte = where(rng);
        const int bit = static_cast<int>(rng() % 8);
        b[byte] = static_cast<char>(b[byte] ^ (1 << bit));
        ++flips;
        caught += detected(b);
        b[byte] = bytes[byte];
    }
    return {identical && caught == flips,
            fmt("save-load-save %s (%zu bytes); %zu/%zu payload bit flips detected",
                identical ? "byte-identical" : "DIFFERS", bytes.size(), caught, flips)};
}

int run_cli(const std::string& args) {
    const std::string cmd = "'" FLOWGUESS_CLI_PATH "' " + args + " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome cli_determinism(Desk& desk, const fs::path& workdir) {
    desk.model("char-run:1");
    const fs::path targets = workdir / "desk-test.txt";
    {
        std::ofstream f(targets);
        for (const auto& p : desk.split().test) f << p << '\n';
    }
    const std::string base = "guess --model '" + desk.checkpoint_path("char-run:1").string() + "' --targets '" +
                             targets.string() + "' --n 20000 --seed 3 --mode ";
    std::string detail;
    bool ok = true;
    for (const std::string mode : {"static", "dynamic", "dynamic-gs"}) {
        std::vector<std::string> reports;
        for (const std::string workers : {"1", "1", "4", "4"}) {
            const fs::path rep = workdir / ("report-" + mode + "-" + std::to_string(reports.size()) + ".txt");
            const int status = run_cli(base + mode + " --workers " + workers + " --report '" + rep.string() + "'");
            reports.push_back(status == 0 ? slurp(rep) : "exit " + std::to_string(status));
        }
        const bool same = !reports[0].empty() && reports[0].rfind("exit", 0) != 0 &&
                          std::all_of(reports.begin(), reports.end(), [&](const auto& r) { return r == reports[0]; });
        ok = ok && same;
        detail += (detail.empty() ? "" : ", ") + mode + (same ? " identical" : " DIFFERS");
    }
    return {ok, detail + " (2 runs each at 1 and 4 workers)"};
}

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    CLI::App app{"acceptance"};
    app.add_option("--workdir", opt.workdir, "Scratch directory for checkpoints and reports");
    app.add_option("--desk-epochs", opt.desk_epochs, "Training epochs for the desk-scale models");
    app.add_flag("--reuse", opt.reuse, "Load desk checkpoints from the workdir when present");
    app.add_option("--only", opt.only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(opt.workdir);

    std::optional<Desk> desk_storage;
    auto desk = [&]() -> Desk& {
        if (!desk_storage) desk_storage.emplace(opt);
        return *desk_storage;
    };

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"invertibility", [] { return invertibility(); }},
        {"jacobian oracle", [] { return jacobian(); }},
        {"gradient oracle", [] { return gradients(); }},
        {"loss anchor", [&] { return loss_anchor(desk()); }},
        {"desk end-to-end", [&] { return desk_end_to_end(desk()); }},
        {"strategy ordering", [&] { return strategy_ordering(desk()); }},
        {"penalization effect", [&] { return penalization(desk()); }},
        {"masking ablation", [&] { return masking(desk()); }},
        {"mixture statistics", [] { return mixture_statistics(); }},
        {"interpolation endpoints", [&] { return interpolation_endpoints(desk()); }},
        {"checkpoint round trip", [&] { return checkpoint_round_trip(desk(), opt.workdir); }},
        {"cli determinism", [&] { return cli_determinism(desk(), opt.workdir); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), id) == opt.only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << "criterion " << id << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << "  "
                  << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
