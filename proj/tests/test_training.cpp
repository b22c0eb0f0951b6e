#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "flowguess/errors.hpp"
#include "flowguess/harness.hpp"
#include "flowguess/training.hpp"
#include "support.hpp"

using namespace flowguess;
using testing_support::random_model;
using testing_support::rel_err;
using testing_support::uniform_matrix;

namespace {

std::vector<double> flat_params(const FlowModel& m) {
    std::vector<double> out;
    m.for_each_array([&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
}

std::vector<double> flat_grads(const FlowGradients& g) {
    std::vector<double> out;
    g.for_each_array([&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
}

double mean_nll(const FlowModel& m, const Matrix& x) { return -log_prob(m, x).mean(); }

FlowModel small_model(std::uint64_t seed, int hidden = 16, int layers = 4) {
    FlowConfig c;
    c.hidden = hidden;
    c.layers = layers;
    return FlowModel::create(c, Charset::canonical(), seed);
}

}  // namespace

TEST_CASE("identity model loss on the all-pad batch") {
    const FlowModel m = small_model(1);
    const LossAndGrads lg = nll_loss_and_grads(m, Matrix::Zero(4, 10));
    CHECK(std::abs(lg.loss - 5.0 * std::log(2.0 * std::numbers::pi)) < 1e-12);
    CHECK(std::abs(lg.loss - 9.189385) < 1e-6);
    // z = 0 and every layer is the identity, so only the logdet term pulls on
    // the scale networks' output layers.
    const FlowGradients& g = lg.grads;
    for (const auto& l : g.layers) {
        CHECK(l.t_net.output.weight.isZero(0.0));
        CHECK(l.t_net.output.bias.isZero(0.0));
        CHECK_FALSE(l.s_net.output.bias.isZero(0.0));
    }
}

TEST_CASE("full-model gradients match central finite differences") {
    const double h = 1e-5;
    for (int trial = 0; trial < 3; ++trial) {
        FlowModel m = random_model(4, 2, 8, 2, MaskSpec::parse(trial == 1 ? "horizontal" : "char-run:1"),
                                   40 + trial, 0.3);
        const Matrix batch = uniform_matrix(8, 4, 50 + trial);
        const std::vector<double> analytic = flat_grads(nll_loss_and_grads(m, batch).grads);

        std::vector<double*> ptrs;
        m.for_each_array([&](std::span<double> s) {
            for (double& v : s) ptrs.push_back(&v);
        });
        REQUIRE(ptrs.size() == analytic.size());
        REQUIRE(ptrs.size() == m.parameter_count());
        std::size_t bad = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < ptrs.size(); ++i) {
            const double keep = *ptrs[i];
            *ptrs[i] = keep + h;
            const double fp = mean_nll(m, batch);
            *ptrs[i] = keep - h;
            const double fm = mean_nll(m, batch);
            *ptrs[i] = keep;
            const double e = rel_err(analytic[i], (fp - fm) / (2.0 * h), 1e-4);
            worst = std::max(worst, e);
            if (e >= 1e-5) ++bad;
        }
        CHECK(bad == 0);
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("duplicating the batch leaves loss and gradients unchanged") {
    const FlowModel m = random_model(10, 4, 16, 2, MaskSpec::parse("char-run:1"), 7, 0.1);
    const Matrix b = uniform_matrix(16, 10, 8);
    Matrix twice(32, 10);
    twice << b, b;
    const LossAndGrads a = nll_loss_and_grads(m, b);
    const LossAndGrads d = nll_loss_and_grads(m, twice);
    CHECK(a.loss == doctest::Approx(d.loss).epsilon(1e-14));
    const auto ga = flat_grads(a.grads);
    const auto gd = flat_grads(d.grads);
    for (std::size_t i = 0; i < ga.size(); ++i) REQUIRE(std::abs(ga[i] - gd[i]) <= 1e-12 * (1.0 + std::abs(ga[i])));
}

TEST_CASE("Adam first step is a signed learning-rate step") {
    TrainConfig c;
    std::vector<double> p{1.0, -2.0, 0.5, 3.0};
    const std::vector<double> g{0.3, -4.0, 1e-3, 0.0};
    AdamState s = AdamState::zeros(p.size());
    adam_update(p, g, s, c);
    CHECK(p[0] == doctest::Approx(1.0 - c.learning_rate).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(-2.0 + c.learning_rate).epsilon(1e-9));
    CHECK(p[2] == doctest::Approx(0.5 - c.learning_rate).epsilon(1e-7));
    CHECK(p[3] == 3.0);
    CHECK(s.step == 1);
}

TEST_CASE("Adam leaves parameters alone under zero gradients") {
    TrainConfig c;
    std::vector<double> p{1.0, -2.0};
    const std::vector<double> g{0.0, 0.0};
    AdamState s = AdamState::zeros(2);
    for (int i = 0; i < 100; ++i) adam_update(p, g, s, c);
    CHECK(p == std::vector<double>{1.0, -2.0});
}

TEST_CASE("Adam matches a hand-stepped scalar trace") {
    // f(theta) = 0.5 * a * (theta - c)^2. The oracle recomputes both moments
    // from the full gradient history as explicit weighted sums each step.
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    const double a = 3.0;
    const double c = -1.5;
    std::vector<double> theta{2.0};
    AdamState s = AdamState::zeros(1);

    double oracle = 2.0;
    std::vector<double> history;
    for (int t = 1; t <= 10; ++t) {
        const double g = a * (theta[0] - c);
        adam_update(theta, std::vector<double>{g}, s, cfg);

        history.push_back(a * (oracle - c));
        double m = 0.0;
        double v = 0.0;
        for (int i = 1; i <= t; ++i) {
            const double gi = history[static_cast<std::size_t>(i - 1)];
            m += (1.0 - cfg.adam_beta1) * std::pow(cfg.adam_beta1, t - i) * gi;
            v += (1.0 - cfg.adam_beta2) * std::pow(cfg.adam_beta2, t - i) * gi * gi;
        }
        const double m_hat = m / (1.0 - std::pow(cfg.adam_beta1, t));
        const double v_hat = v / (1.0 - std::pow(cfg.adam_beta2, t));
        oracle -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
        REQUIRE(std::abs(theta[0] - oracle) < 1e-12);
    }
}

TEST_CASE("adam_step walks the whole model in parameter order") {
    FlowModel m = random_model(4, 2, 8, 1, MaskSpec::parse("char-run:1"), 3, 0.1);
    const auto before = flat_params(m);
    FlowGradients g = FlowGradients::zeros_like(m);
    std::size_t k = 0;
    g.for_each_array([&](std::span<const double> s) { k += s.size(); });
    REQUIRE(k == m.parameter_count());
    // Gradient of +1 on every parameter: each one moves by -lr on step one.
    for (auto& l : g.layers) {
        l.s_net.for_each_array([](std::span<double> s) { std::fill(s.begin(), s.end(), 1.0); });
        l.t_net.for_each_array([](std::span<double> s) { std::fill(s.begin(), s.end(), 1.0); });
    }
    TrainConfig c;
    AdamState s = AdamState::zeros(m.parameter_count());
    adam_step(m, g, s, c);
    const auto after = flat_params(m);
    for (std::size_t i = 0; i < after.size(); ++i) REQUIRE(after[i] == doctest::Approx(before[i] - c.learning_rate));
}

TEST_CASE("zero epochs leave the model unchanged") {
    FlowModel m = small_model(5);
    const auto before = flat_params(m);
    TrainConfig c;
    c.epochs = 0;
    const TrainResult r = train(m, std::vector<std::string>{"abc", "hello1"}, c);
    CHECK(r.history.empty());
    CHECK(r.best_epoch == 0);
    CHECK(flat_params(m) == before);
}

TEST_CASE("pre-training loss equals the prior NLL of the encoded corpus") {
    const auto corpus = gen_synthetic_corpus(500, 3);
    FlowModel m = small_model(6);
    TrainConfig c;
    c.epochs = 0;
    const TrainResult r = train(m, corpus, c);
    double expect = 0.0;
    for (const auto& p : corpus) {
        const DataVector x = encode_password(p, m.charset());
        double sq = 0.0;
        for (double v : x) sq += v * v;
        expect += 0.5 * sq + 5.0 * std::log(2.0 * std::numbers::pi);
    }
    expect /= double(corpus.size());
    CHECK(std::abs(r.initial_loss - expect) < 1e-10);
}

TEST_CASE("training is deterministic") {
    const auto corpus = gen_synthetic_corpus(300, 4);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 64;
    c.seed = 9;
    FlowModel a = small_model(10, 8);
    FlowModel b = small_model(10, 8);
    const TrainResult ra = train(a, corpus, c);
    const TrainResult rb = train(b, corpus, c);
    CHECK(ra.history == rb.history);
    CHECK(flat_params(a) == flat_params(b));
    CHECK(a.info().loss_history == ra.history);
}

TEST_CASE("training lowers the loss and keeps the best epoch") {
    const auto corpus = gen_synthetic_corpus(1000, 5);
    FlowModel m = small_model(11, 32, 6);
    TrainConfig c;
    c.epochs = 50;
    c.batch_size = 128;
    c.seed = 1;
    std::vector<int> seen;
    const TrainResult r = train(m, corpus, c, [&](const EpochStats& s, const FlowModel&) { seen.push_back(s.epoch); });
    REQUIRE(r.history.size() == 50);
    CHECK(seen.size() == 50);
    CHECK(r.history.back() < r.initial_loss - 1.0);
    CHECK(r.best_loss == *std::min_element(r.history.begin(), r.history.end()));
    CHECK(r.best_loss == r.history[static_cast<std::size_t>(r.best_epoch - 1)]);
    MESSAGE("initial " << r.initial_loss << " final " << r.history.back() << " best " << r.best_loss);
}

TEST_CASE("divergence is reported and the model restored") {
    FlowModel m = small_model(12, 8);
    const auto before = flat_params(m);
    Matrix data = uniform_matrix(16, 10, 13);
    data(3, 2) = 1e200;
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 16;
    try {
        train(m, data, c);
        FAIL("expected NonFiniteLoss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteLoss);
        CHECK(e.error_class() == ErrorClass::Numeric);
    }
    CHECK(flat_params(m) == before);
}

TEST_CASE("configuration validation") {
    TrainConfig c;
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.learning_rate = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.grad_clip_norm = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);

    FlowModel m = small_model(14, 8);
    c = {};
    c.epochs = 1;
    c.dequant_jitter = 0.5 / 96.0;
    CHECK_THROWS_AS(train(m, std::vector<std::string>{"abc"}, c), Error);
    c.dequant_jitter = 0.4 / 96.0;
    CHECK_NOTHROW(train(m, std::vector<std::string>{"abc"}, c));
    CHECK_THROWS_AS(train(m, std::vector<std::string>{}, c), Error);
}

TEST_CASE("gradient clipping bounds the update direction") {
    const auto corpus = gen_synthetic_corpus(200, 15);
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 50;
    c.grad_clip_norm = 1.0;
    FlowModel m = small_model(16, 8);
    const TrainResult r = train(m, corpus, c);
    CHECK(r.history.size() == 2);
    CHECK(std::isfinite(r.best_loss));
}
