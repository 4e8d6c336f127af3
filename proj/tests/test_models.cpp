#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "greenhouse/ann.hpp"
#include "greenhouse/error.hpp"
#include "greenhouse/model_io.hpp"
#include "greenhouse/rng.hpp"
#include "greenhouse/svr.hpp"

using namespace greenhouse;

namespace {

std::vector<WindowedPair> linear_pairs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<WindowedPair> pairs(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double& x : pairs[i].features) x = rng.uniform();
        const auto& f = pairs[i].features;
        pairs[i].target = 0.1 + 0.2 * f[0] - 0.1 * f[1] + 0.3 * f[2] + 0.4 * f[3];
        pairs[i].origin_index = i;
    }
    return pairs;
}

AnnParams random_params(std::size_t in, std::size_t hidden, Rng& rng) {
    AnnParams p(in, hidden);
    for (double& v : p.values()) v = rng.uniform(-1.0, 1.0);
    return p;
}

}  // namespace

TEST_CASE("adam step matches a hand-rolled reference") {
    const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
    std::vector<double> params{0.5, -0.25, 1.0};
    AdamState state(3);
    std::vector<double> ref = params, m(3, 0.0), v(3, 0.0);
    const std::vector<std::vector<double>> grads{{0.1, -0.2, 0.0}, {0.3, 0.1, -1.0}, {-0.05, 0.4, 2.0}};
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const auto& g = grads[t - 1];
        for (std::size_t i = 0; i < 3; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mh = m[i] / (1.0 - std::pow(0.9, static_cast<double>(t)));
            const double vh = v[i] / (1.0 - std::pow(0.999, static_cast<double>(t)));
            ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
        adam_step(params, g, state, cfg);
        CHECK(state.t == t);
        for (std::size_t i = 0; i < 3; ++i) CHECK(params[i] == doctest::Approx(ref[i]).epsilon(1e-14));
    }
    // First step moves each parameter with a nonzero gradient by about lr.
    std::vector<double> fresh{0.0};
    AdamState s1(1);
    adam_step(fresh, std::vector<double>{123.0}, s1, cfg);
    CHECK(fresh[0] == doctest::Approx(-0.01).epsilon(1e-6));

    AdamConfig bad;
    bad.beta1 = 1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("parameter layout") {
    CHECK(AnnParams::parameter_count(4, 4) == 25);
    AnnParams p(3, 2);
    CHECK(p.size() == AnnParams::parameter_count(3, 2));
    p.weight(1, 2) = 1.0;
    p.hidden_bias(0) = 2.0;
    p.output_weight(1) = 3.0;
    p.output_bias() = 4.0;
    CHECK(p.values()[1 * 3 + 2] == 1.0);
    CHECK(p.values()[6] == 2.0);
    CHECK(p.values()[9] == 3.0);
    CHECK(p.values()[10] == 4.0);
    CHECK_THROWS_AS(AnnParams(0, 4), UsageError);
}

TEST_CASE("forward pass by hand") {
    AnnParams p(2, 2);
    p.weight(0, 0) = 1.0;
    p.weight(0, 1) = -1.0;
    p.weight(1, 0) = 0.5;
    p.weight(1, 1) = 0.5;
    p.hidden_bias(0) = 0.1;
    p.hidden_bias(1) = -2.0;
    p.output_weight(0) = 2.0;
    p.output_weight(1) = 7.0;
    p.output_bias() = 0.25;
    const std::vector<double> x{0.6, 0.2};
    // h0 = relu(0.1 + 0.4) = 0.5, h1 = relu(-2 + 0.4) = 0
    CHECK(ann_predict(p, x) == doctest::Approx(0.25 + 2.0 * 0.5));
    const DropoutMask drop_first{{false, true}, 2.0};
    CHECK(ann_forward(p, x, &drop_first).prediction == doctest::Approx(0.25));
    const DropoutMask keep{{true, true}, 2.0};
    CHECK(ann_forward(p, x, &keep).prediction == doctest::Approx(0.25 + 2.0 * 2.0 * 0.5));
    const std::vector<double> short_x{0.1};
    CHECK_THROWS_AS(ann_predict(p, short_x), UsageError);
}

TEST_CASE("analytic gradients match central differences away from kinks") {
    Rng rng(2024);
    const double h = 1e-6;
    int checked = 0;
    while (checked < 100) {
        const std::size_t in = 1 + rng.below(5);
        const std::size_t hidden = 1 + rng.below(6);
        AnnParams p = random_params(in, hidden, rng);
        std::vector<double> x(in);
        for (double& v : x) v = rng.uniform();
        const double target = rng.uniform();

        // Skip cases within reach of a ReLU or |.| kink.
        bool near_kink = false;
        for (std::size_t j = 0; j < hidden; ++j) {
            double pre = p.hidden_bias(j);
            for (std::size_t i = 0; i < in; ++i) pre += p.weight(j, i) * x[i];
            near_kink |= std::fabs(pre) < 1e-3;
        }
        near_kink |= std::fabs(ann_predict(p, x) - target) < 1e-3;
        if (near_kink) continue;

        const LossGrad lg = ann_loss_grad(p, x, target);
        double diff2 = 0.0, norm2 = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            AnnParams plus = p, minus = p;
            plus.values()[k] += h;
            minus.values()[k] -= h;
            const double num = (std::fabs(target - ann_predict(plus, x)) - std::fabs(target - ann_predict(minus, x))) /
                               (2.0 * h);
            diff2 += (num - lg.grad.values()[k]) * (num - lg.grad.values()[k]);
            norm2 += num * num + lg.grad.values()[k] * lg.grad.values()[k];
        }
        CHECK(lg.loss == doctest::Approx(std::fabs(target - ann_predict(p, x))));
        CHECK(std::sqrt(diff2) <= 1e-5 * std::max(std::sqrt(norm2), 1e-12));
        ++checked;
    }
}

TEST_CASE("gradients under a dropout mask match central differences") {
    Rng rng(77);
    AnnParams p = random_params(4, 4, rng);
    const std::vector<double> x{0.3, 0.7, 0.2, 0.9};
    const DropoutMask mask{{true, false, true, true}, 1.25};
    const double target = 5.0;  // far from the prediction
    const LossGrad lg = ann_loss_grad(p, x, target, &mask);
    for (std::size_t k = 0; k < p.size(); ++k) {
        AnnParams plus = p, minus = p;
        plus.values()[k] += 1e-6;
        minus.values()[k] -= 1e-6;
        const double num = (std::fabs(target - ann_forward(plus, x, &mask).prediction) -
                            std::fabs(target - ann_forward(minus, x, &mask).prediction)) /
                           2e-6;
        CHECK(lg.grad.values()[k] == doctest::Approx(num).epsilon(1e-6));
    }
    // Dropped unit 1 gets no gradient on its incoming weights or output weight.
    for (std::size_t i = 0; i < 4; ++i) CHECK(lg.grad.weight(1, i) == 0.0);
    CHECK(lg.grad.output_weight(1) == 0.0);
}

TEST_CASE("inverted dropout preserves the expected activation") {
    const DropoutConfig cfg{0.2};
    Rng rng(8);
    const std::size_t hidden = 8, draws = 50000;
    std::vector<double> mean(hidden, 0.0);
    double kept = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        const DropoutMask m = DropoutMask::sample(hidden, cfg, rng);
        CHECK(m.scale == doctest::Approx(1.25));
        for (std::size_t j = 0; j < hidden; ++j) {
            mean[j] += m.keep[j] ? m.scale : 0.0;
            kept += m.keep[j] ? 1.0 : 0.0;
        }
    }
    for (double& v : mean) CHECK(v / static_cast<double>(draws) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(kept / static_cast<double>(draws * hidden) == doctest::Approx(0.8).epsilon(0.01));
    CHECK_THROWS_AS(DropoutConfig{1.0}.validate(), UsageError);
    CHECK_THROWS_AS(DropoutConfig{-0.1}.validate(), UsageError);
}

TEST_CASE("glorot initialisation statistics") {
    const double w_limit = std::sqrt(6.0 / 8.0), v_limit = std::sqrt(6.0 / 5.0);
    double w_sum = 0, w_sq = 0, v_sq = 0;
    std::size_t w_n = 0, v_n = 0;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const AnnParams p = ann_init(4, 4, seed);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(p.hidden_bias(j) == 0.0);
            const double v = p.output_weight(j);
            CHECK(std::fabs(v) <= v_limit);
            v_sq += v * v;
            ++v_n;
            for (std::size_t i = 0; i < 4; ++i) {
                const double w = p.weight(j, i);
                CHECK(std::fabs(w) <= w_limit);
                w_sum += w;
                w_sq += w * w;
                ++w_n;
            }
        }
        CHECK(p.output_bias() == 0.0);
    }
    CHECK(std::fabs(w_sum / static_cast<double>(w_n)) < 0.01);
    CHECK(w_sq / static_cast<double>(w_n) == doctest::Approx(w_limit * w_limit / 3.0).epsilon(0.03));
    CHECK(v_sq / static_cast<double>(v_n) == doctest::Approx(v_limit * v_limit / 3.0).epsilon(0.05));
    CHECK(ann_init(4, 4, 5) == ann_init(4, 4, 5));
    CHECK_FALSE(ann_init(4, 4, 5) == ann_init(4, 4, 6));
}

TEST_CASE("ann training is deterministic and reduces error") {
    const auto pairs = linear_pairs(512, 3);
    AnnTrainOptions opts;
    opts.epochs = 10;
    opts.seed = 4;
    opts.adam.learning_rate = 0.01;
    opts.dropout.rate = 0.0;
    const AnnParams start = ann_init(4, 8, 4);
    const AnnResult a = ann_train(start, pairs, opts, pairs);
    const AnnResult b = ann_train(start, pairs, opts, pairs);
    CHECK(a.params == b.params);
    REQUIRE(a.history.size() == 10);
    CHECK(a.history.front().epoch == 1);
    CHECK(a.history.back().eval.has_value());
    CHECK(evaluate(a.params, pairs).mse < evaluate(start, pairs).mse);
    CHECK_THROWS_AS(ann_train(ann_init(5, 4, 1), pairs, opts), UsageError);
    CHECK_THROWS_AS(ann_train(start, std::span<const WindowedPair>{}, opts), UsageError);
}

TEST_CASE("svr fits a noise-free linear target") {
    const auto pairs = linear_pairs(2000, 6);
    AdamConfig adam;
    adam.learning_rate = 0.01;
    const SvrResult r = svr_train(pairs, 60, adam, 1, pairs);
    CHECK(evaluate(r.model, pairs).mse < 1e-4);
    CHECK(r.model.w[3] == doctest::Approx(0.4).epsilon(0.1));
    CHECK(svr_train(pairs, 60, adam, 1).model == r.model);
    CHECK(r.history.size() == 60);
    CHECK_THROWS_AS(svr_train({}, 1, adam, 1), UsageError);

    SvrModel m;
    m.w = {1, 2, 3, 4};
    m.b = 0.5;
    CHECK(svr_predict(m, {0.1, 0.1, 0.1, 0.1}) == doctest::Approx(1.5));
}

TEST_CASE("model files round-trip bit-exactly") {
    Rng rng(9);
    const AnnParams ann = random_params(5, 7, rng);
    const ModelMetadata meta{"Soil2", 42, 20};
    const StoredModel back = load_model_text(save_model_text(ann, meta));
    CHECK(std::get<AnnParams>(back.model) == ann);
    CHECK(back.metadata == meta);

    SvrModel svr;
    svr.w = {0.1, 1.0 / 3.0, -2.5e-17, 7.0};
    svr.b = std::nextafter(1.0, 2.0);
    const StoredModel sb = load_model_text(save_model_text(svr, {"Bed", 1, 3}));
    CHECK(std::get<SvrModel>(sb.model) == svr);
    CHECK(save_model_text(sb.model, sb.metadata) == save_model_text(svr, {"Bed", 1, 3}));
}

TEST_CASE("broken model files are rejected") {
    const std::string good = save_model_text(ann_init(4, 4, 1), {"Soil1", 1, 20});
    CHECK_THROWS_AS(load_model_text(""), FormatError);
    CHECK_THROWS_AS(load_model_text("something else\n"), FormatError);

    std::string truncated = good.substr(0, good.size() / 2);
    CHECK_THROWS_AS(load_model_text(truncated), FormatError);

    std::string kind = good;
    kind.replace(kind.find("kind ann"), 8, "kind rbf");
    CHECK_THROWS_AS(load_model_text(kind), FormatError);

    std::string count = good;
    count.replace(count.find("params 25"), 9, "params 24");
    CHECK_THROWS_AS(load_model_text(count), FormatError);

    std::string svr = save_model_text(SvrModel{}, {"Soil1", 1, 20});
    svr.replace(svr.find("input_dim 4"), 11, "input_dim 5");
    CHECK_THROWS_AS(load_model_text(svr), FormatError);

    CHECK_THROWS_AS(load_model_file("/nonexistent/model.txt"), FormatError);
}

TEST_CASE("predict dispatches on the model kind") {
    const Moisture x{0.2, 0.4, 0.6, 0.8};
    SvrModel s;
    s.w = {1, 0, 0, 0};
    CHECK(predict(AnyModel{s}, x) == doctest::Approx(0.2));
    const AnnParams a = ann_init(4, 4, 3);
    CHECK(predict(AnyModel{a}, x) == ann_predict(a, x));
}
