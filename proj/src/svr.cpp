#include "greenhouse/svr.hpp"

#include <numeric>

#include "greenhouse/error.hpp"
#include "greenhouse/rng.hpp"

namespace greenhouse {

double svr_predict(const SvrModel& model, const Moisture& x) {
    double y = model.b;
    for (std::size_t i = 0; i < kLayers; ++i) y += model.w[i] * x[i];
    return y;
}

MetricsReport evaluate(const SvrModel& model, std::span<const WindowedPair> pairs) {
    std::vector<double> predictions;
    predictions.reserve(pairs.size());
    for (const auto& p : pairs) predictions.push_back(svr_predict(model, p.features));
    return evaluate_metrics(targets_of(pairs), predictions);
}

namespace {

constexpr std::size_t kSvrParams = kLayers + 1;

SvrModel from_flat(std::span<const double> flat) {
    SvrModel m;
    for (std::size_t i = 0; i < kLayers; ++i) m.w[i] = flat[i];
    m.b = flat[kLayers];
    return m;
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

SvrResult svr_train(std::span<const WindowedPair> pairs, std::size_t epochs, const AdamConfig& adam,
                    std::uint64_t seed, std::span<const WindowedPair> eval_set) {
    if (pairs.empty()) throw UsageError("svr_train: empty training set");
    adam.validate();

    std::array<double, kSvrParams> params{};
    AdamState state(kSvrParams);
    Rng rng(seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    SvrResult result;
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += kBatchSize) {
            const std::size_t end = std::min(start + kBatchSize, order.size());
            std::array<double, kSvrParams> grad{};
            const SvrModel current = from_flat(params);
            for (std::size_t k = start; k < end; ++k) {
                const auto& p = pairs[order[k]];
                // d|y - f(x)|/df = sign(f(x) - y); zero at an exact fit.
                const double g = sign(svr_predict(current, p.features) - p.target);
                for (std::size_t i = 0; i < kLayers; ++i) grad[i] += g * p.features[i];
                grad[kLayers] += g;
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (double& g : grad) g *= inv;
            adam_step(params, grad, state, adam);
        }
        const SvrModel current = from_flat(params);
        EpochRecord rec{epoch, evaluate(current, pairs), std::nullopt};
        if (!eval_set.empty()) rec.eval = evaluate(current, eval_set);
        result.history.push_back(rec);
    }
    result.model = from_flat(params);
    return result;
}

}  // namespace greenhouse
