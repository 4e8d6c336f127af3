#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "greenhouse/dataset.hpp"
#include "greenhouse/optim.hpp"

namespace greenhouse {

/// Linear regressor f(x) = w.x + b.
struct SvrModel {
    std::array<double, kLayers> w{};
    double b = 0.0;

    bool operator==(const SvrModel&) const = default;
};

double svr_predict(const SvrModel& model, const Moisture& x);

struct SvrResult {
    SvrModel model;
    TrainHistory history;
};

/// Mini-batch Adam on mean absolute error, starting from w = 0, b = 0.
/// Batches of kBatchSize, order reshuffled each epoch from `seed`.
/// Throws UsageError on an empty training set.
SvrResult svr_train(std::span<const WindowedPair> pairs, std::size_t epochs, const AdamConfig& adam,
                    std::uint64_t seed, std::span<const WindowedPair> eval_set = {});

MetricsReport evaluate(const SvrModel& model, std::span<const WindowedPair> pairs);

}  // namespace greenhouse
