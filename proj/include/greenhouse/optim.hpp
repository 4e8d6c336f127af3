#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "greenhouse/dataset.hpp"

namespace greenhouse {

inline constexpr std::size_t kBatchSize = 32;

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// Moment accumulators shaped like the flat parameter vector.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update, elementwise; increments state.t.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    MetricsReport train;
    std::optional<MetricsReport> eval;
};

using TrainHistory = std::vector<EpochRecord>;

}  // namespace greenhouse
