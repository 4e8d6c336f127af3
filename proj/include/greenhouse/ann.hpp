#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "greenhouse/dataset.hpp"
#include "greenhouse/optim.hpp"

namespace greenhouse {

class Rng;

/// Single-hidden-layer ReLU network with a linear output unit:
///
///   y = w0 + sum_j v_j * relu(b_j + sum_i W_ji x_i)
///
/// All parameters live in one flat vector so the optimizer and the model
/// file can treat them uniformly. Layout, row-major:
///
///   [ W (hidden x input) | b (hidden) | v (hidden) | w0 ]
///
/// The same type doubles as the gradient container.
class AnnParams {
public:
    AnnParams() = default;
    /// Zero-filled parameters of the given shape. Throws UsageError on zero dims.
    AnnParams(std::size_t input_dim, std::size_t hidden_dim);

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t hidden_dim() const noexcept { return hidden_dim_; }
    static std::size_t parameter_count(std::size_t input_dim, std::size_t hidden_dim) noexcept {
        return hidden_dim * input_dim + 2 * hidden_dim + 1;
    }
    std::size_t size() const noexcept { return values_.size(); }

    double& weight(std::size_t hidden, std::size_t input) { return values_[hidden * input_dim_ + input]; }
    double weight(std::size_t hidden, std::size_t input) const { return values_[hidden * input_dim_ + input]; }
    double& hidden_bias(std::size_t j) { return values_[hidden_dim_ * input_dim_ + j]; }
    double hidden_bias(std::size_t j) const { return values_[hidden_dim_ * input_dim_ + j]; }
    double& output_weight(std::size_t j) { return values_[hidden_dim_ * (input_dim_ + 1) + j]; }
    double output_weight(std::size_t j) const { return values_[hidden_dim_ * (input_dim_ + 1) + j]; }
    double& output_bias() { return values_.back(); }
    double output_bias() const { return values_.back(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool all_finite() const;
    bool same_shape(const AnnParams& other) const noexcept {
        return input_dim_ == other.input_dim_ && hidden_dim_ == other.hidden_dim_;
    }

    bool operator==(const AnnParams&) const = default;

private:
    std::size_t input_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    std::vector<double> values_;
};

inline constexpr std::size_t kDefaultHidden = 4;

/// Glorot-uniform weights per layer, zero biases.
AnnParams ann_init(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed);

struct DropoutConfig {
    double rate = 0.2;

    void validate() const;
};

/// Per-example inverted-dropout mask over the hidden units.
struct DropoutMask {
    std::vector<bool> keep;
    double scale = 1.0;  // 1 / (1 - rate), applied to kept units

    static DropoutMask sample(std::size_t hidden_dim, const DropoutConfig& config, Rng& rng);
    static DropoutMask keep_all(std::size_t hidden_dim) { return {std::vector<bool>(hidden_dim, true), 1.0}; }
};

struct ForwardResult {
    double prediction = 0.0;
    std::vector<double> hidden;  // post-ReLU, post-mask activations
};

/// Plain forward pass when `mask` is null. Throws UsageError on a dimension mismatch.
ForwardResult ann_forward(const AnnParams& params, std::span<const double> x, const DropoutMask* mask = nullptr);
double ann_predict(const AnnParams& params, std::span<const double> x);

struct LossGrad {
    double loss = 0.0;
    AnnParams grad;
};

/// Absolute error |y - y_hat| of the masked forward pass and its exact
/// subgradient. Both sign(0) and relu'(0) are taken as 0.
LossGrad ann_loss_grad(const AnnParams& params, std::span<const double> x, double target,
                       const DropoutMask* mask = nullptr);

/// Adam applied to the flat parameter vector.
void adam_step(AnnParams& params, const AnnParams& grads, AdamState& state, const AdamConfig& config);

struct AnnTrainOptions {
    std::size_t epochs = 20;
    DropoutConfig dropout;
    AdamConfig adam;
    std::uint64_t seed = 0;
};

struct AnnResult {
    AnnParams params;
    TrainHistory history;
};

/// Mini-batch Adam with a fresh dropout mask per example. History metrics
/// are computed with dropout disabled. Throws UsageError on empty input or
/// when the pairs do not fit the network's input width.
AnnResult ann_train(const AnnParams& start, std::span<const WindowedPair> pairs, const AnnTrainOptions& options,
                    std::span<const WindowedPair> eval_set = {});

MetricsReport evaluate(const AnnParams& params, std::span<const WindowedPair> pairs);

}  // namespace greenhouse
