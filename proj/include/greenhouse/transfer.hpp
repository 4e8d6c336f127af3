#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "greenhouse/ann.hpp"

namespace greenhouse {

/// Convergence speed of one training run, measured as the change in
/// training loss (sum of absolute errors) from one epoch to the next.
struct ConvergenceReport {
    /// Eval metrics of the starting parameters, before any epoch.
    MetricsReport start_eval;
    /// loss[e] - loss[e-1] for e = 2..epochs.
    std::vector<double> loss_deltas;
    /// Smallest epoch (0 = the starting point) whose eval MSE is at or
    /// below the threshold; empty when never reached.
    std::optional<std::size_t> epochs_to_threshold;
    double threshold = 0.05;
};

ConvergenceReport convergence_report(const MetricsReport& start_eval, const TrainHistory& history,
                                     double mse_threshold);

struct FineTuneResult {
    AnnParams params;
    TrainHistory history;
    ConvergenceReport report;
};

/// Continues training every layer of `pretrained` on pairs from the new
/// domain. Works equally for a freshly initialised network, which is how
/// the from-scratch comparison run is produced. Throws UsageError when the
/// network's input width does not match the pairs or eval_set is empty.
FineTuneResult fine_tune(const AnnParams& pretrained, std::span<const WindowedPair> new_pairs,
                         const AnnTrainOptions& options, std::span<const WindowedPair> eval_set,
                         double mse_threshold = 0.05);

enum class SweepMetric { SumAbsError, Mse };

double metric_value(const MetricsReport& m, SweepMetric metric);

struct SweepRow {
    std::size_t training_size = 0;
    MetricsReport test;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double baseline = std::numeric_limits<double>::infinity();
    SweepMetric metric = SweepMetric::SumAbsError;
    /// First training size whose test error is at or below the baseline.
    std::optional<std::size_t> crossing_size;
};

struct SweepOptions {
    std::size_t step = 50;
    std::size_t max_size = 0;  // 0 = whole pool
    AnnTrainOptions train;     // train.seed is the base seed
    SweepMetric metric = SweepMetric::SumAbsError;
    std::size_t hidden_dim = kDefaultHidden;
    /// When set, every row fine-tunes from these parameters instead of a
    /// fresh network (the transfer side of the comparison).
    std::optional<AnnParams> start;
    /// Stop after the first crossing row.
    bool stop_at_crossing = false;
};

/// Seed used for the row of a given training size.
std::uint64_t sweep_row_seed(std::uint64_t base_seed, std::size_t training_size);

/// Trains on the first `size` pool pairs for size = step, 2*step, ... up to
/// max_size and evaluates each model on test_set. Throws UsageError on an
/// empty pool, step == 0, pool smaller than step or empty test_set.
SweepReport sample_efficiency_sweep(double baseline_error, std::span<const WindowedPair> pool,
                                    std::span<const WindowedPair> test_set, const SweepOptions& options);

/// Tab-separated tables; one row per record.
void write_history_tsv(std::ostream& out, const TrainHistory& history, bool plot_scale = false);
void write_convergence_tsv(std::ostream& out, const ConvergenceReport& report);
void write_sweep_tsv(std::ostream& out, const SweepReport& report);

}  // namespace greenhouse
